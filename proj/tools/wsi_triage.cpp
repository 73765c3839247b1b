#include <iostream>

#include "wsi/cli.hpp"

int main(int argc, char** argv) { return wsi::cli::run(argc, argv, std::cout, std::cerr); }
