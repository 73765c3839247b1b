#pragma once

#include <iosfwd>

namespace wsi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Entry point of the wsi_triage tool. 0 on success, 1 on usage or configuration
// errors, 2 on missing or malformed data.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wsi::cli
