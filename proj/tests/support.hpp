#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "wsi/image.hpp"
#include "wsi/tiling.hpp"

namespace wsi::test {

inline RgbImage solid(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img(h, w);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    img.data[3 * i] = r;
    img.data[3 * i + 1] = g;
    img.data[3 * i + 2] = b;
  }
  return img;
}

inline RgbImage noise_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RgbImage img(h, w);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

inline Tile whole_tile(RgbImage pixels, std::uint8_t tissue = 1) {
  Tile t;
  t.slide_id = "t";
  t.tissue = Mask(pixels.height, pixels.width, tissue);
  t.tissue_fraction = tissue ? 1.0 : 0.0;
  t.pixels = std::move(pixels);
  return t;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("wsi_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace wsi::test
