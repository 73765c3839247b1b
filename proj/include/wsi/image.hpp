#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace wsi {

// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(std::size_t(h) * w * 3, fill) {}

  std::size_t pixels() const { return std::size_t(height) * width; }
  bool empty() const { return height == 0 || width == 0; }
  std::uint8_t* px(int row, int col) { return data.data() + (std::size_t(row) * width + col) * 3; }
  const std::uint8_t* px(int row, int col) const { return data.data() + (std::size_t(row) * width + col) * 3; }
  bool operator==(const RgbImage&) const = default;
};

// Binary raster stored one byte per pixel (0 or 1).
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(std::size_t(h) * w, fill) {}

  std::size_t pixels() const { return std::size_t(height) * width; }
  std::uint8_t& at(int row, int col) { return data[std::size_t(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return data[std::size_t(row) * width + col]; }
  std::size_t count() const;
  bool operator==(const Mask&) const = default;
};

// Binary PPM (P6, maxval 255).
void write_ppm(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255); mask pixels are written as 0/255 and read as value > 127.
void write_pgm(const Mask& mask, const std::filesystem::path& path);
Mask read_pgm(const std::filesystem::path& path);

}  // namespace wsi
