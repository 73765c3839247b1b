#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wsi/config.hpp"
#include "wsi/kernels.hpp"
#include "wsi/tiling.hpp"

namespace wsi {

struct SegMap {
  Mask map;
  double positive_fraction = 0.0;  // positives / pixel count, exactly
};

// Per-pixel logistic model; a pixel is positive iff its logit is >= 0 (probability >= 0.5).
struct Segmenter {
  kernels::RoiWeights weights;
  bool operator==(const Segmenter& o) const { return weights.w == o.weights.w && weights.bias == o.weights.bias; }
};

// Planar per-pixel inputs: r, g, b in [0, 1] and local contrast
// min(1, 4 * |lum - mean3x3(lum)|) with normalized luminance.
struct RoiPlanes {
  std::vector<float> r, g, b, contrast;
};
RoiPlanes roi_planes(const RgbImage& pixels);

SegMap segment(const Tile& tile, const Segmenter& segmenter);

struct ROISelection {
  std::string slide_id;
  std::vector<std::size_t> selected;  // indices into the slide's row-major tile list
};

// Tile i is selected iff segmaps[i].positive_fraction >= theta.
ROISelection select(std::span<const Tile> tiles, std::span<const SegMap> segmaps, double theta);

struct LabeledTile {
  const Tile* tile;
  Mask roi;  // ground-truth lesion pixels, tile-sized
};

// Weighted logistic regression (Newton / IRLS with an L2 ridge) on pixels sampled
// from each tile, stratified by label and reweighted to the tile's label counts.
Segmenter train_segmenter(std::span<const LabeledTile> samples, const RoiConfig& cfg, std::uint64_t seed);

void save_segmenter(const Segmenter& s, const std::filesystem::path& path);
Segmenter load_segmenter(const std::filesystem::path& path);
std::string format_segmenter(const Segmenter& s);
Segmenter parse_segmenter(std::string_view text, const std::string& source = "<segmenter>");

}  // namespace wsi
