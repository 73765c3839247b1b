#pragma once

#include <string>
#include <vector>

#include "wsi/config.hpp"
#include "wsi/image.hpp"

namespace wsi {

using TissueMask = Mask;

struct Tile {
  std::string slide_id;
  int row = 0;  // origin, a multiple of the tile size
  int col = 0;
  RgbImage pixels;
  Mask tissue;  // tissue pixels within the tile, from the slide's TissueMask
  double tissue_fraction = 0.0;
};

// Pixel is tissue iff saturation >= s_min or normalized luminance <= l_max.
TissueMask segment_tissue(const RgbImage& raster, const TilingConfig& cfg = {});

// Non-overlapping grid tiles in row-major order. A cell becomes a tile iff its tissue
// fraction is >= cfg.min_tissue_fraction; partial cells at the right/bottom edges are dropped.
std::vector<Tile> tile(const RgbImage& raster, const TissueMask& mask, const TilingConfig& cfg = {},
                       const std::string& slide_id = {});

}  // namespace wsi
