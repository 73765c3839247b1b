#include "wsi/tiling.hpp"

#include <cstring>

#include "wsi/error.hpp"
#include "wsi/kernels.hpp"

namespace wsi {

TissueMask segment_tissue(const RgbImage& raster, const TilingConfig& cfg) {
  if (raster.empty()) throw InvalidInput("segment_tissue: empty raster");
  TissueMask mask(raster.height, raster.width);
  kernels::active().tissue_mask(raster.data.data(), raster.pixels(), cfg.s_min, cfg.l_max, mask.data.data());
  return mask;
}

std::vector<Tile> tile(const RgbImage& raster, const TissueMask& mask, const TilingConfig& cfg,
                       const std::string& slide_id) {
  if (mask.height != raster.height || mask.width != raster.width)
    throw InvalidInput("tile: mask shape differs from raster shape");
  const int ts = cfg.tile_px;
  if (ts < 1) throw InvalidInput("tile: tile size must be positive");
  const double area = double(ts) * ts;
  std::vector<Tile> tiles;
  for (int r0 = 0; r0 + ts <= raster.height; r0 += ts) {
    for (int c0 = 0; c0 + ts <= raster.width; c0 += ts) {
      std::size_t count = 0;
      for (int y = r0; y < r0 + ts; ++y) {
        const auto* row = mask.data.data() + std::size_t(y) * mask.width + c0;
        for (int x = 0; x < ts; ++x) count += row[x] != 0;
      }
      const double fraction = double(count) / area;
      if (fraction < cfg.min_tissue_fraction) continue;
      Tile t;
      t.slide_id = slide_id;
      t.row = r0;
      t.col = c0;
      t.tissue_fraction = fraction;
      t.pixels = RgbImage(ts, ts);
      t.tissue = Mask(ts, ts);
      for (int y = 0; y < ts; ++y) {
        std::memcpy(t.pixels.px(y, 0), raster.px(r0 + y, c0), std::size_t(ts) * 3);
        std::memcpy(&t.tissue.at(y, 0), &mask.data[std::size_t(r0 + y) * mask.width + c0], std::size_t(ts));
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

}  // namespace wsi
