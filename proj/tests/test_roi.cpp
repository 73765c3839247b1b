#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "wsi/error.hpp"
#include "wsi/roi.hpp"
#include "wsi/synth.hpp"

using namespace wsi;

namespace {

struct SlideTiles {
  synth::SynthSlide slide;
  std::vector<Tile> tiles;
  std::vector<Mask> truth;
};

SlideTiles slide_tiles(ClassLabel cls, std::uint64_t seed) {
  auto lab = synth::preset_lab("reference");
  lab.artifact_rates = {};
  SlideTiles st{synth::generate_slide(cls, lab, seed), {}, {}};
  st.tiles = tile(st.slide.raster, segment_tissue(st.slide.raster), {}, "s");
  for (const auto& t : st.tiles) {
    Mask m(128, 128);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) m.at(y, x) = st.slide.roi_mask.at(t.row + y, t.col + x);
    st.truth.push_back(std::move(m));
  }
  return st;
}

const Segmenter& trained() {
  static const Segmenter seg = [] {
    std::vector<SlideTiles> slides;
    for (std::uint64_t s = 0; s < 12; ++s) slides.push_back(slide_tiles(kAllClasses[s % 4], 1000 + s));
    std::vector<LabeledTile> samples;
    for (const auto& st : slides)
      for (std::size_t i = 0; i < st.tiles.size(); ++i) samples.push_back({&st.tiles[i], st.truth[i]});
    return train_segmenter(samples, RoiConfig{}, 5);
  }();
  return seg;
}

SegMap with_fraction(double f) {
  SegMap m;
  m.positive_fraction = f;
  return m;
}

}  // namespace

TEST(Select, FractionRuleAtTheta) {
  const std::vector<Tile> tiles(4);
  const std::vector<SegMap> maps = {with_fraction(0.0), with_fraction(0.04), with_fraction(0.05),
                                    with_fraction(0.9)};
  EXPECT_EQ(select(tiles, maps, 0.05).selected, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(select(tiles, maps, 0.0).selected, (std::vector<std::size_t>{0, 1, 2, 3}));
  const std::vector<SegMap> zeros(4, with_fraction(0.0));
  EXPECT_TRUE(select(tiles, zeros, 0.05).selected.empty());
}

TEST(Select, CountMismatchIsInvalid) {
  const std::vector<Tile> tiles(3);
  const std::vector<SegMap> maps(2);
  EXPECT_THROW(select(tiles, maps, 0.05), InvalidInput);
}

TEST(Select, MonotoneInTheta) {
  std::mt19937_64 rng(4);
  std::vector<SegMap> maps;
  for (int i = 0; i < 50; ++i) maps.push_back(with_fraction(double(rng() % 1000) / 1000.0));
  const std::vector<Tile> tiles(50);
  std::size_t prev = 51;
  for (double theta = 0; theta <= 1.0; theta += 0.05) {
    const auto n = select(tiles, maps, theta).selected.size();
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(RoiPlanes, UniformTileHasZeroContrast) {
  const auto p = roi_planes(test::solid(16, 16, 100, 50, 200));
  for (float c : p.contrast) EXPECT_EQ(c, 0.0f);
  EXPECT_FLOAT_EQ(p.r[0], 100.0f / 255.0f);
}

TEST(Segment, PositiveFractionIsExactCountRatio) {
  const auto st = slide_tiles(ClassLabel::Basaloid, 77);
  for (const auto& t : st.tiles) {
    const auto m = segment(t, trained());
    EXPECT_EQ(m.positive_fraction, double(m.map.count()) / 16384.0);
  }
}

TEST(Segment, BackgroundTileIsAllNegative) {
  const auto bg = test::whole_tile(test::solid(128, 128, 236, 235, 237));
  EXPECT_EQ(segment(bg, trained()).map.count(), 0u);
}

TEST(Segment, LesionTilesTrackGroundTruthFraction) {
  std::size_t lesion_tiles = 0;
  for (auto cls : {ClassLabel::Basaloid, ClassLabel::Squamous, ClassLabel::Melanocytic}) {
    for (std::uint64_t seed : {501, 502}) {
      const auto st = slide_tiles(cls, seed);
      for (std::size_t i = 0; i < st.tiles.size(); ++i) {
        const double truth = double(st.truth[i].count()) / 16384.0;
        if (truth == 0) continue;
        ++lesion_tiles;
        EXPECT_NEAR(segment(st.tiles[i], trained()).positive_fraction, truth, 0.15)
            << to_string(cls) << " seed " << seed << " tile " << i;
      }
    }
  }
  EXPECT_GT(lesion_tiles, 20u);
}

TEST(Segment, Deterministic) {
  const auto st = slide_tiles(ClassLabel::Melanocytic, 9);
  ASSERT_FALSE(st.tiles.empty());
  EXPECT_EQ(segment(st.tiles[0], trained()).map, segment(st.tiles[0], trained()).map);
}

TEST(SegmenterFile, RoundTripIsExact) {
  const auto& s = trained();
  EXPECT_EQ(parse_segmenter(format_segmenter(s)), s);
  test::TempDir dir;
  save_segmenter(s, dir.path() / "seg.txt");
  EXPECT_EQ(load_segmenter(dir.path() / "seg.txt"), s);
  EXPECT_THROW(parse_segmenter("wsi-triage-segmenter v1\nweights 1 2\n"), ParseError);
}
