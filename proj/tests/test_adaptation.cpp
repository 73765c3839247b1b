#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "wsi/adaptation.hpp"
#include "wsi/error.hpp"
#include "wsi/synth.hpp"

using namespace wsi;

namespace {

std::vector<Tile> slide_tiles(const synth::LabProfile& lab, std::uint64_t seed, ClassLabel cls = ClassLabel::Squamous) {
  auto clean = lab;
  clean.artifact_rates = {};
  const auto s = synth::generate_slide(cls, clean, seed);
  return tile(s.raster, segment_tissue(s.raster), {}, "s");
}

std::vector<Tile> sample(const synth::LabProfile& lab, std::uint64_t first_seed, int slides) {
  std::vector<Tile> out;
  for (int i = 0; i < slides; ++i) {
    auto t = slide_tiles(lab, first_seed + std::uint64_t(i), kAllClasses[std::size_t(i) % 4]);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

// Naive two-pass moments over the same per-pixel coordinates.
DomainStats naive_stats(const std::vector<Tile>& tiles) {
  std::vector<std::array<double, 3>> px;
  for (const auto& t : tiles)
    for (std::size_t i = 0; i < t.pixels.pixels(); ++i)
      if (t.tissue.data[i]) px.push_back(to_log_opponent(t.pixels.data.data() + 3 * i));
  DomainStats s;
  for (int c = 0; c < 3; ++c) {
    double m = 0;
    for (const auto& p : px) m += p[c];
    m /= double(px.size());
    double v = 0;
    for (const auto& p : px) v += (p[c] - m) * (p[c] - m);
    s.mean[c] = m;
    s.std[c] = std::max(kStdFloor, std::sqrt(v / double(px.size())));
  }
  return s;
}

}  // namespace

TEST(FitDomain, UniformTileHasFlooredStdAndColorMean) {
  const std::uint8_t color[3] = {180, 90, 160};
  const auto s = fit_reference(std::vector<Tile>{test::whole_tile(test::solid(32, 32, 180, 90, 160))});
  const auto want = to_log_opponent(color);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(s.mean[c], want[c], 1e-12);
    EXPECT_EQ(s.std[c], kStdFloor);
  }
}

TEST(FitDomain, EmptyOrTissuelessSampleIsInvalid) {
  EXPECT_THROW(fit_reference(std::vector<Tile>{}), InvalidInput);
  EXPECT_THROW(fit_reference(std::vector<Tile>{test::whole_tile(test::solid(8, 8, 9, 9, 9), 0)}), InvalidInput);
}

TEST(FitDomain, MatchesNaiveTwoPass) {
  const auto tiles = sample(synth::preset_lab("reference"), 40, 3);
  const auto s = fit_reference(tiles), want = naive_stats(tiles);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(s.mean[c], want.mean[c], 1e-9);
    EXPECT_NEAR(s.std[c], want.std[c], 1e-9);
  }
}

TEST(FitDomain, DisjointSamplesOfOneLabAreCloserThanOtherLabs) {
  const auto distance = [](const DomainStats& x, const DomainStats& y) {
    double d = 0;
    for (int c = 0; c < 3; ++c) d += std::pow(x.mean[c] - y.mean[c], 2) + std::pow(x.std[c] - y.std[c], 2);
    return std::sqrt(d);
  };
  std::vector<DomainStats> first, second;
  for (const auto& lab : synth::preset_labs()) {
    first.push_back(fit_lab(sample(lab, 100, 8)));
    second.push_back(fit_lab(sample(lab, 200, 8)));
  }
  for (std::size_t i = 0; i < first.size(); ++i)
    for (std::size_t j = 0; j < first.size(); ++j)
      if (i != j) EXPECT_LT(distance(first[i], second[i]), distance(first[i], second[j])) << i << " vs " << j;
}

TEST(FitDomain, DetectsShiftedLabMean) {
  auto brighter = synth::identity_profile("bright");
  brighter.color_offset = {20, 20, 20};
  auto darker = synth::identity_profile("dark");
  darker.color_offset = {-20, -20, -20};
  const auto base = fit_lab(sample(synth::identity_profile("id"), 300, 4));
  EXPECT_GT(fit_lab(sample(brighter, 300, 4)).mean[0], base.mean[0] + 0.05);
  EXPECT_LT(fit_lab(sample(darker, 300, 4)).mean[0], base.mean[0] - 0.05);
}

TEST(DomainAccumulator, MergeOrderMatchesSingleFit) {
  const auto tiles = sample(synth::preset_lab("lab_a"), 7, 2);
  DomainAccumulator left, right;
  for (std::size_t i = 0; i < tiles.size(); ++i) (i % 2 ? right : left).add(tiles[i]);
  left.merge(right);
  const auto merged = left.finish(), direct = fit_domain(tiles);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(merged.mean[c], direct.mean[c], 1e-12);
    EXPECT_NEAR(merged.std[c], direct.std[c], 1e-12);
  }
}

TEST(Adapt, IdentityModelIsBitExact) {
  const auto t = test::whole_tile(test::noise_image(128, 128, 3));
  const DomainStats s{{-0.5, 0.1, 0.2}, {0.3, 0.1, 0.05}};
  EXPECT_EQ(adapt(t, AdapterModel{s, s}).pixels, t.pixels);
}

TEST(Adapt, ShiftedLabMeansMoveToTarget) {
  const auto ref_tiles = sample(synth::preset_lab("reference"), 500, 4);
  const auto lab_tiles = sample(synth::preset_lab("lab_b"), 600, 4);
  const AdapterModel model{fit_lab(lab_tiles), fit_reference(ref_tiles)};
  std::vector<Tile> adapted;
  for (const auto& t : lab_tiles) adapted.push_back(adapt(t, model));
  const auto after = fit_domain(adapted);
  // 0.01 in log units is about 1.5 gray levels at mid-range intensities.
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(after.mean[c], model.target.mean[c], 0.01) << c;
  const auto before = fit_domain(lab_tiles);
  double gap_before = 0, gap_after = 0;
  for (int c = 0; c < 3; ++c) {
    gap_before += std::abs(before.mean[c] - model.target.mean[c]);
    gap_after += std::abs(after.mean[c] - model.target.mean[c]);
  }
  EXPECT_LT(gap_after, gap_before);
}

TEST(Adapt, BlackTileStaysFinite) {
  const auto black = test::whole_tile(test::solid(16, 16, 0, 0, 0));
  const auto stats = fit_domain(std::vector<Tile>{black});
  const AdapterModel model{stats, DomainStats{{-0.4, 0.05, 0.1}, {0.2, 0.05, 0.05}}};
  const auto out = adapt(black, model);
  EXPECT_EQ(out.pixels.height, 16);
  // A constant source maps to the target mean exactly.
  const auto mean = from_log_opponent(model.target.mean);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.pixels.data[std::size_t(c)], mean[std::size_t(c)], 1);
}

TEST(Adapt, TablesAgreeWithDirectInverseTransform) {
  const DomainStats src{{-0.6, 0.02, 0.15}, {0.25, 0.08, 0.07}}, dst{{-0.45, -0.03, 0.22}, {0.2, 0.1, 0.06}};
  const AdapterModel model{src, dst};
  const auto t = test::whole_tile(test::noise_image(64, 64, 8));
  const auto out = adapt(t, model);
  for (std::size_t i = 0; i < t.pixels.pixels(); ++i) {
    const auto x = to_log_opponent(t.pixels.data.data() + 3 * i);
    std::array<double, 3> y{};
    for (int c = 0; c < 3; ++c) y[c] = (x[c] - src.mean[c]) / src.std[c] * dst.std[c] + dst.mean[c];
    const auto want = from_log_opponent(y);
    for (int c = 0; c < 3; ++c) ASSERT_LE(std::abs(int(out.pixels.data[3 * i + c]) - int(want[c])), 1);
  }
}

TEST(Adapt, IdempotentUpToClampingWhenRefit) {
  const auto lab_tiles = sample(synth::preset_lab("lab_c"), 900, 2);
  const auto ref = fit_reference(sample(synth::preset_lab("reference"), 950, 2));
  std::vector<Tile> once;
  for (const auto& t : lab_tiles) once.push_back(adapt(t, AdapterModel{fit_lab(lab_tiles), ref}));
  const AdapterModel again{fit_domain(once), ref};
  std::size_t off_by_more = 0, total = 0;
  for (const auto& t : once) {
    const auto twice = adapt(t, again);
    for (std::size_t i = 0; i < t.pixels.data.size(); ++i, ++total)
      off_by_more += std::abs(int(twice.pixels.data[i]) - int(t.pixels.data[i])) > 1;
  }
  EXPECT_LT(double(off_by_more) / double(total), 0.01);
}

TEST(AdapterFile, RoundTripAndErrors) {
  const AdapterModel m{{{-0.5, 0.01, 0.2}, {0.3, 0.09, 0.07}}, {{-0.45, -0.02, 0.23}, {0.25, 0.1, 0.06}}};
  EXPECT_EQ(parse_adapter(format_adapter(m)), m);
  test::TempDir dir;
  save_adapter(m, dir.path() / "a.txt");
  EXPECT_EQ(load_adapter(dir.path() / "a.txt"), m);
  EXPECT_THROW(parse_adapter("wsi-triage-adapter v1\nsource_mean 1 2\n"), ParseError);
  EXPECT_THROW(parse_adapter("adapter\n"), ParseError);
}
