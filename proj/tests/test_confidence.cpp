#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "wsi/confidence.hpp"
#include "wsi/error.hpp"

using namespace wsi;

namespace {

NetParams random_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0, 0.5);
  NetParams p;
  for (std::size_t i = 0; i < p.size(); ++i) p.at(i) = nd(rng);
  return p;
}

SlideEmbedding random_embedding(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SlideEmbedding e;
  for (auto& v : e) v = double(rng() % 1000) / 1000.0;
  return e;
}

std::vector<ValidationOutcome> outcomes(std::vector<double> scores, std::vector<bool> correct) {
  std::vector<ValidationOutcome> out;
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i], correct[i]});
  return out;
}

}  // namespace

TEST(Score, TwoRowExample) {
  const PredictionMatrix m{{{0.6, 0.2, 0.1, 0.1}, {0.8, 0.4, 0.3, 0.1}}};
  const auto s = score(m);
  EXPECT_NEAR(s.column_means[0], 0.7, 1e-15);
  EXPECT_NEAR(s.column_means[1], 0.3, 1e-15);
  EXPECT_NEAR(s.column_means[2], 0.2, 1e-15);
  EXPECT_NEAR(s.column_means[3], 0.1, 1e-15);
  EXPECT_NEAR(s.value, 0.7, 1e-15);
  EXPECT_EQ(s.cls, ClassLabel::Basaloid);
}

TEST(Score, UniformMatrixTiesToBasaloid) {
  const PredictionMatrix m{std::vector<Sigmoids>(30, Sigmoids{0.5, 0.5, 0.5, 0.5})};
  const auto s = score(m);
  EXPECT_EQ(s.value, 0.5);
  EXPECT_EQ(s.cls, ClassLabel::Basaloid);
}

TEST(Score, RowPermutationInvariant) {
  PredictionMatrix m;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) m.rows.push_back({double(rng() % 997) / 997, double(rng() % 991) / 991,
                                                double(rng() % 983) / 983, double(rng() % 977) / 977});
  const auto a = score(m);
  std::shuffle(m.rows.begin(), m.rows.end(), rng);
  const auto b = score(m);
  EXPECT_EQ(a.cls, b.cls);
  EXPECT_NEAR(a.value, b.value, 1e-15);
}

TEST(McPredict, KeepOneRepeatsTheUnmaskedPrediction) {
  const auto p = random_params(1);
  const auto e = random_embedding(2);
  const auto m = mc_predict(e, p, 30, 1.0, 7, "slide-1");
  ASSERT_EQ(m.repetitions(), 30u);
  for (const auto& row : m.rows) EXPECT_EQ(row, predict(e, p));
}

TEST(McPredict, SingleRepetitionIsOneMaskedPrediction) {
  const auto p = random_params(3);
  const auto e = random_embedding(4);
  const auto m = mc_predict(e, p, 1, 0.3, 9, "slide-2");
  Rng rng(derive_seed(9, "slide-2", "mc"));
  const auto mask = draw_mask(rng, 0.3);
  ASSERT_EQ(m.repetitions(), 1u);
  EXPECT_EQ(m.rows[0], predict(e, p, &mask));
}

TEST(McPredict, DeterministicPerSlideAndValidated) {
  const auto p = random_params(5);
  const auto e = random_embedding(6);
  EXPECT_EQ(mc_predict(e, p, 30, 0.3, 1, "a"), mc_predict(e, p, 30, 0.3, 1, "a"));
  EXPECT_NE(mc_predict(e, p, 30, 0.3, 1, "a"), mc_predict(e, p, 30, 0.3, 1, "b"));
  for (const auto& row : mc_predict(e, p, 30, 0.3, 1, "a").rows)
    for (double v : row) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  EXPECT_THROW(mc_predict(e, p, 0, 0.3, 1, "a"), InvalidInput);
  EXPECT_THROW(mc_predict(e, p, 30, 0.0, 1, "a"), InvalidInput);
  EXPECT_THROW(mc_predict(e, p, 30, 1.5, 1, "a"), InvalidInput);
}

TEST(CalibrateThreshold, WorkedExample) {
  const auto v = outcomes({0.2, 0.4, 0.6, 0.8, 0.9}, {false, true, false, true, true});
  EXPECT_EQ(calibrate_threshold(v, 0.90), Threshold::at(0.8));
}

TEST(CalibrateThreshold, AllCorrectAndAllWrong) {
  const auto right = outcomes({0.3, 0.5, 0.7}, {true, true, true});
  const auto wrong = outcomes({0.3, 0.5, 0.7}, {false, false, false});
  const auto a = calibrate_thresholds(right);
  const auto b = calibrate_thresholds(wrong);
  for (int k = 1; k <= 3; ++k) {
    EXPECT_EQ(a.level(k), Threshold::at(0.0));
    EXPECT_FALSE(b.level(k).reachable());
  }
}

TEST(CalibrateThreshold, EmptyIsInvalid) {
  EXPECT_THROW(calibrate_threshold({}, 0.9), InvalidInput);
  const std::vector<double> two = {0.9, 0.95};
  EXPECT_THROW(calibrate_thresholds(outcomes({0.5}, {true}), two), InvalidInput);
}

TEST(CalibrateThreshold, NonDecreasingInLevelAndRetainedAccuracyMeetsTarget) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ValidationOutcome> v;
    const int n = 1 + int(rng() % 60);
    for (int i = 0; i < n; ++i) {
      const double s = double(rng() % 50) / 50.0;
      v.push_back({s, double(rng() % 1000) / 1000.0 < s});
    }
    const auto t = calibrate_thresholds(v);
    for (int k = 1; k <= 3; ++k) {
      const auto th = t.level(k);
      if (k > 1 && th.reachable()) {
        ASSERT_TRUE(t.level(k - 1).reachable());
        EXPECT_GE(th.value(), t.level(k - 1).value());
      }
      if (!th.reachable()) continue;
      int kept = 0, ok = 0;
      for (const auto& o : v)
        if (o.score >= th.value()) {
          ++kept;
          ok += o.correct;
        }
      ASSERT_GT(kept, 0);
      EXPECT_GE(double(ok) / kept, t.targets[std::size_t(k - 1)]);
    }
  }
}

TEST(ApplyThreshold, InclusiveBoundaryAndUnreachable) {
  EXPECT_EQ(apply_threshold(0.33, Threshold::at(0.33)), Decision::Classified);
  EXPECT_EQ(apply_threshold(0.329, Threshold::at(0.33)), Decision::BelowThreshold);
  EXPECT_EQ(apply_threshold(1.0, Threshold::unreachable()), Decision::BelowThreshold);
}

TEST(ApplyThreshold, CoverageNeverGrowsWithThreshold) {
  std::vector<double> s;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) s.push_back(double(rng() % 1000) / 1000.0);
  std::size_t prev = s.size() + 1;
  for (double t = 0; t <= 1.0; t += 0.01) {
    const auto n = std::size_t(std::count_if(
        s.begin(), s.end(), [&](double x) { return apply_threshold(x, Threshold::at(t)) == Decision::Classified; }));
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(HighestLevel, CountsClearedLevels) {
  ThresholdSet t;
  t.levels = {Threshold::at(0.4), Threshold::at(0.7), Threshold::unreachable()};
  EXPECT_EQ(highest_level(0.3, t), 0);
  EXPECT_EQ(highest_level(0.4, t), 1);
  EXPECT_EQ(highest_level(0.99, t), 2);
}

TEST(ThresholdFile, RoundTripIncludingUnreachable) {
  ThresholdSet t;
  t.levels = {Threshold::at(0.123456789012345), Threshold::at(0.5), Threshold::unreachable()};
  EXPECT_EQ(parse_thresholds(format_thresholds(t)), t);
  test::TempDir dir;
  save_thresholds(t, dir.path() / "t.txt");
  EXPECT_EQ(load_thresholds(dir.path() / "t.txt"), t);
  EXPECT_THROW(parse_thresholds("wsi-triage-thresholds v1\nlevel1 0.9 abc\n"), ParseError);
}
