#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "support.hpp"
#include "wsi/evaluation.hpp"

using namespace wsi;

namespace {

// Mann-Whitney: fraction of (positive, negative) pairs ordered correctly, ties half.
double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        den += 1;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / den;
}

ROCCurve roc(const std::vector<double>& s, const std::vector<bool>& pos) {
  std::unique_ptr<bool[]> p(new bool[pos.size()]);
  for (std::size_t i = 0; i < pos.size(); ++i) p[i] = pos[i];
  return roc_auc(s, std::span<const bool>(p.get(), pos.size()));
}

SpecimenResult spec(std::string id, ClassLabel cls, double score) {
  SpecimenResult r;
  r.specimen_id = std::move(id);
  r.lab_id = "lab";
  r.classified = true;
  r.cls = cls;
  r.score = score;
  for (auto& m : r.column_means) m = (1.0 - score) / 3;
  r.column_means[index_of(cls)] = score;
  r.final = FinalOutcome::Classified;
  return r;
}

SpecimenResult spec_no_roi(std::string id) {
  SpecimenResult r;
  r.specimen_id = std::move(id);
  r.final = FinalOutcome::NoROI;
  return r;
}

}  // namespace

TEST(RocAuc, PerfectSeparationIsOne) {
  const auto r = roc({0.9, 0.8, 0.3, 0.1}, {true, true, false, false});
  EXPECT_DOUBLE_EQ(r.auc, 1.0);
  EXPECT_EQ(r.points.front(), std::make_pair(0.0, 0.0));
  EXPECT_EQ(r.points.back(), std::make_pair(1.0, 1.0));
}

TEST(RocAuc, IdenticalScoresGiveOneHalf) {
  EXPECT_DOUBLE_EQ(roc({0.5, 0.5, 0.5, 0.5}, {true, false, true, false}).auc, 0.5);
}

TEST(RocAuc, InvertedRankingIsZero) { EXPECT_DOUBLE_EQ(roc({0.1, 0.2, 0.8}, {true, true, false}).auc, 0.0); }

TEST(RocAuc, MatchesPairwiseCountWithTies) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng() % 8) / 8.0;
      pos[i] = rng() % 2;
    }
    pos[0] = true;
    pos[1] = false;
    EXPECT_NEAR(roc(s, pos).auc, pairwise_auc(s, pos), 1e-12);
  }
}

TEST(RocAuc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(3);
  std::vector<double> s, t;
  std::vector<bool> pos;
  for (int i = 0; i < 50; ++i) {
    s.push_back(double(rng() % 1000) / 1000.0);
    t.push_back(std::exp(5 * s.back()) - 3);
    pos.push_back(i % 3 == 0);
  }
  EXPECT_DOUBLE_EQ(roc(s, pos).auc, roc(t, pos).auc);
}

TEST(RocAuc, SingleClassIsUndefined) {
  EXPECT_THROW(roc({0.1, 0.2}, {true, true}), UndefinedAuc);
  EXPECT_THROW(roc({0.1, 0.2}, {false, false}), UndefinedAuc);
  EXPECT_THROW(roc({}, {}), UndefinedAuc);
}

TEST(Evaluate, AllCorrectAtLevelZero) {
  std::vector<SpecimenResult> r;
  std::map<std::string, ClassLabel> truth;
  for (int i = 0; i < 8; ++i) {
    const auto c = kAllClasses[std::size_t(i) % 4];
    r.push_back(spec("P" + std::to_string(i), c, 0.6 + 0.01 * i));
    truth[r.back().specimen_id] = c;
  }
  const auto rep = evaluate(r, truth, ThresholdSet{});
  const auto& m = rep.levels[0];
  EXPECT_EQ(m.retained, 8u);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.coverage, 1.0);
  for (double a : m.auc) EXPECT_DOUBLE_EQ(a, 1.0);
}

TEST(Evaluate, UnreachableLevelHasZeroCoverageAndNaNAccuracy) {
  ThresholdSet t;
  t.levels = {Threshold::at(0.0), Threshold::at(0.7), Threshold::unreachable()};
  const std::vector<SpecimenResult> r = {spec("A", ClassLabel::Basaloid, 0.9), spec("B", ClassLabel::Squamous, 0.5)};
  const std::map<std::string, ClassLabel> truth = {{"A", ClassLabel::Basaloid}, {"B", ClassLabel::Other}};
  const auto rep = evaluate(r, truth, t);
  EXPECT_DOUBLE_EQ(rep.levels[1].accuracy, 0.5);
  EXPECT_DOUBLE_EQ(rep.levels[2].accuracy, 1.0);
  EXPECT_DOUBLE_EQ(rep.levels[2].coverage, 0.5);
  EXPECT_EQ(rep.levels[3].retained, 0u);
  EXPECT_DOUBLE_EQ(rep.levels[3].coverage, 0.0);
  EXPECT_TRUE(std::isnan(rep.levels[3].accuracy));
  for (double a : rep.levels[3].auc) EXPECT_TRUE(std::isnan(a));
}

TEST(Evaluate, HandTalliedConfusionAndCoverage) {
  // 40 specimens: 10 per truth class. Per class: 6 correct at 0.9, 2 wrong (next class) at 0.6,
  // 1 correct at 0.4, 1 NoROI.
  std::vector<SpecimenResult> r;
  std::map<std::string, ClassLabel> truth;
  for (auto c : kAllClasses) {
    const auto wrong = kAllClasses[(index_of(c) + 1) % 4];
    for (int i = 0; i < 10; ++i) {
      const std::string id = std::string(to_string(c)) + std::to_string(i);
      truth[id] = c;
      if (i < 6) r.push_back(spec(id, c, 0.9));
      else if (i < 8) r.push_back(spec(id, wrong, 0.6));
      else if (i < 9) r.push_back(spec(id, c, 0.4));
      else r.push_back(spec_no_roi(id));
    }
  }
  ThresholdSet t;
  t.levels = {Threshold::at(0.5), Threshold::at(0.8), Threshold::at(0.95)};
  const auto rep = evaluate(r, truth, t);

  EXPECT_EQ(rep.levels[0].retained, 36u);
  EXPECT_DOUBLE_EQ(rep.levels[0].accuracy, 28.0 / 36.0);
  EXPECT_DOUBLE_EQ(rep.levels[0].coverage, 36.0 / 40.0);
  EXPECT_EQ(rep.levels[1].retained, 32u);
  EXPECT_DOUBLE_EQ(rep.levels[1].accuracy, 24.0 / 32.0);
  EXPECT_EQ(rep.levels[2].retained, 24u);
  EXPECT_DOUBLE_EQ(rep.levels[2].accuracy, 1.0);
  EXPECT_EQ(rep.levels[3].retained, 0u);

  for (const auto& m : rep.levels)
    for (auto c : kAllClasses) {
      const auto& row = m.confusion[index_of(c)];
      std::size_t sum = 0;
      for (auto v : row) sum += v;
      EXPECT_EQ(sum, 10u);
      EXPECT_EQ(row[kNoRoiColumn], 1u);
    }
  const auto& l1 = rep.levels[1].confusion[index_of(ClassLabel::Basaloid)];
  EXPECT_EQ(l1[index_of(ClassLabel::Basaloid)], 6u);
  EXPECT_EQ(l1[index_of(ClassLabel::Squamous)], 2u);
  EXPECT_EQ(l1[kBelowThresholdColumn], 1u);
}

TEST(Evaluate, UnknownSpecimenIsInvalid) {
  const std::vector<SpecimenResult> r = {spec("X", ClassLabel::Other, 0.5)};
  EXPECT_THROW(evaluate(r, {}, ThresholdSet{}), InvalidInput);
}

TEST(DomainGap, SameDistributionNearZero) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0, 1);
  std::vector<std::vector<double>> f;
  std::vector<std::string> l;
  for (int i = 0; i < 300; ++i) {
    f.push_back({nd(rng), nd(rng), nd(rng)});
    l.push_back(i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c"));
  }
  EXPECT_LT(std::abs(domain_gap(f, l)), 0.05);
}

TEST(DomainGap, SeparatedClustersNearOne) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0, 0.1);
  std::vector<std::vector<double>> f;
  std::vector<std::string> l;
  for (int i = 0; i < 60; ++i) {
    const double off = 10.0 * (i % 3);
    f.push_back({off + nd(rng), nd(rng)});
    l.push_back(std::to_string(i % 3));
  }
  EXPECT_GT(domain_gap(f, l), 0.9);
}

TEST(DomainGap, HandComputedFourPoints) {
  // a: {0, 1}, b: {3, 5} on a line.
  const std::vector<std::vector<double>> f = {{0}, {1}, {3}, {5}};
  const std::vector<std::string> l = {"a", "a", "b", "b"};
  const double s0 = (4.0 - 1.0) / 4.0, s1 = (3.0 - 1.0) / 3.0;
  const double s2 = (2.5 - 2.0) / 2.5, s3 = (4.5 - 2.0) / 4.5;
  EXPECT_NEAR(domain_gap(f, l), (s0 + s1 + s2 + s3) / 4, 1e-12);
}

TEST(DomainGap, RejectsDegenerateInput) {
  EXPECT_THROW(domain_gap(std::vector<std::vector<double>>{{0}, {1}}, std::vector<std::string>{"a", "a"}),
               InvalidInput);
  EXPECT_THROW(domain_gap(std::vector<std::vector<double>>{{0}, {1}, {2}}, std::vector<std::string>{"a", "a", "b"}),
               InvalidInput);
}

TEST(WriteReport, ProducesAllFiles) {
  const std::vector<SpecimenResult> r = {spec("A", ClassLabel::Basaloid, 0.9), spec("B", ClassLabel::Squamous, 0.7)};
  const std::map<std::string, ClassLabel> truth = {{"A", ClassLabel::Basaloid}, {"B", ClassLabel::Squamous}};
  test::TempDir dir;
  write_report({{"lab", evaluate(r, truth, ThresholdSet{})}}, dir.path());
  for (const char* f : {"report.txt", "levels.csv", "confusion.csv", "roc.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir.path() / f)) << f;
  std::ifstream in(dir.path() / "confusion.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1 + 4 * 4);
}
