#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wsi/classifier.hpp"

namespace wsi {

inline constexpr int kDefaultRepetitions = 30;
inline constexpr std::array<double, 3> kDefaultTargets = {0.90, 0.95, 0.98};

// T stochastic predictions of one slide; rows[i][c] is the sigmoid for class c in repetition i.
struct PredictionMatrix {
  std::vector<Sigmoids> rows;

  std::size_t repetitions() const { return rows.size(); }
  bool operator==(const PredictionMatrix&) const = default;
};

struct ConfidenceScore {
  double value = 0.0;  // max over classes of the column means
  ClassLabel cls = ClassLabel::Basaloid;
  Sigmoids column_means{};
};

// Masks are drawn from a stream seeded by derive_seed(seed, slide_id, "mc"), so the
// matrix does not depend on which worker runs the slide.
PredictionMatrix mc_predict(const SlideEmbedding& embedding, const NetParams& params, int repetitions,
                            double keep_prob, std::uint64_t seed, const std::string& slide_id);

// Column means, their maximum, and the maximizing class. Ties go to the earlier class
// in Basaloid < Squamous < Melanocytic < Other order.
ConfidenceScore score(const PredictionMatrix& matrix);

class Threshold {
 public:
  static Threshold at(double value) { return Threshold(value, true); }
  static Threshold unreachable() { return Threshold(0.0, false); }
  Threshold() = default;

  bool reachable() const { return reachable_; }
  double value() const { return value_; }
  bool operator==(const Threshold&) const = default;

 private:
  Threshold(double v, bool r) : value_(v), reachable_(r) {}
  double value_ = 0.0;
  bool reachable_ = true;
};

struct ThresholdSet {
  std::array<double, 3> targets = kDefaultTargets;
  std::array<Threshold, 3> levels{};

  // level in 1..3; level 0 means no thresholding.
  Threshold level(int k) const { return k == 0 ? Threshold::at(0.0) : levels.at(std::size_t(k - 1)); }
  bool operator==(const ThresholdSet&) const = default;
};

struct ValidationOutcome {
  double score;
  bool correct;
};

// Smallest candidate in {0} U {observed scores} whose retained set (score >= t) has
// accuracy >= target; Unreachable when none qualifies. Throws InvalidInput when empty.
Threshold calibrate_threshold(std::span<const ValidationOutcome> results, double target);
ThresholdSet calibrate_thresholds(std::span<const ValidationOutcome> results,
                                  std::span<const double> targets = kDefaultTargets);

enum class Decision { Classified, BelowThreshold };

// Inclusive: s >= threshold classifies. Unreachable never classifies.
Decision apply_threshold(double s, const Threshold& threshold);

// Highest level (0..3) whose threshold s clears.
int highest_level(double s, const ThresholdSet& thresholds);

void save_thresholds(const ThresholdSet& t, const std::filesystem::path& path);
ThresholdSet load_thresholds(const std::filesystem::path& path);
std::string format_thresholds(const ThresholdSet& t);
ThresholdSet parse_thresholds(std::string_view text, const std::string& source = "<thresholds>");

}  // namespace wsi
