#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wsi/aggregation.hpp"
#include "wsi/error.hpp"

namespace wsi {

struct ROCCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr) from (0, 0) to (1, 1)
  double auc = 0.0;
};

class UndefinedAuc : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// One-vs-rest ROC by sweeping every unique score from high to low; AUC by the
// trapezoid rule, which equals the Mann-Whitney statistic with ties counted half.
// Throws UndefinedAuc unless both positives and negatives are present.
ROCCurve roc_auc(std::span<const double> scores, std::span<const bool> positives);

inline constexpr std::size_t kConfusionColumns = kNumClasses + 2;  // 4 classes, BelowThreshold, NoROI
inline constexpr std::size_t kBelowThresholdColumn = kNumClasses;
inline constexpr std::size_t kNoRoiColumn = kNumClasses + 1;

struct LevelMetrics {
  int level = 0;  // 0 = no threshold
  Threshold threshold;
  std::size_t total = 0;
  std::size_t retained = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;  // NaN when nothing is retained
  double coverage = 0.0;
  std::array<double, kNumClasses> auc{};  // NaN where undefined
  std::array<ROCCurve, kNumClasses> roc{};
  std::array<std::array<std::size_t, kConfusionColumns>, kNumClasses> confusion{};  // [truth][column]
};

struct EvalReport {
  std::array<LevelMetrics, 4> levels;
};

// Metrics at no threshold and at Levels 1-3. Accuracy and AUC use retained specimens
// only; the ROC score for class c is the winning slide's class-c column mean.
// Throws InvalidInput for a specimen with no truth label.
EvalReport evaluate(std::span<const SpecimenResult> results, const std::map<std::string, ClassLabel>& truths,
                    const ThresholdSet& thresholds);

// Mean silhouette coefficient of the points, clustered by their label (Euclidean).
// Requires >= 2 labels with >= 2 points each; throws InvalidInput otherwise.
double domain_gap(std::span<const std::vector<double>> features, std::span<const std::string> labels);

// Text summary plus levels.csv, confusion.csv and roc.csv under `dir`, one block per group
// (e.g. per lab plus "all").
void write_report(const std::vector<std::pair<std::string, EvalReport>>& reports, const std::filesystem::path& dir);
std::string format_report_text(const std::vector<std::pair<std::string, EvalReport>>& reports);

}  // namespace wsi
