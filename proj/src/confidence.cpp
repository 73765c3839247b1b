#include "wsi/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wsi/error.hpp"

namespace wsi {

namespace {
constexpr std::string_view kThresholdHeader = "wsi-triage-thresholds v1";
}

PredictionMatrix mc_predict(const SlideEmbedding& embedding, const NetParams& params, int repetitions,
                            double keep_prob, std::uint64_t seed, const std::string& slide_id) {
  if (repetitions < 1) throw InvalidInput("mc_predict: repetitions must be >= 1");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw InvalidInput("mc_predict: keep_prob must lie in (0, 1]");
  Rng rng(derive_seed(seed, slide_id, "mc"));
  PredictionMatrix m;
  m.rows.reserve(std::size_t(repetitions));
  for (int i = 0; i < repetitions; ++i) {
    const auto mask = draw_mask(rng, keep_prob);
    m.rows.push_back(predict(embedding, params, &mask));
  }
  return m;
}

ConfidenceScore score(const PredictionMatrix& matrix) {
  if (matrix.rows.empty()) throw InvalidInput("score: empty prediction matrix");
  ConfidenceScore s;
  for (const auto& row : matrix.rows)
    for (std::size_t c = 0; c < kNumClasses; ++c) s.column_means[c] += row[c];
  for (auto& v : s.column_means) v /= double(matrix.rows.size());
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c)
    if (s.column_means[c] > s.column_means[best]) best = c;
  s.value = s.column_means[best];
  s.cls = static_cast<ClassLabel>(best);
  return s;
}

Threshold calibrate_threshold(std::span<const ValidationOutcome> results, double target) {
  if (results.empty()) throw InvalidInput("calibrate_thresholds: empty validation results");
  std::vector<ValidationOutcome> sorted(results.begin(), results.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  // suffix_correct[i] = correct count among sorted[i..]
  std::vector<std::size_t> suffix_correct(sorted.size() + 1, 0);
  for (std::size_t i = sorted.size(); i-- > 0;) suffix_correct[i] = suffix_correct[i + 1] + sorted[i].correct;

  std::vector<double> candidates{0.0};
  for (const auto& o : sorted) candidates.push_back(o.score);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  for (double t : candidates) {
    const auto first = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), t, [](const auto& o, double v) { return o.score < v; }) -
        sorted.begin());
    const std::size_t retained = sorted.size() - first;
    if (retained > 0 && double(suffix_correct[first]) / double(retained) >= target) return Threshold::at(t);
  }
  return Threshold::unreachable();
}

ThresholdSet calibrate_thresholds(std::span<const ValidationOutcome> results, std::span<const double> targets) {
  if (targets.size() != 3) throw InvalidInput("calibrate_thresholds: exactly three targets required");
  ThresholdSet set;
  for (std::size_t k = 0; k < 3; ++k) {
    set.targets[k] = targets[k];
    set.levels[k] = calibrate_threshold(results, targets[k]);
  }
  return set;
}

Decision apply_threshold(double s, const Threshold& threshold) {
  if (!threshold.reachable()) return Decision::BelowThreshold;
  return s >= threshold.value() ? Decision::Classified : Decision::BelowThreshold;
}

int highest_level(double s, const ThresholdSet& thresholds) {
  int level = 0;
  for (int k = 1; k <= 3; ++k)
    if (apply_threshold(s, thresholds.level(k)) == Decision::Classified) level = k;
  return level;
}

std::string format_thresholds(const ThresholdSet& t) {
  std::ostringstream os;
  os.precision(17);
  os << kThresholdHeader << '\n';
  for (int k = 1; k <= 3; ++k) {
    os << "level" << k << ' ' << t.targets[k - 1] << ' ';
    const auto th = t.level(k);
    if (th.reachable())
      os << th.value();
    else
      os << "unreachable";
    os << '\n';
  }
  return os.str();
}

ThresholdSet parse_thresholds(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kThresholdHeader)
    throw ParseError(source, 1, "expected header '" + std::string(kThresholdHeader) + "'");
  ThresholdSet t;
  for (int k = 1; k <= 3; ++k) {
    if (!std::getline(in, line)) throw ParseError(source, std::size_t(k + 1), "missing level line");
    std::istringstream ls(line);
    std::string key, value;
    double target = 0;
    if (!(ls >> key >> target >> value) || key != "level" + std::to_string(k))
      throw ParseError(source, std::size_t(k + 1), "expected 'level" + std::to_string(k) + " <target> <threshold>'");
    t.targets[k - 1] = target;
    if (value == "unreachable") {
      t.levels[k - 1] = Threshold::unreachable();
    } else {
      try {
        t.levels[k - 1] = Threshold::at(std::stod(value));
      } catch (const std::exception&) {
        throw ParseError(source, std::size_t(k + 1), "bad threshold '" + value + "'");
      }
    }
  }
  return t;
}

void save_thresholds(const ThresholdSet& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_thresholds(t);
}

ThresholdSet load_thresholds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_thresholds(ss.str(), path.string());
}

}  // namespace wsi
