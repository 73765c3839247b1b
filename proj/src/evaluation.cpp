#include "wsi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

namespace wsi {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ROCCurve roc_auc(std::span<const double> scores, std::span<const bool> positives) {
  if (scores.size() != positives.size()) throw InvalidInput("roc_auc: score/label length mismatch");
  const auto n_pos = static_cast<std::size_t>(std::count(positives.begin(), positives.end(), true));
  const std::size_t n_neg = positives.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedAuc("roc_auc: both positive and negative examples are required");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  ROCCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (positives[order[i]] ? tp : fp)++;
    // Trapezoid in count units: (fp - fp0) * (tp + tp0) / 2.
    area += double(fp - fp0) * double(tp + tp0) / 2.0;
    roc.points.emplace_back(double(fp) / double(n_neg), double(tp) / double(n_pos));
  }
  roc.auc = area / (double(n_pos) * double(n_neg));
  return roc;
}

EvalReport evaluate(std::span<const SpecimenResult> results, const std::map<std::string, ClassLabel>& truths,
                    const ThresholdSet& thresholds) {
  for (const auto& r : results)
    if (!truths.contains(r.specimen_id)) throw InvalidInput("evaluate: unknown specimen '" + r.specimen_id + "'");
  EvalReport report;
  for (int level = 0; level <= 3; ++level) {
    LevelMetrics& m = report.levels[std::size_t(level)];
    m.level = level;
    m.threshold = thresholds.level(level);
    m.total = results.size();
    std::array<std::vector<double>, kNumClasses> class_scores;
    std::vector<ClassLabel> retained_truths;
    for (const auto& r : results) {
      const ClassLabel truth = truths.at(r.specimen_id);
      const auto fin = finalize(r, m.threshold);
      auto& row = m.confusion[index_of(truth)];
      switch (fin.final) {
        case FinalOutcome::NoROI: ++row[kNoRoiColumn]; break;
        case FinalOutcome::BelowThreshold: ++row[kBelowThresholdColumn]; break;
        case FinalOutcome::Classified:
          ++row[index_of(fin.cls)];
          ++m.retained;
          m.correct += fin.cls == truth;
          retained_truths.push_back(truth);
          for (std::size_t c = 0; c < kNumClasses; ++c) class_scores[c].push_back(fin.column_means[c]);
          break;
      }
    }
    m.accuracy = m.retained ? double(m.correct) / double(m.retained) : kNaN;
    m.coverage = m.total ? double(m.retained) / double(m.total) : kNaN;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const std::size_t k = retained_truths.size();
      std::unique_ptr<bool[]> positive(new bool[k]);
      for (std::size_t i = 0; i < k; ++i) positive[i] = index_of(retained_truths[i]) == c;
      try {
        m.roc[c] = roc_auc(class_scores[c], std::span<const bool>(positive.get(), k));
        m.auc[c] = m.roc[c].auc;
      } catch (const UndefinedAuc&) {
        m.auc[c] = kNaN;
      }
    }
  }
  return report;
}

double domain_gap(std::span<const std::vector<double>> features, std::span<const std::string> labels) {
  if (features.size() != labels.size()) throw InvalidInput("domain_gap: feature/label length mismatch");
  std::map<std::string, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < labels.size(); ++i) clusters[labels[i]].push_back(i);
  if (clusters.size() < 2) throw InvalidInput("domain_gap: at least two labs required");
  for (const auto& [lab, members] : clusters)
    if (members.size() < 2) throw InvalidInput("domain_gap: lab '" + lab + "' needs at least two points");

  const std::size_t n = features.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (features[i].size() != features[j].size()) throw InvalidInput("domain_gap: ragged feature vectors");
      double s = 0;
      for (std::size_t k = 0; k < features[i].size(); ++k) {
        const double d = features[i][k] - features[j][k];
        s += d * d;
      }
      dist[i * n + j] = dist[j * n + i] = std::sqrt(s);
    }
  }
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = 0, b = std::numeric_limits<double>::infinity();
    for (const auto& [lab, members] : clusters) {
      double sum = 0;
      for (std::size_t j : members) sum += dist[i * n + j];
      if (lab == labels[i])
        a = sum / double(members.size() - 1);
      else
        b = std::min(b, sum / double(members.size()));
    }
    const double denom = std::max(a, b);
    total += denom > 0 ? (b - a) / denom : 0.0;
  }
  return total / double(n);
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string fmt_threshold(const Threshold& t) { return t.reachable() ? fmt(t.value()) : "unreachable"; }

constexpr std::array<const char*, 4> kLevelNames = {"None", "1", "2", "3"};

}  // namespace

std::string format_report_text(const std::vector<std::pair<std::string, EvalReport>>& reports) {
  std::ostringstream os;
  os << "wsi-triage evaluation report\n";
  for (const auto& [group, report] : reports) {
    os << "\n[" << group << "]\n";
    os << "level  threshold    accuracy  coverage  retained/total  AUC(Basaloid,Squamous,Melanocytic,Other)\n";
    for (const auto& m : report.levels) {
      os << kLevelNames[std::size_t(m.level)] << "  " << fmt_threshold(m.threshold) << "  " << fmt(m.accuracy) << "  "
         << fmt(m.coverage) << "  " << m.retained << '/' << m.total << "  ";
      for (std::size_t c = 0; c < kNumClasses; ++c) os << (c ? "," : "") << fmt(m.auc[c]);
      os << '\n';
    }
  }
  return os.str();
}

void write_report(const std::vector<std::pair<std::string, EvalReport>>& reports, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.txt");
    out << format_report_text(reports);
  }
  std::ofstream levels(dir / "levels.csv"), confusion(dir / "confusion.csv"), roc(dir / "roc.csv");
  levels << "group,level,threshold,accuracy,coverage,retained,total,auc_basaloid,auc_squamous,auc_melanocytic,auc_other\n";
  confusion << "group,level,truth,Basaloid,Squamous,Melanocytic,Other,BelowThreshold,NoROI\n";
  roc << "group,level,class,fpr,tpr\n";
  for (const auto& [group, report] : reports) {
    for (const auto& m : report.levels) {
      const char* lvl = kLevelNames[std::size_t(m.level)];
      levels << group << ',' << lvl << ',' << fmt_threshold(m.threshold) << ',' << fmt(m.accuracy) << ','
             << fmt(m.coverage) << ',' << m.retained << ',' << m.total;
      for (double a : m.auc) levels << ',' << fmt(a);
      levels << '\n';
      for (auto truth : kAllClasses) {
        confusion << group << ',' << lvl << ',' << to_string(truth);
        for (auto count : m.confusion[index_of(truth)]) confusion << ',' << count;
        confusion << '\n';
      }
      for (auto cls : kAllClasses)
        for (const auto& [fpr, tpr] : m.roc[index_of(cls)].points)
          roc << group << ',' << lvl << ',' << to_string(cls) << ',' << fmt(fpr) << ',' << fmt(tpr) << '\n';
    }
  }
}

}  // namespace wsi
