#include "wsi/aggregation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "wsi/error.hpp"

namespace wsi {

std::string_view to_string(SlideStatus s) {
  switch (s) {
    case SlideStatus::Classified: return "Classified";
    case SlideStatus::NoROI: return "NoROI";
    case SlideStatus::Error: return "Error";
  }
  return "?";
}

std::string_view to_string(FinalOutcome f) {
  switch (f) {
    case FinalOutcome::Classified: return "Classified";
    case FinalOutcome::BelowThreshold: return "BelowThreshold";
    case FinalOutcome::NoROI: return "NoROI";
  }
  return "?";
}

SpecimenResult aggregate(std::span<const SlideResult> slides) {
  if (slides.empty()) throw InvalidInput("aggregate: no slide results");
  SpecimenResult out;
  out.specimen_id = slides.front().specimen_id;
  out.lab_id = slides.front().lab_id;
  const SlideResult* best = nullptr;
  for (const auto& s : slides) {
    if (s.specimen_id != out.specimen_id) throw InvalidInput("aggregate: mixed specimen ids");
    if (!s.classified()) continue;
    if (!best || s.score.value > best->score.value ||
        (s.score.value == best->score.value && s.slide_id < best->slide_id))
      best = &s;
  }
  if (!best) {
    out.final = FinalOutcome::NoROI;
    return out;
  }
  out.classified = true;
  out.cls = best->score.cls;
  out.score = best->score.value;
  out.column_means = best->score.column_means;
  out.source_slide = best->slide_id;
  out.final = FinalOutcome::Classified;
  return out;
}

std::vector<SpecimenResult> aggregate_all(std::span<const SlideResult> slides) {
  std::map<std::string, std::vector<SlideResult>> groups;
  for (const auto& s : slides) groups[s.specimen_id].push_back(s);
  std::vector<SpecimenResult> out;
  out.reserve(groups.size());
  for (const auto& [id, group] : groups) out.push_back(aggregate(group));
  return out;
}

SpecimenResult finalize(SpecimenResult specimen, const Threshold& threshold) {
  if (!specimen.classified)
    specimen.final = FinalOutcome::NoROI;
  else
    specimen.final = apply_threshold(specimen.score, threshold) == Decision::Classified ? FinalOutcome::Classified
                                                                                         : FinalOutcome::BelowThreshold;
  return specimen;
}

std::string format_specimen_results(std::span<const SpecimenResult> specimens,
                                    std::span<const ThresholdSet* const> thresholds) {
  std::ostringstream os;
  os.precision(17);
  os << "specimen_id,final,class,score,level,source_slide\n";
  for (std::size_t i = 0; i < specimens.size(); ++i) {
    const auto& s = specimens[i];
    os << s.specimen_id << ',' << to_string(s.final) << ',';
    if (s.classified)
      os << to_string(s.cls) << ',' << s.score << ',' << highest_level(s.score, *thresholds[i]) << ','
         << s.source_slide;
    else
      os << ",,,";
    os << '\n';
  }
  return os.str();
}

void write_specimen_results(std::span<const SpecimenResult> specimens, const ThresholdSet& thresholds,
                            const std::filesystem::path& path) {
  std::vector<const ThresholdSet*> per(specimens.size(), &thresholds);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_specimen_results(specimens, per);
}

}  // namespace wsi
