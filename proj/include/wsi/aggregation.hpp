#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wsi/confidence.hpp"

namespace wsi {

// Error marks a slide that could not be processed (e.g. unreadable raster). It carries
// no prediction and aggregates like NoROI.
enum class SlideStatus { Classified, NoROI, Error };

struct SlideResult {
  std::string slide_id;
  std::string specimen_id;
  std::string lab_id;
  SlideStatus status = SlideStatus::NoROI;
  ConfidenceScore score;    // Classified only
  PredictionMatrix matrix;  // Classified only
  std::string error;        // Error only

  bool classified() const { return status == SlideStatus::Classified; }
};

enum class FinalOutcome { Classified, BelowThreshold, NoROI };

std::string_view to_string(SlideStatus s);
std::string_view to_string(FinalOutcome f);

struct SpecimenResult {
  std::string specimen_id;
  std::string lab_id;
  bool classified = false;  // aggregated outcome before thresholding
  ClassLabel cls = ClassLabel::Basaloid;
  double score = 0.0;
  Sigmoids column_means{};
  std::string source_slide;
  FinalOutcome final = FinalOutcome::NoROI;
};

// Maximum-confidence Classified slide (ties: lowest slide_id); NoROI when none.
// Throws InvalidInput on an empty set or mixed specimen ids.
SpecimenResult aggregate(std::span<const SlideResult> slides);

// Groups by specimen_id and aggregates each group; ordered by specimen_id.
std::vector<SpecimenResult> aggregate_all(std::span<const SlideResult> slides);

SpecimenResult finalize(SpecimenResult specimen, const Threshold& threshold);

// `specimen_id,final,class,score,level,source_slide`; class/score/level/source are empty for NoROI.
void write_specimen_results(std::span<const SpecimenResult> specimens, const ThresholdSet& thresholds,
                            const std::filesystem::path& path);
std::string format_specimen_results(std::span<const SpecimenResult> specimens,
                                    std::span<const ThresholdSet* const> thresholds);

}  // namespace wsi
