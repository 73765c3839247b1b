#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsi/adaptation.hpp"
#include "wsi/aggregation.hpp"
#include "wsi/classifier.hpp"
#include "wsi/config.hpp"
#include "wsi/roi.hpp"
#include "wsi/synth.hpp"

namespace wsi {

inline constexpr std::size_t kNumStages = 6;
inline constexpr std::array<const char*, kNumStages> kStageNames = {"segment", "tile",     "adapt",
                                                                     "roi",     "classify", "score"};

struct StageTiming {
  std::string slide_id;
  std::array<double, kNumStages> stage_ms{};  // in kStageNames order
  double total_ms = 0.0;
  bool no_roi = false;

  double stage_sum() const;
};

// Where slide pixels come from.
class RasterSource {
 public:
  virtual ~RasterSource() = default;
  virtual RgbImage load(const SlideRecord& record) const = 0;
  // Ground-truth lesion mask, needed only for segmenter training.
  virtual Mask load_roi_mask(const SlideRecord& record) const = 0;
};

// PPM rasters resolved relative to `base_dir`; masks at synth::mask_path_for(raster).
class FileRasterSource : public RasterSource {
 public:
  explicit FileRasterSource(std::filesystem::path base_dir) : base_(std::move(base_dir)) {}
  RgbImage load(const SlideRecord& record) const override;
  Mask load_roi_mask(const SlideRecord& record) const override;

 private:
  std::filesystem::path base_;
};

// Renders slides on demand exactly as synth::generate_corpus would write them.
class SynthRasterSource : public RasterSource {
 public:
  SynthRasterSource(std::vector<synth::LabProfile> labs, std::uint64_t corpus_seed, int height, int width);
  RgbImage load(const SlideRecord& record) const override;
  Mask load_roi_mask(const SlideRecord& record) const override;

 private:
  synth::SynthSlide render(const SlideRecord& record) const;
  std::map<std::string, synth::LabProfile> labs_;
  std::uint64_t seed_;
  int height_, width_;
};

// Read-only models for one slide. A null adapter skips the adapt stage.
struct SlideModels {
  const AdapterModel* adapter = nullptr;
  const Segmenter* segmenter = nullptr;
  const NetParams* params = nullptr;
};

struct LabModels {
  AdapterModel adapter;
  NetParams params;
  ThresholdSet thresholds;
  double validation_accuracy = 0.0;
  double base_validation_accuracy = 0.0;
};

// Everything a frozen run needs. Labs without calibration use the base classifier,
// no adaptation, and the reference thresholds.
struct ModelBundle {
  DomainStats reference;
  Segmenter segmenter;
  NetParams base_params;
  ThresholdSet reference_thresholds;
  std::map<std::string, LabModels> labs;

  SlideModels models_for(const std::string& lab_id, bool adapt_enabled = true) const;
  const ThresholdSet& thresholds_for(const std::string& lab_id) const;
  // Stable identifier of the model contents.
  std::string version() const;
};

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
// Throws IoError naming the first missing file.
ModelBundle load_bundle(const std::filesystem::path& dir);

// Stages up to the slide embedding.
struct SlideFeatures {
  std::size_t tile_count = 0;
  std::vector<std::size_t> roi_tiles;
  SlideEmbedding embedding{};
  bool has_roi() const { return !roi_tiles.empty(); }
};

// segment -> tile -> adapt -> ROI -> featurize/pool. Stage times are written into `timing`
// when given (featurize/pool counts toward classify).
SlideFeatures extract_features(const RgbImage& raster, const std::string& slide_id, const SlideModels& models,
                               const Config& cfg, StageTiming* timing = nullptr);

struct SlideRun {
  SlideResult result;
  StageTiming timing;
};

// Full per-slide pipeline. Failures become an Error result; NoROI slides skip
// classification entirely.
SlideRun run_slide(const SlideRecord& record, const RasterSource& source, const SlideModels& models,
                   const Config& cfg, std::uint64_t seed);

struct CorpusRun {
  std::vector<SlideResult> slides;    // ordered by slide_id
  std::vector<StageTiming> timings;   // same order
  std::vector<SpecimenResult> specimens;
  double elapsed_s = 0.0;
  double throughput_per_hour = 0.0;
};

CorpusRun run_corpus(std::span<const SlideRecord> records, const RasterSource& source, const ModelBundle& models,
                     const Config& cfg, int workers, std::uint64_t seed);

struct Quartiles {
  double q1 = 0, median = 0, q3 = 0;
};
// Linear interpolation between order statistics. Throws InvalidInput when empty.
Quartiles quartiles(std::vector<double> values);

struct ProfileSummary {
  std::size_t slides = 0;
  std::size_t no_roi = 0;
  std::array<Quartiles, kNumStages> stages{};
  Quartiles total;
  double median_total_with_roi = 0.0;  // NaN when every slide is NoROI
  double elapsed_s = 0.0;
  double throughput_per_hour = 0.0;
};

// Throws InvalidInput on an empty timing set.
ProfileSummary profile(std::span<const StageTiming> timings, double elapsed_s);
std::string format_profile(const ProfileSummary& p);

void write_timings(std::span<const StageTiming> timings, const std::filesystem::path& path);
std::vector<StageTiming> read_timings(const std::filesystem::path& path);

// Per-slide results with full-precision column means, the input for evaluation.
void write_slide_results(std::span<const SlideResult> slides, const std::filesystem::path& path);
std::vector<SlideResult> read_slide_results(const std::filesystem::path& path);

struct RunManifest {
  std::string run_id;
  std::vector<std::pair<std::string, std::string>> config;
  std::string model_version;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string input_manifest;
  std::string models_dir;
  std::string kernels;
  double elapsed_s = 0.0;
};
void write_run_manifest(const RunManifest& m, const std::filesystem::path& path);

}  // namespace wsi
