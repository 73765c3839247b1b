#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsi/pipeline.hpp"

namespace wsi {

using LogFn = std::function<void(const std::string&)>;

// Tissue-pixel statistics over every tile of the given slides, merged in slide_id order.
DomainStats fit_domain_over(std::span<const SlideRecord> records, const RasterSource& source, const Config& cfg,
                            int workers);

// Slide embeddings in input order; nullopt for NoROI slides.
std::vector<std::optional<SlideEmbedding>> compute_embeddings(std::span<const SlideRecord> records,
                                                              const RasterSource& source, const SlideModels& models,
                                                              const Config& cfg, int workers);

// MC prediction and scoring of precomputed embeddings.
std::vector<SlideResult> score_embeddings(std::span<const SlideRecord> records,
                                          std::span<const std::optional<SlideEmbedding>> embeddings,
                                          const NetParams& params, const Config& cfg);

// Specimen outcomes (Classified specimens only) against the manifest truth.
std::vector<ValidationOutcome> validation_outcomes(std::span<const SpecimenResult> specimens,
                                                   std::span<const SlideRecord> records);

struct TrainSummary {
  std::size_t train_slides = 0;
  std::size_t train_examples = 0;
  std::size_t validation_specimens = 0;
  double train_accuracy = 0.0;
  std::vector<std::string> warnings;
};

// Reference development: domain statistics, segmenter, base classifier, and reference
// thresholds from the Train and Validation splits.
ModelBundle train_models(const DatasetManifest& manifest, const RasterSource& source, const Config& cfg, int workers,
                         TrainSummary* summary = nullptr, const LogFn& log = {});

struct CalibrationSummary {
  std::size_t finetune_slides = 0;
  std::size_t validation_slides = 0;
  std::size_t validation_specimens = 0;
  std::vector<std::string> warnings;
};

// Per-lab calibration on CalibFinetune/CalibValidation: lab statistics, fine-tuned
// classifier, and thresholds. With adaptation disabled the adapter is the identity.
LabModels calibrate_lab(const ModelBundle& bundle, const DatasetManifest& manifest, const std::string& lab_id,
                        const RasterSource& source, const Config& cfg, int workers,
                        CalibrationSummary* summary = nullptr, const LogFn& log = {});

}  // namespace wsi
