#include "wsi/workflow.hpp"

#include <algorithm>
#include <map>

#include "wsi/error.hpp"
#include "wsi/parallel.hpp"
#include "wsi/rng.hpp"

namespace wsi {

namespace {

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

std::vector<SlideRecord> sorted(std::vector<SlideRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const SlideRecord& a, const SlideRecord& b) { return a.slide_id < b.slide_id; });
  return records;
}

TrainConfig train_config(const Config& cfg) {
  TrainConfig t;
  t.epochs = cfg.classifier.epochs;
  t.learning_rate = cfg.classifier.learning_rate;
  t.batch_size = cfg.classifier.batch_size;
  t.seed = cfg.classifier.seed;
  t.keep_prob = cfg.confidence.keep_prob;
  return t;
}

std::vector<Example> examples_of(std::span<const SlideRecord> records,
                                 std::span<const std::optional<SlideEmbedding>> embeddings) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (embeddings[i]) out.push_back({*embeddings[i], records[i].truth});
  return out;
}

ThresholdSet thresholds_from(std::span<const ValidationOutcome> outcomes, const Config& cfg) {
  if (outcomes.empty()) throw InvalidInput("threshold calibration: no classified validation specimens");
  return calibrate_thresholds(outcomes, cfg.confidence.targets);
}

}  // namespace

DomainStats fit_domain_over(std::span<const SlideRecord> records, const RasterSource& source, const Config& cfg,
                            int workers) {
  std::vector<DomainAccumulator> parts(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const RgbImage raster = source.load(records[i]);
    for (const auto& t : tile(raster, segment_tissue(raster, cfg.tiling), cfg.tiling, records[i].slide_id))
      parts[i].add(t);
  });
  DomainAccumulator total;
  for (const auto& p : parts) total.merge(p);
  return total.finish();
}

std::vector<std::optional<SlideEmbedding>> compute_embeddings(std::span<const SlideRecord> records,
                                                              const RasterSource& source, const SlideModels& models,
                                                              const Config& cfg, int workers) {
  std::vector<std::optional<SlideEmbedding>> out(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const auto f = extract_features(source.load(records[i]), records[i].slide_id, models, cfg);
    if (f.has_roi()) out[i] = f.embedding;
  });
  return out;
}

std::vector<SlideResult> score_embeddings(std::span<const SlideRecord> records,
                                          std::span<const std::optional<SlideEmbedding>> embeddings,
                                          const NetParams& params, const Config& cfg) {
  std::vector<SlideResult> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    SlideResult r;
    r.slide_id = records[i].slide_id;
    r.specimen_id = records[i].specimen_id;
    r.lab_id = records[i].lab_id;
    if (embeddings[i]) {
      r.matrix = mc_predict(*embeddings[i], params, cfg.confidence.repetitions, cfg.confidence.keep_prob, cfg.seed,
                            r.slide_id);
      r.score = score(r.matrix);
      r.status = SlideStatus::Classified;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ValidationOutcome> validation_outcomes(std::span<const SpecimenResult> specimens,
                                                   std::span<const SlideRecord> records) {
  std::map<std::string, ClassLabel> truth;
  for (const auto& r : records) truth[r.specimen_id] = r.truth;
  std::vector<ValidationOutcome> out;
  for (const auto& s : specimens) {
    if (!s.classified) continue;
    const auto it = truth.find(s.specimen_id);
    if (it == truth.end()) throw InvalidInput("validation_outcomes: unknown specimen '" + s.specimen_id + "'");
    out.push_back({s.score, s.cls == it->second});
  }
  return out;
}

ModelBundle train_models(const DatasetManifest& manifest, const RasterSource& source, const Config& cfg, int workers,
                         TrainSummary* summary, const LogFn& log) {
  const auto train = sorted(manifest.select(Split::Train));
  const auto validation = sorted(manifest.select(Split::Validation));
  if (train.empty()) throw InvalidInput("train: manifest has no Train slides");
  if (validation.empty()) throw InvalidInput("train: manifest has no Validation slides");

  // Pass 1: reference statistics and a per-slide tile sample for the segmenter.
  say(log, "fitting reference statistics and sampling segmenter tiles (" + std::to_string(train.size()) + " slides)");
  std::vector<DomainAccumulator> parts(train.size());
  std::vector<std::vector<Tile>> seg_tiles(train.size());
  std::vector<std::vector<Mask>> seg_masks(train.size());
  parallel_for(train.size(), workers, [&](std::size_t i) {
    const auto& rec = train[i];
    const RgbImage raster = source.load(rec);
    const Mask roi = source.load_roi_mask(rec);
    auto tiles = tile(raster, segment_tissue(raster, cfg.tiling), cfg.tiling, rec.slide_id);
    for (const auto& t : tiles) parts[i].add(t);
    Rng rng(derive_seed(cfg.seed, rec.slide_id, "segmenter-tiles"));
    for (std::size_t k = tiles.size(); k > 1; --k) std::swap(tiles[k - 1], tiles[uniform_index(rng, k)]);
    tiles.resize(std::min<std::size_t>(tiles.size(), std::size_t(cfg.roi.train_tiles_per_slide)));
    for (auto& t : tiles) {
      Mask crop(t.pixels.height, t.pixels.width);
      for (int r = 0; r < crop.height; ++r)
        for (int c = 0; c < crop.width; ++c) crop.at(r, c) = roi.at(t.row + r, t.col + c);
      seg_masks[i].push_back(std::move(crop));
      seg_tiles[i].push_back(std::move(t));
    }
  });
  ModelBundle bundle;
  DomainAccumulator total;
  for (const auto& p : parts) total.merge(p);
  bundle.reference = total.finish();

  std::vector<LabeledTile> labeled;
  for (std::size_t i = 0; i < train.size(); ++i)
    for (std::size_t k = 0; k < seg_tiles[i].size(); ++k) labeled.push_back({&seg_tiles[i][k], seg_masks[i][k]});
  if (labeled.empty()) throw InvalidInput("train: no tissue tiles in the Train split");
  say(log, "training segmenter on " + std::to_string(labeled.size()) + " tiles");
  bundle.segmenter = train_segmenter(labeled, cfg.roi, derive_seed(cfg.seed, "segmenter"));
  labeled.clear();
  seg_tiles.clear();
  seg_masks.clear();

  // Pass 2: embeddings and the base classifier. The reference lab needs no adaptation.
  say(log, "computing training embeddings");
  SlideModels models{nullptr, &bundle.segmenter, nullptr};
  const auto train_emb = compute_embeddings(train, source, models, cfg, workers);
  const auto examples = examples_of(train, train_emb);
  if (examples.empty()) throw InvalidInput("train: no Train slide has a detected ROI");
  TrainSummary local;
  TrainSummary& s = summary ? *summary : local;
  s.train_slides = train.size();
  s.train_examples = examples.size();
  say(log, "training classifier on " + std::to_string(examples.size()) + " slides");
  bundle.base_params = wsi::train(examples, train_config(cfg), &s.warnings);
  s.train_accuracy = accuracy(bundle.base_params, examples);

  say(log, "calibrating reference thresholds on " + std::to_string(validation.size()) + " validation slides");
  const auto val_emb = compute_embeddings(validation, source, models, cfg, workers);
  const auto specimens = aggregate_all(score_embeddings(validation, val_emb, bundle.base_params, cfg));
  const auto outcomes = validation_outcomes(specimens, validation);
  s.validation_specimens = specimens.size();
  bundle.reference_thresholds = thresholds_from(outcomes, cfg);
  return bundle;
}

LabModels calibrate_lab(const ModelBundle& bundle, const DatasetManifest& manifest, const std::string& lab_id,
                        const RasterSource& source, const Config& cfg, int workers, CalibrationSummary* summary,
                        const LogFn& log) {
  const auto finetune = sorted(manifest.select(Split::CalibFinetune, lab_id));
  const auto validation = sorted(manifest.select(Split::CalibValidation, lab_id));
  if (finetune.empty()) throw InvalidInput("calibrate: lab '" + lab_id + "' has no CalibFinetune slides");
  if (validation.empty()) throw InvalidInput("calibrate: lab '" + lab_id + "' has no CalibValidation slides");

  LabModels lab;
  if (cfg.adapt.enabled) {
    say(log, lab_id + ": fitting lab statistics on " + std::to_string(finetune.size()) + " slides");
    lab.adapter = {fit_domain_over(finetune, source, cfg, workers), bundle.reference};
  } else {
    lab.adapter = {bundle.reference, bundle.reference};
  }

  SlideModels models{lab.adapter.is_identity() ? nullptr : &lab.adapter, &bundle.segmenter, nullptr};
  say(log, lab_id + ": computing embeddings");
  const auto ft_emb = compute_embeddings(finetune, source, models, cfg, workers);
  const auto val_emb = compute_embeddings(validation, source, models, cfg, workers);
  const auto ft_examples = examples_of(finetune, ft_emb);
  const auto val_examples = examples_of(validation, val_emb);
  if (ft_examples.empty()) throw InvalidInput("calibrate: no CalibFinetune slide of '" + lab_id + "' has an ROI");

  CalibrationSummary local;
  CalibrationSummary& s = summary ? *summary : local;
  s.finetune_slides = finetune.size();
  s.validation_slides = validation.size();

  TrainConfig tc = train_config(cfg);
  tc.epochs = cfg.classifier.finetune_epochs;
  tc.seed = derive_seed(cfg.classifier.seed, lab_id, "finetune");
  say(log, lab_id + ": fine-tuning on " + std::to_string(ft_examples.size()) + " slides");
  const auto tuned = fine_tune(bundle.base_params, ft_examples, val_examples, tc, cfg.classifier.finetune_lr_scale,
                               &s.warnings);
  lab.params = tuned.params;
  lab.validation_accuracy = tuned.validation_accuracy;
  lab.base_validation_accuracy = tuned.base_validation_accuracy;

  const auto specimens = aggregate_all(score_embeddings(validation, val_emb, lab.params, cfg));
  s.validation_specimens = specimens.size();
  lab.thresholds = thresholds_from(validation_outcomes(specimens, validation), cfg);
  return lab;
}

}  // namespace wsi
