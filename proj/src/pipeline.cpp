#include "wsi/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "wsi/error.hpp"
#include "wsi/kernels.hpp"
#include "wsi/parallel.hpp"
#include "wsi/rng.hpp"

namespace wsi {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& source, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(source, line, "bad number '" + s + "'");
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

double StageTiming::stage_sum() const { return std::accumulate(stage_ms.begin(), stage_ms.end(), 0.0); }

RgbImage FileRasterSource::load(const SlideRecord& record) const { return read_ppm(base_ / record.raster_path); }

Mask FileRasterSource::load_roi_mask(const SlideRecord& record) const {
  return read_pgm(base_ / synth::mask_path_for(record.raster_path));
}

SynthRasterSource::SynthRasterSource(std::vector<synth::LabProfile> labs, std::uint64_t corpus_seed, int height,
                                     int width)
    : seed_(corpus_seed), height_(height), width_(width) {
  for (auto& lab : labs) {
    lab.validate();
    labs_.emplace(lab.lab_id, std::move(lab));
  }
}

synth::SynthSlide SynthRasterSource::render(const SlideRecord& record) const {
  const auto it = labs_.find(record.lab_id);
  if (it == labs_.end()) throw InvalidInput("no lab profile for '" + record.lab_id + "'");
  return synth::generate_slide(record.truth, it->second, synth::slide_seed(seed_, record.slide_id), height_, width_);
}

RgbImage SynthRasterSource::load(const SlideRecord& record) const { return render(record).raster; }
Mask SynthRasterSource::load_roi_mask(const SlideRecord& record) const { return render(record).roi_mask; }

SlideModels ModelBundle::models_for(const std::string& lab_id, bool adapt_enabled) const {
  SlideModels m;
  m.segmenter = &segmenter;
  m.params = &base_params;
  if (const auto it = labs.find(lab_id); it != labs.end()) {
    m.params = &it->second.params;
    if (adapt_enabled && !it->second.adapter.is_identity()) m.adapter = &it->second.adapter;
  }
  return m;
}

const ThresholdSet& ModelBundle::thresholds_for(const std::string& lab_id) const {
  const auto it = labs.find(lab_id);
  return it == labs.end() ? reference_thresholds : it->second.thresholds;
}

std::string ModelBundle::version() const {
  std::ostringstream os;
  os.precision(17);
  os << reference.mean[0] << reference.mean[1] << reference.mean[2] << reference.std[0] << reference.std[1]
     << reference.std[2];
  os << format_segmenter(segmenter) << format_params(base_params) << format_thresholds(reference_thresholds);
  for (const auto& [lab, m] : labs)
    os << lab << format_adapter(m.adapter) << format_params(m.params) << format_thresholds(m.thresholds);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash(os.str())));
  return buf;
}

void save_bundle(const ModelBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "labs");
  save_adapter({b.reference, b.reference}, dir / "reference_stats.txt");
  save_segmenter(b.segmenter, dir / "segmenter.txt");
  save_params(b.base_params, dir / "base_params.txt");
  save_thresholds(b.reference_thresholds, dir / "reference_thresholds.txt");
  for (const auto& [lab, m] : b.labs) {
    const auto ldir = dir / "labs" / lab;
    std::filesystem::create_directories(ldir);
    save_adapter(m.adapter, ldir / "adapter.txt");
    save_params(m.params, ldir / "params.txt");
    save_thresholds(m.thresholds, ldir / "thresholds.txt");
    std::ofstream acc(ldir / "validation.txt");
    acc.precision(17);
    acc << "validation_accuracy " << m.validation_accuracy << "\nbase_validation_accuracy "
        << m.base_validation_accuracy << '\n';
  }
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  const auto need = [](const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw IoError("missing model file: " + p.string());
    return p;
  };
  ModelBundle b;
  b.reference = load_adapter(need(dir / "reference_stats.txt")).target;
  b.segmenter = load_segmenter(need(dir / "segmenter.txt"));
  b.base_params = load_params(need(dir / "base_params.txt"));
  b.reference_thresholds = load_thresholds(need(dir / "reference_thresholds.txt"));
  if (std::filesystem::is_directory(dir / "labs")) {
    std::vector<std::filesystem::path> lab_dirs;
    for (const auto& e : std::filesystem::directory_iterator(dir / "labs"))
      if (e.is_directory()) lab_dirs.push_back(e.path());
    std::sort(lab_dirs.begin(), lab_dirs.end());
    for (const auto& ldir : lab_dirs) {
      LabModels m;
      m.adapter = load_adapter(need(ldir / "adapter.txt"));
      m.params = load_params(need(ldir / "params.txt"));
      m.thresholds = load_thresholds(need(ldir / "thresholds.txt"));
      if (std::ifstream acc(ldir / "validation.txt"); acc) {
        std::string key;
        double v;
        while (acc >> key >> v) {
          if (key == "validation_accuracy") m.validation_accuracy = v;
          if (key == "base_validation_accuracy") m.base_validation_accuracy = v;
        }
      }
      b.labs.emplace(ldir.filename().string(), std::move(m));
    }
  }
  return b;
}

SlideFeatures extract_features(const RgbImage& raster, const std::string& slide_id, const SlideModels& models,
                               const Config& cfg, StageTiming* timing) {
  if (!models.segmenter) throw ContractViolation("extract_features: segmenter not loaded");
  StageTiming local;
  StageTiming& t = timing ? *timing : local;

  auto t0 = Clock::now();
  const TissueMask mask = segment_tissue(raster, cfg.tiling);
  t.stage_ms[0] = ms_since(t0);

  t0 = Clock::now();
  std::vector<Tile> tiles = tile(raster, mask, cfg.tiling, slide_id);
  t.stage_ms[1] = ms_since(t0);

  t0 = Clock::now();
  if (models.adapter) {
    const AdaptTables tables = make_adapt_tables(*models.adapter);
    for (auto& tl : tiles) tl = adapt(tl, tables);
  }
  t.stage_ms[2] = ms_since(t0);

  t0 = Clock::now();
  std::vector<SegMap> maps;
  maps.reserve(tiles.size());
  for (const auto& tl : tiles) maps.push_back(segment(tl, *models.segmenter));
  SlideFeatures f;
  f.tile_count = tiles.size();
  f.roi_tiles = select(tiles, maps, cfg.roi.theta).selected;
  t.stage_ms[3] = ms_since(t0);

  if (f.has_roi()) {
    t0 = Clock::now();
    std::vector<FeatureVector> features;
    features.reserve(f.roi_tiles.size());
    for (std::size_t i : f.roi_tiles) features.push_back(featurize(tiles[i]));
    f.embedding = pool(features);
    t.stage_ms[4] = ms_since(t0);
  }
  return f;
}

SlideRun run_slide(const SlideRecord& record, const RasterSource& source, const SlideModels& models,
                   const Config& cfg, std::uint64_t seed) {
  SlideRun run;
  run.result.slide_id = record.slide_id;
  run.result.specimen_id = record.specimen_id;
  run.result.lab_id = record.lab_id;
  run.timing.slide_id = record.slide_id;
  const auto start = Clock::now();
  try {
    const RgbImage raster = source.load(record);
    const SlideFeatures f = extract_features(raster, record.slide_id, models, cfg, &run.timing);
    if (!f.has_roi()) {
      run.result.status = SlideStatus::NoROI;
      run.timing.no_roi = true;
    } else {
      if (!models.params) throw ContractViolation("run_slide: classifier not loaded");
      auto t0 = Clock::now();
      run.result.matrix = mc_predict(f.embedding, *models.params, cfg.confidence.repetitions,
                                     cfg.confidence.keep_prob, seed, record.slide_id);
      run.timing.stage_ms[4] += ms_since(t0);
      t0 = Clock::now();
      run.result.score = score(run.result.matrix);
      run.timing.stage_ms[5] = ms_since(t0);
      run.result.status = SlideStatus::Classified;
    }
  } catch (const std::exception& e) {
    run.result = SlideResult{record.slide_id, record.specimen_id, record.lab_id, SlideStatus::Error, {}, {}, e.what()};
  }
  run.timing.total_ms = ms_since(start);
  return run;
}

CorpusRun run_corpus(std::span<const SlideRecord> records, const RasterSource& source, const ModelBundle& models,
                     const Config& cfg, int workers, std::uint64_t seed) {
  if (workers < 1) throw InvalidInput("run_corpus: workers must be >= 1");
  std::vector<const SlideRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->slide_id < b->slide_id; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (order[i]->slide_id == order[i - 1]->slide_id)
      throw InvalidInput("run_corpus: duplicate slide_id '" + order[i]->slide_id + "'");

  std::vector<SlideRun> runs(order.size());
  const auto start = Clock::now();
  parallel_for(order.size(), workers, [&](std::size_t i) {
    const auto& rec = *order[i];
    runs[i] = run_slide(rec, source, models.models_for(rec.lab_id, cfg.adapt.enabled), cfg, seed);
  });
  CorpusRun out;
  out.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
  out.slides.reserve(runs.size());
  out.timings.reserve(runs.size());
  for (auto& r : runs) {
    out.slides.push_back(std::move(r.result));
    out.timings.push_back(std::move(r.timing));
  }
  out.specimens = aggregate_all(out.slides);
  out.throughput_per_hour = out.slides.empty() ? 0.0 : double(out.slides.size()) / out.elapsed_s * 3600.0;
  return out;
}

Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("quartiles: empty sample");
  std::sort(v.begin(), v.end());
  const auto at = [&](double p) {
    const double h = p * double(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

ProfileSummary profile(std::span<const StageTiming> timings, double elapsed_s) {
  if (timings.empty()) throw InvalidInput("profile: no timings");
  ProfileSummary p;
  p.slides = timings.size();
  std::vector<double> totals, with_roi;
  for (const auto& t : timings) {
    totals.push_back(t.total_ms);
    if (t.no_roi)
      ++p.no_roi;
    else
      with_roi.push_back(t.total_ms);
  }
  for (std::size_t s = 0; s < kNumStages; ++s) {
    std::vector<double> v;
    v.reserve(timings.size());
    for (const auto& t : timings) v.push_back(t.stage_ms[s]);
    p.stages[s] = quartiles(std::move(v));
  }
  p.total = quartiles(totals);
  p.median_total_with_roi = with_roi.empty() ? std::numeric_limits<double>::quiet_NaN() : quartiles(with_roi).median;
  p.elapsed_s = elapsed_s;
  p.throughput_per_hour = elapsed_s > 0 ? double(p.slides) / elapsed_s * 3600.0 : 0.0;
  return p;
}

std::string format_profile(const ProfileSummary& p) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "slides " << p.slides << " (NoROI " << p.no_roi << ")\n";
  os << "stage      q1_ms      median_ms  q3_ms\n";
  for (std::size_t s = 0; s < kNumStages; ++s)
    os << kStageNames[s] << ' ' << p.stages[s].q1 << ' ' << p.stages[s].median << ' ' << p.stages[s].q3 << '\n';
  os << "total " << p.total.q1 << ' ' << p.total.median << ' ' << p.total.q3 << '\n';
  os << "median_total_ms_excluding_noroi " << p.median_total_with_roi << '\n';
  os << "elapsed_s " << p.elapsed_s << '\n';
  os << "throughput_slides_per_hour " << p.throughput_per_hour << '\n';
  return os.str();
}

void write_timings(std::span<const StageTiming> timings, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << "slide_id,segment_ms,tile_ms,adapt_ms,roi_ms,classify_ms,score_ms,total_ms,no_roi\n";
  for (const auto& t : timings) {
    out << t.slide_id;
    for (double v : t.stage_ms) out << ',' << v;
    out << ',' << t.total_ms << ',' << (t.no_roi ? 1 : 0) << '\n';
  }
}

std::vector<StageTiming> read_timings(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  const std::string source = path.string();
  std::string line;
  std::getline(in, line);
  if (line.rfind("slide_id,segment_ms", 0) != 0) throw ParseError(source, 1, "not a timing file");
  std::vector<StageTiming> out;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 9) throw ParseError(source, n, "expected 9 fields");
    StageTiming t;
    t.slide_id = f[0];
    for (std::size_t s = 0; s < kNumStages; ++s) t.stage_ms[s] = parse_double(f[1 + s], source, n);
    t.total_ms = parse_double(f[7], source, n);
    t.no_roi = f[8] == "1";
    out.push_back(std::move(t));
  }
  return out;
}

void write_slide_results(std::span<const SlideResult> slides, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "slide_id,specimen_id,lab_id,status,class,score,mean_basaloid,mean_squamous,mean_melanocytic,mean_other,"
         "error\n";
  for (const auto& s : slides) {
    out << s.slide_id << ',' << s.specimen_id << ',' << s.lab_id << ',' << to_string(s.status) << ',';
    if (s.classified()) {
      out << to_string(s.score.cls) << ',' << s.score.value;
      for (double m : s.score.column_means) out << ',' << m;
    } else {
      out << ",,,,,";
    }
    std::string err = s.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << ',' << err << '\n';
  }
}

std::vector<SlideResult> read_slide_results(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  const std::string source = path.string();
  std::string line;
  std::getline(in, line);
  if (line.rfind("slide_id,specimen_id,lab_id,status", 0) != 0) throw ParseError(source, 1, "not a slide results file");
  std::vector<SlideResult> out;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 11) throw ParseError(source, n, "expected 11 fields");
    SlideResult r;
    r.slide_id = f[0];
    r.specimen_id = f[1];
    r.lab_id = f[2];
    if (f[3] == "Classified") {
      r.status = SlideStatus::Classified;
      const auto cls = parse_class(f[4]);
      if (!cls) throw ParseError(source, n, "unknown class '" + f[4] + "'");
      r.score.cls = *cls;
      r.score.value = parse_double(f[5], source, n);
      for (std::size_t c = 0; c < kNumClasses; ++c) r.score.column_means[c] = parse_double(f[6 + c], source, n);
    } else if (f[3] == "NoROI") {
      r.status = SlideStatus::NoROI;
    } else if (f[3] == "Error") {
      r.status = SlideStatus::Error;
      r.error = f[10];
    } else {
      throw ParseError(source, n, "unknown status '" + f[3] + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_run_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "run_id=" << m.run_id << '\n'
      << "model_version=" << m.model_version << '\n'
      << "seed=" << m.seed << '\n'
      << "workers=" << m.workers << '\n'
      << "input_manifest=" << m.input_manifest << '\n'
      << "models_dir=" << m.models_dir << '\n'
      << "kernels=" << m.kernels << '\n'
      << "elapsed_s=" << m.elapsed_s << '\n';
  for (const auto& [k, v] : m.config) out << "config." << k << '=' << v << '\n';
}

}  // namespace wsi
