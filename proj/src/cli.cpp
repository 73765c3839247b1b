#include "wsi/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "wsi/error.hpp"
#include "wsi/evaluation.hpp"
#include "wsi/kernels.hpp"
#include "wsi/rng.hpp"
#include "wsi/workflow.hpp"

namespace wsi::cli {

namespace fs = std::filesystem;

namespace {

// A missing input is a data error that names the path.
class MissingInput : public std::runtime_error {
 public:
  explicit MissingInput(const fs::path& p) : std::runtime_error("missing input: " + p.string()) {}
};

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingInput(p);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  int workers = 0;  // 0: use config
};

Config load(const Common& c) {
  Config cfg;
  if (!c.config_path.empty()) {
    require_file(c.config_path);
    cfg = load_config(c.config_path);
  }
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "expected key=value in --set '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.workers > 0) cfg.workers = c.workers;
  return cfg;
}

std::string config_help() {
  std::ostringstream os;
  os << "Configuration keys (key=value file via --config, or --set key=value):\n";
  for (const auto& d : config_docs()) os << "  " << d.key << " (default " << d.default_value << "): " << d.doc << '\n';
  os << "Exit codes: 0 success, 1 usage or configuration error, 2 missing or malformed data.";
  return os.str();
}

std::optional<Split> split_arg(const std::string& s) {
  if (s.empty() || s == "all") return std::nullopt;
  const auto split = parse_split(s);
  if (!split) throw CLI::ValidationError("--split", "unknown split '" + s + "'");
  return split;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Whole-slide image triage: synthesize, split, train, calibrate, run, evaluate, profile"};
  app.footer(config_help());
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key=value configuration file");
    sub->add_option("--set", common.overrides, "override one configuration key (key=value), repeatable");
    sub->add_option("--workers", common.workers, "parallel slide workers (overrides the workers key)")
        ->check(CLI::PositiveNumber);
  };

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic multi-lab corpus with ground truth");
  add_common(synth_cmd);
  std::string synth_out, synth_labs = "reference,lab_a,lab_b,lab_c";
  int synth_specimens = 40;
  std::uint64_t synth_seed = 7;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--specimens", synth_specimens, "specimens per lab")->capture_default_str();
  synth_cmd->add_option("--labs", synth_labs, "comma separated preset lab profiles")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "corpus seed")->capture_default_str();

  // split
  auto* split_cmd = app.add_subcommand("split", "assign specimen-grouped splits");
  add_common(split_cmd);
  std::string split_in, split_out, split_scheme = "development", split_labs;
  std::vector<double> split_ratios;
  std::uint64_t split_seed = 1;
  split_cmd->add_option("--manifest", split_in, "input manifest")->required();
  split_cmd->add_option("--out", split_out, "output manifest (default: overwrite input)");
  split_cmd->add_option("--scheme", split_scheme, "development (Train/Validation/Test) or calibration "
                                                  "(CalibFinetune/CalibValidation/Test)")
      ->check(CLI::IsMember({"development", "calibration"}))
      ->capture_default_str();
  split_cmd->add_option("--ratios", split_ratios, "three ratios summing to 1 (default 0.7,0.15,0.15 or 0.48,0.12,0.4)")
      ->delimiter(',')
      ->expected(3);
  split_cmd->add_option("--labs", split_labs, "comma separated labs to (re)assign (default: all)");
  split_cmd->add_option("--seed", split_seed, "shuffle seed")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "fit reference statistics, segmenter, classifier and thresholds");
  add_common(train_cmd);
  std::string train_manifest, train_models_dir;
  train_cmd->add_option("--manifest", train_manifest, "manifest with Train and Validation splits")->required();
  train_cmd->add_option("--models", train_models_dir, "model output directory")->required();

  // calibrate
  auto* cal_cmd = app.add_subcommand("calibrate", "per-lab statistics, fine-tuning and thresholds");
  add_common(cal_cmd);
  std::string cal_manifest, cal_models_dir, cal_lab;
  cal_cmd->add_option("--manifest", cal_manifest, "manifest with CalibFinetune and CalibValidation splits")->required();
  cal_cmd->add_option("--models", cal_models_dir, "model directory from train (updated in place)")->required();
  cal_cmd->add_option("--lab", cal_lab, "lab to calibrate")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "frozen run over a manifest");
  add_common(run_cmd);
  std::string run_manifest, run_models_dir, run_out, run_split = "Test", run_lab;
  std::optional<std::uint64_t> run_seed;
  run_cmd->add_option("--manifest", run_manifest, "input manifest")->required();
  run_cmd->add_option("--models", run_models_dir, "model directory")->required();
  run_cmd->add_option("--out", run_out, "output directory")->required();
  run_cmd->add_option("--split", run_split, "split to run, or 'all'")->capture_default_str();
  run_cmd->add_option("--lab", run_lab, "restrict to one lab");
  run_cmd->add_option("--seed", run_seed, "global seed (default: the seed key)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "selective-classification metrics of a run");
  add_common(eval_cmd);
  std::string eval_manifest, eval_models_dir, eval_run, eval_out;
  eval_cmd->add_option("--manifest", eval_manifest, "manifest with ground truth")->required();
  eval_cmd->add_option("--models", eval_models_dir, "model directory (thresholds)")->required();
  eval_cmd->add_option("--run", eval_run, "run output directory")->required();
  eval_cmd->add_option("--out", eval_out, "report directory (default: <run>/report)");

  // profile
  auto* prof_cmd = app.add_subcommand("profile", "per-stage timing summary of a run");
  std::string prof_run;
  prof_cmd->add_option("--run", prof_run, "run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const LogFn log = [&](const std::string& m) { err << m << '\n'; };
  try {
    if (*synth_cmd) {
      const Config cfg = load(common);
      synth::CorpusSpec spec;
      spec.specimens_per_lab = synth_specimens;
      for (const auto& id : split_list(synth_labs)) spec.labs.push_back(synth::preset_lab(id));
      spec.slides_min = cfg.synth.slides_min;
      spec.slides_max = cfg.synth.slides_max;
      spec.seed = synth_seed;
      spec.height = cfg.synth.height;
      spec.width = cfg.synth.width;
      const auto m = synth::generate_corpus(spec, synth_out, cfg.workers);
      out << "wrote " << m.records.size() << " slides to " << (fs::path(synth_out) / "manifest.txt").string() << '\n';
    } else if (*split_cmd) {
      require_file(split_in);
      const auto scheme = split_scheme == "development" ? SplitScheme::Development : SplitScheme::Calibration;
      SplitRatios ratios = scheme == SplitScheme::Development ? SplitRatios{0.7, 0.15, 0.15}
                                                              : SplitRatios{0.48, 0.12, 0.40};
      if (!split_ratios.empty()) ratios = {split_ratios[0], split_ratios[1], split_ratios[2]};
      const auto m = build_splits(load_manifest(split_in), ratios, split_seed, scheme, split_list(split_labs));
      save_manifest(m, split_out.empty() ? split_in : split_out);
      std::map<std::string, std::size_t> counts;
      for (const auto& [slide, split] : m.splits) ++counts[std::string(to_string(split))];
      for (const auto& [name, n] : counts) out << name << ' ' << n << " slides\n";
    } else if (*train_cmd) {
      require_file(train_manifest);
      const Config cfg = load(common);
      const auto manifest = load_manifest(train_manifest);
      FileRasterSource source(fs::path(train_manifest).parent_path());
      TrainSummary summary;
      const auto bundle = train_models(manifest, source, cfg, cfg.workers, &summary, log);
      save_bundle(bundle, train_models_dir);
      for (const auto& w : summary.warnings) err << "warning: " << w << '\n';
      out << "train slides " << summary.train_slides << ", examples " << summary.train_examples
          << ", train accuracy " << summary.train_accuracy << '\n'
          << format_thresholds(bundle.reference_thresholds);
    } else if (*cal_cmd) {
      require_file(cal_manifest);
      const Config cfg = load(common);
      auto bundle = load_bundle(cal_models_dir);
      const auto manifest = load_manifest(cal_manifest);
      FileRasterSource source(fs::path(cal_manifest).parent_path());
      CalibrationSummary summary;
      auto lab = calibrate_lab(bundle, manifest, cal_lab, source, cfg, cfg.workers, &summary, log);
      for (const auto& w : summary.warnings) err << "warning: " << w << '\n';
      out << cal_lab << ": validation accuracy " << lab.validation_accuracy << " (base "
          << lab.base_validation_accuracy << ")\n"
          << format_adapter(lab.adapter) << format_thresholds(lab.thresholds);
      bundle.labs[cal_lab] = std::move(lab);
      save_bundle(bundle, cal_models_dir);
    } else if (*run_cmd) {
      require_file(run_manifest);
      const Config cfg = load(common);
      const auto bundle = load_bundle(run_models_dir);
      const auto manifest = load_manifest(run_manifest);
      const auto split = split_arg(run_split);
      std::vector<SlideRecord> records;
      for (const auto& r : manifest.records) {
        if (!run_lab.empty() && r.lab_id != run_lab) continue;
        if (split && manifest.split_of(r.slide_id) != split) continue;
        records.push_back(r);
      }
      const std::uint64_t seed = run_seed.value_or(cfg.seed);
      FileRasterSource source(fs::path(run_manifest).parent_path());
      const auto result = run_corpus(records, source, bundle, cfg, cfg.workers, seed);
      fs::create_directories(run_out);
      write_slide_results(result.slides, fs::path(run_out) / "slides.csv");
      write_timings(result.timings, fs::path(run_out) / "timings.csv");
      std::vector<const ThresholdSet*> per_specimen;
      for (const auto& s : result.specimens) per_specimen.push_back(&bundle.thresholds_for(s.lab_id));
      std::vector<SpecimenResult> finals;
      for (const auto& s : result.specimens)
        finals.push_back(finalize(s, bundle.thresholds_for(s.lab_id).level(cfg.confidence.operating_level)));
      {
        std::ofstream f(fs::path(run_out) / "results.csv");
        if (!f) throw IoError("cannot write " + (fs::path(run_out) / "results.csv").string());
        f << format_specimen_results(finals, per_specimen);
      }
      RunManifest rm;
      rm.seed = seed;
      rm.workers = cfg.workers;
      rm.input_manifest = fs::absolute(run_manifest).string();
      rm.models_dir = fs::absolute(run_models_dir).string();
      rm.model_version = bundle.version();
      rm.config = cfg.entries();
      rm.kernels = kernels::active().name;
      rm.elapsed_s = result.elapsed_s;
      char id[17];
      std::snprintf(id, sizeof id, "%016llx",
                    static_cast<unsigned long long>(stable_hash(rm.model_version + rm.input_manifest + run_split +
                                                                run_lab + std::to_string(seed) + cfg.format())));
      rm.run_id = id;
      write_run_manifest(rm, fs::path(run_out) / "run_manifest.txt");
      std::size_t errors = 0;
      for (const auto& s : result.slides) errors += s.status == SlideStatus::Error;
      out << "slides " << result.slides.size() << ", specimens " << result.specimens.size() << ", errors " << errors
          << ", elapsed " << result.elapsed_s << " s, throughput " << result.throughput_per_hour
          << " slides/hour\n";
    } else if (*eval_cmd) {
      require_file(eval_manifest);
      const fs::path slides_path = fs::path(eval_run) / "slides.csv";
      require_file(slides_path);
      const auto manifest = load_manifest(eval_manifest);
      const auto bundle = load_bundle(eval_models_dir);
      std::map<std::string, ClassLabel> truths;
      for (const auto& r : manifest.records) truths[r.specimen_id] = r.truth;
      const auto specimens = aggregate_all(read_slide_results(slides_path));
      std::map<std::string, std::vector<SpecimenResult>> by_lab;
      for (const auto& s : specimens) by_lab[s.lab_id].push_back(s);
      std::vector<std::pair<std::string, EvalReport>> reports;
      for (const auto& [lab, group] : by_lab) reports.emplace_back(lab, evaluate(group, truths, bundle.thresholds_for(lab)));
      const fs::path dir = eval_out.empty() ? fs::path(eval_run) / "report" : fs::path(eval_out);
      write_report(reports, dir);
      out << format_report_text(reports);
    } else if (*prof_cmd) {
      const fs::path timings_path = fs::path(prof_run) / "timings.csv";
      const fs::path manifest_path = fs::path(prof_run) / "run_manifest.txt";
      require_file(timings_path);
      require_file(manifest_path);
      double elapsed = 0;
      std::ifstream rm(manifest_path);
      for (std::string line; std::getline(rm, line);)
        if (line.rfind("elapsed_s=", 0) == 0) elapsed = std::stod(line.substr(10));
      const auto timings = read_timings(timings_path);
      if (timings.empty()) {
        out << "slides 0\nthroughput_slides_per_hour 0\n";
      } else {
        out << format_profile(profile(timings, elapsed));
      }
    }
  } catch (const ConfigError& e) {
    err << "configuration error (" << e.key() << "): " << e.what() << '\n';
    return kExitUsage;
  } catch (const CLI::Error& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace wsi::cli
