#include "wsi/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "wsi/error.hpp"

namespace wsi {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Shortest text that parses back to the same value.
template <typename T>
std::string fmt_double(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(std::string(key), "config key '" + std::string(key) + "': not a number: '" + std::string(v) + "'");
  return out;
}

long long to_int(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(std::string(key), "config key '" + std::string(key) + "': not an integer: '" + std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(std::string(key), "config key '" + std::string(key) + "': not a boolean: '" + std::string(v) + "'");
}

struct Key {
  const char* name;
  const char* doc;
  std::function<void(Config&, std::string_view)> set;
  std::function<std::string(const Config&)> get;
};

void require(bool ok, std::string_view key, const char* what) {
  if (!ok) throw ConfigError(std::string(key), "config key '" + std::string(key) + "': " + what);
}

#define WSI_REAL(NAME, FIELD, DOC, CHECK)                                              \
  Key {                                                                                \
    NAME, DOC,                                                                         \
        [](Config& c, std::string_view v) {                                            \
          const double x = to_double(NAME, v);                                         \
          require(CHECK, NAME, "out of range");                                        \
          c.FIELD = static_cast<decltype(c.FIELD)>(x);                                 \
        },                                                                             \
        [](const Config& c) { return fmt_double(c.FIELD); }                           \
  }
#define WSI_INT(NAME, FIELD, DOC, CHECK)                                               \
  Key {                                                                                \
    NAME, DOC,                                                                         \
        [](Config& c, std::string_view v) {                                            \
          const long long x = to_int(NAME, v);                                         \
          require(CHECK, NAME, "out of range");                                        \
          c.FIELD = static_cast<decltype(c.FIELD)>(x);                                 \
        },                                                                             \
        [](const Config& c) { return std::to_string(c.FIELD); }                       \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      WSI_REAL("tiling.s_min", tiling.s_min, "minimum HSV saturation for a tissue pixel", x >= 0 && x <= 1),
      WSI_REAL("tiling.l_max", tiling.l_max, "maximum normalized luminance for a tissue pixel", x >= 0 && x <= 1),
      WSI_REAL("tiling.min_tissue_fraction", tiling.min_tissue_fraction,
               "minimum tissue fraction for a grid cell to become a tile", x >= 0 && x <= 1),
      WSI_INT("tiling.tile_px", tiling.tile_px, "tile edge length in pixels", x >= 8 && x <= 4096),
      WSI_REAL("roi.theta", roi.theta, "minimum segmentation positive fraction for tile selection", x >= 0 && x <= 1),
      WSI_INT("roi.pixels_per_tile", roi.pixels_per_tile, "segmenter training pixels sampled per tile", x >= 1),
      WSI_INT("roi.iterations", roi.iterations, "segmenter Newton iterations", x >= 0),
      WSI_REAL("roi.l2", roi.l2, "segmenter L2 penalty", x >= 0),
      WSI_INT("roi.train_tiles_per_slide", roi.train_tiles_per_slide,
              "tiles sampled per training slide for the segmenter", x >= 1),
      Key{"adapt.enabled", "apply stage-1 appearance adaptation",
          [](Config& c, std::string_view v) { c.adapt.enabled = to_bool("adapt.enabled", v); },
          [](const Config& c) { return std::string(c.adapt.enabled ? "true" : "false"); }},
      WSI_INT("classifier.epochs", classifier.epochs, "base classifier training epochs", x >= 0),
      WSI_REAL("classifier.learning_rate", classifier.learning_rate, "base classifier Adam learning rate", x > 0),
      WSI_INT("classifier.batch_size", classifier.batch_size, "mini-batch size", x >= 1),
      WSI_INT("classifier.seed", classifier.seed, "classifier initialization and shuffling seed", x >= 0),
      WSI_INT("classifier.finetune_epochs", classifier.finetune_epochs, "per-lab fine-tuning epochs", x >= 0),
      WSI_REAL("classifier.finetune_lr_scale", classifier.finetune_lr_scale,
               "fine-tuning learning rate as a fraction of the base rate", x > 0),
      WSI_INT("confidence.T", confidence.repetitions, "stochastic forward passes per slide", x >= 1),
      WSI_REAL("confidence.keep_prob", confidence.keep_prob, "hidden-unit keep probability", x > 0 && x <= 1),
      Key{"confidence.targets", "target retained accuracies for Levels 1-3 (comma separated, non-decreasing)",
          [](Config& c, std::string_view v) {
            std::vector<double> t;
            std::size_t start = 0;
            while (start <= v.size()) {
              auto end = v.find(',', start);
              if (end == std::string_view::npos) end = v.size();
              const double x = to_double("confidence.targets", trim(v.substr(start, end - start)));
              require(x >= 0 && x <= 1, "confidence.targets", "targets must lie in [0, 1]");
              require(t.empty() || x >= t.back(), "confidence.targets", "targets must be non-decreasing");
              t.push_back(x);
              start = end + 1;
            }
            require(t.size() == 3, "confidence.targets", "exactly three targets required");
            c.confidence.targets = t;
          },
          [](const Config& c) {
            std::string s;
            for (std::size_t i = 0; i < c.confidence.targets.size(); ++i)
              s += (i ? "," : "") + fmt_double(c.confidence.targets[i]);
            return s;
          }},
      WSI_INT("confidence.level", confidence.operating_level,
              "level (0 = none, 1-3) used for the results file's final column", x >= 0 && x <= 3),
      WSI_INT("synth.height", synth.height, "synthetic slide height in pixels", x >= 1),
      WSI_INT("synth.width", synth.width, "synthetic slide width in pixels", x >= 1),
      WSI_INT("synth.slides_min", synth.slides_min, "minimum slides per specimen", x >= 1),
      WSI_INT("synth.slides_max", synth.slides_max, "maximum slides per specimen", x >= 1),
      WSI_INT("seed", seed, "global seed for per-slide stochastic streams", x >= 0),
      WSI_INT("workers", workers, "parallel slide workers", x >= 1),
  };
  return table;
}

#undef WSI_REAL
#undef WSI_INT

}  // namespace

void Config::set(std::string_view key, std::string_view value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(*this, trim(value));
      return;
    }
  }
  throw ConfigError(std::string(key), "unknown config key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> Config::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(*this));
  return out;
}

std::string Config::format() const {
  std::string s;
  for (const auto& [k, v] : entries()) s += k + "=" + v + "\n";
  return s;
}

const std::vector<ConfigKeyDoc>& config_docs() {
  static const std::vector<ConfigKeyDoc> docs = [] {
    std::vector<ConfigKeyDoc> d;
    const Config defaults;
    for (const auto& k : keys()) d.push_back({k.name, k.get(defaults), k.doc});
    return d;
  }();
  return docs;
}

Config parse_config(std::string_view text, const std::string& source) {
  Config c;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected key=value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  if (c.synth.slides_max < c.synth.slides_min)
    throw ConfigError("synth.slides_max", "synth.slides_max must be >= synth.slides_min");
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace wsi
