#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wsi {

struct TilingConfig {
  float s_min = 0.08f;
  float l_max = 0.82f;
  double min_tissue_fraction = 0.25;
  int tile_px = 128;
};

struct RoiConfig {
  double theta = 0.05;
  int pixels_per_tile = 192;
  int iterations = 25;  // Newton steps
  double l2 = 1e-4;
  int train_tiles_per_slide = 8;
};

struct AdaptConfig {
  bool enabled = true;
};

struct ClassifierConfig {
  int epochs = 300;
  double learning_rate = 0.01;
  int batch_size = 16;
  std::uint64_t seed = 1;
  int finetune_epochs = 150;
  double finetune_lr_scale = 0.1;
};

struct ConfidenceConfig {
  int repetitions = 30;
  double keep_prob = 0.30;
  std::vector<double> targets = {0.90, 0.95, 0.98};
  // Level applied when writing the per-specimen `final` column.
  int operating_level = 1;
};

struct SynthConfig {
  int height = 1024;
  int width = 1536;
  int slides_min = 1;
  int slides_max = 2;
};

struct Config {
  TilingConfig tiling;
  RoiConfig roi;
  AdaptConfig adapt;
  ClassifierConfig classifier;
  ConfidenceConfig confidence;
  SynthConfig synth;
  std::uint64_t seed = 2020;
  int workers = 1;

  // Applies one `key=value` assignment. Throws ConfigError on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  // Every key with its current value, in documentation order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string format() const;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ConfigKeyDoc {
  std::string key;
  std::string default_value;
  std::string doc;
};
const std::vector<ConfigKeyDoc>& config_docs();

// Flat `key=value` lines; '#' starts a comment, blank lines ignored.
Config parse_config(std::string_view text, const std::string& source = "<config>");
Config load_config(const std::filesystem::path& path);

}  // namespace wsi
