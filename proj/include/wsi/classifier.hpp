#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wsi/rng.hpp"
#include "wsi/slide_model.hpp"
#include "wsi/tiling.hpp"

namespace wsi {

inline constexpr std::size_t kColorBins = 16;
inline constexpr std::size_t kGradientBins = 16;
inline constexpr std::size_t kFeatureDim = 3 * kColorBins + kGradientBins;  // 64
inline constexpr std::size_t kHiddenDim = 32;
inline constexpr int kGradientBinWidth = 6;

// 16-bin histograms of R, G, B over tissue pixels followed by a 16-bin histogram of
// luminance gradient magnitude; each group is L1-normalized.
using FeatureVector = std::array<double, kFeatureDim>;
using SlideEmbedding = FeatureVector;
using Sigmoids = std::array<double, kNumClasses>;

FeatureVector featurize(const Tile& tile);

// Componentwise mean. Throws ContractViolation on an empty set: NoROI slides must be
// handled before classification.
SlideEmbedding pool(std::span<const FeatureVector> vectors);

// 64 -> 32 (tanh) -> 4 (sigmoid). Weight matrices are stored [input][output] row-major.
struct NetParams {
  std::vector<double> w1 = std::vector<double>(kFeatureDim * kHiddenDim, 0.0);
  std::vector<double> b1 = std::vector<double>(kHiddenDim, 0.0);
  std::vector<double> w2 = std::vector<double>(kHiddenDim * kNumClasses, 0.0);
  std::vector<double> b2 = std::vector<double>(kNumClasses, 0.0);

  bool operator==(const NetParams&) const = default;
  std::size_t size() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
  // Flat view over all parameters in the order w1, b1, w2, b2.
  double& at(std::size_t flat_index);
  double at(std::size_t flat_index) const;
  bool finite() const;
};

// Kept hidden units; survivors are scaled by 1 / keep_prob.
struct StochasticMask {
  std::array<bool, kHiddenDim> keep{};
  double keep_prob = 1.0;
};

inline constexpr double kDefaultKeepProb = 0.30;

StochasticMask draw_mask(Rng& rng, double keep_prob);
StochasticMask full_mask();

// Forward pass; without a mask every hidden unit is used unscaled.
Sigmoids predict(const SlideEmbedding& x, const NetParams& params, const StochasticMask* mask = nullptr);

struct Example {
  SlideEmbedding x;
  ClassLabel y;
};

// Summed per-class binary cross-entropy of one example and its analytic gradient.
double example_loss(const NetParams& params, const Example& ex, const StochasticMask* mask = nullptr);
double example_gradient(const NetParams& params, const Example& ex, const StochasticMask* mask, NetParams& grad);

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 0.01;
  int batch_size = 16;
  std::uint64_t seed = 1;
  double keep_prob = kDefaultKeepProb;
};

NetParams init_params(std::uint64_t seed);

// Adam on mini-batches with a fresh hidden mask per example. Classes missing from the
// training set are reported through `warnings` and training proceeds.
NetParams train(std::span<const Example> examples, const TrainConfig& cfg, std::vector<std::string>* warnings = nullptr);
NetParams train_from(NetParams start, std::span<const Example> examples, const TrainConfig& cfg,
                     std::vector<std::string>* warnings = nullptr);

// Accuracy of the unmasked argmax over examples; NaN when empty.
double accuracy(const NetParams& params, std::span<const Example> examples);
ClassLabel argmax_class(const Sigmoids& s);

struct FineTuneResult {
  NetParams params;
  double validation_accuracy = 0.0;
  double base_validation_accuracy = 0.0;
};

// Continues training from `base` at learning_rate * lr_scale.
FineTuneResult fine_tune(const NetParams& base, std::span<const Example> finetune, std::span<const Example> validation,
                         TrainConfig cfg, double lr_scale = 0.1, std::vector<std::string>* warnings = nullptr);

void save_params(const NetParams& p, const std::filesystem::path& path);
NetParams load_params(const std::filesystem::path& path);
std::string format_params(const NetParams& p);
NetParams parse_params(std::string_view text, const std::string& source = "<params>");

}  // namespace wsi
