#include "wsi/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "wsi/error.hpp"
#include "wsi/kernels.hpp"

namespace wsi {

namespace {

constexpr std::string_view kParamsHeader = "wsi-triage-net v1";

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Activations {
  std::array<double, kHiddenDim> pre{};
  std::array<double, kHiddenDim> hidden{};  // after tanh and masking
  std::array<double, kNumClasses> logits{};
  Sigmoids out{};
};

Activations forward(const SlideEmbedding& x, const NetParams& p, const StochasticMask* mask) {
  const auto& k = kernels::active();
  Activations a;
  k.dense_forward(x.data(), kFeatureDim, p.w1.data(), p.b1.data(), kHiddenDim, a.pre.data());
  for (std::size_t j = 0; j < kHiddenDim; ++j) {
    double h = std::tanh(a.pre[j]);
    if (mask) h = mask->keep[j] ? h / mask->keep_prob : 0.0;
    a.hidden[j] = h;
  }
  k.dense_forward(a.hidden.data(), kHiddenDim, p.w2.data(), p.b2.data(), kNumClasses, a.logits.data());
  for (std::size_t c = 0; c < kNumClasses; ++c) a.out[c] = sigmoid(a.logits[c]);
  return a;
}

// log(sigmoid(z)) and log(1 - sigmoid(z)) without overflow.
inline double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

}  // namespace

double& NetParams::at(std::size_t i) {
  if (i < w1.size()) return w1[i];
  i -= w1.size();
  if (i < b1.size()) return b1[i];
  i -= b1.size();
  if (i < w2.size()) return w2[i];
  i -= w2.size();
  if (i < b2.size()) return b2[i];
  throw InvalidInput("NetParams::at: index out of range");
}

double NetParams::at(std::size_t i) const { return const_cast<NetParams&>(*this).at(i); }

bool NetParams::finite() const {
  for (const auto* v : {&w1, &b1, &w2, &b2})
    for (double x : *v)
      if (!std::isfinite(x)) return false;
  return true;
}

FeatureVector featurize(const Tile& tile) {
  FeatureVector f{};
  const auto& px = tile.pixels;
  const int h = px.height, w = px.width;
  std::size_t tissue = 0;
  for (std::size_t i = 0; i < px.pixels(); ++i) {
    if (!tile.tissue.data[i]) continue;
    ++tissue;
    for (std::size_t c = 0; c < 3; ++c) f[c * kColorBins + (px.data[3 * i + c] >> 4)] += 1.0;
  }
  if (tissue == 0) {
    f.fill(1.0 / kColorBins);
    return f;
  }
  for (std::size_t i = 0; i < 3 * kColorBins; ++i) f[i] /= double(tissue);

  std::vector<int> lum(px.pixels());
  for (std::size_t i = 0; i < px.pixels(); ++i)
    lum[i] = (299 * px.data[3 * i] + 587 * px.data[3 * i + 1] + 114 * px.data[3 * i + 2] + 500) / 1000;
  std::size_t counted = 0;
  double* grad = f.data() + 3 * kColorBins;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      if (!tile.tissue.data[i]) continue;
      const int g = std::abs(lum[i + 1] - lum[i - 1]) + std::abs(lum[i + w] - lum[i - w]);
      grad[std::min<std::size_t>(kGradientBins - 1, std::size_t(g / kGradientBinWidth))] += 1.0;
      ++counted;
    }
  }
  for (std::size_t b = 0; b < kGradientBins; ++b) grad[b] = counted ? grad[b] / double(counted) : 1.0 / kGradientBins;
  return f;
}

SlideEmbedding pool(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) throw ContractViolation("pool: empty tile set (NoROI must be handled upstream)");
  SlideEmbedding e{};
  for (const auto& v : vectors)
    for (std::size_t k = 0; k < kFeatureDim; ++k) e[k] += v[k];
  for (auto& x : e) x /= double(vectors.size());
  return e;
}

StochasticMask draw_mask(Rng& rng, double keep_prob) {
  StochasticMask m;
  m.keep_prob = keep_prob;
  for (auto& k : m.keep) k = uniform01(rng) < keep_prob;
  return m;
}

StochasticMask full_mask() {
  StochasticMask m;
  m.keep.fill(true);
  m.keep_prob = 1.0;
  return m;
}

Sigmoids predict(const SlideEmbedding& x, const NetParams& params, const StochasticMask* mask) {
  return forward(x, params, mask).out;
}

double example_loss(const NetParams& params, const Example& ex, const StochasticMask* mask) {
  const auto a = forward(ex.x, params, mask);
  double loss = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const bool pos = index_of(ex.y) == c;
    loss -= pos ? log_sigmoid(a.logits[c]) : log_sigmoid(-a.logits[c]);
  }
  return loss;
}

double example_gradient(const NetParams& p, const Example& ex, const StochasticMask* mask, NetParams& g) {
  const auto a = forward(ex.x, p, mask);
  double loss = 0;
  std::array<double, kNumClasses> delta{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double y = index_of(ex.y) == c ? 1.0 : 0.0;
    loss -= y > 0 ? log_sigmoid(a.logits[c]) : log_sigmoid(-a.logits[c]);
    delta[c] = a.out[c] - y;
  }
  std::array<double, kHiddenDim> dpre{};
  for (std::size_t j = 0; j < kHiddenDim; ++j) {
    double dh = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      g.w2[j * kNumClasses + c] += a.hidden[j] * delta[c];
      dh += p.w2[j * kNumClasses + c] * delta[c];
    }
    const double t = std::tanh(a.pre[j]);
    double gate = 1.0;
    if (mask) gate = mask->keep[j] ? 1.0 / mask->keep_prob : 0.0;
    dpre[j] = dh * gate * (1.0 - t * t);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) g.b2[c] += delta[c];
  for (std::size_t i = 0; i < kFeatureDim; ++i)
    for (std::size_t j = 0; j < kHiddenDim; ++j) g.w1[i * kHiddenDim + j] += ex.x[i] * dpre[j];
  for (std::size_t j = 0; j < kHiddenDim; ++j) g.b1[j] += dpre[j];
  return loss;
}

NetParams init_params(std::uint64_t seed) {
  Rng rng(seed);
  NetParams p;
  // Inputs are histogram fractions well below 1, hence the wider first-layer scale.
  const double s1 = 4.0 / std::sqrt(double(kFeatureDim));
  const double s2 = 1.0 / std::sqrt(double(kHiddenDim));
  for (auto& w : p.w1) w = s1 * standard_normal(rng);
  for (auto& w : p.w2) w = s2 * standard_normal(rng);
  return p;
}

NetParams train(std::span<const Example> examples, const TrainConfig& cfg, std::vector<std::string>* warnings) {
  return train_from(init_params(cfg.seed), examples, cfg, warnings);
}

NetParams train_from(NetParams params, std::span<const Example> examples, const TrainConfig& cfg,
                     std::vector<std::string>* warnings) {
  if (cfg.epochs <= 0) return params;
  if (examples.empty()) throw InvalidInput("train: empty training set");
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& e : examples) ++counts[index_of(e.y)];
  for (auto c : kAllClasses)
    if (counts[index_of(c)] == 0 && warnings)
      warnings->push_back("training set has no examples of class " + std::string(to_string(c)));

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const std::size_t n_params = params.size();
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0);
  Rng rng(derive_seed(cfg.seed, "train"));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max(1, cfg.batch_size);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      NetParams grad;
      for (std::size_t k = start; k < end; ++k) {
        const auto mask = draw_mask(rng, cfg.keep_prob);
        example_gradient(params, examples[order[k]], &mask, grad);
      }
      const double inv = 1.0 / double(end - start);
      ++step;
      const double c1 = 1.0 - std::pow(beta1, double(step)), c2 = 1.0 - std::pow(beta2, double(step));
      for (std::size_t i = 0; i < n_params; ++i) {
        const double gi = grad.at(i) * inv;
        m[i] = beta1 * m[i] + (1 - beta1) * gi;
        v[i] = beta2 * v[i] + (1 - beta2) * gi * gi;
        params.at(i) -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    }
  }
  return params;
}

ClassLabel argmax_class(const Sigmoids& s) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c)
    if (s[c] > s[best]) best = c;
  return static_cast<ClassLabel>(best);
}

double accuracy(const NetParams& params, std::span<const Example> examples) {
  if (examples.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  for (const auto& e : examples) correct += argmax_class(predict(e.x, params)) == e.y;
  return double(correct) / double(examples.size());
}

FineTuneResult fine_tune(const NetParams& base, std::span<const Example> finetune, std::span<const Example> validation,
                         TrainConfig cfg, double lr_scale, std::vector<std::string>* warnings) {
  cfg.learning_rate *= lr_scale;
  FineTuneResult r;
  r.base_validation_accuracy = accuracy(base, validation);
  r.params = train_from(base, finetune, cfg, warnings);
  r.validation_accuracy = accuracy(r.params, validation);
  return r;
}

std::string format_params(const NetParams& p) {
  std::ostringstream os;
  os.precision(17);
  os << kParamsHeader << '\n';
  const auto matrix = [&](const char* name, const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    os << name << ' ' << rows << ' ' << cols << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) os << (c ? " " : "") << v[r * cols + c];
      os << '\n';
    }
  };
  matrix("w1", p.w1, kFeatureDim, kHiddenDim);
  matrix("b1", p.b1, 1, kHiddenDim);
  matrix("w2", p.w2, kHiddenDim, kNumClasses);
  matrix("b2", p.b2, 1, kNumClasses);
  return os.str();
}

NetParams parse_params(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kParamsHeader)
    throw ParseError(source, 1, "expected header '" + std::string(kParamsHeader) + "'");
  NetParams p;
  const auto matrix = [&](const char* name, std::vector<double>& v, std::size_t rows, std::size_t cols) {
    ++line_no;
    if (!std::getline(in, line)) throw ParseError(source, line_no, std::string("missing ") + name);
    std::istringstream hs(line);
    std::string key;
    std::size_t r = 0, c = 0;
    if (!(hs >> key >> r >> c) || key != name || r != rows || c != cols)
      throw ParseError(source, line_no, std::string("expected shape header '") + name + " " + std::to_string(rows) +
                                            " " + std::to_string(cols) + "'");
    for (std::size_t i = 0; i < rows; ++i) {
      ++line_no;
      if (!std::getline(in, line)) throw ParseError(source, line_no, "truncated matrix");
      std::istringstream ls(line);
      for (std::size_t j = 0; j < cols; ++j)
        if (!(ls >> v[i * cols + j]) || !std::isfinite(v[i * cols + j]))
          throw ParseError(source, line_no, "bad value");
    }
  };
  matrix("w1", p.w1, kFeatureDim, kHiddenDim);
  matrix("b1", p.b1, 1, kHiddenDim);
  matrix("w2", p.w2, kHiddenDim, kNumClasses);
  matrix("b2", p.b2, 1, kNumClasses);
  return p;
}

void save_params(const NetParams& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_params(p);
}

NetParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_params(ss.str(), path.string());
}

}  // namespace wsi
