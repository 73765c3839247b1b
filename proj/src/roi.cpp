#include "wsi/roi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wsi/error.hpp"
#include "wsi/rng.hpp"

namespace wsi {

namespace {

constexpr std::string_view kSegmenterHeader = "wsi-triage-segmenter v1";
constexpr std::size_t kParams = kernels::kRoiFeatures + 1;

using FeatureRow = std::array<double, kParams>;

FeatureRow feature_row(const RoiPlanes& p, std::size_t i) {
  const double r = p.r[i], g = p.g[i], b = p.b[i];
  return {r, g, b, r * r, g * g, b * b, r * g, g * b, r * b, p.contrast[i], 1.0};
}

// Solves (H) x = g for symmetric positive definite H via Cholesky.
std::array<double, kParams> cholesky_solve(std::array<std::array<double, kParams>, kParams> h,
                                           std::array<double, kParams> g) {
  const std::size_t n = kParams;
  for (std::size_t j = 0; j < n; ++j) {
    double d = h[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= h[j][k] * h[j][k];
    if (d <= 0) throw ContractViolation("train_segmenter: Hessian not positive definite");
    h[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = h[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= h[i][k] * h[j][k];
      h[i][j] = s / h[j][j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) g[i] -= h[i][k] * g[k];
    g[i] /= h[i][i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) g[i] -= h[k][i] * g[k];
    g[i] /= h[i][i];
  }
  return g;
}

}  // namespace

RoiPlanes roi_planes(const RgbImage& px) {
  const std::size_t n = px.pixels();
  RoiPlanes p;
  p.r.resize(n);
  p.g.resize(n);
  p.b.resize(n);
  p.contrast.resize(n);
  std::vector<float> lum(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float r = px.data[3 * i] / 255.0f, g = px.data[3 * i + 1] / 255.0f, b = px.data[3 * i + 2] / 255.0f;
    p.r[i] = r;
    p.g[i] = g;
    p.b[i] = b;
    lum[i] = 0.299f * r + 0.587f * g + 0.114f * b;
  }
  const int h = px.height, w = px.width;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float sum = 0.0f;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) sum += lum[std::size_t(yy) * w + std::clamp(x + dx, 0, w - 1)];
      }
      const std::size_t i = std::size_t(y) * w + x;
      p.contrast[i] = std::min(1.0f, 4.0f * std::abs(lum[i] - sum / 9.0f));
    }
  }
  return p;
}

SegMap segment(const Tile& tile, const Segmenter& segmenter) {
  const auto planes = roi_planes(tile.pixels);
  SegMap out;
  out.map = Mask(tile.pixels.height, tile.pixels.width);
  const std::size_t n = out.map.pixels();
  const std::size_t positives = kernels::active().roi_logit_map(
      planes.r.data(), planes.g.data(), planes.b.data(), planes.contrast.data(), n, segmenter.weights, out.map.data.data());
  out.positive_fraction = n ? double(positives) / double(n) : 0.0;
  return out;
}

ROISelection select(std::span<const Tile> tiles, std::span<const SegMap> segmaps, double theta) {
  if (tiles.size() != segmaps.size()) throw InvalidInput("select: one segmentation map per tile required");
  ROISelection sel;
  if (!tiles.empty()) sel.slide_id = tiles.front().slide_id;
  for (std::size_t i = 0; i < tiles.size(); ++i)
    if (segmaps[i].positive_fraction >= theta) sel.selected.push_back(i);
  return sel;
}

Segmenter train_segmenter(std::span<const LabeledTile> samples, const RoiConfig& cfg, std::uint64_t seed) {
  if (samples.empty()) throw InvalidInput("train_segmenter: no training tiles");
  std::vector<FeatureRow> rows;
  std::vector<double> labels, weights;
  Rng rng(seed);
  const std::size_t per_class = std::max<std::size_t>(1, std::size_t(cfg.pixels_per_tile) / 2);
  for (const auto& s : samples) {
    const auto planes = roi_planes(s.tile->pixels);
    std::array<std::vector<std::size_t>, 2> by_label;
    for (std::size_t i = 0; i < s.roi.data.size(); ++i) by_label[s.roi.data[i] ? 1 : 0].push_back(i);
    for (int label = 0; label < 2; ++label) {
      const auto& pool = by_label[label];
      if (pool.empty()) continue;
      const std::size_t take = std::min(per_class, pool.size());
      const double w = double(pool.size()) / double(take);
      for (std::size_t k = 0; k < take; ++k) {
        rows.push_back(feature_row(planes, pool[uniform_index(rng, pool.size())]));
        labels.push_back(label);
        weights.push_back(w);
      }
    }
  }
  double wsum = 0;
  for (double w : weights) wsum += w;
  for (double& w : weights) w *= double(weights.size()) / wsum;

  std::array<double, kParams> theta{};
  for (int it = 0; it < cfg.iterations; ++it) {
    std::array<std::array<double, kParams>, kParams> hess{};
    std::array<double, kParams> grad{};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double z = 0;
      for (std::size_t k = 0; k < kParams; ++k) z += theta[k] * rows[i][k];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double gscale = weights[i] * (p - labels[i]);
      const double hscale = weights[i] * std::max(p * (1 - p), 1e-12);
      for (std::size_t a = 0; a < kParams; ++a) {
        grad[a] += gscale * rows[i][a];
        for (std::size_t b = 0; b <= a; ++b) hess[a][b] += hscale * rows[i][a] * rows[i][b];
      }
    }
    const double ridge = cfg.l2 * double(rows.size()) + 1e-9;
    for (std::size_t a = 0; a < kParams; ++a) {
      for (std::size_t b = 0; b < a; ++b) hess[b][a] = hess[a][b];
      hess[a][a] += ridge;
      grad[a] += ridge * theta[a];
    }
    const auto step = cholesky_solve(hess, grad);
    double max_step = 0;
    for (std::size_t k = 0; k < kParams; ++k) {
      theta[k] -= step[k];
      max_step = std::max(max_step, std::abs(step[k]));
    }
    if (max_step < 1e-10) break;
  }
  Segmenter s;
  for (std::size_t k = 0; k < kernels::kRoiFeatures; ++k) s.weights.w[k] = static_cast<float>(theta[k]);
  s.weights.bias = static_cast<float>(theta[kernels::kRoiFeatures]);
  return s;
}

std::string format_segmenter(const Segmenter& s) {
  std::ostringstream os;
  os.precision(9);
  os << kSegmenterHeader << "\nweights";
  for (float w : s.weights.w) os << ' ' << w;
  os << "\nbias " << s.weights.bias << '\n';
  return os.str();
}

Segmenter parse_segmenter(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kSegmenterHeader)
    throw ParseError(source, 1, "expected header '" + std::string(kSegmenterHeader) + "'");
  Segmenter s;
  std::string key;
  if (!std::getline(in, line)) throw ParseError(source, 2, "missing weights");
  std::istringstream ws(line);
  ws >> key;
  if (key != "weights") throw ParseError(source, 2, "expected weights");
  for (auto& w : s.weights.w)
    if (!(ws >> w)) throw ParseError(source, 2, "bad weight");
  if (!std::getline(in, line)) throw ParseError(source, 3, "missing bias");
  std::istringstream bs(line);
  bs >> key;
  if (key != "bias" || !(bs >> s.weights.bias)) throw ParseError(source, 3, "bad bias");
  return s;
}

void save_segmenter(const Segmenter& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_segmenter(s);
}

Segmenter load_segmenter(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_segmenter(ss.str(), path.string());
}

}  // namespace wsi
