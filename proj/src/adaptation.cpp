#include "wsi/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "wsi/error.hpp"
#include "wsi/kernels.hpp"

namespace wsi {

namespace {

constexpr std::string_view kAdapterHeader = "wsi-triage-adapter v1";

inline std::uint8_t to_u8(double log_value) {
  const double v = std::exp(log_value) * 256.0 - 1.0;
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

std::array<double, 3> to_log_opponent(const std::uint8_t rgb[3]) {
  float l, a, b;
  kernels::scalar_kernels().to_log_opponent(rgb, 1, &l, &a, &b);
  return {l, a, b};
}

std::array<std::uint8_t, 3> from_log_opponent(const std::array<double, 3>& lab) {
  const double l = lab[0] * kernels::kInvSqrt3, a = lab[1] * kernels::kInvSqrt6, b = lab[2] * kernels::kInvSqrt2;
  return {to_u8(l + a + b), to_u8(l + a - b), to_u8(l - 2 * a)};
}

void DomainAccumulator::add(const Tile& t) {
  const std::size_t n = t.pixels.pixels();
  std::vector<float> l(n), a(n), b(n);
  kernels::active().to_log_opponent(t.pixels.data.data(), n, l.data(), a.data(), b.data());
  // Two-pass within the tile, then merged.
  DomainAccumulator m;
  for (std::size_t i = 0; i < n; ++i) {
    if (!t.tissue.data[i]) continue;
    m.n_ += 1;
    m.mean_[0] += l[i];
    m.mean_[1] += a[i];
    m.mean_[2] += b[i];
  }
  if (m.n_ == 0) return;
  for (auto& v : m.mean_) v /= m.n_;
  for (std::size_t i = 0; i < n; ++i) {
    if (!t.tissue.data[i]) continue;
    const double d0 = l[i] - m.mean_[0], d1 = a[i] - m.mean_[1], d2 = b[i] - m.mean_[2];
    m.m2_[0] += d0 * d0;
    m.m2_[1] += d1 * d1;
    m.m2_[2] += d2 * d2;
  }
  merge(m);
}

// Chan et al. pairwise combination.
void DomainAccumulator::merge(const DomainAccumulator& o) {
  if (o.n_ == 0) return;
  const double total = n_ + o.n_;
  for (int c = 0; c < 3; ++c) {
    const double delta = o.mean_[c] - mean_[c];
    mean_[c] += delta * o.n_ / total;
    m2_[c] += o.m2_[c] + delta * delta * n_ * o.n_ / total;
  }
  n_ = total;
}

DomainStats DomainAccumulator::finish() const {
  if (n_ == 0) throw InvalidInput("fit_domain: sample contains no tissue pixels");
  DomainStats s;
  for (int c = 0; c < 3; ++c) {
    s.mean[c] = mean_[c];
    s.std[c] = std::max(kStdFloor, std::sqrt(m2_[c] / n_));
  }
  return s;
}

DomainStats fit_domain(std::span<const Tile> tiles) {
  if (tiles.empty()) throw InvalidInput("fit_domain: empty tile sample");
  DomainAccumulator acc;
  for (const auto& t : tiles) acc.add(t);
  return acc.finish();
}

AdaptTables make_adapt_tables(const AdapterModel& model) {
  AdaptTables t;
  t.identity = model.is_identity();
  if (t.identity) return t;
  // Rows of the orthonormal rotation into (l, a, b).
  const double R[3][3] = {{kernels::kInvSqrt3, kernels::kInvSqrt3, kernels::kInvSqrt3},
                          {kernels::kInvSqrt6, kernels::kInvSqrt6, -2 * kernels::kInvSqrt6},
                          {kernels::kInvSqrt2, -kernels::kInvSqrt2, 0.0}};
  std::array<double, 3> scale{}, shift{};
  for (int c = 0; c < 3; ++c) {
    scale[c] = std::max(kStdFloor, model.target.std[c]) / std::max(kStdFloor, model.source.std[c]);
    shift[c] = model.target.mean[c] - model.source.mean[c] * scale[c];
  }
  std::array<double, 256> log_v{};
  for (int v = 0; v < 256; ++v) log_v[v] = std::log((v + 1) / 256.0);
  for (int i = 0; i < 3; ++i) {
    double offset = 0;
    for (int k = 0; k < 3; ++k) offset += R[k][i] * shift[k];
    t.offset[i] = offset;
    t.gain[i] = std::exp(offset) * 256.0;
    double bound = std::abs(offset);
    for (int j = 0; j < 3; ++j) {
      double a = 0;
      for (int k = 0; k < 3; ++k) a += R[k][i] * scale[k] * R[k][j];
      bound += std::abs(a * log_v[0]);
      for (int v = 0; v < 256; ++v) {
        t.exponent[i * 3 + j][v] = a * log_v[v];
        t.power[i * 3 + j][v] = std::exp(a * log_v[v]);
      }
    }
    t.log_domain = t.log_domain || bound > 500.0;
  }
  return t;
}

Tile adapt(const Tile& tile, const AdaptTables& t) {
  Tile out = tile;
  if (t.identity) return out;
  const std::size_t n = tile.pixels.pixels();
  const std::uint8_t* src = tile.pixels.data.data();
  std::uint8_t* dst = out.pixels.data.data();
  for (std::size_t p = 0; p < n; ++p, src += 3, dst += 3) {
    for (int i = 0; i < 3; ++i) {
      const double v = t.log_domain ? 256.0 * std::exp(t.offset[i] + t.exponent[i * 3][src[0]] +
                                                       t.exponent[i * 3 + 1][src[1]] + t.exponent[i * 3 + 2][src[2]])
                                    : t.gain[i] * t.power[i * 3][src[0]] * t.power[i * 3 + 1][src[1]] * t.power[i * 3 + 2][src[2]];
      dst[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v - 1.0, 0.0, 255.0)));
    }
  }
  return out;
}

Tile adapt(const Tile& tile, const AdapterModel& model) { return adapt(tile, make_adapt_tables(model)); }

std::string format_adapter(const AdapterModel& m) {
  std::ostringstream os;
  os.precision(17);
  os << kAdapterHeader << '\n';
  const auto row = [&](const char* name, const std::array<double, 3>& v) {
    os << name << ' ' << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  };
  row("source_mean", m.source.mean);
  row("source_std", m.source.std);
  row("target_mean", m.target.mean);
  row("target_std", m.target.std);
  return os.str();
}

AdapterModel parse_adapter(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line != kAdapterHeader)
    throw ParseError(source, 1, "expected header '" + std::string(kAdapterHeader) + "'");
  ++line_no;
  AdapterModel m;
  const std::array<std::pair<const char*, std::array<double, 3>*>, 4> rows = {
      {{"source_mean", &m.source.mean}, {"source_std", &m.source.std}, {"target_mean", &m.target.mean},
       {"target_std", &m.target.std}}};
  for (const auto& [name, dest] : rows) {
    ++line_no;
    if (!std::getline(in, line)) throw ParseError(source, line_no, std::string("missing ") + name);
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key != name) throw ParseError(source, line_no, std::string("expected ") + name);
    for (auto& v : *dest)
      if (!(ls >> v) || !std::isfinite(v)) throw ParseError(source, line_no, "bad number");
  }
  for (int c = 0; c < 3; ++c)
    if (m.source.std[c] <= 0 || m.target.std[c] <= 0) throw ParseError(source, 0, "std must be positive");
  return m;
}

void save_adapter(const AdapterModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_adapter(model);
}

AdapterModel load_adapter(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_adapter(ss.str(), path.string());
}

}  // namespace wsi
