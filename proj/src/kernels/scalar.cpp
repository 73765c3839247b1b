#include <algorithm>
#include <cmath>

#include "wsi/kernels.hpp"

namespace wsi::kernels {

const std::array<float, 256>& log_lut() {
  static const std::array<float, 256> lut = [] {
    std::array<float, 256> t{};
    for (int v = 0; v < 256; ++v) t[v] = static_cast<float>(std::log((v + 1.0) / 256.0));
    return t;
  }();
  return lut;
}

namespace {

void tissue_mask_scalar(const std::uint8_t* rgb, std::size_t n, float s_min, float l_max, std::uint8_t* mask) {
  for (std::size_t i = 0; i < n; ++i) {
    const int r = rgb[3 * i], g = rgb[3 * i + 1], b = rgb[3 * i + 2];
    const float mx = static_cast<float>(std::max({r, g, b}));
    const float mn = static_cast<float>(std::min({r, g, b}));
    const float sat = (mx - mn) / std::max(mx, 1.0f);
    float lum = 0.299f * static_cast<float>(r);
    lum = lum + 0.587f * static_cast<float>(g);
    lum = lum + 0.114f * static_cast<float>(b);
    const float lum_n = lum / 255.0f;
    mask[i] = (sat >= s_min || lum_n <= l_max) ? 1 : 0;
  }
}

void to_log_opponent_scalar(const std::uint8_t* rgb, std::size_t n, float* l, float* a, float* b) {
  const auto& lut = log_lut();
  for (std::size_t i = 0; i < n; ++i) {
    const float lr = lut[rgb[3 * i]], lg = lut[rgb[3 * i + 1]], lb = lut[rgb[3 * i + 2]];
    const float s = lr + lg;
    l[i] = (s + lb) * kInvSqrt3;
    a[i] = (s - (lb + lb)) * kInvSqrt6;
    b[i] = (lr - lg) * kInvSqrt2;
  }
}

std::size_t roi_logit_map_scalar(const float* r, const float* g, const float* b, const float* c, std::size_t n,
                                 const RoiWeights& w, std::uint8_t* out) {
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const float rv = r[i], gv = g[i], bv = b[i];
    float z = w.bias;
    z = z + w.w[0] * rv;
    z = z + w.w[1] * gv;
    z = z + w.w[2] * bv;
    z = z + w.w[3] * (rv * rv);
    z = z + w.w[4] * (gv * gv);
    z = z + w.w[5] * (bv * bv);
    z = z + w.w[6] * (rv * gv);
    z = z + w.w[7] * (gv * bv);
    z = z + w.w[8] * (rv * bv);
    z = z + w.w[9] * c[i];
    out[i] = z >= 0.0f ? 1 : 0;
    positives += out[i];
  }
  return positives;
}

void dense_forward_scalar(const double* x, std::size_t n_in, const double* w, const double* bias,
                          std::size_t n_out, double* y) {
  for (std::size_t j = 0; j < n_out; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < n_in; ++i) {
    const double xi = x[i];
    const double* row = w + i * n_out;
    for (std::size_t j = 0; j < n_out; ++j) y[j] = y[j] + xi * row[j];
  }
  for (std::size_t j = 0; j < n_out; ++j) y[j] = y[j] + bias[j];
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", tissue_mask_scalar, to_log_opponent_scalar, roi_logit_map_scalar,
                                 dense_forward_scalar};
  return table;
}

}  // namespace wsi::kernels
