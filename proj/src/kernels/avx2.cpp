#include <immintrin.h>

#include <algorithm>

#include "wsi/kernels.hpp"

namespace wsi::kernels {

// Tails shorter than one vector fall back to the scalar table.
namespace {

void tissue_mask_avx2(const std::uint8_t* rgb, std::size_t n, float s_min, float l_max, std::uint8_t* mask) {
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 smin = _mm256_set1_ps(s_min);
  const __m256 lmax = _mm256_set1_ps(l_max);
  const __m256 kr = _mm256_set1_ps(0.299f), kg = _mm256_set1_ps(0.587f), kb = _mm256_set1_ps(0.114f);
  const __m256 k255 = _mm256_set1_ps(255.0f);
  alignas(32) float rf[8], gf[8], bf[8];
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const std::uint8_t* p = rgb + 3 * i;
    for (int k = 0; k < 8; ++k) {
      rf[k] = p[3 * k];
      gf[k] = p[3 * k + 1];
      bf[k] = p[3 * k + 2];
    }
    const __m256 r = _mm256_load_ps(rf), g = _mm256_load_ps(gf), b = _mm256_load_ps(bf);
    const __m256 mx = _mm256_max_ps(_mm256_max_ps(r, g), b);
    const __m256 mn = _mm256_min_ps(_mm256_min_ps(r, g), b);
    const __m256 sat = _mm256_div_ps(_mm256_sub_ps(mx, mn), _mm256_max_ps(mx, one));
    __m256 lum = _mm256_mul_ps(kr, r);
    lum = _mm256_add_ps(lum, _mm256_mul_ps(kg, g));
    lum = _mm256_add_ps(lum, _mm256_mul_ps(kb, b));
    const __m256 lum_n = _mm256_div_ps(lum, k255);
    const __m256 hit = _mm256_or_ps(_mm256_cmp_ps(sat, smin, _CMP_GE_OQ), _mm256_cmp_ps(lum_n, lmax, _CMP_LE_OQ));
    const int bits = _mm256_movemask_ps(hit);
    for (int k = 0; k < 8; ++k) mask[i + k] = static_cast<std::uint8_t>((bits >> k) & 1);
  }
  if (i < n) scalar_kernels().tissue_mask(rgb + 3 * i, n - i, s_min, l_max, mask + i);
}

void to_log_opponent_avx2(const std::uint8_t* rgb, std::size_t n, float* l, float* a, float* b) {
  const float* lut = log_lut().data();
  const __m256 c3 = _mm256_set1_ps(kInvSqrt3), c6 = _mm256_set1_ps(kInvSqrt6), c2 = _mm256_set1_ps(kInvSqrt2);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const std::uint8_t* p = rgb + 3 * i;
    const __m256i ir = _mm256_setr_epi32(p[0], p[3], p[6], p[9], p[12], p[15], p[18], p[21]);
    const __m256i ig = _mm256_setr_epi32(p[1], p[4], p[7], p[10], p[13], p[16], p[19], p[22]);
    const __m256i ib = _mm256_setr_epi32(p[2], p[5], p[8], p[11], p[14], p[17], p[20], p[23]);
    const __m256 lr = _mm256_i32gather_ps(lut, ir, 4);
    const __m256 lg = _mm256_i32gather_ps(lut, ig, 4);
    const __m256 lb = _mm256_i32gather_ps(lut, ib, 4);
    const __m256 s = _mm256_add_ps(lr, lg);
    _mm256_storeu_ps(l + i, _mm256_mul_ps(_mm256_add_ps(s, lb), c3));
    _mm256_storeu_ps(a + i, _mm256_mul_ps(_mm256_sub_ps(s, _mm256_add_ps(lb, lb)), c6));
    _mm256_storeu_ps(b + i, _mm256_mul_ps(_mm256_sub_ps(lr, lg), c2));
  }
  if (i < n) scalar_kernels().to_log_opponent(rgb + 3 * i, n - i, l + i, a + i, b + i);
}

std::size_t roi_logit_map_avx2(const float* r, const float* g, const float* b, const float* c, std::size_t n,
                               const RoiWeights& w, std::uint8_t* out) {
  __m256 wv[kRoiFeatures];
  for (std::size_t k = 0; k < kRoiFeatures; ++k) wv[k] = _mm256_set1_ps(w.w[k]);
  const __m256 bias = _mm256_set1_ps(w.bias);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t positives = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 rv = _mm256_loadu_ps(r + i), gv = _mm256_loadu_ps(g + i), bv = _mm256_loadu_ps(b + i);
    __m256 z = bias;
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[0], rv));
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[1], gv));
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[2], bv));
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[3], _mm256_mul_ps(rv, rv)));
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[4], _mm256_mul_ps(gv, gv)));
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[5], _mm256_mul_ps(bv, bv)));
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[6], _mm256_mul_ps(rv, gv)));
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[7], _mm256_mul_ps(gv, bv)));
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[8], _mm256_mul_ps(rv, bv)));
    z = _mm256_add_ps(z, _mm256_mul_ps(wv[9], _mm256_loadu_ps(c + i)));
    const int bits = _mm256_movemask_ps(_mm256_cmp_ps(z, zero, _CMP_GE_OQ));
    for (int k = 0; k < 8; ++k) out[i + k] = static_cast<std::uint8_t>((bits >> k) & 1);
    positives += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(bits)));
  }
  if (i < n) positives += scalar_kernels().roi_logit_map(r + i, g + i, b + i, c + i, n - i, w, out + i);
  return positives;
}

void dense_forward_avx2(const double* x, std::size_t n_in, const double* w, const double* bias, std::size_t n_out,
                        double* y) {
  std::size_t j = 0;
  for (; j + 4 <= n_out; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n_in; ++i)
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(x[i]), _mm256_loadu_pd(w + i * n_out + j)));
    _mm256_storeu_pd(y + j, _mm256_add_pd(acc, _mm256_loadu_pd(bias + j)));
  }
  for (; j < n_out; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_in; ++i) acc = acc + x[i] * w[i * n_out + j];
    y[j] = acc + bias[j];
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2", tissue_mask_avx2, to_log_opponent_avx2, roi_logit_map_avx2,
                                 dense_forward_avx2};
  return table;
}

}  // namespace wsi::kernels
