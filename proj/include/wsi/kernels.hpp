#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference implementation
// and, on x86-64, an AVX2 variant selected at runtime. The AVX2 variants perform
// the same IEEE operations in the same order per output element as the scalar
// code, so both paths produce bit-identical results.

#include <array>
#include <cstddef>
#include <cstdint>

namespace wsi::kernels {

inline constexpr std::size_t kRoiFeatures = 10;

// Per-pixel logistic weights over
// [r, g, b, r*r, g*g, b*b, r*g, g*b, r*b, contrast], all inputs in [0, 1].
struct RoiWeights {
  std::array<float, kRoiFeatures> w{};
  float bias = 0.0f;
};

struct KernelTable {
  const char* name;

  // mask[i] = 1 iff saturation >= s_min or normalized luminance <= l_max.
  // saturation = (max - min) / max(max, 1); luminance = 0.299 r + 0.587 g + 0.114 b.
  void (*tissue_mask)(const std::uint8_t* rgb, std::size_t n, float s_min, float l_max, std::uint8_t* mask);

  // Interleaved RGB to planar log-opponent coordinates: per-channel
  // ln((v + 1) / 256) followed by a fixed orthonormal decorrelating rotation.
  void (*to_log_opponent)(const std::uint8_t* rgb, std::size_t n, float* l, float* a, float* b);

  // out[i] = 1 iff the logit over the ROI feature set is >= 0. Returns the positive count.
  std::size_t (*roi_logit_map)(const float* r, const float* g, const float* b, const float* contrast,
                               std::size_t n, const RoiWeights& w, std::uint8_t* out);

  // y[j] = (sum_i x[i] * w[i * n_out + j]) + bias[j], accumulated in increasing i.
  void (*dense_forward)(const double* x, std::size_t n_in, const double* w, const double* bias,
                        std::size_t n_out, double* y);
};

const KernelTable& scalar_kernels();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

// The table used by the pipeline. AVX2 when available unless the environment
// variable WSI_KERNELS is set to "scalar".
const KernelTable& active();

// ln((v + 1) / 256) for v in [0, 255].
const std::array<float, 256>& log_lut();

// Rotation constants shared by both variants and the inverse transform.
inline constexpr float kInvSqrt3 = 0.57735026918962576f;
inline constexpr float kInvSqrt6 = 0.40824829046386302f;
inline constexpr float kInvSqrt2 = 0.70710678118654752f;

}  // namespace wsi::kernels
