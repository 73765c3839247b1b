#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wsi {

using Rng = std::mt19937_64;

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t stable_hash(std::string_view s);

// Mixes a global seed with an identifier so per-item streams do not depend on
// processing order.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view id);
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view id, std::string_view purpose);

// Uniform in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Uniform integer in [0, n). Modulo bias is negligible for the small n used here.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) { return rng() % n; }

// Standard normal via Box-Muller, platform independent.
double standard_normal(Rng& rng);

}  // namespace wsi
