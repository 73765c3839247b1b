#include <cstdlib>
#include <string_view>

#include "wsi/kernels.hpp"

namespace wsi::kernels {

#if defined(WSI_HAVE_AVX2_TU)
const KernelTable& avx2_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(WSI_HAVE_AVX2_TU)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = [] () -> const KernelTable& {
    const char* env = std::getenv("WSI_KERNELS");
    if (env && std::string_view(env) == "scalar") return scalar_kernels();
    if (const auto* simd = avx2_kernels()) return *simd;
    return scalar_kernels();
  }();
  return table;
}

}  // namespace wsi::kernels
