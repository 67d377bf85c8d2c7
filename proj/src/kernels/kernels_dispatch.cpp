#include <cstdlib>
#include <cstring>

#include "nfisam/kernels/kernels.hpp"

namespace nfisam::kernels {
namespace {

const Ops& pick() {
  if (const char* env = std::getenv("NFISAM_KERNELS")) {
    for (const Ops* ops : available())
      if (std::strcmp(env, ops->name) == 0) return *ops;
    // unknown name falls through to auto-detection
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return avx2_ops();
#elif defined(__aarch64__)
  return neon_ops();
#endif
  return scalar_ops();
}

}  // namespace

const Ops& active() {
  static const Ops& selected = pick();
  return selected;
}

std::vector<const Ops*> available() {
  std::vector<const Ops*> out;
  out.push_back(&scalar_ops());
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    out.push_back(&avx2_ops());
#endif
#if defined(__aarch64__)
  out.push_back(&neon_ops());
#endif
  return out;
}

}  // namespace nfisam::kernels
