#pragma once

#include <cstddef>
#include <vector>

namespace nfisam::kernels {

// Data-parallel inner loops used by flow training and the MMD metric.
// Every entry has a scalar reference implementation; SIMD variants are
// selected at runtime and equivalence-tested against the reference.
//
// Domain notes:
//   exp_inplace expects |x| <= 700 (inputs here are bounded pre-activations
//   and negative RBF exponents); log_inplace expects x > 0.
struct Ops {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // y += alpha * x
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  // c[m x n] (+)= a[m x k] * b[n x k]^T  (both row-major; dot-product form)
  void (*matmul_nt)(const double* a, std::size_t m, const double* b, std::size_t n,
                    std::size_t k, double* c, bool accumulate);
  void (*exp_inplace)(double* x, std::size_t n);
  void (*log_inplace)(double* x, std::size_t n);
  void (*softplus)(const double* x, double* out, std::size_t n);
  void (*sigmoid)(const double* x, double* out, std::size_t n);
};

const Ops& scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
#endif
#if defined(__aarch64__)
const Ops& neon_ops();
#endif

// Active implementation for this process. Picks the widest supported ISA;
// the NFISAM_KERNELS environment variable ("scalar", "avx2", "neon")
// overrides the choice.
const Ops& active();

// Every implementation runnable on this machine (reference first).
std::vector<const Ops*> available();

}  // namespace nfisam::kernels
