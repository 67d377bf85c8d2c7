// NEON variants for aarch64. The transcendental entries reuse the scalar
// reference; only the bandwidth-bound linear ops are vectorized here.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

#include "nfisam/kernels/kernels.hpp"

namespace nfisam::kernels {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void axpy_neon(double* y, double alpha, const double* x, std::size_t n) {
  float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void matmul_nt_neon(const double* a, std::size_t m, const double* b, std::size_t n,
                    std::size_t k, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = dot_neon(ai, b + j * k, k);
      double* cij = c + i * n + j;
      *cij = accumulate ? *cij + acc : acc;
    }
  }
}

}  // namespace

const Ops& neon_ops() {
  static const Ops ops{
      "neon",
      dot_neon,
      sum_neon,
      axpy_neon,
      matmul_nt_neon,
      scalar_ops().exp_inplace,
      scalar_ops().log_inplace,
      scalar_ops().softplus,
      scalar_ops().sigmoid,
  };
  return ops;
}

}  // namespace nfisam::kernels

#endif  // aarch64
