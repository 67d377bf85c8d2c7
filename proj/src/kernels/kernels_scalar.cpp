#include <cmath>
#include <cstddef>

#include "nfisam/kernels/kernels.hpp"

namespace nfisam::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matmul_nt_scalar(const double* a, std::size_t m, const double* b, std::size_t n,
                      std::size_t k, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = dot_scalar(ai, b + j * k, k);
      double* cij = c + i * n + j;
      *cij = accumulate ? *cij + acc : acc;
    }
  }
}

void exp_scalar(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(x[i]);
}

void log_scalar(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::log(x[i]);
}

void softplus_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double v = x[i];
    out[i] = (v > 0.0 ? v : 0.0) + std::log1p(std::exp(-std::fabs(v)));
  }
}

void sigmoid_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double v = x[i];
    if (v >= 0.0) {
      double e = std::exp(-v);
      out[i] = 1.0 / (1.0 + e);
    } else {
      double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{
      "scalar",       dot_scalar, sum_scalar, axpy_scalar,
      matmul_nt_scalar, exp_scalar, log_scalar, softplus_scalar,
      sigmoid_scalar,
  };
  return ops;
}

}  // namespace nfisam::kernels
