// AVX2+FMA variants of the hot kernels. This translation unit is compiled
// with -mavx2 -mfma; the dispatcher only hands these out after a runtime
// cpuid check, so the rest of the binary stays baseline.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "nfisam/kernels/kernels.hpp"

namespace nfisam::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void axpy_avx2(double* y, double alpha, const double* x, std::size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void matmul_nt_avx2(const double* a, std::size_t m, const double* b, std::size_t n,
                    std::size_t k, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + (j + 0) * k;
      const double* b1 = b + (j + 1) * k;
      const double* b2 = b + (j + 2) * k;
      const double* b3 = b + (j + 3) * k;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        __m256d va = _mm256_loadu_pd(ai + p);
        s0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + p), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        double av = ai[p];
        r0 += av * b0[p];
        r1 += av * b1[p];
        r2 += av * b2[p];
        r3 += av * b3[p];
      }
      double* cij = c + i * n + j;
      if (accumulate) {
        cij[0] += r0; cij[1] += r1; cij[2] += r2; cij[3] += r3;
      } else {
        cij[0] = r0; cij[1] = r1; cij[2] = r2; cij[3] = r3;
      }
    }
    for (; j < n; ++j) {
      double acc = dot_avx2(ai, b + j * k, k);
      double* cij = c + i * n + j;
      *cij = accumulate ? *cij + acc : acc;
    }
  }
}

// exp on 4 lanes: Cody-Waite range reduction, degree-12 Taylor on the
// reduced argument, exponent reassembly through the bit pattern.
// Valid for |x| <= ~708; callers clamp.
inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d max_x = _mm256_set1_pd(708.0);
  const __m256d min_x = _mm256_set1_pd(-708.0);

  x = _mm256_min_pd(_mm256_max_pd(x, min_x), max_x);
  __m256d nf = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                               _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(nf, ln2_hi, x);
  r = _mm256_fnmadd_pd(nf, ln2_lo, r);

  const double inv_fact[] = {
      1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
      1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,     1.0 / 120.0,
      1.0 / 24.0,        1.0 / 6.0,        0.5,             1.0};
  __m256d p = _mm256_set1_pd(inv_fact[0]);
  for (int t = 1; t < 12; ++t)
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(inv_fact[t]));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));  // 1 + r + r^2/2! + ...

  __m128i n32 = _mm256_cvtpd_epi32(nf);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

// log on 4 lanes via atanh series on (m-1)/(m+1) after mantissa
// normalization into [sqrt(1/2), sqrt(2)). Positive normal inputs only.
inline __m256d log4(__m256d x) {
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  const __m256d sqrt2 = _mm256_set1_pd(1.4142135623730951);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

  __m256i xb = _mm256_castpd_si256(x);
  __m256i expo = _mm256_sub_epi64(_mm256_srli_epi64(xb, 52), _mm256_set1_epi64x(1023));
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(xb, mant_mask), one_bits));

  // fold m in [sqrt2, 2) down by one octave: x = (m/2) * 2^(e+1)
  __m256d big = _mm256_cmp_pd(m, sqrt2, _CMP_GE_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  expo = _mm256_add_epi64(expo, _mm256_castpd_si256(_mm256_and_pd(
                                    big, _mm256_castsi256_pd(_mm256_set1_epi64x(1)))));

  // int64 -> double lane-wise (values are small exponents)
  alignas(32) std::int64_t ei[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(ei), expo);
  __m256d e = _mm256_set_pd(static_cast<double>(ei[3]), static_cast<double>(ei[2]),
                            static_cast<double>(ei[1]), static_cast<double>(ei[0]));

  __m256d t = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  __m256d t2 = _mm256_mul_pd(t, t);
  const double coef[] = {1.0 / 19.0, 1.0 / 17.0, 1.0 / 15.0, 1.0 / 13.0, 1.0 / 11.0,
                         1.0 / 9.0,  1.0 / 7.0,  1.0 / 5.0,  1.0 / 3.0};
  __m256d p = _mm256_set1_pd(coef[0]);
  for (int i = 1; i < 9; ++i) p = _mm256_fmadd_pd(p, t2, _mm256_set1_pd(coef[i]));
  p = _mm256_fmadd_pd(p, t2, one);
  __m256d lt = _mm256_mul_pd(_mm256_add_pd(t, t), p);

  __m256d res = _mm256_fmadd_pd(e, ln2_lo, lt);
  return _mm256_fmadd_pd(e, ln2_hi, res);
}

void exp_avx2(double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] = std::exp(x[i]);
}

void log_avx2(double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, log4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] = std::log(x[i]);
}

void softplus_avx2(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d signmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    __m256d av = _mm256_and_pd(v, signmask);
    __m256d e = exp4(_mm256_sub_pd(zero, av));
    __m256d l = log4(_mm256_add_pd(one, e));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_max_pd(v, zero), l));
  }
  for (; i < n; ++i) {
    double v = x[i];
    out[i] = (v > 0.0 ? v : 0.0) + std::log1p(std::exp(-std::fabs(v)));
  }
}

void sigmoid_avx2(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d signmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    __m256d av = _mm256_and_pd(v, signmask);
    __m256d e = exp4(_mm256_sub_pd(zero, av));
    __m256d denom = _mm256_add_pd(one, e);
    __m256d pos = _mm256_div_pd(one, denom);
    __m256d neg = _mm256_div_pd(e, denom);
    __m256d is_neg = _mm256_cmp_pd(v, zero, _CMP_LT_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(pos, neg, is_neg));
  }
  for (; i < n; ++i) {
    double v = x[i];
    double e = std::exp(-std::fabs(v));
    out[i] = v >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  }
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops{
      "avx2",         dot_avx2, sum_avx2, axpy_avx2,
      matmul_nt_avx2, exp_avx2, log_avx2, softplus_avx2,
      sigmoid_avx2,
  };
  return ops;
}

}  // namespace nfisam::kernels

#endif  // x86_64
