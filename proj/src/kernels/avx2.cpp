// AVX2 + FMA kernels. Compiled with -mavx2 -mfma; only reached after a
// runtime cpuid check in dispatch.cpp.

#include <immintrin.h>

#include "tables.hpp"

namespace evstudy::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
  }
  if (i + 4 <= n) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    i += 4;
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
  }
  if (i + 4 <= n) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_sq_avx2(const double* x, std::size_t n) { return dot_avx2(x, x, n); }

double sum_sq_dev_avx2(const double* x, std::size_t n, double c) {
  const __m256d vc = _mm256_set1_pd(c);
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), vc);
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), vc);
    a0 = _mm256_fmadd_pd(d0, d0, a0);
    a1 = _mm256_fmadd_pd(d1, d1, a1);
  }
  if (i + 4 <= n) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), vc);
    a0 = _mm256_fmadd_pd(d0, d0, a0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) {
    const double d = x[i] - c;
    s += d * d;
  }
  return s;
}

double sum_sq_diff_avx2(const double* x, const double* y, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4));
    a0 = _mm256_fmadd_pd(d0, d0, a0);
    a1 = _mm256_fmadd_pd(d1, d1, a1);
  }
  if (i + 4 <= n) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    a0 = _mm256_fmadd_pd(d0, d0, a0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

// No FMA here: the elementwise kernels must round exactly like the scalar ones.
void affine_residual_avx2(const double* y, const double* x, double alpha, double beta,
                          double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d shifted = _mm256_sub_pd(_mm256_loadu_pd(y + i), va);
    _mm256_storeu_pd(out + i, _mm256_sub_pd(shifted, _mm256_mul_pd(vb, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) out[i] = (y[i] - alpha) - beta * x[i];
}

void subtract_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

}  // namespace

const KernelTable avx2_table{
    sum_avx2,         dot_avx2,           sum_sq_avx2,   sum_sq_dev_avx2,
    sum_sq_diff_avx2, affine_residual_avx2, subtract_avx2,
};

}  // namespace evstudy::simd::detail
