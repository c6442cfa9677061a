// NEON kernels for aarch64, where Advanced SIMD is architecturally guaranteed.

#include <arm_neon.h>

#include "tables.hpp"

namespace evstudy::simd::detail {
namespace {

double sum_neon(const double* x, std::size_t n) {
  float64x2_t a0 = vdupq_n_f64(0.0);
  float64x2_t a1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 = vaddq_f64(a0, vld1q_f64(x + i));
    a1 = vaddq_f64(a1, vld1q_f64(x + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(a0, a1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t a0 = vdupq_n_f64(0.0);
  float64x2_t a1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 = vfmaq_f64(a0, vld1q_f64(x + i), vld1q_f64(y + i));
    a1 = vfmaq_f64(a1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(a0, a1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_sq_neon(const double* x, std::size_t n) { return dot_neon(x, x, n); }

double sum_sq_dev_neon(const double* x, std::size_t n, double c) {
  const float64x2_t vc = vdupq_n_f64(c);
  float64x2_t a0 = vdupq_n_f64(0.0);
  float64x2_t a1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(x + i), vc);
    const float64x2_t d1 = vsubq_f64(vld1q_f64(x + i + 2), vc);
    a0 = vfmaq_f64(a0, d0, d0);
    a1 = vfmaq_f64(a1, d1, d1);
  }
  double s = vaddvq_f64(vaddq_f64(a0, a1));
  for (; i < n; ++i) {
    const double d = x[i] - c;
    s += d * d;
  }
  return s;
}

double sum_sq_diff_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t a0 = vdupq_n_f64(0.0);
  float64x2_t a1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    const float64x2_t d1 = vsubq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
    a0 = vfmaq_f64(a0, d0, d0);
    a1 = vfmaq_f64(a1, d1, d1);
  }
  double s = vaddvq_f64(vaddq_f64(a0, a1));
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void affine_residual_neon(const double* y, const double* x, double alpha, double beta,
                          double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const float64x2_t vb = vdupq_n_f64(beta);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t shifted = vsubq_f64(vld1q_f64(y + i), va);
    vst1q_f64(out + i, vsubq_f64(shifted, vmulq_f64(vb, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) out[i] = (y[i] - alpha) - beta * x[i];
}

void subtract_neon(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

}  // namespace

const KernelTable neon_table{
    sum_neon,         dot_neon,           sum_sq_neon,   sum_sq_dev_neon,
    sum_sq_diff_neon, affine_residual_neon, subtract_neon,
};

}  // namespace evstudy::simd::detail
