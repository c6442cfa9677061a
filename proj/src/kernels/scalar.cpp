// Scalar reference kernels. Every SIMD backend is tested against these.

#include "tables.hpp"

namespace evstudy::simd::detail {
namespace {

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_sq_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

double sum_sq_dev_scalar(const double* x, std::size_t n, double c) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - c;
    s += d * d;
  }
  return s;
}

double sum_sq_diff_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void affine_residual_scalar(const double* y, const double* x, double alpha, double beta,
                            double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (y[i] - alpha) - beta * x[i];
}

void subtract_scalar(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

}  // namespace

const KernelTable scalar_table{
    sum_scalar,        dot_scalar,         sum_sq_scalar,          sum_sq_dev_scalar,
    sum_sq_diff_scalar, affine_residual_scalar, subtract_scalar,
};

}  // namespace evstudy::simd::detail
