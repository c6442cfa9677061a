#pragma once

// Inner-loop arithmetic kernels with a scalar reference implementation and
// SIMD variants (AVX2+FMA on x86-64, NEON on aarch64) chosen at runtime.
//
// Reductions in the SIMD variants use several lane accumulators, so their
// results differ from the scalar reference by rounding only. Elementwise
// kernels are bit-identical across backends.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace evstudy::simd {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend b) noexcept;

/// Backends compiled into this binary and supported by the running CPU.
std::vector<Backend> available_backends();

/// Backend used by the free functions below. Defaults to the widest available
/// one; the EVSTUDY_SIMD environment variable ("scalar", "avx2", "neon")
/// overrides the default at first use.
Backend active_backend() noexcept;

/// Switches the active backend. Throws std::invalid_argument when the backend
/// is not available. Not thread-safe with respect to concurrent kernel calls.
void set_backend(Backend b);

struct KernelTable {
  double (*sum)(const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum_sq)(const double*, std::size_t);
  double (*sum_sq_dev)(const double*, std::size_t, double);
  double (*sum_sq_diff)(const double*, const double*, std::size_t);
  void (*affine_residual)(const double*, const double*, double, double, double*, std::size_t);
  void (*subtract)(const double*, const double*, double*, std::size_t);
};

/// Kernel table for a specific backend (used by equivalence tests).
const KernelTable& kernels_for(Backend b);

double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double sum_sq(std::span<const double> x);
/// sum of (x_i - center)^2
double sum_sq_dev(std::span<const double> x, double center);
/// sum of (x_i - y_i)^2
double sum_sq_diff(std::span<const double> x, std::span<const double> y);
/// out_i = y_i - alpha - beta * x_i
void affine_residual(std::span<const double> y, std::span<const double> x, double alpha,
                     double beta, std::span<double> out);
/// out_i = x_i - y_i
void subtract(std::span<const double> x, std::span<const double> y, std::span<double> out);

inline double mean(std::span<const double> x) {
  return sum(x) / static_cast<double>(x.size());
}

}  // namespace evstudy::simd
