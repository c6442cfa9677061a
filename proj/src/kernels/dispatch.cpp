#include <atomic>
#include <cassert>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "tables.hpp"

namespace evstudy::simd {
namespace {

bool cpu_supports(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(EVSTUDY_HAVE_AVX2_TU)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(EVSTUDY_HAVE_NEON_TU)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend default_backend() {
  if (const char* env = std::getenv("EVSTUDY_SIMD")) {
    const std::string want(env);
    for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
      if (want == backend_name(b) && cpu_supports(b)) return b;
    }
  }
  if (cpu_supports(Backend::Avx2)) return Backend::Avx2;
  if (cpu_supports(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{&kernels_for(default_backend())};
  return table;
}

std::atomic<Backend>& active_id() {
  static std::atomic<Backend> id{default_backend()};
  return id;
}

inline const KernelTable& k() { return *active_table().load(std::memory_order_relaxed); }

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon})
    if (cpu_supports(b)) out.push_back(b);
  return out;
}

Backend active_backend() noexcept { return active_id().load(); }

void set_backend(Backend b) {
  if (!cpu_supports(b))
    throw std::invalid_argument("SIMD backend not available: " + std::string(backend_name(b)));
  active_table().store(&kernels_for(b));
  active_id().store(b);
}

const KernelTable& kernels_for(Backend b) {
  switch (b) {
#if defined(EVSTUDY_HAVE_AVX2_TU)
    case Backend::Avx2:
      return detail::avx2_table;
#endif
#if defined(EVSTUDY_HAVE_NEON_TU)
    case Backend::Neon:
      return detail::neon_table;
#endif
    default:
      return detail::scalar_table;
  }
}

double sum(std::span<const double> x) { return k().sum(x.data(), x.size()); }

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return k().dot(x.data(), y.data(), x.size());
}

double sum_sq(std::span<const double> x) { return k().sum_sq(x.data(), x.size()); }

double sum_sq_dev(std::span<const double> x, double center) {
  return k().sum_sq_dev(x.data(), x.size(), center);
}

double sum_sq_diff(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return k().sum_sq_diff(x.data(), y.data(), x.size());
}

void affine_residual(std::span<const double> y, std::span<const double> x, double alpha,
                     double beta, std::span<double> out) {
  assert(y.size() == x.size() && out.size() == y.size());
  k().affine_residual(y.data(), x.data(), alpha, beta, out.data(), y.size());
}

void subtract(std::span<const double> x, std::span<const double> y, std::span<double> out) {
  assert(x.size() == y.size() && out.size() == x.size());
  k().subtract(x.data(), y.data(), out.data(), x.size());
}

}  // namespace evstudy::simd
