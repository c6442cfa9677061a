#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "evstudy/kernels.hpp"

using namespace evstudy::simd;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Rounding bound for a length-n reduction whose terms have absolute sum `mass`.
double reduction_tol(std::size_t n, double mass) { return 4.0 * double(n + 1) * 1.2e-16 * mass; }

}  // namespace

TEST_CASE("scalar backend is always available and listed first") {
  const auto backends = available_backends();
  REQUIRE_FALSE(backends.empty());
  CHECK(backends.front() == Backend::Scalar);
  CHECK(backend_name(Backend::Avx2) == "avx2");
}

TEST_CASE("unavailable backend is rejected") {
  const auto backends = available_backends();
  for (Backend b : {Backend::Avx2, Backend::Neon}) {
    if (std::find(backends.begin(), backends.end(), b) == backends.end())
      CHECK_THROWS_AS(set_backend(b), std::invalid_argument);
  }
}

TEST_CASE("scalar reductions match naive loops exactly") {
  const KernelTable& k = kernels_for(Backend::Scalar);
  const std::vector<double> x{1.5, -2.0, 3.25, 0.5};
  const std::vector<double> y{2.0, 1.0, -1.0, 4.0};
  CHECK(k.sum(x.data(), 4) == 3.25);
  CHECK(k.dot(x.data(), y.data(), 4) == 3.0 - 2.0 - 3.25 + 2.0);
  CHECK(k.sum_sq(x.data(), 4) == 2.25 + 4.0 + 10.5625 + 0.25);
  CHECK(k.sum_sq_dev(x.data(), 4, 0.5) == 1.0 + 6.25 + 7.5625 + 0.0);
  CHECK(k.sum_sq_diff(x.data(), y.data(), 4) == 0.25 + 9.0 + 18.0625 + 12.25);
  CHECK(k.sum(x.data(), 0) == 0.0);
}

TEST_CASE("every backend agrees with the scalar reference") {
  std::mt19937_64 rng(7);
  const KernelTable& ref = kernels_for(Backend::Scalar);
  for (Backend b : available_backends()) {
    CAPTURE(backend_name(b));
    const KernelTable& k = kernels_for(b);
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 67u, 1001u}) {
      CAPTURE(n);
      const auto x = random_vec(rng, n, 3.0);
      const auto y = random_vec(rng, n, 0.5);
      double abs_x = 0, sq_x = 0, abs_xy = 0, sq_d = 0;
      for (std::size_t i = 0; i < n; ++i) {
        abs_x += std::abs(x[i]);
        sq_x += x[i] * x[i];
        abs_xy += std::abs(x[i] * y[i]);
        sq_d += (x[i] - y[i]) * (x[i] - y[i]);
      }
      CHECK(std::abs(k.sum(x.data(), n) - ref.sum(x.data(), n)) <= reduction_tol(n, abs_x));
      CHECK(std::abs(k.dot(x.data(), y.data(), n) - ref.dot(x.data(), y.data(), n)) <=
            reduction_tol(n, abs_xy));
      CHECK(std::abs(k.sum_sq(x.data(), n) - ref.sum_sq(x.data(), n)) <= reduction_tol(n, sq_x));
      CHECK(std::abs(k.sum_sq_dev(x.data(), n, 0.25) - ref.sum_sq_dev(x.data(), n, 0.25)) <=
            reduction_tol(n, sq_x + 0.5 * abs_x + 0.0625 * double(n)));
      CHECK(std::abs(k.sum_sq_diff(x.data(), y.data(), n) -
                     ref.sum_sq_diff(x.data(), y.data(), n)) <= reduction_tol(n, sq_d));

      std::vector<double> out(n), out_ref(n);
      k.affine_residual(y.data(), x.data(), 0.3, -1.7, out.data(), n);
      ref.affine_residual(y.data(), x.data(), 0.3, -1.7, out_ref.data(), n);
      CHECK(out == out_ref);
      k.subtract(x.data(), y.data(), out.data(), n);
      ref.subtract(x.data(), y.data(), out_ref.data(), n);
      CHECK(out == out_ref);
    }
  }
}

TEST_CASE("free functions follow the active backend") {
  const Backend saved = active_backend();
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9};
  for (Backend b : available_backends()) {
    set_backend(b);
    CHECK(active_backend() == b);
    CHECK(sum(x) == doctest::Approx(45.0));
    CHECK(mean(x) == doctest::Approx(5.0));
    CHECK(sum_sq_dev(x, 5.0) == doctest::Approx(60.0));
  }
  set_backend(saved);
}

TEST_CASE("reductions handle unaligned subspans") {
  std::mt19937_64 rng(11);
  const auto x = random_vec(rng, 40);
  for (Backend b : available_backends()) {
    const KernelTable& k = kernels_for(b);
    for (std::size_t off = 0; off < 5; ++off) {
      const double got = k.sum(x.data() + off, 30);
      double want = 0.0;
      for (std::size_t i = off; i < off + 30; ++i) want += x[i];
      CHECK(got == doctest::Approx(want).epsilon(1e-13));
    }
  }
}
