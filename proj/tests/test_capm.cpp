#include <doctest.h>

#include <random>

#include "evstudy/capm.hpp"
#include "evstudy/error.hpp"
#include "oracle/oracle.hpp"

using namespace evstudy;

TEST_CASE("hand-computed four-point fit") {
  // X'X = [[4,6],[6,14]], X'y = [4,7] -> alpha 0.7, beta 0.2
  const std::vector<double> r{1, 0, 2, 1};
  const std::vector<double> m{0, 1, 2, 3};
  const CapmFit fit = fit_capm(r, m, "A");
  CHECK(fit.firm_id == "A");
  CHECK(fit.alpha == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(fit.beta == doctest::Approx(0.2).epsilon(1e-14));
  // residuals 0.3, -0.9, 0.9, -0.3
  CHECK(fit.control_mspe == doctest::Approx(0.45).epsilon(1e-14));

  const AbnormalSeries ar = abnormal_returns(fit, r, m, 5);
  CHECK(ar.first_day == 5);
  CHECK(ar.last_day() == 8);
  CHECK(ar.values[1] == doctest::Approx(-0.9));
  CHECK(car(ar, 5, 8) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(car(ar, 6, 7) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(car(ar, 5, 5) == doctest::Approx(0.3));
  CHECK(mspe(ar) == doctest::Approx(0.45));
}

TEST_CASE("market model matches the normal-equations oracle") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 30 + rep * 7;
    std::vector<double> r(static_cast<std::size_t>(n)), m(static_cast<std::size_t>(n));
    const double a = n01(rng), b = 1.0 + 0.5 * n01(rng);
    for (int t = 0; t < n; ++t) {
      m[std::size_t(t)] = 2.0 * n01(rng) + 0.3;
      r[std::size_t(t)] = a + b * m[std::size_t(t)] + n01(rng);
    }
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) {
      x(t, 0) = 1.0;
      x(t, 1) = m[std::size_t(t)];
      y(t) = r[std::size_t(t)];
    }
    const Eigen::VectorXd want = oracle::normal_equations(x, y);
    const CapmFit fit = fit_capm(r, m);
    CHECK(fit.alpha == doctest::Approx(want(0)).epsilon(1e-10));
    CHECK(fit.beta == doctest::Approx(want(1)).epsilon(1e-10));
    const AbnormalSeries res = abnormal_returns(fit, r, m);
    CHECK(std::abs(car(res, 1, n)) < 1e-8);
    double cov = 0.0;
    for (int t = 0; t < n; ++t) cov += res.values[std::size_t(t)] * m[std::size_t(t)];
    CHECK(std::abs(cov) < 1e-8);
  }
}

TEST_CASE("CAR is the inclusive sum and additive over adjacent windows") {
  AbnormalSeries s{"x", 1, {0.5, -1.0, 2.0, 0.25, 3.0, -0.5}};
  CHECK(car(s, 1, 6) == doctest::Approx(4.25));
  for (int k = 1; k < 6; ++k)
    CHECK(car(s, 1, k) + car(s, k + 1, 6) == doctest::Approx(car(s, 1, 6)));
  CHECK_THROWS_AS(car(s, 4, 3), InputError);
  CHECK_THROWS_AS(car(s, 0, 3), InputError);
  CHECK_THROWS_AS(car(s, 2, 7), InputError);
}

TEST_CASE("fit errors") {
  const std::vector<double> flat{1, 1, 1, 1};
  const std::vector<double> r{1, 2, 3, 4};
  CHECK_THROWS_AS(fit_capm(r, flat), EstimationError);
  const std::vector<double> flat_big{1e6, 1e6, 1e6, 1e6};
  CHECK_THROWS_AS(fit_capm(r, flat_big), EstimationError);
  const std::vector<double> short_m{1, 2, 3};
  CHECK_THROWS_AS(fit_capm(r, short_m), InputError);
  const std::vector<double> one{1};
  CHECK_THROWS_AS(fit_capm(one, one), InputError);
  CHECK_THROWS_AS(mspe(std::span<const double>{}), InputError);
  const CapmFit fit = fit_capm(r, std::vector<double>{0, 1, 2, 4});
  CHECK_THROWS_AS(abnormal_returns(fit, r, short_m), InputError);
}

TEST_CASE("fit is exact on noiseless data") {
  std::vector<double> m(40), r(40);
  for (std::size_t t = 0; t < 40; ++t) {
    m[t] = std::sin(double(t));
    r[t] = -0.25 + 1.75 * m[t];
  }
  const CapmFit fit = fit_capm(r, m);
  CHECK(fit.alpha == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(fit.beta == doctest::Approx(1.75).epsilon(1e-12));
  CHECK(fit.control_mspe < 1e-24);
}
