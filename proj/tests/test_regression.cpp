#include <doctest.h>

#include <random>

#include "evstudy/error.hpp"
#include "evstudy/eventstats.hpp"
#include "oracle/oracle.hpp"

using namespace evstudy;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void design_12(MatrixXd& x, VectorXd& y) {
  x.resize(12, 3);
  y.resize(12);
  for (int k = 1; k <= 12; ++k) {
    const double x1 = k, x2 = std::sin(double(k));
    x(k - 1, 0) = 1.0;
    x(k - 1, 1) = x1;
    x(k - 1, 2) = x2;
    y(k - 1) = 2.0 + 0.5 * x1 - x2 + std::cos(3.0 * k) * (1.0 + 0.2 * k);
  }
}

}  // namespace

TEST_CASE("HC1 regression reproduces reference values") {
  // reference values from an independent OLS implementation with HC1 errors
  MatrixXd x;
  VectorXd y;
  design_12(x, y);
  const RegressionResult r = ols_hc1(x, y, {"const", "x1", "x2"});
  const double coef[3] = {1.8715598621326672, 0.5082821250416809, -1.011897846484819};
  const double se[3] = {1.0179435872288072, 0.11869341498597921, 0.6473340589418551};
  const double p[3] = {0.09913678859941151, 0.00204300823931329, 0.15244786733098814};
  for (int j = 0; j < 3; ++j) {
    CHECK(r.coef(j) == doctest::Approx(coef[j]).epsilon(1e-10));
    CHECK(r.se(j) == doctest::Approx(se[j]).epsilon(1e-10));
    CHECK(r.p_value(j) == doctest::Approx(p[j]).epsilon(1e-8));
    CHECK(r.t_stat(j) == doctest::Approx(coef[j] / se[j]).epsilon(1e-10));
  }
  CHECK(r.r2 == doctest::Approx(0.7776549968662019).epsilon(1e-10));
  CHECK(r.adj_r2 == doctest::Approx(0.7282449961698023).epsilon(1e-10));
  CHECK(r.n == 12);
  CHECK(r.names[1] == "x1");
}

TEST_CASE("HC1 regression agrees with the hand-loop oracle") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 25 + 3 * rep;
    MatrixXd x(n, 4);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (int j = 1; j < 4; ++j) x(i, j) = n01(rng) * double(j);
      y(i) = 0.3 - x(i, 1) + 0.2 * x(i, 3) + n01(rng) * (1.0 + std::abs(x(i, 2)));
    }
    const RegressionResult r = ols_hc1(x, y, {"a", "b", "c", "d"});
    const VectorXd coef = oracle::normal_equations(x, y);
    const VectorXd se = oracle::hc1_se(x, y);
    for (int j = 0; j < 4; ++j) {
      CHECK(r.coef(j) == doctest::Approx(coef(j)).epsilon(1e-10));
      CHECK(r.se(j) == doctest::Approx(se(j)).epsilon(1e-9));
    }
  }
}

TEST_CASE("rank deficiency names the collinear column") {
  MatrixXd x(6, 3);
  x << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8, 1, 5, 10, 1, 6, 12;
  const VectorXd y = VectorXd::LinSpaced(6, 0.0, 1.0) + VectorXd::Unit(6, 2);
  try {
    ols_hc1(x, y, {"const", "a", "twice_a"});
    FAIL("expected rank deficiency");
  } catch (const EstimationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("rank deficient") != std::string::npos);
    CHECK((msg.find("twice_a") != std::string::npos || msg.find(": a") != std::string::npos));
  }
}

TEST_CASE("regression input errors") {
  MatrixXd x;
  VectorXd y;
  design_12(x, y);
  CHECK_THROWS_AS(ols_hc1(x, VectorXd::Constant(12, 2.0), {"a", "b", "c"}), EstimationError);
  CHECK_THROWS_AS(ols_hc1(x.topRows(3), y.head(3), {"a", "b", "c"}), InputError);
  CHECK_THROWS_AS(ols_hc1(x, y, {"a", "b"}), InputError);
  CHECK_THROWS_AS(ols_hc1(x, y.head(11), {"a", "b", "c"}), InputError);
}

TEST_CASE("CAR regression equals a manual dummy design") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  const std::vector<std::string> inds{"44", "21", "31"};
  const std::vector<std::string> years{"2014", "2012", "2013"};
  std::vector<CarObservation> rows;
  for (int i = 0; i < 90; ++i) {
    CarObservation o;
    o.treated = i % 5 == 0;
    // standardized covariates keep the cubic design well conditioned
    o.size = n01(rng);
    o.profitability = n01(rng);
    o.leverage = n01(rng);
    o.industry = inds[std::size_t(i % 3)];
    o.year = years[std::size_t((i / 3) % 3)];
    o.car = 0.02 * o.treated + 0.01 * o.size + 0.05 * n01(rng);
    rows.push_back(o);
  }
  const RegressionResult r = ols_car_regression(rows);
  REQUIRE(r.names.size() == 15);
  CHECK(r.names[11] == "industry[31]");
  CHECK(r.names[12] == "industry[44]");
  CHECK(r.names[13] == "year[2013]");
  CHECK(r.names[14] == "year[2014]");

  MatrixXd x = MatrixXd::Zero(90, 15);
  VectorXd y(90);
  for (int i = 0; i < 90; ++i) {
    const auto& o = rows[std::size_t(i)];
    y(i) = o.car;
    x(i, 0) = 1;
    x(i, 1) = o.treated;
    const double cov[3] = {o.size, o.profitability, o.leverage};
    for (int c = 0; c < 3; ++c)
      for (int p = 1; p <= 3; ++p) x(i, 1 + 3 * c + p) = std::pow(cov[c], p);
    x(i, 11) = o.industry == "31";
    x(i, 12) = o.industry == "44";
    x(i, 13) = o.year == "2013";
    x(i, 14) = o.year == "2014";
  }
  const VectorXd coef = oracle::normal_equations(x, y);
  const VectorXd se = oracle::hc1_se(x, y);
  for (int j = 0; j < 15; ++j) {
    CHECK(r.coef(j) == doctest::Approx(coef(j)).epsilon(1e-10));
    CHECK(r.se(j) == doctest::Approx(se(j)).epsilon(1e-9));
  }
}

TEST_CASE("CAR regression with a single industry and year has no dummies") {
  std::vector<CarObservation> rows;
  for (int i = 0; i < 30; ++i) {
    CarObservation o;
    o.treated = i < 10;
    o.size = 3.0 + 0.1 * i;
    o.profitability = std::sin(double(i));
    o.leverage = std::cos(0.7 * i);
    o.industry = "21";
    o.year = "2013";
    o.car = 0.01 * std::sin(3.0 * i) + (o.treated ? 0.02 : 0.0);
    rows.push_back(o);
  }
  CHECK(ols_car_regression(rows).names.size() == 11);
}
