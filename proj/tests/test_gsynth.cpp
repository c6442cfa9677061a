#include <doctest.h>

#include <algorithm>
#include <random>

#include "evstudy/error.hpp"
#include "evstudy/gsynth.hpp"
#include "evstudy/simulate.hpp"
#include "oracle/oracle.hpp"

using namespace evstudy;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd sin_matrix() {
  MatrixXd a(20, 10);
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 10; ++j)
      a(i, j) = std::sin(0.7 * double(i) + 1.3 * double(j)) +
                0.5 * std::cos(0.11 * double(i * j)) + 0.01 * double(i - j);
  return a;
}

MatrixXd gaussian(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> n01;
  MatrixXd m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = n01(rng);
  return m;
}

/// Leave-one-period-out MSPE by brute-force refitting.
double brute_force_cv(const FactorModel& model, const MatrixXd& treated_pre) {
  const Index tc = treated_pre.rows();
  const MatrixXd& f = model.factors;
  double sse = 0.0;
  for (Index s = 0; s < tc; ++s) {
    MatrixXd x(tc - 1, model.r);
    for (Index t = 0, k = 0; t < tc; ++t)
      if (t != s) x.row(k++) = f.row(t);
    for (Index i = 0; i < treated_pre.cols(); ++i) {
      VectorXd z(tc - 1);
      for (Index t = 0, k = 0; t < tc; ++t)
        if (t != s) z(k++) = treated_pre(t, i);
      const VectorXd lambda = oracle::normal_equations(x, z);
      const double e = treated_pre(s, i) - f.row(s).dot(lambda);
      sse += e * e;
    }
  }
  return sse / double(tc);
}

}  // namespace

TEST_CASE("frozen singular values and rank-2 objective of a fixed matrix") {
  // reference values from an independent LAPACK-based SVD
  const double sv[10] = {8.491124149143607,  8.125843723658495,  2.8444702749085535,
                         1.7775604684582564, 1.746514210330881,  1.4511837096607378,
                         1.275159971881454,  0.34386592717368786, 0.03101033183782026,
                         0.0086812213873371};
  const FactorModel m2 = estimate_ife(sin_matrix(), 2);
  for (int k = 0; k < 10; ++k) CHECK(m2.singular_values(k) == doctest::Approx(sv[k]).epsilon(1e-12));
  CHECK(m2.objective() == doctest::Approx(18.152292143981477).epsilon(1e-12));
  CHECK(estimate_ife(sin_matrix(), 3).objective() ==
        doctest::Approx(10.061280999143134).epsilon(1e-12));
}

TEST_CASE("factor fit equals the Jacobi truncated reconstruction") {
  std::mt19937_64 rng(5);
  for (auto [t, n] : {std::pair{30, 12}, std::pair{12, 30}, std::pair{60, 60}}) {
    const MatrixXd y = gaussian(rng, t, n);
    for (int r : {1, 2, 4}) {
      const FactorModel m = estimate_ife(y, r);
      const MatrixXd ref = oracle::truncated_reconstruction(y, r);
      CHECK((m.fitted - ref).norm() < 1e-9);
      const MatrixXd ftf = m.factors.transpose() * m.factors / double(t);
      CHECK((ftf - MatrixXd::Identity(r, r)).norm() < 1e-10);
      const MatrixXd ll = m.loadings.transpose() * m.loadings;
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
          if (a != b) CHECK(std::abs(ll(a, b)) < 1e-10 * ll.diagonal().maxCoeff());
      CHECK((m.residuals + m.fitted - y).norm() < 1e-10);
    }
  }
}

TEST_CASE("objective is non-increasing in r and r = 0 leaves the data as residual") {
  std::mt19937_64 rng(9);
  const MatrixXd y = gaussian(rng, 25, 10);
  double prev = estimate_ife(y, 0).objective();
  CHECK(prev == doctest::Approx(y.squaredNorm()));
  CHECK(estimate_ife(y, 0).fitted.norm() == 0.0);
  for (int r = 1; r <= 10; ++r) {
    const double obj = estimate_ife(y, r).objective();
    CHECK(obj <= prev + 1e-9);
    prev = obj;
  }
  CHECK(prev < 1e-18 * y.squaredNorm() + 1e-20);
}

TEST_CASE("factor signs follow the largest entry in the leading rows") {
  std::mt19937_64 rng(3);
  const MatrixXd y = gaussian(rng, 40, 15);
  for (Index rows : {Index(0), Index(10), Index(25)}) {
    const FactorModel m = estimate_ife(y, 3, IfeOptions{false, rows});
    const Index lead = rows == 0 ? 40 : rows;
    for (Index k = 0; k < 3; ++k) {
      Index at = 0;
      m.factors.col(k).head(lead).cwiseAbs().maxCoeff(&at);
      CHECK(m.factors(at, k) > 0.0);
    }
    // sign flips leave the fit unchanged
    CHECK((m.fitted - estimate_ife(y, 3).fitted).norm() < 1e-10);
  }
}

TEST_CASE("two-way demeaning absorbs additive effects") {
  MatrixXd y(12, 6);
  for (Index t = 0; t < 12; ++t)
    for (Index i = 0; i < 6; ++i) y(t, i) = 2.0 + 0.3 * double(i) - 0.1 * double(t * t);
  const FactorModel m = estimate_ife(y, 0, IfeOptions{true, 0});
  CHECK(m.demeaned);
  CHECK(m.residuals.norm() < 1e-12);
  CHECK(m.grand_mean == doctest::Approx(y.mean()));
  CHECK(m.unit_effects.sum() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(m.time_effects.sum() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("estimate_ife input checks") {
  CHECK_THROWS_AS(estimate_ife(MatrixXd::Zero(1, 3), 0), InputError);
  CHECK_THROWS_AS(estimate_ife(MatrixXd::Zero(5, 3), 4), InputError);
  CHECK_THROWS_AS(estimate_ife(MatrixXd::Zero(5, 3), -1), InputError);
  MatrixXd bad = MatrixXd::Zero(5, 3);
  bad(2, 1) = NAN;
  CHECK_THROWS_AS(estimate_ife(bad, 1), InputError);
}

TEST_CASE("treated loadings are recovered exactly on factor data") {
  std::mt19937_64 rng(21);
  const MatrixXd f = gaussian(rng, 50, 2);
  const MatrixXd controls = f * gaussian(rng, 2, 20);
  const MatrixXd lambda_tr = gaussian(rng, 3, 2);
  const MatrixXd treated = f * lambda_tr.transpose();
  const FactorModel m = estimate_ife(controls, 2);
  const TreatedLoadings tl = project_loadings(m, treated.topRows(30));
  const MatrixXd cf = counterfactual(tl, m);
  CHECK((cf - treated).norm() < 1e-9);
  CHECK(tl.intercepts.norm() == 0.0);

  const FactorModel m0 = estimate_ife(controls, 0);
  CHECK_THROWS_AS(project_loadings(m0, treated.topRows(30)), InputError);
  CHECK_THROWS_AS(project_loadings(m, treated.topRows(1)), InputError);
  CHECK_THROWS_AS(project_loadings(m, MatrixXd::Zero(51, 3)), InputError);
}

TEST_CASE("singular factor Gram over the projection rows") {
  // the only factor is non-zero on the last rows alone
  MatrixXd controls = MatrixXd::Zero(10, 4);
  controls.bottomRows(3) << 1, 2, 3, 4, 2, 4, 6, 8, 1, 2, 3, 4;
  const FactorModel m = estimate_ife(controls, 1);
  CHECK_THROWS_AS(project_loadings(m, MatrixXd::Ones(6, 1)), EstimationError);
}

TEST_CASE("ATT is the mean gap across treated firms") {
  MatrixXd obs(3, 2), cf(3, 2);
  obs << 1, 2, 3, 4, 5, 6;
  cf << 0, 0, 1, 1, 2, 5;
  const AttSeries a = att(obs, cf);
  CHECK(a.att(0) == doctest::Approx(1.5));
  CHECK(a.att(1) == doctest::Approx(2.5));
  CHECK(a.att(2) == doctest::Approx(2.0));
  CHECK_FALSE(a.has_intervals);
  CHECK(a.ci_low == a.att);
  CHECK_THROWS_AS(att(obs, MatrixXd::Zero(2, 2)), InputError);
}

TEST_CASE("closed-form leave-one-out equals brute-force refitting") {
  std::mt19937_64 rng(77);
  const MatrixXd f = gaussian(rng, 40, 3);
  const MatrixXd controls = f * gaussian(rng, 3, 15) + 0.3 * gaussian(rng, 40, 15);
  const MatrixXd treated = f * gaussian(rng, 3, 2) + 0.3 * gaussian(rng, 40, 2);
  const std::vector<int> cands{0, 1, 2, 3, 4, 5};
  const CvReport cv = cross_validate_r(controls, treated, cands);
  REQUIRE(cv.candidates == cands);
  CHECK(cv.mspe[0] == doctest::Approx(treated.squaredNorm() / 40.0).epsilon(1e-12));
  for (std::size_t k = 1; k < cands.size(); ++k) {
    CHECK(cv.feasible[k]);
    const FactorModel m = estimate_ife(controls, cands[k]);
    CHECK(cv.mspe[k] == doctest::Approx(brute_force_cv(m, treated)).epsilon(1e-9));
  }
  const auto best = std::min_element(cv.mspe.begin(), cv.mspe.end()) - cv.mspe.begin();
  CHECK(cv.chosen == cands[std::size_t(best)]);
  CHECK(cv.chosen >= 3);
}

TEST_CASE("CV divides by the control span length") {
  // one treated firm, r = 0: MSPE is the mean of squared returns
  MatrixXd controls = MatrixXd::Random(8, 3);
  MatrixXd treated(8, 1);
  treated << 1, -1, 2, 0, 0, 1, -2, 1;
  const std::vector<int> zero{0};
  CHECK(cross_validate_r(controls, treated, zero).mspe[0] == doctest::Approx(12.0 / 8.0));
}

TEST_CASE("CV ties go to the smallest r and infeasible counts are flagged") {
  MatrixXd controls = MatrixXd::Zero(6, 3);
  controls.row(0) << 1, 2, 3;
  controls.row(4) << 0.5, 0.1, 0.2;
  const MatrixXd zeros = MatrixXd::Zero(6, 2);
  const std::vector<int> both{1, 0};
  const CvReport cv = cross_validate_r(controls, zeros, both);
  CHECK(cv.candidates == std::vector<int>{0, 1});
  CHECK(cv.chosen == 0);

  // the first factor lives on a single row: dropping that row is singular
  MatrixXd spike = MatrixXd::Zero(6, 3);
  spike.row(0) << 1, 2, 3;
  const std::vector<int> one{1};
  CHECK_THROWS_AS(cross_validate_r(spike, MatrixXd::Ones(6, 1), one), EstimationError);
  const CvReport mixed = cross_validate_r(spike, MatrixXd::Ones(6, 1), both);
  CHECK(mixed.chosen == 0);
  CHECK_FALSE(mixed.feasible[1]);
  CHECK(std::isinf(mixed.mspe[1]));
}

TEST_CASE("CV candidate range") {
  const MatrixXd controls = MatrixXd::Random(5, 8);
  const MatrixXd treated = MatrixXd::Random(5, 1);
  const std::vector<int> too_big{5};
  CHECK_THROWS_AS(cross_validate_r(controls, treated, too_big), InputError);
  const std::vector<int> negative{-1};
  CHECK_THROWS_AS(cross_validate_r(controls, treated, negative), InputError);
  CHECK_THROWS_AS(cross_validate_r(controls, treated, std::vector<int>{}), InputError);
  CHECK_THROWS_AS(cross_validate_r(controls, MatrixXd::Random(4, 1), std::vector<int>{0}),
                  InputError);
}

TEST_CASE("noiseless factor panel gives exact effects") {
  DgpConfig c;
  c.noise_sd = 0.0;
  c.t_control = 80;
  c.att_profile.assign(36, 0.0);
  for (int d = 21; d <= 36; ++d) c.att_profile[std::size_t(d - 1)] = 1.0;
  const SyntheticTruth truth = generate_panel(c);
  const auto& p = truth.panel;
  const GscFit fit = fit_gsc(p.stacked(p.control_columns()), p.stacked(p.treated_columns()),
                             Index(p.window().control_length()), 2);
  for (Index t = 0; t < 36; ++t)
    CHECK(std::abs(fit.att(t) - c.att_profile[std::size_t(t)]) < 1e-8);
  CHECK(fit.pre_mspe < 1e-16);

  const auto ar = gsc_abnormal(p, 2);
  REQUIRE(ar.size() == 3);
  CHECK(ar[0].first_day == 1);
  CHECK(ar[0].last_day() == 36);
  CHECK(ar[2].values[35] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("fit_gsc with r = 0") {
  MatrixXd controls = MatrixXd::Random(12, 4);
  MatrixXd treated = MatrixXd::Random(12, 2);
  const GscFit plain = fit_gsc(controls, treated, 8, 0, false);
  CHECK(plain.counterfactual.norm() == 0.0);
  CHECK(plain.gaps == treated);
  CHECK(plain.att.size() == 4);

  const GscFit dm = fit_gsc(controls, treated, 8, 0, true);
  // with demeaning the treated intercept is its control-span mean net of time effects
  CHECK((dm.gaps.topRows(8).colwise().mean()).norm() < 1e-12);
}

TEST_CASE("fit_gsc input checks") {
  const MatrixXd c = MatrixXd::Random(12, 4);
  CHECK_THROWS_AS(fit_gsc(c, MatrixXd::Random(11, 1), 8, 1), InputError);
  CHECK_THROWS_AS(fit_gsc(c, MatrixXd::Random(12, 1), 12, 1), InputError);
  CHECK_THROWS_AS(fit_gsc(c, MatrixXd::Random(12, 1), 1, 1), InputError);
  CHECK_THROWS_AS(fit_gsc(c, MatrixXd::Random(12, 0), 8, 1), InputError);
}
