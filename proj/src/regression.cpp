#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "evstudy/error.hpp"
#include "evstudy/eventstats.hpp"

namespace evstudy {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

RegressionResult ols_hc1(const MatrixXd& x, const VectorXd& y, std::vector<std::string> names) {
  const Index n = x.rows();
  const Index k = x.cols();
  if (y.size() != n || Index(names.size()) != k)
    throw InputError("ols_hc1: design, response and names disagree in size");
  if (n <= k)
    throw InputError(fmt::format("ols_hc1: {} observations for {} regressors", n, k));
  if (!x.allFinite() || !y.allFinite()) throw InputError("ols_hc1: non-finite data");

  const double y_mean = y.mean();
  const double sst = (y.array() - y_mean).square().sum();
  if (!(sst > 0.0)) throw EstimationError("ols_hc1: dependent variable has zero variance");

  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() < k) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Index i = qr.rank(); i < k; ++i) cols += (cols.empty() ? "" : ", ") + names[perm(i)];
    throw EstimationError(fmt::format("ols_hc1: design is rank deficient ({} of {}); collinear: {}",
                                      qr.rank(), k, cols));
  }

  RegressionResult out;
  out.names = std::move(names);
  out.n = std::size_t(n);
  out.coef = qr.solve(y);
  const VectorXd resid = y - x * out.coef;

  // (X'X)^-1 = P R^-1 R^-T P'
  const MatrixXd r_upper = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const MatrixXd r_inv =
      r_upper.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
  const MatrixXd perm = qr.colsPermutation();
  const MatrixXd bread = perm * (r_inv * r_inv.transpose()) * perm.transpose();

  const MatrixXd weighted = x.array().colwise() * resid.array();
  const MatrixXd meat = weighted.transpose() * weighted;
  const MatrixXd cov = double(n) / double(n - k) * bread * meat * bread;
  out.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  const boost::math::students_t dist(double(n - k));
  out.t_stat.resize(k);
  out.p_value.resize(k);
  for (Index j = 0; j < k; ++j) {
    out.t_stat(j) = out.se(j) > 0.0 ? out.coef(j) / out.se(j)
                                    : std::copysign(INFINITY, out.coef(j));
    out.p_value(j) =
        std::isfinite(out.t_stat(j))
            ? 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t_stat(j))))
            : 0.0;
  }

  const double ssr = resid.squaredNorm();
  out.r2 = std::clamp(1.0 - ssr / sst, 0.0, 1.0);
  out.adj_r2 = 1.0 - (1.0 - out.r2) * double(n - 1) / double(n - k);
  return out;
}

RegressionResult ols_car_regression(std::span<const CarObservation> rows) {
  const std::set<std::string> industries = [&] {
    std::set<std::string> s;
    for (const auto& r : rows) s.insert(r.industry);
    return s;
  }();
  const std::set<std::string> years = [&] {
    std::set<std::string> s;
    for (const auto& r : rows) s.insert(r.year);
    return s;
  }();

  std::vector<std::string> names{"const",      "treated",       "size",   "size^2",
                                 "size^3",     "profitability", "profitability^2",
                                 "profitability^3", "leverage", "leverage^2", "leverage^3"};
  const std::vector<std::string> ind_levels(std::next(industries.begin(), industries.empty() ? 0 : 1),
                                            industries.end());
  const std::vector<std::string> year_levels(std::next(years.begin(), years.empty() ? 0 : 1),
                                             years.end());
  for (const auto& l : ind_levels) names.push_back("industry[" + l + "]");
  for (const auto& l : year_levels) names.push_back("year[" + l + "]");

  const Index n = Index(rows.size());
  const Index k = Index(names.size());
  MatrixXd x = MatrixXd::Zero(n, k);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[std::size_t(i)];
    y(i) = r.car;
    x(i, 0) = 1.0;
    x(i, 1) = r.treated ? 1.0 : 0.0;
    const double covariates[3] = {r.size, r.profitability, r.leverage};
    for (int c = 0; c < 3; ++c) {
      x(i, 2 + 3 * c) = covariates[c];
      x(i, 3 + 3 * c) = covariates[c] * covariates[c];
      x(i, 4 + 3 * c) = covariates[c] * covariates[c] * covariates[c];
    }
    const auto ind = std::find(ind_levels.begin(), ind_levels.end(), r.industry);
    if (ind != ind_levels.end()) x(i, 11 + (ind - ind_levels.begin())) = 1.0;
    const auto yr = std::find(year_levels.begin(), year_levels.end(), r.year);
    if (yr != year_levels.end())
      x(i, 11 + Index(ind_levels.size()) + (yr - year_levels.begin())) = 1.0;
  }
  return ols_hc1(x, y, std::move(names));
}

}  // namespace evstudy
