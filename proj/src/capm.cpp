#include "evstudy/capm.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "evstudy/error.hpp"
#include "evstudy/kernels.hpp"

namespace evstudy {

CapmFit fit_capm(std::span<const double> returns, std::span<const double> market,
                 std::string firm_id) {
  if (returns.size() != market.size())
    throw InputError(fmt::format("fit_capm {}: {} returns vs {} market observations", firm_id,
                                 returns.size(), market.size()));
  if (returns.size() < 2)
    throw InputError(fmt::format("fit_capm {}: need at least 2 observations", firm_id));

  const double n = double(returns.size());
  const double mean_r = simd::mean(returns);
  const double mean_m = simd::mean(market);
  std::vector<double> centered(market.begin(), market.end());
  double max_dev = 0.0;
  for (double& m : centered) {
    m -= mean_m;
    max_dev = std::max(max_dev, std::abs(m));
  }
  if (max_dev <= 1e-12 * std::max(1.0, std::abs(mean_m)))
    throw EstimationError(fmt::format("fit_capm {}: market has zero variance", firm_id));
  const double sxx = simd::sum_sq(centered);
  const double sxy = simd::dot(centered, returns);

  CapmFit fit;
  fit.firm_id = std::move(firm_id);
  fit.beta = sxy / sxx;
  fit.alpha = mean_r - fit.beta * mean_m;

  std::vector<double> resid(returns.size());
  simd::affine_residual(returns, market, fit.alpha, fit.beta, resid);
  fit.control_mspe = simd::sum_sq(resid) / n;
  if (!std::isfinite(fit.alpha) || !std::isfinite(fit.beta))
    throw EstimationError(fmt::format("fit_capm {}: non-finite coefficients", fit.firm_id));
  return fit;
}

AbnormalSeries abnormal_returns(const CapmFit& fit, std::span<const double> returns,
                                std::span<const double> market, int first_day) {
  if (returns.size() != market.size())
    throw InputError(fmt::format("abnormal_returns {}: returns cover {} days, market {}",
                                 fit.firm_id, returns.size(), market.size()));
  AbnormalSeries out{fit.firm_id, first_day, std::vector<double>(returns.size())};
  simd::affine_residual(returns, market, fit.alpha, fit.beta, out.values);
  return out;
}

double car(const AbnormalSeries& series, int from, int to) {
  if (from > to)
    throw InputError(fmt::format("car {}: empty window [{}, {}]", series.firm_id, from, to));
  if (from < series.first_day || to > series.last_day())
    throw InputError(fmt::format("car {}: window [{}, {}] outside series days [{}, {}]",
                                 series.firm_id, from, to, series.first_day, series.last_day()));
  const auto begin = std::size_t(from - series.first_day);
  return simd::sum(std::span<const double>(series.values).subspan(begin, std::size_t(to - from + 1)));
}

double mspe(std::span<const double> values) {
  if (values.empty()) throw InputError("mspe: empty series");
  return simd::sum_sq(values) / double(values.size());
}

double mspe(const AbnormalSeries& series) { return mspe(std::span<const double>(series.values)); }

}  // namespace evstudy
