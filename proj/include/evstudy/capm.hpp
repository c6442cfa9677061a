#pragma once

// Per-firm market model: R_t = alpha + beta * MKT_t fitted by OLS on the
// control span, abnormal returns, cumulative abnormal returns and MSPE.

#include <span>
#include <string>
#include <vector>

namespace evstudy {

struct CapmFit {
  std::string firm_id;
  double alpha = 0.0;  ///< percent per day
  double beta = 0.0;
  double control_mspe = 0.0;  ///< mean squared in-sample residual
};

/// Abnormal returns labelled by day: values[k] belongs to day first_day + k.
struct AbnormalSeries {
  std::string firm_id;
  int first_day = 1;
  std::vector<double> values;

  int last_day() const noexcept { return first_day + int(values.size()) - 1; }
};

/// Closed-form simple regression with intercept. Throws InputError on length
/// mismatch or fewer than 2 observations, EstimationError when the market has
/// zero variance.
CapmFit fit_capm(std::span<const double> returns, std::span<const double> market,
                 std::string firm_id = {});

/// values[t] = R_t - alpha - beta * MKT_t for days first_day .. first_day + n - 1.
/// Throws InputError when the two sequences do not cover the same range.
AbnormalSeries abnormal_returns(const CapmFit& fit, std::span<const double> returns,
                                std::span<const double> market, int first_day = 1);

/// Sum of abnormal returns over [from, to] inclusive. Throws InputError when
/// from > to or either end lies outside the series.
double car(const AbnormalSeries& series, int from, int to);

/// Mean of squared values. Throws InputError on an empty series.
double mspe(const AbnormalSeries& series);
double mspe(std::span<const double> values);

}  // namespace evstudy
