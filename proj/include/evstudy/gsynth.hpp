#pragma once

// Generalized synthetic control with multiple treated units.
//
// Latent factors are extracted from the control firms (interactive fixed
// effects, solved in closed form by SVD), treated loadings are projected on
// the control-span factors, and the factor model predicts each treated firm's
// untreated returns over the treatment span. The factor count is chosen by
// leave-one-period-out cross-validation and uncertainty comes from a two-stage
// residual bootstrap.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "evstudy/capm.hpp"
#include "evstudy/panel.hpp"

namespace evstudy {

struct IfeOptions {
  /// Remove grand mean, unit means and time means before extracting factors.
  bool two_way_demean = false;
  /// Leading rows used to fix factor signs (0 means all rows).
  Eigen::Index sign_rows = 0;
};

/// Factor decomposition of a T x N_co control matrix Y:
///   Y = mu + unit_effects' + time_effects + F * Lambda' + residuals
/// with F'F/T = I_r and Lambda'Lambda diagonal. The additive terms are zero
/// unless two-way demeaning was requested.
struct FactorModel {
  int r = 0;
  Eigen::MatrixXd factors;    ///< T x r
  Eigen::MatrixXd loadings;   ///< N_co x r
  Eigen::MatrixXd fitted;     ///< T x N_co, including additive effects
  Eigen::MatrixXd residuals;  ///< T x N_co
  Eigen::VectorXd singular_values;  ///< of the (demeaned) control matrix, descending
  bool demeaned = false;
  double grand_mean = 0.0;
  Eigen::VectorXd time_effects;  ///< T
  Eigen::VectorXd unit_effects;  ///< N_co

  Eigen::Index periods() const noexcept { return factors.rows(); }
  /// Sum of squared residuals.
  double objective() const { return residuals.squaredNorm(); }
};

/// Throws InputError when r is outside [0, min(T, N_co)], T < 2, N_co < 1 or
/// the matrix has non-finite entries.
FactorModel estimate_ife(const Eigen::MatrixXd& controls, int r, const IfeOptions& options = {});

struct TreatedLoadings {
  Eigen::MatrixXd loadings;    ///< N_tr x r
  Eigen::VectorXd intercepts;  ///< N_tr; zero unless the model is demeaned
};

/// OLS projection of each treated firm's leading `treated_pre.rows()` returns
/// on the factors over the same rows. Throws InputError when r = 0 or shapes
/// disagree, EstimationError when the factor Gram matrix is singular.
TreatedLoadings project_loadings(const FactorModel& model, const Eigen::MatrixXd& treated_pre);

/// Predicted untreated returns for every treated firm over all T rows.
Eigen::MatrixXd counterfactual(const TreatedLoadings& loadings, const FactorModel& model);

/// Per-day average effect on the treated over the treatment span, with
/// optional bootstrap intervals.
struct AttSeries {
  int first_day = 1;
  Eigen::VectorXd att;       ///< t0
  Eigen::MatrixXd gaps;      ///< t0 x N_tr, observed minus counterfactual
  bool has_intervals = false;
  double confidence = 0.0;
  Eigen::VectorXd se;        ///< bootstrap standard error (zero without intervals)
  Eigen::VectorXd ci_low;    ///< normal approximation
  Eigen::VectorXd ci_high;
  Eigen::VectorXd pct_low;   ///< bootstrap percentile bounds
  Eigen::VectorXd pct_high;
};

/// Point estimates: att_t is the mean over treated firms of observed minus
/// counterfactual. Throws InputError on shape mismatch.
AttSeries att(const Eigen::MatrixXd& observed_treated, const Eigen::MatrixXd& counterfactual_treated);

struct CvReport {
  std::vector<int> candidates;  ///< ascending
  std::vector<double> mspe;     ///< +inf where infeasible
  std::vector<bool> feasible;
  int chosen = 0;
};

/// Smallest eigenvalue of a factor Gram matrix, relative to the largest eigenvalue
/// of the Gram over the full span, below which the matrix counts as singular.
inline constexpr double kSingularRcond = 1e-12;

/// Leave-one-period-out cross-validation of the factor count on the control
/// span: MSPE(r) = sum_s sum_i e_is^2 / T_c. Ties go to the smallest r.
CvReport cross_validate_r(const Eigen::MatrixXd& control_pre, const Eigen::MatrixXd& treated_pre,
                          std::span<const int> candidates, const IfeOptions& options = {});

/// Full estimation on T x N matrices whose first `t_control` rows are the
/// control span.
struct GscFit {
  int r = 0;
  Eigen::Index t_control = 0;
  FactorModel model;
  TreatedLoadings loadings;
  Eigen::MatrixXd counterfactual;  ///< T x N_tr
  Eigen::MatrixXd gaps;            ///< T x N_tr
  Eigen::VectorXd att;             ///< treatment-span rows only
  /// Mean over treated firms of their control-span mean squared gap.
  double pre_mspe = 0.0;
};

GscFit fit_gsc(const Eigen::MatrixXd& controls, const Eigen::MatrixXd& treated,
               Eigen::Index t_control, int r, bool two_way_demean = false);

struct BootstrapConfig {
  int b1 = 100;  ///< placebo replications for the treated residual pool
  int b2 = 500;  ///< bootstrap replications
  double confidence = 0.95;
  std::uint64_t seed = 1;
  /// Failed inner estimations re-drawn per stage before giving up.
  int max_retries = 50;
  bool two_way_demean = false;
  /// Worker threads; results do not depend on this.
  unsigned threads = 1;
};

/// Two-stage residual bootstrap around fit_gsc; requires N_co >= 2, b1 >= 1
/// and b2 >= 2. Throws EstimationError after the retry budget is spent.
AttSeries bootstrap_inference(const Eigen::MatrixXd& controls, const Eigen::MatrixXd& treated,
                              Eigen::Index t_control, int r, const BootstrapConfig& config);
AttSeries bootstrap_inference(const ReturnPanel& panel, int r, const BootstrapConfig& config);

/// Per treated firm gap series over treatment days 1..t0, in treated-column order.
std::vector<AbnormalSeries> gsc_abnormal(const ReturnPanel& panel, int r,
                                         bool two_way_demean = false);

}  // namespace evstudy
