#include "evstudy/gsynth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "evstudy/error.hpp"
#include "evstudy/kernels.hpp"

namespace evstudy {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Regressors for the treated projection: the factors, preceded by a constant
/// column when the model carries unit effects.
MatrixXd projection_design(const FactorModel& model, Index rows) {
  const Index extra = model.demeaned ? 1 : 0;
  MatrixXd x(rows, model.r + extra);
  if (extra) x.col(0).setOnes();
  x.rightCols(model.r) = model.factors.topRows(rows);
  return x;
}

/// Treated returns net of the additive time component.
MatrixXd projection_target(const FactorModel& model, const MatrixXd& treated, Index rows) {
  MatrixXd z = treated.topRows(rows);
  if (model.demeaned) {
    z.array() -= model.grand_mean;
    z.colwise() -= model.time_effects.head(rows);
  }
  return z;
}

double max_eigenvalue(const MatrixXd& gram) {
  if (gram.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of `gram` over the largest of `gram` and `reference`.
/// The reference is the Gram matrix over the full span, so a factor that
/// (nearly) vanishes on the subset counts as singular even when the subset
/// Gram is well conditioned on its own scale.
double reciprocal_condition(const MatrixXd& gram, double reference) {
  if (gram.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const VectorXd& ev = eig.eigenvalues();
  const double hi = std::max(ev.cwiseAbs().maxCoeff(), reference);
  if (!(hi > 0.0)) return 0.0;
  return std::max(ev.minCoeff(), 0.0) / hi;
}

}  // namespace

FactorModel estimate_ife(const MatrixXd& controls, int r, const IfeOptions& options) {
  const Index T = controls.rows();
  const Index n = controls.cols();
  if (T < 2 || n < 1)
    throw InputError(fmt::format("estimate_ife: need T >= 2 and N_co >= 1, got {} x {}", T, n));
  if (r < 0 || r > std::min(T, n))
    throw InputError(fmt::format("estimate_ife: r = {} outside [0, {}]", r, std::min(T, n)));
  if (!controls.allFinite()) throw InputError("estimate_ife: non-finite control returns");

  FactorModel m;
  m.r = r;
  m.demeaned = options.two_way_demean;
  m.time_effects = VectorXd::Zero(T);
  m.unit_effects = VectorXd::Zero(n);

  MatrixXd y = controls;
  if (m.demeaned) {
    m.grand_mean = controls.mean();
    m.unit_effects = controls.colwise().mean().transpose().array() - m.grand_mean;
    m.time_effects = controls.rowwise().mean().array() - m.grand_mean;
    y.array() -= m.grand_mean;
    y.colwise() -= m.time_effects;
    y.rowwise() -= m.unit_effects.transpose();
  }

  const double sqrt_t = std::sqrt(double(T));
  if (r == 0) {
    Eigen::BDCSVD<MatrixXd> svd(y);
    m.singular_values = svd.singularValues();
    m.factors = MatrixXd::Zero(T, 0);
    m.loadings = MatrixXd::Zero(n, 0);
  } else {
    Eigen::BDCSVD<MatrixXd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    m.singular_values = svd.singularValues();
    m.factors = sqrt_t * svd.matrixU().leftCols(r);
    // Lambda = Y'F/T = V_r S_r / sqrt(T), so Lambda'Lambda = S_r^2 / T is diagonal.
    m.loadings = svd.matrixV().leftCols(r) * (svd.singularValues().head(r) / sqrt_t).asDiagonal();

    const Index sign_rows = options.sign_rows > 0 ? std::min(options.sign_rows, T) : T;
    for (Index k = 0; k < r; ++k) {
      Index at = 0;
      m.factors.col(k).head(sign_rows).cwiseAbs().maxCoeff(&at);
      if (m.factors(at, k) < 0.0) {
        m.factors.col(k) *= -1.0;
        m.loadings.col(k) *= -1.0;
      }
    }
  }

  m.fitted = m.factors * m.loadings.transpose();
  if (m.demeaned) {
    m.fitted.array() += m.grand_mean;
    m.fitted.colwise() += m.time_effects;
    m.fitted.rowwise() += m.unit_effects.transpose();
  }
  m.residuals = controls - m.fitted;
  return m;
}

TreatedLoadings project_loadings(const FactorModel& model, const MatrixXd& treated_pre) {
  if (model.r == 0) throw InputError("project_loadings: model has no factors (r = 0)");
  const Index rows = treated_pre.rows();
  if (rows < 1 || rows > model.periods())
    throw InputError(fmt::format("project_loadings: {} treated rows vs {} factor rows", rows,
                                 model.periods()));
  const MatrixXd x = projection_design(model, rows);
  if (rows < x.cols())
    throw InputError(fmt::format("project_loadings: {} rows cannot identify {} coefficients", rows,
                                 x.cols()));
  const MatrixXd z = projection_target(model, treated_pre, rows);

  const MatrixXd gram = x.transpose() * x;
  const MatrixXd full = projection_design(model, model.periods());
  if (reciprocal_condition(gram, max_eigenvalue(full.transpose() * full)) < kSingularRcond)
    throw EstimationError("project_loadings: singular factor Gram matrix");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  const MatrixXd coef = qr.solve(z);  // p x N_tr

  TreatedLoadings out;
  out.intercepts = VectorXd::Zero(treated_pre.cols());
  if (model.demeaned) {
    out.intercepts = coef.row(0).transpose();
    out.loadings = coef.bottomRows(model.r).transpose();
  } else {
    out.loadings = coef.transpose();
  }
  return out;
}

MatrixXd counterfactual(const TreatedLoadings& loadings, const FactorModel& model) {
  if (loadings.loadings.cols() != model.r)
    throw InputError(fmt::format("counterfactual: loadings have {} factors, model {}",
                                 loadings.loadings.cols(), model.r));
  MatrixXd out = model.factors * loadings.loadings.transpose();
  if (model.demeaned) {
    out.array() += model.grand_mean;
    out.colwise() += model.time_effects;
  }
  if (loadings.intercepts.size() == out.cols()) out.rowwise() += loadings.intercepts.transpose();
  return out;
}

AttSeries att(const MatrixXd& observed_treated, const MatrixXd& counterfactual_treated) {
  if (observed_treated.rows() != counterfactual_treated.rows() ||
      observed_treated.cols() != counterfactual_treated.cols() || observed_treated.cols() == 0)
    throw InputError(fmt::format("att: observed {} x {} vs counterfactual {} x {}",
                                 observed_treated.rows(), observed_treated.cols(),
                                 counterfactual_treated.rows(), counterfactual_treated.cols()));
  AttSeries out;
  out.gaps.resize(observed_treated.rows(), observed_treated.cols());
  for (Index j = 0; j < observed_treated.cols(); ++j) {
    simd::subtract({observed_treated.col(j).data(), std::size_t(observed_treated.rows())},
                   {counterfactual_treated.col(j).data(), std::size_t(observed_treated.rows())},
                   {out.gaps.col(j).data(), std::size_t(observed_treated.rows())});
  }
  out.att = out.gaps.rowwise().mean();
  out.se = VectorXd::Zero(out.att.size());
  out.ci_low = out.att;
  out.ci_high = out.att;
  out.pct_low = out.att;
  out.pct_high = out.att;
  return out;
}

CvReport cross_validate_r(const MatrixXd& control_pre, const MatrixXd& treated_pre,
                          std::span<const int> candidates, const IfeOptions& options) {
  if (candidates.empty()) throw InputError("cross_validate_r: no candidate factor counts");
  const Index tc = control_pre.rows();
  if (treated_pre.rows() != tc || treated_pre.cols() < 1)
    throw InputError("cross_validate_r: treated and control spans differ");
  const int max_r = int(std::min(tc - 1, control_pre.cols()));

  CvReport report;
  report.candidates.assign(candidates.begin(), candidates.end());
  std::sort(report.candidates.begin(), report.candidates.end());
  report.candidates.erase(std::unique(report.candidates.begin(), report.candidates.end()),
                          report.candidates.end());
  if (report.candidates.front() < 0 || report.candidates.back() > max_r)
    throw InputError(fmt::format("cross_validate_r: candidates must lie in [0, {}]", max_r));

  const Index ntr = treated_pre.cols();
  for (int r : report.candidates) {
    const FactorModel model = estimate_ife(control_pre, r, options);
    const MatrixXd x = projection_design(model, tc);  // tc x p
    const MatrixXd z = projection_target(model, treated_pre, tc);
    const Index p = x.cols();

    double sse = 0.0;
    bool feasible = true;
    if (p == 0) {
      sse = z.squaredNorm();
    } else {
      const MatrixXd gram = x.transpose() * x;
      const MatrixXd xz = x.transpose() * z;  // p x N_tr
      const double reference = max_eigenvalue(gram);
      for (Index s = 0; s < tc && feasible; ++s) {
        const VectorXd xs = x.row(s).transpose();
        const MatrixXd gram_s = gram - xs * xs.transpose();
        if (reciprocal_condition(gram_s, reference) < kSingularRcond) {
          feasible = false;
          break;
        }
        const Eigen::LDLT<MatrixXd> solver(gram_s);
        const MatrixXd rhs = xz - xs * z.row(s);
        const MatrixXd coef = solver.solve(rhs);  // p x N_tr
        for (Index i = 0; i < ntr; ++i) {
          const double e = z(s, i) - xs.dot(coef.col(i));
          sse += e * e;
        }
      }
    }
    report.feasible.push_back(feasible);
    report.mspe.push_back(feasible ? sse / double(tc) : std::numeric_limits<double>::infinity());
  }

  std::size_t best = report.candidates.size();
  for (std::size_t k = 0; k < report.candidates.size(); ++k) {
    if (!report.feasible[k]) continue;
    if (best == report.candidates.size() || report.mspe[k] < report.mspe[best]) best = k;
  }
  if (best == report.candidates.size())
    throw EstimationError("cross_validate_r: every candidate factor count is infeasible");
  report.chosen = report.candidates[best];
  return report;
}

GscFit fit_gsc(const MatrixXd& controls, const MatrixXd& treated, Index t_control, int r,
               bool two_way_demean) {
  if (controls.rows() != treated.rows())
    throw InputError(fmt::format("fit_gsc: controls cover {} days, treated {}", controls.rows(),
                                 treated.rows()));
  if (t_control < 2 || t_control >= controls.rows())
    throw InputError(fmt::format("fit_gsc: control span {} outside [2, {})", t_control,
                                 controls.rows()));
  if (treated.cols() < 1) throw InputError("fit_gsc: no treated firm");
  if (!treated.allFinite()) throw InputError("fit_gsc: non-finite treated returns");

  GscFit fit;
  fit.r = r;
  fit.t_control = t_control;
  fit.model = estimate_ife(controls, r, IfeOptions{two_way_demean, t_control});
  if (r > 0 || fit.model.demeaned) {
    if (r > 0) {
      fit.loadings = project_loadings(fit.model, treated.topRows(t_control));
    } else {
      // intercept-only projection
      const MatrixXd z = projection_target(fit.model, treated, t_control);
      fit.loadings.loadings = MatrixXd::Zero(treated.cols(), 0);
      fit.loadings.intercepts = z.colwise().mean().transpose();
    }
    fit.counterfactual = counterfactual(fit.loadings, fit.model);
  } else {
    fit.loadings.loadings = MatrixXd::Zero(treated.cols(), 0);
    fit.loadings.intercepts = VectorXd::Zero(treated.cols());
    fit.counterfactual = MatrixXd::Zero(treated.rows(), treated.cols());
  }

  fit.gaps = treated - fit.counterfactual;
  const Index t0 = treated.rows() - t_control;
  fit.att = fit.gaps.bottomRows(t0).rowwise().mean();

  double total = 0.0;
  for (Index j = 0; j < fit.gaps.cols(); ++j)
    total += simd::sum_sq({fit.gaps.col(j).data(), std::size_t(t_control)}) / double(t_control);
  fit.pre_mspe = total / double(fit.gaps.cols());
  return fit;
}

std::vector<AbnormalSeries> gsc_abnormal(const ReturnPanel& panel, int r, bool two_way_demean) {
  const auto treated_cols = panel.treated_columns();
  const auto control_cols = panel.control_columns();
  const Index tc = Index(panel.window().control_length());
  const GscFit fit =
      fit_gsc(panel.stacked(control_cols), panel.stacked(treated_cols), tc, r, two_way_demean);

  std::vector<AbnormalSeries> out;
  out.reserve(treated_cols.size());
  const Index t0 = panel.window().t0();
  for (std::size_t j = 0; j < treated_cols.size(); ++j) {
    AbnormalSeries s;
    s.firm_id = panel.firms()[treated_cols[j]];
    s.first_day = 1;
    const auto col = fit.gaps.col(Index(j)).tail(t0);
    s.values.assign(col.data(), col.data() + t0);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace evstudy
