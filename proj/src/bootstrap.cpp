// Two-stage residual bootstrap for the synthetic-control ATT.
//
// Stage 1 builds a pool of treated-style prediction errors by refitting the
// estimator with one control posing as treated. Stage 2 simulates untreated
// panels from the original fit plus resampled residuals and collects the ATT
// re-estimated on each; their spread gives the standard errors.

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "evstudy/error.hpp"
#include "evstudy/gsynth.hpp"
#include "parallel.hpp"

namespace evstudy {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum Stage : std::uint32_t { kPlacebo = 1, kResample = 2 };

/// Independent stream for one replication attempt, derived from the master seed.
std::mt19937_64 substream(std::uint64_t seed, Stage stage, std::size_t rep, int attempt) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stage),
                    std::uint32_t(rep), std::uint32_t(std::uint64_t(rep) >> 32),
                    std::uint32_t(attempt)};
  return std::mt19937_64(seq);
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  // linear interpolation between order statistics (type 7)
  const double h = (double(sorted.size()) - 1.0) * p;
  const auto lo = std::size_t(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

/// Runs `attempt_fn(rng)` with fresh substreams until it succeeds or the
/// retry budget for this replication is spent.
template <typename Fn>
auto with_retries(const BootstrapConfig& cfg, Stage stage, std::size_t rep, Fn&& attempt_fn) {
  std::string last_error;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    auto rng = substream(cfg.seed, stage, rep, attempt);
    try {
      return attempt_fn(rng);
    } catch (const EstimationError& e) {
      last_error = e.what();
    } catch (const InputError& e) {
      last_error = e.what();
    }
  }
  throw EstimationError(fmt::format(
      "bootstrap {} replication {} failed after {} retries; last error: {}",
      stage == kPlacebo ? "placebo" : "resampling", rep, cfg.max_retries, last_error));
}

}  // namespace

AttSeries bootstrap_inference(const MatrixXd& controls, const MatrixXd& treated, Index t_control,
                              int r, const BootstrapConfig& cfg) {
  const Index n_co = controls.cols();
  const Index n_tr = treated.cols();
  const Index T = controls.rows();
  if (n_co < 2) throw InputError("bootstrap_inference: need at least 2 control firms");
  if (cfg.b1 < 1) throw InputError("bootstrap_inference: b1 must be at least 1");
  if (cfg.b2 < 2) throw InputError("bootstrap_inference: b2 must be at least 2");
  if (!(cfg.confidence >= 0.0 && cfg.confidence < 1.0))
    throw InputError("bootstrap_inference: confidence must lie in [0, 1)");
  if (r > std::min(T, n_co))
    throw InputError(fmt::format("bootstrap_inference: r = {} exceeds min(T, N_co)", r));

  const GscFit base = fit_gsc(controls, treated, t_control, r, cfg.two_way_demean);
  const Index t0 = T - t_control;

  // Stage 1: prediction-error pool from controls posing as treated.
  std::vector<VectorXd> placebo(std::size_t(cfg.b1));
  detail::parallel_for(placebo.size(), cfg.threads, [&](std::size_t m) {
    placebo[m] = with_retries(cfg, kPlacebo, m, [&](std::mt19937_64& rng) {
      std::uniform_int_distribution<Index> pick(0, n_co - 1);
      const Index pseudo = pick(rng);
      std::uniform_int_distribution<Index> other(0, n_co - 2);
      MatrixXd pool(T, n_co);
      for (Index i = 0; i < n_co; ++i) {
        Index k = other(rng);
        if (k >= pseudo) ++k;  // skip the pseudo-treated firm
        pool.col(i) = controls.col(k);
      }
      const GscFit fit = fit_gsc(pool, controls.col(pseudo), t_control, r, cfg.two_way_demean);
      return VectorXd(fit.gaps.col(0));
    });
  });

  // Stage 2: simulated untreated panels.
  const MatrixXd& fitted_co = base.model.fitted;
  const MatrixXd& resid_co = base.model.residuals;
  MatrixXd draws(t0, cfg.b2);
  detail::parallel_for(std::size_t(cfg.b2), cfg.threads, [&](std::size_t k) {
    draws.col(Index(k)) = with_retries(cfg, kResample, k, [&](std::mt19937_64& rng) {
      std::uniform_int_distribution<Index> pick_co(0, n_co - 1);
      std::uniform_int_distribution<std::size_t> pick_tr(0, placebo.size() - 1);
      MatrixXd sim_co = fitted_co;
      for (Index i = 0; i < n_co; ++i) sim_co.col(i) += resid_co.col(pick_co(rng));
      MatrixXd sim_tr = base.counterfactual;
      for (Index j = 0; j < n_tr; ++j) sim_tr.col(j) += placebo[pick_tr(rng)];
      const GscFit fit = fit_gsc(sim_co, sim_tr, t_control, r, cfg.two_way_demean);
      return VectorXd(fit.att);
    });
  });

  AttSeries out = att(treated.bottomRows(t0), base.counterfactual.bottomRows(t0));
  out.has_intervals = true;
  out.confidence = cfg.confidence;
  const double alpha = 1.0 - cfg.confidence;
  const double z = cfg.confidence == 0.0
                       ? 0.0
                       : boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
  std::vector<double> row(std::size_t(cfg.b2));
  for (Index t = 0; t < t0; ++t) {
    const VectorXd d = draws.row(t).transpose();
    const double mean = d.mean();
    out.se(t) = std::sqrt((d.array() - mean).square().sum() / double(cfg.b2 - 1));
    out.ci_low(t) = out.att(t) - z * out.se(t);
    out.ci_high(t) = out.att(t) + z * out.se(t);
    // the draws are centred on zero: att - truth is distributed like them
    row.assign(d.data(), d.data() + d.size());
    std::sort(row.begin(), row.end());
    out.pct_low(t) = out.att(t) - quantile_sorted(row, 1.0 - alpha / 2.0);
    out.pct_high(t) = out.att(t) - quantile_sorted(row, alpha / 2.0);
  }
  return out;
}

AttSeries bootstrap_inference(const ReturnPanel& panel, int r, const BootstrapConfig& config) {
  return bootstrap_inference(panel.stacked(panel.control_columns()),
                             panel.stacked(panel.treated_columns()),
                             Index(panel.window().control_length()), r, config);
}

}  // namespace evstudy
