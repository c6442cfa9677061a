#pragma once

// Synthetic factor-model panels with known ground truth, used to validate the
// estimators and to drive end-to-end pipeline runs.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "evstudy/ingest.hpp"
#include "evstudy/panel.hpp"

namespace evstudy {

struct DgpConfig {
  int n_control = 40;
  int n_treated = 3;
  int t_control = 200;
  /// Treatment-span length; at least 32 so the 16th day can be the announcement.
  int t_treatment = 36;
  /// Latent factor count; 0 gives a pure-noise panel.
  int r_true = 2;
  double factor_scale = 1.0;
  double loading_scale = 1.0;
  double noise_sd = 1.0;
  /// True effect per treatment day; empty means zero effect.
  std::vector<double> att_profile;
  std::uint64_t seed = 1;
  int year = 2013;
  int industry = 21;
  TreatmentStatus direction = TreatmentStatus::Join;
};

/// Throws InputError on an invalid configuration.
void validate(const DgpConfig& config);

struct SyntheticTruth {
  DgpConfig config;
  TradingCalendar calendar;
  Date announcement;
  Date effective;
  Eigen::MatrixXd factors;   ///< T x r_true
  Eigen::MatrixXd loadings;  ///< N x r_true, panel column order
  std::vector<double> att_profile;  ///< length t_treatment
  Eigen::MatrixXd noiseless;  ///< T x N factor component
  Eigen::MatrixXd noise;      ///< T x N
  /// Controls come first, then treated firms. The market series is factor 1
  /// (or an independent draw when r_true = 0).
  ReturnPanel panel;
};

/// Factors, loadings and noise are standard normal draws scaled by the config;
/// treated firms receive att_profile on treatment days only. Deterministic in
/// the seed. `shared_market`, when given, replaces factor 1 (length T) so that
/// several industries of one year can share a market series.
SyntheticTruth generate_panel(const DgpConfig& config,
                              const Eigen::VectorXd* shared_market = nullptr);

/// Weekday calendar of `days` trading days starting at the first weekday on or
/// after November 1 of year - 1.
TradingCalendar synthetic_calendar(int year, int days);

struct StudyConfig {
  DgpConfig cell;  ///< template; year, industry and seed are overridden per cell
  std::vector<int> years;
  std::vector<int> industries;
};

struct SimulatedStudy {
  std::vector<SyntheticTruth> cells;
  std::vector<FundamentalsRecord> fundamentals;
  std::vector<MembershipEvent> events;
  std::vector<EventDates> event_dates;  ///< one per year
};

/// One cell per (year, industry); cells of the same year share the market
/// factor. Cell seeds are derived from cell.seed.
SimulatedStudy generate_study(const StudyConfig& config);

/// Writes returns.csv, fundamentals.csv and membership.csv in the ingest formats.
void write_study_csv(const SimulatedStudy& study, const std::filesystem::path& dir);

}  // namespace evstudy
