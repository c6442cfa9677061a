#pragma once

// End-to-end driver: loads the three input files, estimates every
// (year, industry, direction) cell with the market model and the synthetic
// control, and writes the result tables.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evstudy/eventstats.hpp"
#include "evstudy/ingest.hpp"
#include "evstudy/panel.hpp"

namespace evstudy {

enum class Estimator { Capm, Gsynth };
std::string_view to_string(Estimator e) noexcept;

struct GsynthSettings {
  std::vector<int> r_candidates{0, 1, 2, 3, 4, 5};
  /// Placebo replications; 0 means min(N_co, 100).
  int b1 = 0;
  int b2 = 500;
  double confidence = 0.95;
  std::uint64_t seed = 12345;
  bool two_way_demean = false;
  int max_retries = 50;
};

struct RunConfig {
  std::filesystem::path returns;
  std::filesystem::path fundamentals;
  std::filesystem::path membership;
  std::filesystem::path output_dir;
  /// Inclusive year range; unset means every year in the membership file.
  std::optional<int> year_first;
  std::optional<int> year_last;
  std::vector<EventDates> event_dates;
  std::vector<Estimator> estimators{Estimator::Capm, Estimator::Gsynth};
  std::vector<TreatmentStatus> directions{TreatmentStatus::Join, TreatmentStatus::Delist};
  std::vector<SampleVariant> variants{SampleVariant::Full, SampleVariant::Base};
  GsynthSettings gsynth;
  /// Grid day sets; empty means the default table layout.
  std::vector<int> grid_from;
  std::vector<int> grid_to;
  bool plots = false;
  /// Worker threads for industry-year cells; 0 means hardware concurrency.
  unsigned threads = 0;
};

/// Checks the configuration without touching the filesystem beyond the
/// output directory. Throws InputError.
void validate_config(const RunConfig& config);

/// Parses "YEAR:YYYY-MM-DD:YYYY-MM-DD".
EventDates parse_event_dates(std::string_view text);

enum class CellStatus { Ok, Infeasible, InputFailure, EstimationFailure };
std::string_view to_string(CellStatus s) noexcept;

struct ReportRow {
  int year = 0;
  int industry = 0;
  TreatmentStatus direction = TreatmentStatus::Join;
  CellStatus status = CellStatus::Ok;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  std::optional<double> capm_mspe;
  std::optional<double> gsynth_mspe;
  std::optional<int> chosen_r;
  /// Candidate factor counts dropped as infeasible during cross-validation.
  std::vector<int> infeasible_r;
  std::string message;
};

struct RunReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> notices;

  bool has_estimation_failure() const;
};

/// Runs every cell and writes the output tables into config.output_dir.
/// Per-cell failures are recorded in the report; only unreadable inputs or an
/// invalid configuration throw (InputError).
RunReport run_pipeline(const RunConfig& config);

void write_run_report(const RunReport& report, const std::filesystem::path& path);
RunReport read_run_report(const std::filesystem::path& path);

struct MspeContest {
  std::size_t n = 0;
  /// mean over cells of (CAPM MSPE - synthetic MSPE); positive favours the synthetic fit
  double estimate = 0.0;
  std::optional<TestResult> test;
  std::string note;
  int wins_capm = 0;
  int wins_gsynth = 0;
  int ties = 0;
};

/// Paired comparison of the two control-period MSPE columns over all rows
/// where both are present. Throws InputError with fewer than 2 such rows.
MspeContest mspe_contest(const RunReport& report);

/// Writes mspe_contest.csv (one row per comparable cell) and
/// mspe_contest_summary.csv into `dir`.
MspeContest emit_mspe_contest(const RunReport& report, const std::filesystem::path& dir);

}  // namespace evstudy
