#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evstudy/eventstats.hpp"
#include "evstudy/gsynth.hpp"

namespace evstudy::detail {

/// Six-decimal fixed point; "-0.000000" is folded to "0.000000".
std::string fixed6(double v);
/// Empty field when absent.
std::string fixed6(const std::optional<double>& v);
/// Replaces separators and line breaks so a free-text field stays one CSV cell.
std::string csv_safe(std::string_view text);

void write_text(const std::filesystem::path& path, std::string_view content);

std::string grid_csv(const CarGrid& grid);
std::string att_csv(const AttSeries& att);
/// Day labels run from 1 - t_control to 0 over the control span and 1..t0 after.
std::string gaps_csv(const Eigen::MatrixXd& gaps, Eigen::Index t_control,
                     const std::vector<std::string>& firms);
std::string year_comparison_csv(const YearComparison& cmp);

struct RegressionBlock {
  std::string window;
  int from = 0;  ///< reported for the first pooled cell
  int to = 0;
  std::optional<RegressionResult> result;
  std::string note;
};
std::string regression_csv(const std::vector<RegressionBlock>& blocks);

struct DailyRow {
  int day = 0;
  double mean_treated = 0.0;
  double mean_control = 0.0;
  std::optional<TestResult> test;
};
std::string daily_csv(const std::vector<DailyRow>& rows);

/// Line chart of per-firm gap series with markers at the announcement and
/// effective days.
std::string gap_plot_svg(std::string_view title, const Eigen::MatrixXd& gaps,
                         Eigen::Index t_control, int ann_offset, int eff_offset,
                         const std::vector<std::string>& firms);

}  // namespace evstudy::detail
