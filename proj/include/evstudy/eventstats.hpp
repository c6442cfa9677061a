#pragma once

// Test batteries over abnormal returns: t-tests, triangular CAR grids,
// year-pair comparisons and the CAR regression with fixed effects.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evstudy/capm.hpp"
#include "evstudy/panel.hpp"

namespace evstudy {

struct TestResult {
  double estimate = 0.0;  ///< mean difference (a - b) or mean minus null
  double t_stat = 0.0;
  double p_value = 1.0;   ///< two-tailed
  double df = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

/// Two-sample Welch test of mean(a) - mean(b) with Welch-Satterthwaite df.
/// Throws InputError if either sample has fewer than 2 values and
/// DegenerateVarianceError when both sample variances are zero.
TestResult welch_ttest(std::span<const double> a, std::span<const double> b);

/// Throws InputError for fewer than 2 values, DegenerateVarianceError for zero variance.
TestResult one_sample_ttest(std::span<const double> sample, double null_mean = 0.0);

/// One-sample test on a_i - b_i. Throws InputError on length mismatch.
TestResult paired_ttest(std::span<const double> a, std::span<const double> b);

enum class Stars { None, P05, P01, P001 };

/// Stars for p < 0.05, 0.01 and 0.001.
Stars stars_for(double p_value) noexcept;
std::string_view star_marks(Stars s) noexcept;

/// Footer line documenting the star convention used by every table.
inline constexpr std::string_view kStarLegend = "* p<0.05, ** p<0.01, *** p<0.001 (two-tailed)";

struct CarCell {
  int from = 0;
  int to = 0;
  double mean_car = 0.0;  ///< mean CAR of the treated firms
  /// Missing when the test is undefined (too few firms or zero variance).
  std::optional<TestResult> test;
  /// Set when `test` is missing.
  std::string note;
  Stars stars = Stars::None;
};

struct CarGrid {
  bool one_sample = false;
  std::vector<int> from_days;
  std::vector<int> to_days;
  /// Populated cells only (from <= to), ordered by from then to.
  std::vector<CarCell> cells;

  const CarCell* find(int from, int to) const;
};

/// Mean-CAR grid over all from <= to pairs. With `comparison` the cells run a
/// Welch test of treated against comparison CARs; without it they test the
/// treated CARs against zero. Throws InputError when `treated` is empty or a
/// series does not cover the requested days.
CarGrid car_grid(std::span<const AbnormalSeries> treated,
                 const std::vector<AbnormalSeries>* comparison, std::span<const int> from_days,
                 std::span<const int> to_days);

/// Table-style (from, to) sets: from 1..eff+1; to 11..eff, eff+1, then 24, 26,
/// 31 and 36 clipped to t0.
std::pair<std::vector<int>, std::vector<int>> default_grid_days(const EventWindow& window);

/// Holding-period block for year comparisons.
struct CarBlock {
  std::string label;
  std::vector<int> from_days;
  std::vector<int> to_days;
};

/// Week blocks used for year comparisons: Week 1 to Week 3, Week 3 to Week 3,
/// Week 4 to Week 4 and Week 4 to Week 5 (weeks are days 1-5, 6-10, 11-14,
/// 15-22 and 22-27).
std::vector<CarBlock> default_year_blocks();

struct YearPairResult {
  int year_a = 0;
  int year_b = 0;
  /// mean over cells of (year_a cell mean - year_b cell mean)
  double estimate = 0.0;
  std::optional<TestResult> test;
  std::string note;
};

struct YearComparison {
  std::string block;
  std::vector<int> years;
  std::vector<YearPairResult> pairs;  ///< upper triangle, year_a < year_b
  std::vector<std::string> notices;
};

/// Paired tests between every pair of years, pairing on the (from, to) cells
/// of `block` after averaging each cell's CAR over the year's firms. Years
/// without firms are omitted with a notice. Throws InputError when fewer than
/// two years remain.
YearComparison year_comparison(const std::map<int, std::vector<AbnormalSeries>>& by_year,
                               const CarBlock& block);

/// Per-day Welch test of treated against control returns (rows are days).
std::vector<std::optional<TestResult>> daily_return_tests(const Eigen::MatrixXd& treated,
                                                          const Eigen::MatrixXd& controls);

// ---------------------------------------------------------------------------
// Regression

struct RegressionResult {
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::VectorXd se;  ///< HC1 robust
  Eigen::VectorXd t_stat;
  Eigen::VectorXd p_value;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  std::size_t n = 0;
};

/// OLS with HC1 heteroskedasticity-robust standard errors. Throws InputError
/// when n <= k, EstimationError naming the collinear columns on rank
/// deficiency, and EstimationError when y has zero variance.
RegressionResult ols_hc1(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         std::vector<std::string> names);

struct CarObservation {
  double car = 0.0;
  bool treated = false;
  double size = 0.0;
  double profitability = 0.0;
  double leverage = 0.0;
  std::string industry;
  std::string year;
};

/// CAR on [1, treated dummy, cubic polynomials in size, profitability and
/// leverage, industry dummies, year dummies]; the first category (in sorted
/// order) of each block is dropped.
RegressionResult ols_car_regression(std::span<const CarObservation> rows);

}  // namespace evstudy
