#include "evstudy/eventstats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "evstudy/error.hpp"
#include "evstudy/kernels.hpp"

namespace evstudy {

namespace {

double two_tailed_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

struct Moments {
  double mean;
  double var;  // unbiased
};

Moments moments(std::span<const double> x) {
  const double m = simd::mean(x);
  return {m, simd::sum_sq_dev(x, m) / double(x.size() - 1)};
}

}  // namespace

TestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw InputError(fmt::format("welch_ttest: samples of size {} and {}, need at least 2 each",
                                 a.size(), b.size()));
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double va = ma.var / double(a.size());
  const double vb = mb.var / double(b.size());
  const double estimate = ma.mean - mb.mean;
  if (!(va + vb > 0.0))
    throw DegenerateVarianceError("welch_ttest: both samples have zero variance", estimate);

  TestResult out;
  out.estimate = estimate;
  out.t_stat = estimate / std::sqrt(va + vb);
  out.df = (va + vb) * (va + vb) /
           (va * va / double(a.size() - 1) + vb * vb / double(b.size() - 1));
  out.p_value = two_tailed_p(out.t_stat, out.df);
  out.n_a = a.size();
  out.n_b = b.size();
  return out;
}

TestResult one_sample_ttest(std::span<const double> sample, double null_mean) {
  if (sample.size() < 2)
    throw InputError(
        fmt::format("one_sample_ttest: sample of size {}, need at least 2", sample.size()));
  const Moments m = moments(sample);
  const double estimate = m.mean - null_mean;
  if (!(m.var > 0.0))
    throw DegenerateVarianceError("one_sample_ttest: sample has zero variance", estimate);
  TestResult out;
  out.estimate = estimate;
  out.t_stat = estimate / std::sqrt(m.var / double(sample.size()));
  out.df = double(sample.size() - 1);
  out.p_value = two_tailed_p(out.t_stat, out.df);
  out.n_a = sample.size();
  out.n_b = 0;
  return out;
}

TestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InputError(fmt::format("paired_ttest: {} vs {} observations", a.size(), b.size()));
  std::vector<double> diff(a.size());
  simd::subtract(a, b, diff);
  return one_sample_ttest(diff, 0.0);
}

Stars stars_for(double p) noexcept {
  if (p < 0.001) return Stars::P001;
  if (p < 0.01) return Stars::P01;
  if (p < 0.05) return Stars::P05;
  return Stars::None;
}

std::string_view star_marks(Stars s) noexcept {
  switch (s) {
    case Stars::P05:
      return "*";
    case Stars::P01:
      return "**";
    case Stars::P001:
      return "***";
    case Stars::None:
      break;
  }
  return "";
}

const CarCell* CarGrid::find(int from, int to) const {
  for (const auto& c : cells)
    if (c.from == from && c.to == to) return &c;
  return nullptr;
}

CarGrid car_grid(std::span<const AbnormalSeries> treated,
                 const std::vector<AbnormalSeries>* comparison, std::span<const int> from_days,
                 std::span<const int> to_days) {
  if (treated.empty()) throw InputError("car_grid: no treated series");
  CarGrid grid;
  grid.one_sample = comparison == nullptr;
  grid.from_days.assign(from_days.begin(), from_days.end());
  grid.to_days.assign(to_days.begin(), to_days.end());
  std::sort(grid.from_days.begin(), grid.from_days.end());
  std::sort(grid.to_days.begin(), grid.to_days.end());

  std::vector<double> tr(treated.size());
  std::vector<double> co(comparison ? comparison->size() : 0);
  for (int from : grid.from_days) {
    for (int to : grid.to_days) {
      if (from > to) continue;
      for (std::size_t i = 0; i < treated.size(); ++i) tr[i] = car(treated[i], from, to);
      for (std::size_t i = 0; i < co.size(); ++i) co[i] = car((*comparison)[i], from, to);

      CarCell cell;
      cell.from = from;
      cell.to = to;
      cell.mean_car = simd::mean(tr);
      try {
        cell.test = grid.one_sample ? one_sample_ttest(tr, 0.0) : welch_ttest(tr, co);
        cell.stars = stars_for(cell.test->p_value);
      } catch (const DegenerateVarianceError& e) {
        cell.note = "zero variance";
      } catch (const InputError& e) {
        cell.note = "too few firms";
      }
      grid.cells.push_back(std::move(cell));
    }
  }
  return grid;
}

std::pair<std::vector<int>, std::vector<int>> default_grid_days(const EventWindow& w) {
  const int eff = w.eff_offset();
  const int t0 = w.t0();
  std::vector<int> from;
  for (int d = 1; d <= std::min(eff + 1, t0); ++d) from.push_back(d);
  std::vector<int> to;
  for (int d = std::min(11, eff); d <= std::min(eff + 1, t0); ++d) to.push_back(d);
  for (int d : {24, 26, 31, 36})
    if (d > eff + 1 && d <= t0) to.push_back(d);
  if (to.back() != t0) to.push_back(t0);
  return {from, to};
}

std::vector<CarBlock> default_year_blocks() {
  auto days = [](int a, int b) {
    std::vector<int> out;
    for (int d = a; d <= b; ++d) out.push_back(d);
    return out;
  };
  return {
      {"week1_to_week3", days(1, 5), days(11, 14)},
      {"week3_to_week3", days(11, 14), days(11, 14)},
      {"week4_to_week4", days(15, 22), days(15, 22)},
      {"week4_to_week5", days(15, 22), days(22, 27)},
  };
}

YearComparison year_comparison(const std::map<int, std::vector<AbnormalSeries>>& by_year,
                               const CarBlock& block) {
  YearComparison out;
  out.block = block.label;
  std::map<int, std::vector<double>> cell_means;
  for (const auto& [year, series] : by_year) {
    if (series.empty()) {
      out.notices.push_back(fmt::format("year {} omitted: no treated firms", year));
      continue;
    }
    std::vector<double> means;
    std::vector<double> cars(series.size());
    for (int from : block.from_days) {
      for (int to : block.to_days) {
        if (from > to) continue;
        for (std::size_t i = 0; i < series.size(); ++i) cars[i] = car(series[i], from, to);
        means.push_back(simd::mean(cars));
      }
    }
    cell_means.emplace(year, std::move(means));
    out.years.push_back(year);
  }
  if (out.years.size() < 2)
    throw InputError(fmt::format("year_comparison {}: need at least 2 years with firms",
                                 block.label));

  for (std::size_t i = 0; i < out.years.size(); ++i) {
    for (std::size_t j = i + 1; j < out.years.size(); ++j) {
      YearPairResult pr;
      pr.year_a = out.years[i];
      pr.year_b = out.years[j];
      const auto& a = cell_means.at(pr.year_a);
      const auto& b = cell_means.at(pr.year_b);
      try {
        pr.test = paired_ttest(a, b);
        pr.estimate = pr.test->estimate;
      } catch (const DegenerateVarianceError& e) {
        pr.estimate = e.estimate();
        pr.note = "zero variance of differences";
      } catch (const InputError& e) {
        pr.estimate = a.empty() ? 0.0 : simd::mean(a) - simd::mean(b);
        pr.note = e.what();
      }
      out.pairs.push_back(std::move(pr));
    }
  }
  return out;
}

std::vector<std::optional<TestResult>> daily_return_tests(const Eigen::MatrixXd& treated,
                                                          const Eigen::MatrixXd& controls) {
  if (treated.rows() != controls.rows())
    throw InputError("daily_return_tests: treated and control day counts differ");
  std::vector<std::optional<TestResult>> out;
  std::vector<double> a(std::size_t(treated.cols()));
  std::vector<double> b(std::size_t(controls.cols()));
  for (Eigen::Index t = 0; t < treated.rows(); ++t) {
    for (Eigen::Index j = 0; j < treated.cols(); ++j) a[std::size_t(j)] = treated(t, j);
    for (Eigen::Index j = 0; j < controls.cols(); ++j) b[std::size_t(j)] = controls(t, j);
    try {
      out.emplace_back(welch_ttest(a, b));
    } catch (const Error&) {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

}  // namespace evstudy
