#include "evstudy/simulate.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <fmt/os.h>

#include "evstudy/error.hpp"

namespace evstudy {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  std::seed_seq seq{std::uint32_t(seed),  std::uint32_t(seed >> 32), purpose,
                    std::uint32_t(a),     std::uint32_t(a >> 32),    std::uint32_t(b),
                    std::uint32_t(b >> 32)};
  return std::mt19937_64(seq);
}

enum Purpose : std::uint32_t { kCellSeed = 11, kMarket = 12, kFundamentals = 13 };

MatrixXd normal_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale) {
  std::normal_distribution<double> n01;
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = scale * n01(rng);
  return m;
}

std::string firm_name(const DgpConfig& c, bool treated, int k) {
  return fmt::format("Y{}I{}{}{:03d}", c.year, c.industry, treated ? 'T' : 'C', k + 1);
}

}  // namespace

void validate(const DgpConfig& c) {
  if (c.n_control < 1 || c.n_treated < 1 || c.t_control < 2)
    throw InputError("dgp: n_control, n_treated must be positive and t_control at least 2");
  if (c.t_treatment < kDaysBeforeAnnouncement + kDaysAfterEffective + 2)
    throw InputError(fmt::format("dgp: t_treatment must be at least {}",
                                 kDaysBeforeAnnouncement + kDaysAfterEffective + 2));
  if (c.r_true < 0) throw InputError("dgp: r_true must be non-negative");
  if (!(c.noise_sd >= 0.0) || !(c.factor_scale >= 0.0) || !(c.loading_scale >= 0.0))
    throw InputError("dgp: scales must be non-negative");
  if (!c.att_profile.empty() && int(c.att_profile.size()) != c.t_treatment)
    throw InputError(fmt::format("dgp: att_profile has {} entries for {} treatment days",
                                 c.att_profile.size(), c.t_treatment));
  if (!is_treated(c.direction)) throw InputError("dgp: direction must be join or delist");
}

TradingCalendar synthetic_calendar(int year, int days) {
  using namespace std::chrono;
  std::vector<Date> dates;
  dates.reserve(std::size_t(days));
  sys_days d{Date{std::chrono::year{year - 1}, November, std::chrono::day{1}}};
  while (int(dates.size()) < days) {
    const weekday wd{d};
    if (wd != Saturday && wd != Sunday) dates.emplace_back(d);
    d += std::chrono::days{1};
  }
  return TradingCalendar(std::move(dates));
}

SyntheticTruth generate_panel(const DgpConfig& c, const VectorXd* shared_market) {
  validate(c);
  const Index tc = c.t_control;
  const Index t0 = c.t_treatment;
  const Index T = tc + t0;
  const Index n = c.n_control + c.n_treated;
  if (shared_market && shared_market->size() != T)
    throw InputError("dgp: shared market series has the wrong length");

  std::mt19937_64 rng(c.seed);
  MatrixXd factors = normal_matrix(rng, T, c.r_true, c.factor_scale);
  MatrixXd loadings = normal_matrix(rng, n, c.r_true, c.loading_scale);
  MatrixXd noise = normal_matrix(rng, T, n, c.noise_sd);
  VectorXd market = c.r_true > 0 ? VectorXd(factors.col(0))
                                 : VectorXd(normal_matrix(rng, T, 1, c.factor_scale).col(0));
  if (shared_market) {
    market = *shared_market;
    if (c.r_true > 0) factors.col(0) = *shared_market;
  }

  std::vector<double> profile = c.att_profile;
  if (profile.empty()) profile.assign(std::size_t(t0), 0.0);

  const MatrixXd noiseless = factors * loadings.transpose();
  MatrixXd returns = noiseless + noise;
  for (Index j = c.n_control; j < n; ++j)
    for (Index t = 0; t < t0; ++t) returns(tc + t, j) += profile[std::size_t(t)];

  TradingCalendar calendar = synthetic_calendar(c.year, int(T));
  const int ann_offset = kDaysBeforeAnnouncement + 1;
  const int eff_offset = c.t_treatment - kDaysAfterEffective;
  const Date announcement = calendar[std::size_t(tc + ann_offset - 1)];
  const Date effective = calendar[std::size_t(tc + eff_offset - 1)];
  const EventWindow window = build_event_window(c.year, calendar, announcement, effective);

  std::vector<std::string> firms;
  std::vector<TreatmentStatus> flags;
  for (int k = 0; k < c.n_control; ++k) {
    firms.push_back(firm_name(c, false, k));
    flags.push_back(TreatmentStatus::Control);
  }
  for (int k = 0; k < c.n_treated; ++k) {
    firms.push_back(firm_name(c, true, k));
    flags.push_back(c.direction);
  }

  ReturnPanel panel(std::move(firms), window, returns.topRows(tc), returns.bottomRows(t0),
                    std::move(market), std::move(flags));
  return SyntheticTruth{c,
                        std::move(calendar),
                        announcement,
                        effective,
                        std::move(factors),
                        std::move(loadings),
                        std::move(profile),
                        noiseless,
                        std::move(noise),
                        std::move(panel)};
}

SimulatedStudy generate_study(const StudyConfig& config) {
  if (config.years.empty() || config.industries.empty())
    throw InputError("simulate: at least one year and one industry are required");
  validate(config.cell);
  SimulatedStudy study;
  const Index T = config.cell.t_control + config.cell.t_treatment;
  for (int year : config.years) {
    auto mrng = stream(config.cell.seed, kMarket, std::uint64_t(year));
    const VectorXd market = normal_matrix(mrng, T, 1, config.cell.factor_scale).col(0);
    for (int industry : config.industries) {
      DgpConfig cell = config.cell;
      cell.year = year;
      cell.industry = industry;
      cell.seed = stream(config.cell.seed, kCellSeed, std::uint64_t(year),
                         std::uint64_t(industry))();
      study.cells.push_back(generate_panel(cell, &market));
    }
    const auto& first = study.cells.back();
    study.event_dates.push_back({year, first.announcement, first.effective});
  }

  for (const auto& cell : study.cells) {
    auto frng = stream(config.cell.seed, kFundamentals, std::uint64_t(cell.config.year),
                       std::uint64_t(cell.config.industry));
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    const auto& p = cell.panel;
    for (std::size_t j = 0; j < p.n_firms(); ++j) {
      const bool treated = is_treated(p.flags()[j]);
      FundamentalsRecord r;
      r.firm_id = p.firms()[j];
      r.fiscal_year = cell.config.year - 1;
      r.assets = std::exp((treated ? 9.0 : 8.0) + n01(frng));
      r.size = std::log(r.assets);
      r.profitability = 0.1 + 0.05 * n01(frng);
      r.leverage = 0.1 + 0.5 * u01(frng);
      r.industry = cell.config.industry;
      study.fundamentals.push_back(std::move(r));
      if (treated)
        study.events.push_back({p.firms()[j], cell.config.year, p.flags()[j],
                                cell.config.industry});
    }
  }
  return study;
}

void write_study_csv(const SimulatedStudy& study, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = fmt::output_file((dir / "returns.csv").string());
    out.print("date,firm_id,ret,mkt\n");
    for (const auto& cell : study.cells) {
      const auto& p = cell.panel;
      const MatrixXd all = p.stacked();
      const std::size_t first = p.window().t_start();
      for (Index t = 0; t < all.rows(); ++t) {
        const std::string date = format_iso_date(cell.calendar[first + std::size_t(t)]);
        for (Index j = 0; j < all.cols(); ++j)
          out.print("{},{},{},{}\n", date, p.firms()[std::size_t(j)], all(t, j), p.market()(t));
      }
    }
  }
  {
    auto out = fmt::output_file((dir / "fundamentals.csv").string());
    out.print("firm_id,fiscal_year,assets,roe,leverage,naics2\n");
    for (const auto& r : study.fundamentals)
      out.print("{},{},{},{},{},{}\n", r.firm_id, r.fiscal_year, r.assets, r.profitability,
                r.leverage, r.industry.value_or(0));
  }
  {
    auto out = fmt::output_file((dir / "membership.csv").string());
    out.print("firm_id,year,action,naics2\n");
    for (const auto& e : study.events)
      out.print("{},{},{},{}\n", e.firm_id, e.year, to_string(e.action), e.industry);
  }
}

}  // namespace evstudy
