#include "evstudy/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "evstudy/error.hpp"

namespace evstudy {

namespace {

int parse_int_field(std::string_view text, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw InputError(fmt::format("invalid date '{}', expected YYYY-MM-DD", whole));
  return v;
}

}  // namespace

Date parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw InputError(fmt::format("invalid date '{}', expected YYYY-MM-DD", text));
  const int y = parse_int_field(text.substr(0, 4), text);
  const int m = parse_int_field(text.substr(5, 2), text);
  const int d = parse_int_field(text.substr(8, 2), text);
  const Date date{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                  std::chrono::day{unsigned(d)}};
  if (!date.ok()) throw InputError(fmt::format("invalid calendar date '{}'", text));
  return date;
}

std::string format_iso_date(const Date& d) {
  return fmt::format("{:04d}-{:02d}-{:02d}", int(d.year()), unsigned(d.month()),
                     unsigned(d.day()));
}

TradingCalendar::TradingCalendar(std::vector<Date> dates) : dates_(std::move(dates)) {
  for (std::size_t i = 1; i < dates_.size(); ++i) {
    if (!(dates_[i - 1] < dates_[i]))
      throw InputError(fmt::format("trading calendar not strictly increasing at {}",
                                   format_iso_date(dates_[i])));
  }
}

std::optional<std::size_t> TradingCalendar::index_of(const Date& d) const {
  const auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) return std::nullopt;
  return std::size_t(it - dates_.begin());
}

std::size_t TradingCalendar::first_on_or_after(const Date& d) const {
  return std::size_t(std::lower_bound(dates_.begin(), dates_.end(), d) - dates_.begin());
}

std::string_view to_string(TreatmentStatus s) noexcept {
  switch (s) {
    case TreatmentStatus::Control:
      return "control";
    case TreatmentStatus::Join:
      return "join";
    case TreatmentStatus::Delist:
      return "delist";
  }
  return "control";
}

EventWindow::EventWindow(int year, std::size_t t_start, std::size_t t_end, int ann_offset,
                         int eff_offset, int t0)
    : year_(year),
      t_start_(t_start),
      t_end_(t_end),
      ann_offset_(ann_offset),
      eff_offset_(eff_offset),
      t0_(t0) {
  if (t_start >= t_end)
    throw InputError(fmt::format("event window {}: control span needs at least 2 days", year));
  if (!(1 <= ann_offset && ann_offset < eff_offset && eff_offset <= t0))
    throw InputError(fmt::format(
        "event window {}: need 1 <= announcement ({}) < effective ({}) <= t0 ({})", year,
        ann_offset, eff_offset, t0));
}

EventWindow build_event_window(int year, const TradingCalendar& calendar, const Date& announcement,
                               const Date& effective) {
  const auto ann = calendar.index_of(announcement);
  const auto eff = calendar.index_of(effective);
  if (!ann)
    throw InputError(fmt::format("announcement date {} is not a trading day",
                                 format_iso_date(announcement)));
  if (!eff)
    throw InputError(
        fmt::format("effective date {} is not a trading day", format_iso_date(effective)));
  if (*eff <= *ann)
    throw InputError(fmt::format("effective date {} must follow announcement date {}",
                                 format_iso_date(effective), format_iso_date(announcement)));

  const Date nov1{std::chrono::year{year - 1}, std::chrono::November, std::chrono::day{1}};
  const std::size_t t_start = calendar.first_on_or_after(nov1);
  const std::size_t pre = std::size_t(kDaysBeforeAnnouncement);
  if (t_start >= calendar.size() || *ann < t_start + pre + 2)
    throw InputError(fmt::format(
        "event window {}: fewer than 2 control days between November 1 and the treatment span",
        year));

  const std::size_t t_end = *ann - pre - 1;
  const int ann_offset = kDaysBeforeAnnouncement + 1;
  const int eff_offset = ann_offset + int(*eff - *ann);
  const int t0 = eff_offset + kDaysAfterEffective;
  if (t_end + std::size_t(t0) >= calendar.size())
    throw InputError(fmt::format(
        "event window {}: calendar ends before {} trading days after the effective date", year,
        kDaysAfterEffective));
  return EventWindow(year, t_start, t_end, ann_offset, eff_offset, t0);
}

FirmSeries::FirmSeries(std::string id, std::vector<Observation> observations)
    : id_(std::move(id)), obs_(std::move(observations)) {
  std::sort(obs_.begin(), obs_.end(),
            [](const Observation& a, const Observation& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    if (!std::isfinite(obs_[i].value))
      throw InputError(fmt::format("series {}: non-finite value at index {}", id_, obs_[i].index));
    if (i > 0 && obs_[i].index == obs_[i - 1].index)
      throw InputError(
          fmt::format("series {}: duplicate observation at index {}", id_, obs_[i].index));
  }
}

std::optional<double> FirmSeries::at(std::size_t index) const {
  const auto it = std::lower_bound(
      obs_.begin(), obs_.end(), index,
      [](const Observation& o, std::size_t i) { return o.index < i; });
  if (it == obs_.end() || it->index != index) return std::nullopt;
  return it->value;
}

std::optional<Eigen::VectorXd> FirmSeries::slice(std::size_t first, std::size_t last) const {
  auto it = std::lower_bound(
      obs_.begin(), obs_.end(), first,
      [](const Observation& o, std::size_t i) { return o.index < i; });
  Eigen::VectorXd out(Eigen::Index(last - first + 1));
  for (std::size_t idx = first; idx <= last; ++idx, ++it) {
    if (it == obs_.end() || it->index != idx) return std::nullopt;
    out(Eigen::Index(idx - first)) = it->value;
  }
  return out;
}

ReturnPanel::ReturnPanel(std::vector<std::string> firms, EventWindow window,
                         Eigen::MatrixXd control, Eigen::MatrixXd treatment,
                         Eigen::VectorXd market, std::vector<TreatmentStatus> flags)
    : firms_(std::move(firms)),
      window_(window),
      control_(std::move(control)),
      treatment_(std::move(treatment)),
      market_(std::move(market)),
      flags_(std::move(flags)) {
  const auto n = Eigen::Index(firms_.size());
  if (control_.cols() != n || treatment_.cols() != n || flags_.size() != firms_.size())
    throw InputError("return panel: column count does not match firm list");
  if (control_.rows() != Eigen::Index(window_.control_length()) ||
      treatment_.rows() != window_.t0() ||
      market_.size() != Eigen::Index(window_.total_length()))
    throw InputError("return panel: row count does not match event window");
  if (!control_.allFinite() || !treatment_.allFinite() || !market_.allFinite())
    throw InputError("return panel: non-finite cell");
  const auto treated = std::count_if(flags_.begin(), flags_.end(), is_treated);
  if (treated == 0) throw InputError("return panel: no treated firm");
  if (treated == std::ptrdiff_t(flags_.size())) throw InputError("return panel: no control firm");
}

std::vector<std::size_t> ReturnPanel::treated_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flags_.size(); ++i)
    if (is_treated(flags_[i])) out.push_back(i);
  return out;
}

std::vector<std::size_t> ReturnPanel::control_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flags_.size(); ++i)
    if (!is_treated(flags_[i])) out.push_back(i);
  return out;
}

Eigen::MatrixXd ReturnPanel::stacked() const {
  Eigen::MatrixXd out(control_.rows() + treatment_.rows(), control_.cols());
  out << control_, treatment_;
  return out;
}

Eigen::MatrixXd ReturnPanel::stacked(std::span<const std::size_t> columns) const {
  const Eigen::Index tc = control_.rows();
  Eigen::MatrixXd out(tc + treatment_.rows(), Eigen::Index(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto c = Eigen::Index(columns[j]);
    out.col(Eigen::Index(j)).head(tc) = control_.col(c);
    out.col(Eigen::Index(j)).tail(treatment_.rows()) = treatment_.col(c);
  }
  return out;
}

std::vector<FirmSeries> ReturnPanel::to_series() const {
  const Eigen::MatrixXd all = stacked();
  std::vector<FirmSeries> out;
  out.reserve(firms_.size());
  for (std::size_t j = 0; j < firms_.size(); ++j) {
    std::vector<Observation> obs(std::size_t(all.rows()));
    for (Eigen::Index t = 0; t < all.rows(); ++t)
      obs[std::size_t(t)] = {window_.t_start() + std::size_t(t), all(t, Eigen::Index(j))};
    out.emplace_back(firms_[j], std::move(obs));
  }
  return out;
}

FirmSeries ReturnPanel::market_series() const {
  std::vector<Observation> obs(std::size_t(market_.size()));
  for (Eigen::Index t = 0; t < market_.size(); ++t)
    obs[std::size_t(t)] = {window_.t_start() + std::size_t(t), market_(t)};
  return FirmSeries("market", std::move(obs));
}

AlignedPanel align_panel(std::span<const FirmSeries> series,
                         std::span<const TreatmentStatus> flags, const FirmSeries& market,
                         const EventWindow& window) {
  if (series.size() != flags.size())
    throw InputError("align_panel: one treatment flag per firm series is required");
  const std::size_t first = window.t_start();
  const std::size_t last = window.last_index();

  auto mkt = market.slice(first, last);
  if (!mkt)
    throw InputError(fmt::format("market series incomplete over event window {}", window.year()));

  std::vector<std::string> kept;
  std::vector<TreatmentStatus> kept_flags;
  std::vector<Eigen::VectorXd> columns;
  std::vector<std::string> dropped;
  for (std::size_t i = 0; i < series.size(); ++i) {
    auto col = series[i].slice(first, last);
    if (!col) {
      dropped.push_back(series[i].id());
      continue;
    }
    kept.push_back(series[i].id());
    kept_flags.push_back(flags[i]);
    columns.push_back(std::move(*col));
  }

  const auto n_treated = std::count_if(kept_flags.begin(), kept_flags.end(), is_treated);
  if (n_treated == 0)
    throw SampleError(fmt::format("window {}: no treated firm with complete data", window.year()));
  if (n_treated == std::ptrdiff_t(kept_flags.size()))
    throw SampleError(fmt::format("window {}: no control firm with complete data", window.year()));

  const auto tc = Eigen::Index(window.control_length());
  const auto n = Eigen::Index(kept.size());
  Eigen::MatrixXd control(tc, n);
  Eigen::MatrixXd treatment(window.t0(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    control.col(j) = columns[std::size_t(j)].head(tc);
    treatment.col(j) = columns[std::size_t(j)].tail(window.t0());
  }
  return AlignedPanel{ReturnPanel(std::move(kept), window, std::move(control),
                                  std::move(treatment), std::move(*mkt), std::move(kept_flags)),
                      std::move(dropped)};
}

}  // namespace evstudy
