#pragma once

// Panel data model shared by every estimator: trading calendar, event-window
// arithmetic and the balanced firm x day return panel.
//
// Calendar indices are 0-based positions in a TradingCalendar. Treatment days
// are 1-based: day 1 is the first day after the control span and day t0 the
// last one, so the announcement day is day 16 under the default geometry.

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace evstudy {

using Date = std::chrono::year_month_day;

/// Parses YYYY-MM-DD. Throws InputError on anything else.
Date parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& d);

/// Trading days between the window's leading control span and the announcement.
inline constexpr int kDaysBeforeAnnouncement = 15;
/// Trading days kept after the effective date.
inline constexpr int kDaysAfterEffective = 15;

class TradingCalendar {
 public:
  TradingCalendar() = default;
  /// Throws InputError unless `dates` is strictly increasing.
  explicit TradingCalendar(std::vector<Date> dates);

  std::size_t size() const noexcept { return dates_.size(); }
  bool empty() const noexcept { return dates_.empty(); }
  const Date& operator[](std::size_t i) const { return dates_[i]; }
  std::span<const Date> dates() const noexcept { return dates_; }

  std::optional<std::size_t> index_of(const Date& d) const;
  /// First index whose date is >= d, or size() when there is none.
  std::size_t first_on_or_after(const Date& d) const;

 private:
  std::vector<Date> dates_;
};

enum class TreatmentStatus { Control, Join, Delist };

std::string_view to_string(TreatmentStatus s) noexcept;
inline bool is_treated(TreatmentStatus s) noexcept { return s != TreatmentStatus::Control; }

/// Control span [t_start, t_end] in calendar indices followed by the t0-day
/// treatment span, which holds the announcement and effective days.
class EventWindow {
 public:
  /// Validates the window invariants; throws InputError on violation.
  EventWindow(int year, std::size_t t_start, std::size_t t_end, int ann_offset, int eff_offset,
              int t0);

  int year() const noexcept { return year_; }
  std::size_t t_start() const noexcept { return t_start_; }
  std::size_t t_end() const noexcept { return t_end_; }
  int ann_offset() const noexcept { return ann_offset_; }
  int eff_offset() const noexcept { return eff_offset_; }
  int t0() const noexcept { return t0_; }

  std::size_t control_length() const noexcept { return t_end_ - t_start_ + 1; }
  std::size_t total_length() const noexcept { return control_length() + std::size_t(t0_); }
  /// Calendar index of treatment day `day` (1-based).
  std::size_t calendar_index(int day) const noexcept { return t_end_ + std::size_t(day); }
  std::size_t last_index() const noexcept { return t_end_ + std::size_t(t0_); }

  bool operator==(const EventWindow&) const = default;

 private:
  int year_;
  std::size_t t_start_;
  std::size_t t_end_;
  int ann_offset_;
  int eff_offset_;
  int t0_;
};

/// Announcement and effective dates of one year's index review.
struct EventDates {
  int year = 0;
  Date announcement;
  Date effective;
};

/// Window for `year`: control span from the first trading day on/after
/// November 1 of year-1 up to the day before the treatment span, which opens
/// 15 trading days before the announcement and closes 15 after the effective date.
EventWindow build_event_window(int year, const TradingCalendar& calendar, const Date& announcement,
                               const Date& effective);

struct Observation {
  std::size_t index;
  double value;
};

/// Sparse per-firm series of excess returns (percent) keyed by calendar index.
class FirmSeries {
 public:
  FirmSeries() = default;
  /// Sorts by index. Throws InputError on duplicate indices or non-finite values.
  FirmSeries(std::string id, std::vector<Observation> observations);

  const std::string& id() const noexcept { return id_; }
  std::span<const Observation> observations() const noexcept { return obs_; }
  std::size_t size() const noexcept { return obs_.size(); }

  std::optional<double> at(std::size_t index) const;
  /// Values for the contiguous range [first, last]; nullopt if any day is missing.
  std::optional<Eigen::VectorXd> slice(std::size_t first, std::size_t last) const;

 private:
  std::string id_;
  std::vector<Observation> obs_;
};

/// Balanced panel of excess returns over one event window.
class ReturnPanel {
 public:
  /// Throws InputError on shape mismatch, non-finite cells, or when there is
  /// not at least one treated and one control firm.
  ReturnPanel(std::vector<std::string> firms, EventWindow window, Eigen::MatrixXd control,
              Eigen::MatrixXd treatment, Eigen::VectorXd market,
              std::vector<TreatmentStatus> flags);

  const std::vector<std::string>& firms() const noexcept { return firms_; }
  const EventWindow& window() const noexcept { return window_; }
  /// T_c x N
  const Eigen::MatrixXd& control() const noexcept { return control_; }
  /// t0 x N
  const Eigen::MatrixXd& treatment() const noexcept { return treatment_; }
  /// T_c + t0 market excess returns
  const Eigen::VectorXd& market() const noexcept { return market_; }
  const std::vector<TreatmentStatus>& flags() const noexcept { return flags_; }

  std::size_t n_firms() const noexcept { return firms_.size(); }
  std::vector<std::size_t> treated_columns() const;
  std::vector<std::size_t> control_columns() const;

  /// (T_c + t0) x N: control rows stacked over treatment rows.
  Eigen::MatrixXd stacked() const;
  /// Stacked rows restricted to the given columns.
  Eigen::MatrixXd stacked(std::span<const std::size_t> columns) const;

  /// Round-trips the panel back into sparse series keyed by calendar index.
  std::vector<FirmSeries> to_series() const;
  FirmSeries market_series() const;

 private:
  std::vector<std::string> firms_;
  EventWindow window_;
  Eigen::MatrixXd control_;
  Eigen::MatrixXd treatment_;
  Eigen::VectorXd market_;
  std::vector<TreatmentStatus> flags_;
};

struct AlignedPanel {
  ReturnPanel panel;
  std::vector<std::string> dropped;
};

/// Keeps exactly the firms observed on every day of [t_start, t_end + t0],
/// preserving input order. Throws InputError when the market series has a
/// gap, SampleError when no treated or no control firm survives.
AlignedPanel align_panel(std::span<const FirmSeries> series,
                         std::span<const TreatmentStatus> flags, const FirmSeries& market,
                         const EventWindow& window);

}  // namespace evstudy
