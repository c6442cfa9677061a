#pragma once

// CSV loaders for returns, fundamentals and index-membership events, and the
// construction of full and base samples per industry-year.
//
// Formats (UTF-8, comma separated, '.' decimal point, header row required):
//   returns:      date,firm_id,ret,mkt              (ISO dates, percent returns)
//   fundamentals: firm_id,fiscal_year,assets,roe,leverage[,naics2]
//   membership:   firm_id,year,action,naics2        (action is join or delist)

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evstudy/panel.hpp"

namespace evstudy {

struct ReturnsData {
  TradingCalendar calendar;
  /// One series per firm, in order of first appearance in the file.
  std::vector<FirmSeries> firms;
  FirmSeries market;

  const FirmSeries* find(std::string_view firm_id) const;
};

struct FundamentalsRecord {
  std::string firm_id;
  int fiscal_year = 0;
  double assets = 0.0;
  /// ln(assets), always recomputed from `assets`.
  double size = 0.0;
  /// return on equity
  double profitability = 0.0;
  /// debt to capital
  double leverage = 0.0;
  /// Two-digit NAICS code, when the optional column is present.
  std::optional<int> industry;
};

struct MembershipEvent {
  std::string firm_id;
  int year = 0;
  /// Join or Delist.
  TreatmentStatus action = TreatmentStatus::Join;
  int industry = 0;
};

ReturnsData parse_returns(std::istream& in, std::string_view source = "<returns>");
ReturnsData load_returns(const std::filesystem::path& path);

std::vector<FundamentalsRecord> parse_fundamentals(std::istream& in,
                                                   std::string_view source = "<fundamentals>");
std::vector<FundamentalsRecord> load_fundamentals(const std::filesystem::path& path);

std::vector<MembershipEvent> parse_membership(std::istream& in,
                                              std::string_view source = "<membership>");
std::vector<MembershipEvent> load_membership(const std::filesystem::path& path);

/// Record for (firm, fiscal_year) or nullptr.
const FundamentalsRecord* find_fundamentals(std::span<const FundamentalsRecord> records,
                                            std::string_view firm_id, int fiscal_year);

enum class SampleVariant { Full, Base };
std::string_view to_string(SampleVariant v) noexcept;

struct SampleSpec {
  int year = 0;
  int industry = 0;
  TreatmentStatus direction = TreatmentStatus::Join;
  SampleVariant variant = SampleVariant::Full;
  std::vector<std::string> treated_ids;
  std::vector<std::string> control_ids;
};

/// Share of the smallest treated firm's assets a control needs for the base sample.
inline constexpr double kBaseAssetShare = 0.8;

/// Treated firms are the `direction` events of (year, industry); controls are
/// the same-industry firms of `firm_universe` with no event of either kind that
/// year. A firm's industry is its event industry that year, otherwise the
/// naics2 field of its prior-fiscal-year fundamentals. Candidates without
/// prior-year fundamentals are appended to `missing_fundamentals` and dropped.
/// Throws SampleError when the treated or control set ends up empty.
SampleSpec construct_full_sample(int year, int industry, TreatmentStatus direction,
                                 std::span<const MembershipEvent> events,
                                 std::span<const FundamentalsRecord> fundamentals,
                                 std::span<const std::string> firm_universe,
                                 std::vector<std::string>* missing_fundamentals = nullptr);

/// Keeps controls whose prior-year assets are at least 80% of the smallest
/// treated firm's assets (inclusive). Throws SampleError when none survive.
SampleSpec construct_base_sample(const SampleSpec& full,
                                 std::span<const FundamentalsRecord> fundamentals);

struct SamplePair {
  SampleSpec full;
  SampleSpec base;
  std::vector<std::string> missing_fundamentals;
};

SamplePair construct_samples(int year, int industry, TreatmentStatus direction,
                             std::span<const MembershipEvent> events,
                             std::span<const FundamentalsRecord> fundamentals,
                             std::span<const std::string> firm_universe);

}  // namespace evstudy
