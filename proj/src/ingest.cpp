#include "evstudy/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "evstudy/error.hpp"

namespace evstudy {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

/// Reads a CSV stream, checks the header and hands each data row to `row`
/// together with its 1-based line number.
template <typename RowFn>
void read_csv(std::istream& in, std::string_view source,
              std::span<const std::vector<std::string_view>> accepted_headers, RowFn&& row) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (trim(view).empty()) continue;
    const auto fields = split(view);
    if (!have_header) {
      for (const auto& h : accepted_headers) {
        if (std::equal(fields.begin(), fields.end(), h.begin(), h.end())) {
          have_header = true;
          width = h.size();
        }
      }
      if (!have_header) {
        std::string expected;
        for (const auto& h : accepted_headers) {
          if (!expected.empty()) expected += " or ";
          for (std::size_t i = 0; i < h.size(); ++i) expected += (i ? "," : "") + std::string(h[i]);
        }
        throw InputError(fmt::format("{}:{}: missing or wrong header, expected '{}'", source,
                                     line_no, expected));
      }
      continue;
    }
    if (fields.size() != width)
      throw InputError(fmt::format("{}:{}: expected {} fields, found {}", source, line_no, width,
                                   fields.size()));
    row(fields, line_no);
  }
  if (!have_header) throw InputError(fmt::format("{}: empty file, header missing", source));
}

double parse_double(std::string_view text, std::string_view what, std::string_view source,
                    std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
    throw InputError(fmt::format("{}:{}: {} '{}' is not a finite number", source, line_no, what,
                                 text));
  return v;
}

int parse_int(std::string_view text, std::string_view what, std::string_view source,
              std::size_t line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
    throw InputError(
        fmt::format("{}:{}: {} '{}' is not an integer", source, line_no, what, text));
  return v;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  return in;
}

}  // namespace

const FirmSeries* ReturnsData::find(std::string_view firm_id) const {
  for (const auto& f : firms)
    if (f.id() == firm_id) return &f;
  return nullptr;
}

ReturnsData parse_returns(std::istream& in, std::string_view source) {
  struct Row {
    Date date;
    std::size_t firm;
    double ret;
  };
  std::vector<Row> rows;
  std::vector<std::string> firm_order;
  std::unordered_map<std::string, std::size_t> firm_pos;
  std::map<Date, std::pair<double, std::size_t>> market;  // value, first line
  std::set<std::pair<Date, std::size_t>> seen;

  static const std::vector<std::vector<std::string_view>> header{{"date", "firm_id", "ret", "mkt"}};
  read_csv(in, source, header, [&](const std::vector<std::string_view>& f, std::size_t line) {
    Date date;
    try {
      date = parse_iso_date(f[0]);
    } catch (const InputError& e) {
      throw InputError(fmt::format("{}:{}: {}", source, line, e.what()));
    }
    if (f[1].empty()) throw InputError(fmt::format("{}:{}: empty firm_id", source, line));
    const double ret = parse_double(f[2], "ret", source, line);
    const double mkt = parse_double(f[3], "mkt", source, line);

    const std::string id(f[1]);
    auto [it, inserted] = firm_pos.try_emplace(id, firm_order.size());
    if (inserted) firm_order.push_back(id);
    if (!seen.emplace(date, it->second).second)
      throw InputError(fmt::format("{}:{}: duplicate row for date {} and firm {}", source, line,
                                   f[0], id));
    auto [mit, fresh] = market.try_emplace(date, mkt, line);
    if (!fresh && mit->second.first != mkt)
      throw InputError(fmt::format("{}:{}: mkt {} differs from {} given on line {} for date {}",
                                   source, line, mkt, mit->second.first, mit->second.second,
                                   f[0]));
    rows.push_back({date, it->second, ret});
  });

  std::vector<Date> dates;
  dates.reserve(market.size());
  std::vector<Observation> market_obs;
  for (const auto& [d, v] : market) {
    market_obs.push_back({dates.size(), v.first});
    dates.push_back(d);
  }
  TradingCalendar calendar(dates);

  std::vector<std::vector<Observation>> per_firm(firm_order.size());
  for (const auto& r : rows)
    per_firm[r.firm].push_back({*calendar.index_of(r.date), r.ret});

  ReturnsData out;
  out.calendar = std::move(calendar);
  out.firms.reserve(firm_order.size());
  for (std::size_t i = 0; i < firm_order.size(); ++i)
    out.firms.emplace_back(firm_order[i], std::move(per_firm[i]));
  out.market = FirmSeries("market", std::move(market_obs));
  return out;
}

ReturnsData load_returns(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_returns(in, path.string());
}

std::vector<FundamentalsRecord> parse_fundamentals(std::istream& in, std::string_view source) {
  static const std::vector<std::vector<std::string_view>> headers{
      {"firm_id", "fiscal_year", "assets", "roe", "leverage"},
      {"firm_id", "fiscal_year", "assets", "roe", "leverage", "naics2"}};
  std::vector<FundamentalsRecord> out;
  std::set<std::pair<std::string, int>> seen;
  read_csv(in, source, headers, [&](const std::vector<std::string_view>& f, std::size_t line) {
    FundamentalsRecord r;
    r.firm_id = std::string(f[0]);
    if (r.firm_id.empty()) throw InputError(fmt::format("{}:{}: empty firm_id", source, line));
    r.fiscal_year = parse_int(f[1], "fiscal_year", source, line);
    r.assets = parse_double(f[2], "assets", source, line);
    if (r.assets <= 0.0)
      throw InputError(
          fmt::format("{}:{}: assets must be positive, found {}", source, line, f[2]));
    r.size = std::log(r.assets);
    r.profitability = parse_double(f[3], "roe", source, line);
    r.leverage = parse_double(f[4], "leverage", source, line);
    if (f.size() == 6 && !f[5].empty()) r.industry = parse_int(f[5], "naics2", source, line);
    if (!seen.emplace(r.firm_id, r.fiscal_year).second)
      throw InputError(fmt::format("{}:{}: duplicate record for firm {} fiscal year {}", source,
                                   line, r.firm_id, r.fiscal_year));
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<FundamentalsRecord> load_fundamentals(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_fundamentals(in, path.string());
}

std::vector<MembershipEvent> parse_membership(std::istream& in, std::string_view source) {
  static const std::vector<std::vector<std::string_view>> header{
      {"firm_id", "year", "action", "naics2"}};
  std::vector<MembershipEvent> out;
  std::map<std::pair<std::string, int>, std::size_t> seen;
  read_csv(in, source, header, [&](const std::vector<std::string_view>& f, std::size_t line) {
    MembershipEvent e;
    e.firm_id = std::string(f[0]);
    if (e.firm_id.empty()) throw InputError(fmt::format("{}:{}: empty firm_id", source, line));
    e.year = parse_int(f[1], "year", source, line);
    if (f[2] == "join")
      e.action = TreatmentStatus::Join;
    else if (f[2] == "delist")
      e.action = TreatmentStatus::Delist;
    else
      throw InputError(fmt::format(
          "{}:{}: unknown action '{}', accepted tokens are 'join' and 'delist'", source, line,
          f[2]));
    e.industry = parse_int(f[3], "naics2", source, line);
    auto [it, fresh] = seen.try_emplace({e.firm_id, e.year}, line);
    if (!fresh)
      throw InputError(fmt::format("{}:{}: firm {} already has an event in {} (line {})", source,
                                   line, e.firm_id, e.year, it->second));
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<MembershipEvent> load_membership(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_membership(in, path.string());
}

const FundamentalsRecord* find_fundamentals(std::span<const FundamentalsRecord> records,
                                            std::string_view firm_id, int fiscal_year) {
  for (const auto& r : records)
    if (r.fiscal_year == fiscal_year && r.firm_id == firm_id) return &r;
  return nullptr;
}

std::string_view to_string(SampleVariant v) noexcept {
  return v == SampleVariant::Full ? "full" : "base";
}

SampleSpec construct_full_sample(int year, int industry, TreatmentStatus direction,
                                 std::span<const MembershipEvent> events,
                                 std::span<const FundamentalsRecord> fundamentals,
                                 std::span<const std::string> firm_universe,
                                 std::vector<std::string>* missing_fundamentals) {
  if (!is_treated(direction))
    throw InputError("construct_samples: direction must be join or delist");

  std::unordered_map<std::string_view, const FundamentalsRecord*> prior;
  for (const auto& r : fundamentals)
    if (r.fiscal_year == year - 1) prior.emplace(r.firm_id, &r);
  std::set<std::string_view> changing;
  for (const auto& e : events)
    if (e.year == year) changing.insert(e.firm_id);

  auto note_missing = [&](const std::string& id) {
    if (missing_fundamentals) missing_fundamentals->push_back(id);
  };

  SampleSpec spec;
  spec.year = year;
  spec.industry = industry;
  spec.direction = direction;
  spec.variant = SampleVariant::Full;
  bool any_event = false;
  for (const auto& e : events) {
    if (e.year != year || e.industry != industry || e.action != direction) continue;
    any_event = true;
    if (prior.count(e.firm_id))
      spec.treated_ids.push_back(e.firm_id);
    else
      note_missing(e.firm_id);
  }
  if (!any_event)
    throw SampleError(fmt::format("no {} event for industry {} in {}", to_string(direction),
                                  industry, year));
  if (spec.treated_ids.empty())
    throw SampleError(fmt::format("industry {} {}: no {} firm has fiscal {} fundamentals",
                                  industry, year, to_string(direction), year - 1));

  for (const auto& id : firm_universe) {
    if (changing.count(id)) continue;
    const auto it = prior.find(id);
    // without prior-year fundamentals the firm's industry is unknown
    if (it == prior.end() || it->second->industry != industry) continue;
    spec.control_ids.push_back(id);
  }
  if (spec.control_ids.empty())
    throw SampleError(
        fmt::format("industry {} {}: no same-industry control firm", industry, year));
  return spec;
}

SampleSpec construct_base_sample(const SampleSpec& full,
                                 std::span<const FundamentalsRecord> fundamentals) {
  const int fy = full.year - 1;
  double min_assets = std::numeric_limits<double>::infinity();
  for (const auto& id : full.treated_ids) {
    const auto* r = find_fundamentals(fundamentals, id, fy);
    if (!r) throw SampleError(fmt::format("treated firm {} lacks fiscal {} fundamentals", id, fy));
    min_assets = std::min(min_assets, r->assets);
  }
  const double threshold = kBaseAssetShare * min_assets;

  SampleSpec base = full;
  base.variant = SampleVariant::Base;
  base.control_ids.clear();
  for (const auto& id : full.control_ids) {
    const auto* r = find_fundamentals(fundamentals, id, fy);
    if (r && r->assets >= threshold) base.control_ids.push_back(id);
  }
  if (base.control_ids.empty())
    throw SampleError(fmt::format(
        "industry {} {}: no control reaches {}% of the smallest treated firm's assets",
        full.industry, full.year, 100.0 * kBaseAssetShare));
  return base;
}

SamplePair construct_samples(int year, int industry, TreatmentStatus direction,
                             std::span<const MembershipEvent> events,
                             std::span<const FundamentalsRecord> fundamentals,
                             std::span<const std::string> firm_universe) {
  SamplePair out;
  out.full = construct_full_sample(year, industry, direction, events, fundamentals, firm_universe,
                                   &out.missing_fundamentals);
  out.base = construct_base_sample(out.full, fundamentals);
  return out;
}

}  // namespace evstudy
