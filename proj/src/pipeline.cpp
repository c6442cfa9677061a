#include "evstudy/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "evstudy/capm.hpp"
#include "evstudy/error.hpp"
#include "evstudy/gsynth.hpp"
#include "parallel.hpp"
#include "report.hpp"

namespace evstudy {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(Estimator e) noexcept {
  return e == Estimator::Capm ? "capm" : "gsynth";
}

std::string_view to_string(CellStatus s) noexcept {
  switch (s) {
    case CellStatus::Ok: return "ok";
    case CellStatus::Infeasible: return "infeasible";
    case CellStatus::InputFailure: return "input_error";
    case CellStatus::EstimationFailure: return "estimation_error";
  }
  return "?";
}

bool RunReport::has_estimation_failure() const {
  return std::any_of(rows.begin(), rows.end(),
                     [](const ReportRow& r) { return r.status == CellStatus::EstimationFailure; });
}

EventDates parse_event_dates(std::string_view text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string_view::npos)
    throw InputError(fmt::format("event dates '{}': expected YEAR:ANNOUNCEMENT:EFFECTIVE", text));
  EventDates d;
  const std::string year(text.substr(0, c1));
  try {
    std::size_t used = 0;
    d.year = std::stoi(year, &used);
    if (used != year.size()) throw std::invalid_argument(year);
  } catch (const std::exception&) {
    throw InputError(fmt::format("event dates '{}': bad year", text));
  }
  d.announcement = parse_iso_date(text.substr(c1 + 1, c2 - c1 - 1));
  d.effective = parse_iso_date(text.substr(c2 + 1));
  return d;
}

void validate_config(const RunConfig& c) {
  if (c.estimators.empty()) throw InputError("config: estimators must not be empty");
  if (c.directions.empty()) throw InputError("config: directions must not be empty");
  for (auto d : c.directions)
    if (!is_treated(d)) throw InputError("config: directions must be join or delist");
  if (c.variants.empty()) throw InputError("config: variants must not be empty");
  if (c.year_first && c.year_last && *c.year_first > *c.year_last)
    throw InputError("config: first year is after last year");
  const auto& g = c.gsynth;
  if (g.r_candidates.empty()) throw InputError("config: r candidates must not be empty");
  for (int r : g.r_candidates)
    if (r < 0) throw InputError("config: r candidates must be non-negative");
  if (g.b1 < 0) throw InputError("config: b1 must be non-negative");
  if (g.b2 < 2) throw InputError("config: b2 must be at least 2");
  if (!(g.confidence > 0.0 && g.confidence < 1.0))
    throw InputError("config: confidence must lie in (0, 1)");
  if (g.max_retries < 0) throw InputError("config: max_retries must be non-negative");
  for (int d : c.grid_from)
    if (d < 1) throw InputError("config: grid days start at 1");
  for (int d : c.grid_to)
    if (d < 1) throw InputError("config: grid days start at 1");
  std::set<int> years;
  for (const auto& e : c.event_dates) {
    if (!years.insert(e.year).second)
      throw InputError(fmt::format("config: event dates for {} given twice", e.year));
    if (!(std::chrono::sys_days(e.announcement) < std::chrono::sys_days(e.effective)))
      throw InputError(fmt::format("config: effective date of {} is not after the announcement",
                                   e.year));
  }
  if (c.output_dir.empty()) throw InputError("config: output directory is required");

  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  const fs::path probe = c.output_dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (ec || !out)
      throw InputError(fmt::format("config: output directory {} is not writable",
                                   c.output_dir.string()));
  }
  fs::remove(probe, ec);
}

namespace {

struct CellKey {
  int year;
  TreatmentStatus direction;
  int industry;

  auto operator<=>(const CellKey&) const = default;
};

/// Per-firm data of one sample variant used by the pooled tables.
struct FirmRecord {
  AbnormalSeries ar;  ///< market-model abnormal returns over treatment days
  bool treated = false;
  const FundamentalsRecord* fundamentals = nullptr;
};

struct VariantResult {
  SampleVariant variant;
  bool ok = false;
  std::string note;
  std::vector<FirmRecord> firms;
  MatrixXd treated_returns;  ///< t0 x N_tr
  MatrixXd control_returns;  ///< t0 x N_co
};

struct CellResult {
  CellKey key;
  ReportRow row;
  std::optional<EventWindow> window;
  std::vector<VariantResult> variants;
  // synthetic control on the estimation sample
  std::optional<AttSeries> att;
  MatrixXd gaps;  ///< T x N_tr
  Index t_control = 0;
  std::vector<std::string> treated_ids;
  std::vector<AbnormalSeries> gsynth_ar;
};

struct Inputs {
  ReturnsData returns;
  std::vector<FundamentalsRecord> fundamentals;
  std::vector<MembershipEvent> events;
  std::vector<std::string> universe;
};

std::uint64_t cell_seed(std::uint64_t master, const CellKey& k) {
  std::seed_seq seq{std::uint32_t(master), std::uint32_t(master >> 32), std::uint32_t(k.year),
                    std::uint32_t(k.industry), std::uint32_t(k.direction)};
  std::mt19937_64 rng(seq);
  return rng();
}

std::optional<AlignedPanel> align_sample(const Inputs& in, const SampleSpec& spec,
                                         const EventWindow& window, std::string& note) {
  std::vector<FirmSeries> series;
  std::vector<TreatmentStatus> flags;
  std::vector<std::string> absent;
  auto add = [&](const std::vector<std::string>& ids, TreatmentStatus flag) {
    for (const auto& id : ids) {
      if (const FirmSeries* s = in.returns.find(id)) {
        series.push_back(*s);
        flags.push_back(flag);
      } else {
        absent.push_back(id);
      }
    }
  };
  add(spec.treated_ids, spec.direction);
  add(spec.control_ids, TreatmentStatus::Control);
  try {
    AlignedPanel aligned = align_panel(series, flags, in.returns.market, window);
    aligned.dropped.insert(aligned.dropped.end(), absent.begin(), absent.end());
    return aligned;
  } catch (const SampleError& e) {
    note = e.what();
    return std::nullopt;
  }
}

std::vector<double> column(const MatrixXd& m, Index j) {
  return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

std::vector<FirmRecord> capm_records(const ReturnPanel& panel, const Inputs& in, int year,
                                     std::vector<CapmFit>* fits) {
  const Index tc = panel.control().rows();
  const std::vector<double> mkt_pre(panel.market().data(), panel.market().data() + tc);
  const std::vector<double> mkt_post(panel.market().data() + tc,
                                     panel.market().data() + panel.market().size());
  std::vector<FirmRecord> out;
  for (std::size_t j = 0; j < panel.n_firms(); ++j) {
    const auto& id = panel.firms()[j];
    CapmFit fit = fit_capm(column(panel.control(), Index(j)), mkt_pre, id);
    FirmRecord rec;
    rec.ar = abnormal_returns(fit, column(panel.treatment(), Index(j)), mkt_post, 1);
    rec.treated = is_treated(panel.flags()[j]);
    rec.fundamentals = find_fundamentals(in.fundamentals, id, year - 1);
    out.push_back(std::move(rec));
    if (fits) fits->push_back(std::move(fit));
  }
  return out;
}

MatrixXd select_columns(const MatrixXd& m, const std::vector<std::size_t>& cols) {
  MatrixXd out(m.rows(), Index(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(Index(k)) = m.col(Index(cols[k]));
  return out;
}

CellResult run_cell(const RunConfig& config, const Inputs& in, const CellKey& key) {
  CellResult res;
  res.key = key;
  res.row.year = key.year;
  res.row.industry = key.industry;
  res.row.direction = key.direction;
  const bool want_capm = std::find(config.estimators.begin(), config.estimators.end(),
                                   Estimator::Capm) != config.estimators.end();
  const bool want_gsynth = std::find(config.estimators.begin(), config.estimators.end(),
                                     Estimator::Gsynth) != config.estimators.end();

  const auto dates = std::find_if(config.event_dates.begin(), config.event_dates.end(),
                                  [&](const EventDates& d) { return d.year == key.year; });
  if (dates == config.event_dates.end()) {
    res.row.status = CellStatus::InputFailure;
    res.row.message = fmt::format("no event dates configured for {}", key.year);
    return res;
  }
  try {
    res.window = build_event_window(key.year, in.returns.calendar, dates->announcement,
                                    dates->effective);
  } catch (const InputError& e) {
    res.row.status = CellStatus::InputFailure;
    res.row.message = e.what();
    return res;
  }
  const EventWindow& window = *res.window;

  std::vector<std::string> missing;
  std::optional<SampleSpec> full;
  try {
    full = construct_full_sample(key.year, key.industry, key.direction, in.events,
                                 in.fundamentals, in.universe, &missing);
  } catch (const SampleError& e) {
    res.row.status = CellStatus::Infeasible;
    res.row.message = e.what();
    return res;
  }
  std::vector<std::string> messages;
  if (!missing.empty())
    messages.push_back(fmt::format("{} firms without prior-year fundamentals", missing.size()));

  // The report row and the synthetic control use the full sample when it is
  // requested, otherwise the base sample.
  std::optional<AlignedPanel> estimation;
  for (SampleVariant v : config.variants) {
    VariantResult vr;
    vr.variant = v;
    std::optional<SampleSpec> spec;
    if (v == SampleVariant::Full) {
      spec = full;
    } else {
      try {
        spec = construct_base_sample(*full, in.fundamentals);
      } catch (const SampleError& e) {
        vr.note = e.what();
      }
    }
    std::optional<AlignedPanel> aligned;
    if (spec) aligned = align_sample(in, *spec, window, vr.note);
    if (aligned) {
      const ReturnPanel& p = aligned->panel;
      vr.treated_returns = select_columns(p.treatment(), p.treated_columns());
      vr.control_returns = select_columns(p.treatment(), p.control_columns());
      if (!estimation) estimation = aligned;
      if (want_capm) {
        try {
          vr.firms = capm_records(p, in, key.year, nullptr);
          vr.ok = true;
        } catch (const EstimationError& e) {
          vr.note = e.what();
        }
      } else {
        vr.ok = true;
      }
    }
    if (!vr.note.empty()) messages.push_back(fmt::format("{}: {}", to_string(v), vr.note));
    res.variants.push_back(std::move(vr));
  }

  auto finish = [&](CellStatus status) {
    res.row.status = status;
    res.row.message.clear();
    for (const auto& m : messages) res.row.message += (res.row.message.empty() ? "" : "; ") + m;
    return res;
  };

  if (!estimation) return finish(CellStatus::Infeasible);
  const ReturnPanel& panel = estimation->panel;
  const auto treated_cols = panel.treated_columns();
  const auto control_cols = panel.control_columns();
  res.row.n_treated = treated_cols.size();
  res.row.n_control = control_cols.size();
  if (!estimation->dropped.empty())
    messages.push_back(fmt::format("{} firms dropped for incomplete returns",
                                   estimation->dropped.size()));

  if (want_capm) {
    try {
      std::vector<CapmFit> fits;
      capm_records(panel, in, key.year, &fits);
      double sum = 0.0;
      for (std::size_t j : treated_cols) sum += fits[j].control_mspe;
      res.row.capm_mspe = sum / double(treated_cols.size());
    } catch (const EstimationError& e) {
      messages.push_back(fmt::format("capm: {}", e.what()));
      return finish(CellStatus::EstimationFailure);
    }
  }

  if (want_gsynth) {
    const Index tc = panel.control().rows();
    const Index nco = Index(control_cols.size());
    if (nco < 2) {
      messages.push_back("gsynth: at least 2 controls are required");
      return finish(CellStatus::Infeasible);
    }
    const MatrixXd all = panel.stacked();
    const MatrixXd controls = select_columns(all, control_cols);
    const MatrixXd treated = select_columns(all, treated_cols);
    const int r_max = int(std::min<Index>(tc - 1, nco));
    std::vector<int> candidates;
    for (int r : config.gsynth.r_candidates) {
      if (r <= r_max)
        candidates.push_back(r);
      else
        res.row.infeasible_r.push_back(r);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    try {
      if (candidates.empty()) throw EstimationError("no feasible factor count");
      IfeOptions opts;
      opts.two_way_demean = config.gsynth.two_way_demean;
      const CvReport cv =
          cross_validate_r(controls.topRows(tc), treated.topRows(tc), candidates, opts);
      for (std::size_t k = 0; k < cv.candidates.size(); ++k)
        if (!cv.feasible[k]) res.row.infeasible_r.push_back(cv.candidates[k]);
      std::sort(res.row.infeasible_r.begin(), res.row.infeasible_r.end());
      res.row.chosen_r = cv.chosen;

      const GscFit fit = fit_gsc(controls, treated, tc, cv.chosen, config.gsynth.two_way_demean);
      res.row.gsynth_mspe = fit.pre_mspe;
      res.gaps = fit.gaps;
      res.t_control = tc;
      for (std::size_t j : treated_cols) res.treated_ids.push_back(panel.firms()[j]);
      for (Index j = 0; j < fit.gaps.cols(); ++j) {
        AbnormalSeries s;
        s.firm_id = res.treated_ids[std::size_t(j)];
        s.first_day = 1;
        s.values = std::vector<double>(fit.gaps.col(j).data() + tc,
                                       fit.gaps.col(j).data() + fit.gaps.rows());
        res.gsynth_ar.push_back(std::move(s));
      }

      BootstrapConfig bc;
      bc.b1 = config.gsynth.b1 > 0 ? config.gsynth.b1 : int(std::min<Index>(nco, 100));
      bc.b2 = config.gsynth.b2;
      bc.confidence = config.gsynth.confidence;
      bc.seed = cell_seed(config.gsynth.seed, key);
      bc.max_retries = config.gsynth.max_retries;
      bc.two_way_demean = config.gsynth.two_way_demean;
      bc.threads = 1;
      res.att = bootstrap_inference(controls, treated, tc, cv.chosen, bc);
    } catch (const EstimationError& e) {
      messages.push_back(fmt::format("gsynth: {}", e.what()));
      return finish(CellStatus::EstimationFailure);
    }
  }
  return finish(CellStatus::Ok);
}

std::string cell_tag(const CellKey& k) {
  return fmt::format("{}_{}_{}", to_string(k.direction), k.year, k.industry);
}

std::vector<int> clip_days(const std::vector<int>& days, int limit) {
  std::vector<int> out;
  for (int d : days)
    if (d <= limit) out.push_back(d);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct RegressionWindow {
  std::string label;
  int (*from)(const EventWindow&);
  int (*to)(const EventWindow&);
};

const std::vector<RegressionWindow>& regression_windows() {
  static const std::vector<RegressionWindow> w{
      {"start_to_ann", [](const EventWindow&) { return 1; },
       [](const EventWindow& e) { return e.ann_offset(); }},
      {"start_to_eff", [](const EventWindow&) { return 1; },
       [](const EventWindow& e) { return e.eff_offset(); }},
      {"ann_to_eff", [](const EventWindow& e) { return e.ann_offset(); },
       [](const EventWindow& e) { return e.eff_offset(); }},
      {"ann_to_end", [](const EventWindow& e) { return e.ann_offset(); },
       [](const EventWindow& e) { return e.t0(); }},
      {"eff_to_end", [](const EventWindow& e) { return e.eff_offset(); },
       [](const EventWindow& e) { return e.t0(); }},
  };
  return w;
}

std::string summary_markdown(const RunConfig& config, const RunReport& report,
                             const std::optional<MspeContest>& contest,
                             const std::string& contest_note) {
  std::string s = "# Event study run summary\n\n";
  std::map<std::string_view, int> by_status;
  for (const auto& r : report.rows) ++by_status[to_string(r.status)];
  s += fmt::format("Cells attempted: {}\n\n", report.rows.size());
  for (const auto& [k, v] : by_status) s += fmt::format("- {}: {}\n", k, v);
  s += fmt::format("\nEstimators: ");
  for (std::size_t i = 0; i < config.estimators.size(); ++i)
    s += fmt::format("{}{}", i ? ", " : "", to_string(config.estimators[i]));
  s += "\n\n## Control-period fit\n\n";
  if (contest) {
    s += fmt::format("Comparable cells: {}\n\n", contest->n);
    s += fmt::format("Mean MSPE difference (capm - gsynth): {}\n\n", detail::fixed6(contest->estimate));
    if (contest->test)
      s += fmt::format("Paired t = {}, df = {}, p = {} {}\n\n", detail::fixed6(contest->test->t_stat),
                       detail::fixed6(contest->test->df), detail::fixed6(contest->test->p_value),
                       star_marks(stars_for(contest->test->p_value)));
    else
      s += fmt::format("Paired test undefined: {}\n\n", contest->note);
    s += fmt::format("Lower MSPE: capm {}, gsynth {}, ties {}\n\n", contest->wins_capm,
                     contest->wins_gsynth, contest->ties);
  } else {
    s += contest_note + "\n\n";
  }
  s += "## Cells\n\n| year | industry | direction | status | treated | controls | r | capm MSPE | "
       "gsynth MSPE |\n|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : report.rows)
    s += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", r.year, r.industry,
                     to_string(r.direction), to_string(r.status), r.n_treated, r.n_control,
                     r.chosen_r ? std::to_string(*r.chosen_r) : "", detail::fixed6(r.capm_mspe),
                     detail::fixed6(r.gsynth_mspe));
  if (!report.notices.empty()) {
    s += "\n## Notices\n\n";
    for (const auto& n : report.notices) s += "- " + n + "\n";
  }
  s += fmt::format("\n{}\n", kStarLegend);
  return s;
}

}  // namespace

RunReport run_pipeline(const RunConfig& config) {
  validate_config(config);
  const fs::path& out = config.output_dir;

  Inputs in;
  in.returns = load_returns(config.returns);
  in.fundamentals = load_fundamentals(config.fundamentals);
  in.events = load_membership(config.membership);
  for (const auto& f : in.returns.firms) in.universe.push_back(f.id());

  std::set<CellKey> keys;
  for (const auto& e : in.events) {
    if (config.year_first && e.year < *config.year_first) continue;
    if (config.year_last && e.year > *config.year_last) continue;
    if (std::find(config.directions.begin(), config.directions.end(), e.action) ==
        config.directions.end())
      continue;
    keys.insert({e.year, e.action, e.industry});
  }
  const std::vector<CellKey> cells(keys.begin(), keys.end());

  RunReport report;
  if (cells.empty()) report.notices.push_back("no events match the configured years and directions");

  std::vector<CellResult> results(cells.size());
  const unsigned threads =
      config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  detail::parallel_for(cells.size(), threads, [&](std::size_t i) {
    results[i] = run_cell(config, in, cells[i]);
  });

  for (const auto& r : results) report.rows.push_back(r.row);

  // Per-cell files.
  for (const auto& r : results) {
    if (!r.att) continue;
    const std::string tag = cell_tag(r.key);
    detail::write_text(out / "att" / fmt::format("att_{}.csv", tag), detail::att_csv(*r.att));
    detail::write_text(out / "gaps" / fmt::format("gaps_{}.csv", tag),
                       detail::gaps_csv(r.gaps, r.t_control, r.treated_ids));
    if (config.plots)
      detail::write_text(
          out / "plots" / fmt::format("gaps_{}.svg", tag),
          detail::gap_plot_svg(fmt::format("{} {} industry {}: treated minus synthetic",
                                           to_string(r.key.direction), r.key.year, r.key.industry),
                               r.gaps, r.t_control, r.window->ann_offset(),
                               r.window->eff_offset(), r.treated_ids));
  }

  const bool want_capm = std::find(config.estimators.begin(), config.estimators.end(),
                                   Estimator::Capm) != config.estimators.end();
  const bool want_gsynth = std::find(config.estimators.begin(), config.estimators.end(),
                                     Estimator::Gsynth) != config.estimators.end();

  auto grid_days = [&](int min_t0, const EventWindow& w) {
    auto [from, to] = default_grid_days(w);
    if (!config.grid_from.empty()) from = config.grid_from;
    if (!config.grid_to.empty()) to = config.grid_to;
    return std::pair{clip_days(from, min_t0), clip_days(to, min_t0)};
  };

  for (TreatmentStatus dir : config.directions) {
    const std::string dname(to_string(dir));
    const CellResult* first = nullptr;
    int min_t0 = 0;
    for (const auto& r : results) {
      if (r.key.direction != dir || !r.window) continue;
      if (!first) first = &r;
      min_t0 = min_t0 ? std::min(min_t0, r.window->t0()) : r.window->t0();
    }
    if (!first) continue;
    const auto [from, to] = grid_days(min_t0, *first->window);

    if (want_capm) {
      for (SampleVariant v : config.variants) {
        const std::string vname(to_string(v));
        std::vector<AbnormalSeries> treated, controls;
        MatrixXd daily_t, daily_c;
        std::vector<std::pair<const CellResult*, const VariantResult*>> parts;
        for (const auto& r : results) {
          if (r.key.direction != dir) continue;
          for (const auto& vr : r.variants)
            if (vr.variant == v && vr.ok && !vr.firms.empty()) parts.emplace_back(&r, &vr);
        }
        if (parts.empty()) {
          report.notices.push_back(fmt::format("capm {} {}: no usable cells", dname, vname));
          continue;
        }
        for (const auto& [r, vr] : parts)
          for (const auto& f : vr->firms) (f.treated ? treated : controls).push_back(f.ar);

        const std::string tag = fmt::format("capm_{}_{}", dname, vname);
        try {
          const CarGrid grid = car_grid(treated, &controls, from, to);
          detail::write_text(out / "grids" / fmt::format("grid_{}.csv", tag),
                             detail::grid_csv(grid));
        } catch (const Error& e) {
          report.notices.push_back(fmt::format("grid {}: {}", tag, e.what()));
        }

        // Daily treated-versus-control return tests over the common days.
        Index nt = 0, nc = 0;
        for (const auto& [r, vr] : parts) {
          nt += vr->treated_returns.cols();
          nc += vr->control_returns.cols();
        }
        daily_t.resize(min_t0, nt);
        daily_c.resize(min_t0, nc);
        Index it = 0, ic = 0;
        for (const auto& [r, vr] : parts) {
          daily_t.middleCols(it, vr->treated_returns.cols()) =
              vr->treated_returns.topRows(min_t0);
          daily_c.middleCols(ic, vr->control_returns.cols()) =
              vr->control_returns.topRows(min_t0);
          it += vr->treated_returns.cols();
          ic += vr->control_returns.cols();
        }
        const auto tests = daily_return_tests(daily_t, daily_c);
        std::vector<detail::DailyRow> daily;
        for (Index t = 0; t < min_t0; ++t)
          daily.push_back({int(t) + 1, daily_t.row(t).mean(), daily_c.row(t).mean(),
                           tests[std::size_t(t)]});
        detail::write_text(out / "daily" / fmt::format("daily_returns_{}_{}.csv", dname, vname),
                           detail::daily_csv(daily));

        std::vector<detail::RegressionBlock> blocks;
        for (const auto& w : regression_windows()) {
          detail::RegressionBlock b;
          b.window = w.label;
          b.from = w.from(*first->window);
          b.to = w.to(*first->window);
          std::vector<CarObservation> rows;
          std::size_t skipped = 0;
          for (const auto& [r, vr] : parts) {
            for (const auto& f : vr->firms) {
              if (!f.fundamentals) {
                ++skipped;
                continue;
              }
              CarObservation o;
              o.car = car(f.ar, w.from(*r->window), w.to(*r->window));
              o.treated = f.treated;
              o.size = f.fundamentals->size;
              o.profitability = f.fundamentals->profitability;
              o.leverage = f.fundamentals->leverage;
              o.industry = std::to_string(r->key.industry);
              o.year = std::to_string(r->key.year);
              rows.push_back(std::move(o));
            }
          }
          try {
            b.result = ols_car_regression(rows);
          } catch (const Error& e) {
            b.note = e.what();
          }
          if (skipped && b.note.empty())
            b.note = fmt::format("{} firms without fundamentals skipped", skipped);
          blocks.push_back(std::move(b));
        }
        detail::write_text(out / "regressions" / fmt::format("regression_{}.csv", tag),
                           detail::regression_csv(blocks));
      }
    }

    if (want_gsynth) {
      std::vector<AbnormalSeries> gaps;
      for (const auto& r : results)
        if (r.key.direction == dir)
          gaps.insert(gaps.end(), r.gsynth_ar.begin(), r.gsynth_ar.end());
      if (gaps.empty()) {
        report.notices.push_back(fmt::format("gsynth {}: no usable cells", dname));
      } else {
        try {
          const CarGrid grid = car_grid(gaps, nullptr, from, to);
          detail::write_text(out / "grids" / fmt::format("grid_gsynth_{}.csv", dname),
                             detail::grid_csv(grid));
        } catch (const Error& e) {
          report.notices.push_back(fmt::format("grid gsynth {}: {}", dname, e.what()));
        }
      }
    }

    // Year comparisons pool each year's treated series across industries.
    for (Estimator est : config.estimators) {
      std::map<int, std::vector<AbnormalSeries>> by_year;
      for (const auto& r : results) {
        if (r.key.direction != dir) continue;
        if (est == Estimator::Gsynth) {
          if (!r.gsynth_ar.empty()) {
            auto& v = by_year[r.key.year];
            v.insert(v.end(), r.gsynth_ar.begin(), r.gsynth_ar.end());
          }
        } else if (!r.variants.empty() && r.variants.front().ok) {
          for (const auto& f : r.variants.front().firms)
            if (f.treated) by_year[r.key.year].push_back(f.ar);
        }
      }
      if (by_year.size() < 2) {
        report.notices.push_back(fmt::format("year comparison {} {}: fewer than two years",
                                             to_string(est), dname));
        continue;
      }
      for (const auto& block : default_year_blocks()) {
        const std::string tag = fmt::format("{}_{}_{}", to_string(est), dname, block.label);
        try {
          const YearComparison cmp = year_comparison(by_year, block);
          detail::write_text(out / "yearcmp" / fmt::format("yearcmp_{}.csv", tag),
                             detail::year_comparison_csv(cmp));
          for (const auto& n : cmp.notices) report.notices.push_back(tag + ": " + n);
        } catch (const Error& e) {
          report.notices.push_back(fmt::format("year comparison {}: {}", tag, e.what()));
        }
      }
    }
  }

  const fs::path report_path = out / "run_report.csv";
  write_run_report(report, report_path);

  std::optional<MspeContest> contest;
  std::string contest_note;
  try {
    // Re-read so that a later `mspe-contest` over the file gives identical output.
    contest = emit_mspe_contest(read_run_report(report_path), out);
  } catch (const InputError& e) {
    contest_note = e.what();
    report.notices.push_back(fmt::format("mspe contest skipped: {}", e.what()));
  }
  detail::write_text(out / "summary.md", summary_markdown(config, report, contest, contest_note));
  return report;
}

void write_run_report(const RunReport& report, const fs::path& path) {
  std::string s =
      "year,industry,direction,status,n_treated,n_control,chosen_r,capm_mspe,gsynth_mspe,"
      "infeasible_r,message\n";
  for (const auto& r : report.rows) {
    std::string infeasible;
    for (int k : r.infeasible_r) infeasible += (infeasible.empty() ? "" : ";") + std::to_string(k);
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.year, r.industry,
                     to_string(r.direction), to_string(r.status), r.n_treated, r.n_control,
                     r.chosen_r ? std::to_string(*r.chosen_r) : "", detail::fixed6(r.capm_mspe),
                     detail::fixed6(r.gsynth_mspe), infeasible, detail::csv_safe(r.message));
  }
  detail::write_text(path, s);
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

RunReport read_run_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  std::string line;
  const std::string header =
      "year,industry,direction,status,n_treated,n_control,chosen_r,capm_mspe,gsynth_mspe,"
      "infeasible_r,message";
  if (!std::getline(in, line) || (line.empty() ? line : line.substr(0, line.find('\r'))) != header)
    throw InputError(fmt::format("{}: not a run report (header mismatch)", path.string()));
  RunReport report;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 11)
      throw InputError(fmt::format("{}:{}: expected 11 fields, got {}", path.string(), lineno,
                                   f.size()));
    try {
      ReportRow r;
      r.year = std::stoi(f[0]);
      r.industry = std::stoi(f[1]);
      if (f[2] == "join")
        r.direction = TreatmentStatus::Join;
      else if (f[2] == "delist")
        r.direction = TreatmentStatus::Delist;
      else
        throw std::invalid_argument("direction");
      const std::map<std::string, CellStatus> statuses{
          {"ok", CellStatus::Ok},
          {"infeasible", CellStatus::Infeasible},
          {"input_error", CellStatus::InputFailure},
          {"estimation_error", CellStatus::EstimationFailure}};
      r.status = statuses.at(f[3]);
      r.n_treated = std::stoul(f[4]);
      r.n_control = std::stoul(f[5]);
      if (!f[6].empty()) r.chosen_r = std::stoi(f[6]);
      if (!f[7].empty()) r.capm_mspe = std::stod(f[7]);
      if (!f[8].empty()) r.gsynth_mspe = std::stod(f[8]);
      for (const auto& k : split(f[9], ';'))
        if (!k.empty()) r.infeasible_r.push_back(std::stoi(k));
      r.message = f[10];
      report.rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw InputError(fmt::format("{}:{}: malformed run report row", path.string(), lineno));
    }
  }
  return report;
}

MspeContest mspe_contest(const RunReport& report) {
  std::vector<double> capm, synth;
  MspeContest c;
  for (const auto& r : report.rows) {
    if (!r.capm_mspe || !r.gsynth_mspe) continue;
    capm.push_back(*r.capm_mspe);
    synth.push_back(*r.gsynth_mspe);
    if (*r.capm_mspe < *r.gsynth_mspe)
      ++c.wins_capm;
    else if (*r.capm_mspe > *r.gsynth_mspe)
      ++c.wins_gsynth;
    else
      ++c.ties;
  }
  c.n = capm.size();
  if (c.n < 2)
    throw InputError(fmt::format("mspe contest needs at least 2 cells with both MSPEs, found {}",
                                 c.n));
  try {
    c.test = paired_ttest(capm, synth);
    c.estimate = c.test->estimate;
  } catch (const DegenerateVarianceError& e) {
    c.estimate = e.estimate();
    c.note = "differences have zero variance";
  }
  return c;
}

MspeContest emit_mspe_contest(const RunReport& report, const fs::path& dir) {
  MspeContest c = mspe_contest(report);
  std::string rows = "year,industry,direction,n_treated,n_control,capm_mspe,gsynth_mspe,lower\n";
  for (const auto& r : report.rows) {
    if (!r.capm_mspe || !r.gsynth_mspe) continue;
    const char* lower = *r.capm_mspe < *r.gsynth_mspe   ? "capm"
                        : *r.capm_mspe > *r.gsynth_mspe ? "gsynth"
                                                        : "tie";
    rows += fmt::format("{},{},{},{},{},{},{},{}\n", r.year, r.industry, to_string(r.direction),
                        r.n_treated, r.n_control, detail::fixed6(r.capm_mspe),
                        detail::fixed6(r.gsynth_mspe), lower);
  }
  detail::write_text(dir / "mspe_contest.csv", rows);

  std::string s = "n,estimate,t_stat,df,p_value,stars,wins_capm,wins_gsynth,ties,note\n";
  s += fmt::format("{},{},", c.n, detail::fixed6(c.estimate));
  if (c.test)
    s += fmt::format("{},{},{},{}", detail::fixed6(c.test->t_stat), detail::fixed6(c.test->df),
                     detail::fixed6(c.test->p_value), star_marks(stars_for(c.test->p_value)));
  else
    s += ",,,";
  s += fmt::format(",{},{},{},{}\n", c.wins_capm, c.wins_gsynth, c.ties, detail::csv_safe(c.note));
  detail::write_text(dir / "mspe_contest_summary.csv", s);
  return c;
}

}  // namespace evstudy
