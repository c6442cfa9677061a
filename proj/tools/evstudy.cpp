// Command-line driver: run, simulate, mspe-contest, validate.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "evstudy/error.hpp"
#include "evstudy/ingest.hpp"
#include "evstudy/pipeline.hpp"
#include "evstudy/simulate.hpp"

namespace {

constexpr int kExitInput = 1;
constexpr int kExitEstimation = 2;

struct Options {
  std::string returns, fundamentals, membership, output;
  std::string report;
  int year_first = 0, year_last = 0;
  std::vector<std::string> estimators{"capm", "gsynth"};
  std::vector<std::string> directions{"join", "delist"};
  std::vector<std::string> variants{"full", "base"};
  std::vector<std::string> event_dates;
  std::vector<int> r_candidates{0, 1, 2, 3, 4, 5};
  int b1 = 0;
  int b2 = 500;
  double confidence = 0.95;
  std::uint64_t seed = 12345;
  int max_retries = 50;
  bool demean = false;
  std::vector<int> grid_from, grid_to;
  bool plots = false;
  unsigned threads = 0;

  // simulate
  evstudy::DgpConfig dgp;
  std::vector<int> sim_years{2013};
  std::vector<int> sim_industries{21};
  double effect = 0.0;
  int effect_from = 0;
};

template <typename Enum>
std::vector<Enum> parse_tokens(const std::vector<std::string>& tokens, std::string_view what,
                               const std::vector<std::pair<std::string, Enum>>& table) {
  std::vector<Enum> out;
  for (const auto& t : tokens) {
    if (t.empty()) continue;
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& p) { return p.first == t; });
    if (it == table.end()) throw evstudy::InputError(fmt::format("unknown {} '{}'", what, t));
    if (std::find(out.begin(), out.end(), it->second) == out.end()) out.push_back(it->second);
  }
  return out;
}

evstudy::RunConfig make_run_config(const Options& o) {
  using namespace evstudy;
  RunConfig c;
  c.returns = o.returns;
  c.fundamentals = o.fundamentals;
  c.membership = o.membership;
  c.output_dir = o.output;
  if (o.year_first) c.year_first = o.year_first;
  if (o.year_last) c.year_last = o.year_last;
  c.estimators = parse_tokens<Estimator>(o.estimators, "estimator",
                                         {{"capm", Estimator::Capm}, {"gsynth", Estimator::Gsynth}});
  c.directions = parse_tokens<TreatmentStatus>(
      o.directions, "direction", {{"join", TreatmentStatus::Join}, {"delist", TreatmentStatus::Delist}});
  c.variants = parse_tokens<SampleVariant>(
      o.variants, "variant", {{"full", SampleVariant::Full}, {"base", SampleVariant::Base}});
  for (const auto& e : o.event_dates) c.event_dates.push_back(parse_event_dates(e));
  c.gsynth.r_candidates = o.r_candidates;
  c.gsynth.b1 = o.b1;
  c.gsynth.b2 = o.b2;
  c.gsynth.confidence = o.confidence;
  c.gsynth.seed = o.seed;
  c.gsynth.max_retries = o.max_retries;
  c.gsynth.two_way_demean = o.demean;
  c.grid_from = o.grid_from;
  c.grid_to = o.grid_to;
  c.plots = o.plots;
  c.threads = o.threads;
  return c;
}

void require_inputs(const Options& o) {
  if (o.returns.empty() || o.fundamentals.empty() || o.membership.empty())
    throw evstudy::InputError("returns, fundamentals and membership paths are required");
}

int cmd_run(const Options& o) {
  evstudy::RunConfig config = make_run_config(o);
  evstudy::validate_config(config);
  require_inputs(o);
  const evstudy::RunReport report = evstudy::run_pipeline(config);
  std::size_t ok = 0;
  for (const auto& r : report.rows) ok += r.status == evstudy::CellStatus::Ok;
  fmt::print("{} cells, {} ok; results in {}\n", report.rows.size(), ok, o.output);
  for (const auto& r : report.rows)
    if (r.status != evstudy::CellStatus::Ok)
      fmt::print(stderr, "{} {} {}: {} ({})\n", r.year, r.industry, to_string(r.direction),
                 to_string(r.status), r.message);
  for (const auto& n : report.notices) fmt::print(stderr, "notice: {}\n", n);
  return report.has_estimation_failure() ? kExitEstimation : 0;
}

int cmd_validate(const Options& o) {
  require_inputs(o);
  const auto returns = evstudy::load_returns(o.returns);
  const auto fundamentals = evstudy::load_fundamentals(o.fundamentals);
  const auto events = evstudy::load_membership(o.membership);
  for (const auto& e : o.event_dates) evstudy::parse_event_dates(e);
  fmt::print("returns: {} trading days, {} firms\n", returns.calendar.size(), returns.firms.size());
  fmt::print("fundamentals: {} records\n", fundamentals.size());
  fmt::print("membership: {} events\n", events.size());
  return 0;
}

int cmd_contest(const Options& o) {
  if (o.report.empty()) throw evstudy::InputError("--report is required");
  const auto report = evstudy::read_run_report(o.report);
  const std::filesystem::path dir =
      o.output.empty() ? std::filesystem::path(o.report).parent_path() : std::filesystem::path(o.output);
  const auto c = evstudy::emit_mspe_contest(report, dir);
  fmt::print("cells {}: mean MSPE difference (capm - gsynth) {:.6f}", c.n, c.estimate);
  if (c.test)
    fmt::print(", t {:.6f}, p {:.6f}{}\n", c.test->t_stat, c.test->p_value,
               evstudy::star_marks(evstudy::stars_for(c.test->p_value)));
  else
    fmt::print(" ({})\n", c.note);
  fmt::print("lower MSPE: capm {}, gsynth {}, ties {}\n", c.wins_capm, c.wins_gsynth, c.ties);
  return 0;
}

int cmd_simulate(Options o) {
  if (o.output.empty()) throw evstudy::InputError("--output is required");
  evstudy::StudyConfig sc;
  sc.cell = o.dgp;
  sc.cell.seed = o.seed;
  sc.years = o.sim_years;
  sc.industries = o.sim_industries;
  if (o.effect != 0.0) {
    const int from = o.effect_from > 0 ? o.effect_from
                                       : sc.cell.t_treatment - evstudy::kDaysAfterEffective;
    if (from < 1 || from > sc.cell.t_treatment)
      throw evstudy::InputError("--effect-from must lie within the treatment span");
    sc.cell.att_profile.assign(std::size_t(std::max(sc.cell.t_treatment, 0)), 0.0);
    for (int d = from; d <= sc.cell.t_treatment; ++d)
      sc.cell.att_profile[std::size_t(d - 1)] = o.effect;
  }
  const auto study = evstudy::generate_study(sc);
  const std::filesystem::path dir(o.output);
  evstudy::write_study_csv(study, dir);

  std::vector<std::string> dates;
  for (const auto& d : study.event_dates)
    dates.push_back(fmt::format("\"{}:{}:{}\"", d.year, evstudy::format_iso_date(d.announcement),
                                evstudy::format_iso_date(d.effective)));
  const std::string config = fmt::format(
      "# evstudy run configuration for the simulated data in this directory\n"
      "returns = \"{0}\"\nfundamentals = \"{1}\"\nmembership = \"{2}\"\noutput = \"{3}\"\n"
      "event-dates = [{4}]\nseed = {5}\n",
      (dir / "returns.csv").string(), (dir / "fundamentals.csv").string(),
      (dir / "membership.csv").string(), (dir / "results").string(), fmt::join(dates, ", "),
      o.seed);
  std::FILE* f = std::fopen((dir / "run.toml").string().c_str(), "wb");
  if (!f) throw evstudy::InputError("cannot write run.toml");
  std::fputs(config.c_str(), f);
  std::fclose(f);
  fmt::print("wrote {} cells to {}\n", study.cells.size(), o.output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Index-membership event study with market-model and synthetic-control estimators"};
  app.set_config("--config", "", "TOML or INI file with option values; flags override it");
  app.require_subcommand(1);
  Options o;

  app.add_option("--returns", o.returns, "returns CSV (date,firm_id,ret,mkt)");
  app.add_option("--fundamentals", o.fundamentals, "fundamentals CSV");
  app.add_option("--membership", o.membership, "membership events CSV");
  app.add_option("--output,-o", o.output, "output directory");
  app.add_option("--year-first", o.year_first, "first event year to estimate");
  app.add_option("--year-last", o.year_last, "last event year to estimate");
  app.add_option("--estimators", o.estimators, "capm and/or gsynth")->delimiter(',');
  app.add_option("--directions", o.directions, "join and/or delist")->delimiter(',');
  app.add_option("--variants", o.variants, "full and/or base")->delimiter(',');
  app.add_option("--event-dates", o.event_dates, "YEAR:ANNOUNCEMENT:EFFECTIVE, one per year")
      ->delimiter(',');
  app.add_option("--r-candidates", o.r_candidates, "factor counts tried by cross-validation")
      ->delimiter(',');
  app.add_option("--b1", o.b1, "placebo replications (0 = min(controls, 100))");
  app.add_option("--b2", o.b2, "bootstrap replications");
  app.add_option("--confidence", o.confidence, "interval confidence level");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--max-retries", o.max_retries, "redraws per failed bootstrap replication");
  app.add_flag("--demean", o.demean, "remove two-way additive effects before factor extraction");
  app.add_option("--grid-from", o.grid_from, "CAR grid start days")->delimiter(',');
  app.add_option("--grid-to", o.grid_to, "CAR grid end days")->delimiter(',');
  app.add_flag("--plots", o.plots, "write SVG gap plots");
  app.add_option("--threads", o.threads, "worker threads (0 = all cores)");
  app.add_option("--report", o.report, "existing run_report.csv (mspe-contest)");

  app.add_option("--n-control", o.dgp.n_control, "simulate: control firms per cell");
  app.add_option("--n-treated", o.dgp.n_treated, "simulate: treated firms per cell");
  app.add_option("--t-control", o.dgp.t_control, "simulate: control-span days");
  app.add_option("--t-treatment", o.dgp.t_treatment, "simulate: treatment-span days");
  app.add_option("--r-true", o.dgp.r_true, "simulate: latent factors");
  app.add_option("--factor-scale", o.dgp.factor_scale, "simulate: factor standard deviation");
  app.add_option("--loading-scale", o.dgp.loading_scale, "simulate: loading standard deviation");
  app.add_option("--noise-sd", o.dgp.noise_sd, "simulate: idiosyncratic noise standard deviation");
  app.add_option("--effect", o.effect, "simulate: constant effect on treated firms");
  app.add_option("--effect-from", o.effect_from, "simulate: first treatment day of the effect");
  app.add_option("--years", o.sim_years, "simulate: event years")->delimiter(',');
  app.add_option("--industries", o.sim_industries, "simulate: industry codes")->delimiter(',');

  auto* run = app.add_subcommand("run", "estimate every industry-year and write the tables");
  auto* sim = app.add_subcommand("simulate", "write synthetic input CSVs and a run config");
  auto* contest = app.add_subcommand("mspe-contest", "re-summarize the fit comparison of a report");
  auto* validate = app.add_subcommand("validate", "parse the inputs without estimating");
  for (auto* s : {run, sim, contest, validate}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*run) return cmd_run(o);
    if (*sim) return cmd_simulate(o);
    if (*contest) return cmd_contest(o);
    if (*validate) return cmd_validate(o);
  } catch (const evstudy::EstimationError& e) {
    fmt::print(stderr, "estimation error: {}\n", e.what());
    return kExitEstimation;
  } catch (const evstudy::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  }
  return 0;
}
