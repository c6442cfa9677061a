#include <doctest.h>

#include <filesystem>

#include "evstudy/error.hpp"
#include "evstudy/ingest.hpp"
#include "evstudy/simulate.hpp"

using namespace evstudy;
using Eigen::MatrixXd;

TEST_CASE("panels are deterministic in the seed") {
  DgpConfig c;
  c.seed = 17;
  const auto a = generate_panel(c);
  const auto b = generate_panel(c);
  CHECK(a.panel.stacked() == b.panel.stacked());
  CHECK(a.panel.firms() == b.panel.firms());
  c.seed = 18;
  CHECK(generate_panel(c).panel.stacked() != a.panel.stacked());
}

TEST_CASE("panel shape, window and treatment layout") {
  DgpConfig c;
  c.n_control = 7;
  c.n_treated = 2;
  c.t_control = 60;
  c.t_treatment = 40;
  const auto s = generate_panel(c);
  const auto& p = s.panel;
  CHECK(p.n_firms() == 9);
  CHECK(p.control().rows() == 60);
  CHECK(p.treatment().rows() == 40);
  CHECK(p.window().t0() == 40);
  CHECK(p.window().ann_offset() == 16);
  CHECK(p.window().eff_offset() == 25);
  CHECK(p.window().t_start() == 0u);
  CHECK(s.calendar[p.window().calendar_index(16)] == s.announcement);
  CHECK(s.calendar[p.window().calendar_index(25)] == s.effective);
  CHECK(p.control_columns().size() == 7);
  CHECK(p.treated_columns() == std::vector<std::size_t>{7, 8});
  CHECK(s.factors.cols() == 2);
  CHECK(s.loadings.rows() == 9);
  CHECK(p.market() == s.factors.col(0));
}

TEST_CASE("returns decompose into factors, noise and the effect") {
  DgpConfig c;
  c.att_profile.assign(36, 0.0);
  for (int d = 20; d <= 36; ++d) c.att_profile[std::size_t(d - 1)] = 0.25 * d;
  const auto s = generate_panel(c);
  MatrixXd expected = s.factors * s.loadings.transpose() + s.noise;
  for (auto j : s.panel.treated_columns())
    for (int t = 0; t < 36; ++t) expected(c.t_control + t, Eigen::Index(j)) += s.att_profile[std::size_t(t)];
  CHECK((s.panel.stacked() - expected).norm() < 1e-12);
  CHECK(s.noiseless == s.factors * s.loadings.transpose());

  DgpConfig quiet = c;
  quiet.noise_sd = 0.0;
  CHECK(generate_panel(quiet).noise.norm() == 0.0);
}

TEST_CASE("pure noise panel") {
  DgpConfig c;
  c.r_true = 0;
  const auto s = generate_panel(c);
  CHECK(s.factors.cols() == 0);
  CHECK(s.noiseless.norm() == 0.0);
  CHECK(s.panel.market().size() == c.t_control + c.t_treatment);
}

TEST_CASE("invalid configurations") {
  auto bad = [](auto mutate) {
    DgpConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(generate_panel(bad([](DgpConfig& c) { c.n_control = 0; })), InputError);
  CHECK_THROWS_AS(generate_panel(bad([](DgpConfig& c) { c.t_treatment = 20; })), InputError);
  CHECK_THROWS_AS(generate_panel(bad([](DgpConfig& c) { c.r_true = -1; })), InputError);
  CHECK_THROWS_AS(generate_panel(bad([](DgpConfig& c) { c.noise_sd = -1; })), InputError);
  CHECK_THROWS_AS(generate_panel(bad([](DgpConfig& c) { c.att_profile = {1.0}; })), InputError);
  CHECK_THROWS_AS(
      generate_panel(bad([](DgpConfig& c) { c.direction = TreatmentStatus::Control; })),
      InputError);
}

TEST_CASE("study cells share the market within a year") {
  StudyConfig sc;
  sc.cell.n_control = 6;
  sc.cell.n_treated = 2;
  sc.cell.t_control = 30;
  sc.years = {2012, 2013};
  sc.industries = {21, 44};
  const auto study = generate_study(sc);
  REQUIRE(study.cells.size() == 4);
  CHECK(study.cells[0].panel.market() == study.cells[1].panel.market());
  CHECK(study.cells[0].panel.market() != study.cells[2].panel.market());
  CHECK(study.cells[0].panel.stacked() != study.cells[1].panel.stacked());
  CHECK(study.events.size() == 8);
  CHECK(study.fundamentals.size() == 32);
  REQUIRE(study.event_dates.size() == 2);
  CHECK(study.event_dates[1].year == 2013);
  CHECK_THROWS_AS(generate_study(StudyConfig{}), InputError);
}

TEST_CASE("written CSVs parse back to the same study") {
  StudyConfig sc;
  sc.cell.n_control = 5;
  sc.cell.n_treated = 2;
  sc.cell.t_control = 25;
  sc.years = {2013};
  sc.industries = {21, 31};
  const auto study = generate_study(sc);
  const auto dir = std::filesystem::temp_directory_path() / "evstudy_test_simulate";
  std::filesystem::remove_all(dir);
  write_study_csv(study, dir);

  const ReturnsData ret = load_returns(dir / "returns.csv");
  CHECK(ret.firms.size() == 14);
  CHECK(ret.calendar.size() == 61);
  for (const auto& cell : study.cells) {
    const auto& p = cell.panel;
    const MatrixXd all = p.stacked();
    for (std::size_t j = 0; j < p.n_firms(); ++j) {
      const FirmSeries* s = ret.find(p.firms()[j]);
      REQUIRE(s != nullptr);
      for (Eigen::Index t = 0; t < all.rows(); ++t)
        CHECK(s->at(std::size_t(t)) == all(t, Eigen::Index(j)));
    }
    for (Eigen::Index t = 0; t < all.rows(); ++t)
      CHECK(ret.market.at(std::size_t(t)) == p.market()(t));
  }

  const auto fund = load_fundamentals(dir / "fundamentals.csv");
  REQUIRE(fund.size() == study.fundamentals.size());
  for (std::size_t i = 0; i < fund.size(); ++i) {
    CHECK(fund[i].assets == study.fundamentals[i].assets);
    CHECK(fund[i].industry == study.fundamentals[i].industry);
  }
  const auto events = load_membership(dir / "membership.csv");
  REQUIRE(events.size() == study.events.size());
  CHECK(events[0].firm_id == study.events[0].firm_id);
  CHECK(events[0].action == TreatmentStatus::Join);
  std::filesystem::remove_all(dir);
}
