#include "report.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "evstudy/error.hpp"

namespace evstudy::detail {

std::string fixed6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::string s = fmt::format("{:.6f}", v);
  if (s == "-0.000000") s.erase(0, 1);
  return s;
}

std::string fixed6(const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); }

std::string csv_safe(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
  out << content;
  if (!out) throw InputError(fmt::format("write failed for {}", path.string()));
}

namespace {

void append_test(std::string& s, const std::optional<TestResult>& t) {
  if (t)
    s += fmt::format("{},{},{},{}", fixed6(t->t_stat), fixed6(t->df), fixed6(t->p_value),
                     star_marks(stars_for(t->p_value)));
  else
    s += ",,,";
}

}  // namespace

std::string grid_csv(const CarGrid& grid) {
  std::string s = "from,to,mean_car,estimate,t_stat,df,p_value,stars,n_treated,n_comparison,note\n";
  for (const auto& c : grid.cells) {
    s += fmt::format("{},{},{},", c.from, c.to, fixed6(c.mean_car));
    s += c.test ? fixed6(c.test->estimate) : std::string();
    s += ',';
    append_test(s, c.test);
    s += fmt::format(",{},{},{}\n", c.test ? std::to_string(c.test->n_a) : std::string(),
                     c.test && !grid.one_sample ? std::to_string(c.test->n_b) : std::string(),
                     csv_safe(c.note));
  }
  return s;
}

std::string att_csv(const AttSeries& a) {
  std::string s = "day,att,se,ci_low,ci_high,pct_low,pct_high\n";
  for (Eigen::Index t = 0; t < a.att.size(); ++t) {
    s += fmt::format("{},{}", a.first_day + int(t), fixed6(a.att(t)));
    if (a.has_intervals)
      s += fmt::format(",{},{},{},{},{}\n", fixed6(a.se(t)), fixed6(a.ci_low(t)),
                       fixed6(a.ci_high(t)), fixed6(a.pct_low(t)), fixed6(a.pct_high(t)));
    else
      s += ",,,,,\n";
  }
  return s;
}

std::string gaps_csv(const Eigen::MatrixXd& gaps, Eigen::Index t_control,
                     const std::vector<std::string>& firms) {
  std::string s = "day";
  for (const auto& f : firms) s += "," + csv_safe(f);
  s += '\n';
  for (Eigen::Index t = 0; t < gaps.rows(); ++t) {
    s += std::to_string(t - t_control + 1);
    for (Eigen::Index j = 0; j < gaps.cols(); ++j) s += "," + fixed6(gaps(t, j));
    s += '\n';
  }
  return s;
}

std::string year_comparison_csv(const YearComparison& cmp) {
  std::string s = "block,year_a,year_b,estimate,t_stat,df,p_value,stars,n_cells,note\n";
  for (const auto& p : cmp.pairs) {
    s += fmt::format("{},{},{},{},", cmp.block, p.year_a, p.year_b, fixed6(p.estimate));
    append_test(s, p.test);
    s += fmt::format(",{},{}\n", p.test ? std::to_string(p.test->n_a) : std::string(),
                     csv_safe(p.note));
  }
  return s;
}

std::string regression_csv(const std::vector<RegressionBlock>& blocks) {
  std::string s = "window,from,to,term,coef,se,t_stat,p_value,stars,n,r2,adj_r2,note\n";
  for (const auto& b : blocks) {
    if (!b.result) {
      s += fmt::format("{},{},{},,,,,,,,,,{}\n", b.window, b.from, b.to, csv_safe(b.note));
      continue;
    }
    const auto& r = *b.result;
    for (std::size_t k = 0; k < r.names.size(); ++k) {
      const auto i = Eigen::Index(k);
      s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},\n", b.window, b.from, b.to,
                       csv_safe(r.names[k]), fixed6(r.coef(i)), fixed6(r.se(i)),
                       fixed6(r.t_stat(i)), fixed6(r.p_value(i)),
                       star_marks(stars_for(r.p_value(i))), r.n, fixed6(r.r2), fixed6(r.adj_r2));
    }
  }
  return s;
}

std::string daily_csv(const std::vector<DailyRow>& rows) {
  std::string s = "day,mean_treated,mean_control,estimate,t_stat,df,p_value,stars\n";
  for (const auto& r : rows) {
    s += fmt::format("{},{},{},{},", r.day, fixed6(r.mean_treated), fixed6(r.mean_control),
                     r.test ? fixed6(r.test->estimate) : std::string());
    append_test(s, r.test);
    s += '\n';
  }
  return s;
}

}  // namespace evstudy::detail
