#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "report.hpp"

namespace evstudy::detail {

namespace {

constexpr double kWidth = 800;
constexpr double kHeight = 420;
constexpr double kLeft = 60;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 50;

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string gap_plot_svg(std::string_view title, const Eigen::MatrixXd& gaps,
                         Eigen::Index t_control, int ann_offset, int eff_offset,
                         const std::vector<std::string>& firms) {
  const Eigen::Index n = gaps.rows();
  const double day_lo = double(1 - t_control);
  const double day_hi = double(n - t_control);
  double lo = n > 0 ? gaps.minCoeff() : -1.0;
  double hi = n > 0 ? gaps.maxCoeff() : 1.0;
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double day) { return kLeft + (day - day_lo) / std::max(day_hi - day_lo, 1.0) * pw; };
  auto py = [&](double v) { return kTop + (hi - v) / (hi - lo) * ph; };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">{3}</text>\n",
      kWidth, kHeight, kLeft, escape(title));

  s += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
      "stroke=\"#444\"/>\n",
      kLeft, kTop, pw, ph);
  s += fmt::format(
      "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#999\" "
      "stroke-dasharray=\"2,3\"/>\n",
      kLeft, py(0.0), kLeft + pw, py(0.0));
  const std::array<std::pair<int, const char*>, 3> markers{
      {{1, "day 1"}, {ann_offset, "announcement"}, {eff_offset, "effective"}}};
  for (const auto& [day, label] : markers) {
    const double x = px(double(day));
    s += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#555\" "
        "stroke-dasharray=\"4,3\"/>\n"
        "<text x=\"{0:.2f}\" y=\"{3:.2f}\" font-family=\"sans-serif\" font-size=\"10\" "
        "text-anchor=\"middle\">{4}</text>\n",
        x, kTop, kTop + ph, kTop + ph + 14, label);
  }
  s += fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n"
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n"
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
      "text-anchor=\"middle\">trading day</text>\n",
      4.0, py(hi) + 4, fixed6(hi), 4.0, py(lo), fixed6(lo), kLeft + pw / 2, kHeight - 12);

  for (Eigen::Index j = 0; j < gaps.cols(); ++j) {
    const char* colour = kPalette[std::size_t(j) % kPalette.size()];
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"", colour);
    for (Eigen::Index t = 0; t < n; ++t)
      s += fmt::format("{}{:.2f},{:.2f}", t ? " " : "", px(double(t - t_control + 1)),
                       py(gaps(t, j)));
    s += "\"/>\n";
    const std::string name = std::size_t(j) < firms.size() ? firms[std::size_t(j)] : "";
    s += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "fill=\"{}\">{}</text>\n",
        kLeft + pw + 10, kTop + 14 + 14 * double(j), colour, escape(name));
  }
  s += "</svg>\n";
  return s;
}

}  // namespace evstudy::detail
