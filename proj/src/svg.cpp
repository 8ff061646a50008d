#include "sstempo/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "sstempo/errors.hpp"

namespace sstempo::svg {
namespace {

constexpr double kPanelW = 260.0;
constexpr double kPanelH = 200.0;
constexpr double kMarginL = 70.0;
constexpr double kMarginT = 40.0;
constexpr double kGap = 30.0;
constexpr double kRowLabelW = 30.0;

std::string escape(const std::string& s) {
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

AxisRange shared_range(const std::vector<Panel>& panels, bool x_axis) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& p : panels) {
    for (double v : x_axis ? p.series.x : p.series.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) return {};
  if (hi == lo) {
    const double pad = lo == 0.0 ? 0.5 : std::abs(lo) * 0.05;
    return {lo - pad, hi + pad};
  }
  return {lo, hi};
}

std::string render_grid(const std::vector<Panel>& panels, const GridLayout& layout) {
  const int rows = std::max<int>(1, static_cast<int>(layout.row_labels.size()));
  const int cols = std::max<int>(1, static_cast<int>(layout.col_labels.size()));
  const AxisRange xr = shared_range(panels, true);
  const AxisRange yr = shared_range(panels, false);
  const bool log_x = layout.log_x && xr.lo > 0.0;
  auto xmap = [&](double v) {
    const double f = log_x ? std::log(v / xr.lo) / std::log(xr.hi / xr.lo) : (v - xr.lo) / (xr.hi - xr.lo);
    return f * kPanelW;
  };
  auto ymap = [&](double v) { return kPanelH - (v - yr.lo) / (yr.hi - yr.lo) * kPanelH; };

  const double width = kRowLabelW + kMarginL + cols * (kPanelW + kGap) + 10.0;
  const double height = kMarginT + rows * (kPanelH + kGap + 20.0) + 30.0;
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width, height);
  out += fmt::format("<!-- shared x range [{:.6g}, {:.6g}] shared y range [{:.6g}, {:.6g}] -->\n", xr.lo, xr.hi,
                     yr.lo, yr.hi);

  for (int c = 0; c < cols && c < static_cast<int>(layout.col_labels.size()); ++c) {
    const double x = kRowLabelW + kMarginL + c * (kPanelW + kGap) + kPanelW / 2;
    out += fmt::format("<text x=\"{:.1f}\" y=\"20\" text-anchor=\"middle\" font-weight=\"bold\">{}</text>\n", x,
                       escape(layout.col_labels[static_cast<std::size_t>(c)]));
  }
  for (int r = 0; r < rows && r < static_cast<int>(layout.row_labels.size()); ++r) {
    const double y = kMarginT + r * (kPanelH + kGap + 20.0) + kPanelH / 2;
    out += fmt::format(
        "<text x=\"14\" y=\"{:.1f}\" text-anchor=\"middle\" font-weight=\"bold\" "
        "transform=\"rotate(-90 14 {:.1f})\">{}</text>\n",
        y, y, escape(layout.row_labels[static_cast<std::size_t>(r)]));
  }

  for (const auto& panel : panels) {
    const double ox = kRowLabelW + kMarginL + panel.col * (kPanelW + kGap);
    const double oy = kMarginT + panel.row * (kPanelH + kGap + 20.0);
    out += fmt::format("<g class=\"panel\" transform=\"translate({:.1f},{:.1f})\">\n", ox, oy);
    out += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"none\" stroke=\"#444\"/>\n", kPanelW,
                       kPanelH);
    out += fmt::format("<text x=\"{:.1f}\" y=\"-4\" text-anchor=\"middle\" fill=\"#333\">{}</text>\n", kPanelW / 2,
                       escape(panel.title));
    out += fmt::format("<text x=\"0\" y=\"{:.1f}\" text-anchor=\"start\">{:.4g}</text>\n", kPanelH + 14, xr.lo);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", kPanelW, kPanelH + 14,
                       xr.hi);
    out += fmt::format("<text x=\"-4\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", kPanelH, yr.lo);
    out += fmt::format("<text x=\"-4\" y=\"10\" text-anchor=\"end\">{:.3g}</text>\n", yr.hi);

    const auto& s = panel.series;
    std::string path;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const double px = xmap(s.x[i]);
      const double py = ymap(s.y[i]);
      path += fmt::format("{}{:.2f},{:.2f} ", path.empty() ? "M" : "L", px, py);
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"#1f77b4\"/>\n", px, py);
    }
    if (!path.empty()) {
      out += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\"/>\n", path);
    }
    out += "</g>\n";
  }

  out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}{}</text>\n", width / 2, height - 8,
                     escape(layout.x_label), log_x ? " (log scale)" : "");
  out += fmt::format(
      "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 {:.1f} {:.1f})\">{}</text>\n",
      kRowLabelW + 20.0, height / 2, kRowLabelW + 20.0, height / 2, escape(layout.y_label));
  out += "</svg>\n";
  return out;
}

void write_grid(const std::filesystem::path& path, const std::vector<Panel>& panels, const GridLayout& layout) {
  std::ofstream os(path);
  if (!os) throw_io_error("cannot write SVG", path.string());
  os << render_grid(panels, layout);
}

}  // namespace sstempo::svg
