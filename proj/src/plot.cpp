#include "muplab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace muplab {

std::vector<PlotSeries> select_series(const std::vector<MetricRow>& rows,
                                      const PlotSpec& spec) {
  std::optional<std::size_t> step = spec.step;
  if (!step) {
    for (const auto& r : rows)
      if (r.metric == spec.metric && r.layer == spec.layer && r.kind == spec.kind)
        step = std::max(step.value_or(0), r.step);
  }
  // scheme -> width -> values
  std::map<std::string, std::map<std::size_t, std::vector<double>>> groups;
  for (const auto& r : rows) {
    if (r.metric != spec.metric || r.layer != spec.layer || r.kind != spec.kind) continue;
    if (!step || r.step != *step || !std::isfinite(r.value)) continue;
    if (spec.log_y && !(r.value > 0.0)) continue;
    groups[r.scheme][r.width].push_back(r.value);
  }
  if (groups.empty())
    throw EmptySelection("no rows match metric '" + spec.metric + "', layer " +
                         std::to_string(spec.layer) + ", kind '" + spec.kind + "'");
  std::vector<PlotSeries> out;
  for (const auto& [scheme, by_width] : groups) {
    PlotSeries s;
    s.scheme = scheme;
    for (const auto& [width, values] : by_width) {
      double sum = 0.0;
      for (double v : values) sum += v;
      s.widths.push_back(static_cast<double>(width));
      s.mean.push_back(sum / static_cast<double>(values.size()));
      s.lo.push_back(*std::min_element(values.begin(), values.end()));
      s.hi.push_back(*std::max_element(values.begin(), values.end()));
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 80, kRight = 150, kTop = 40, kBottom = 60;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      const double d = std::max(0.5, 0.1 * std::abs(hi));
      lo -= d;
      hi += d;
    } else {
      const double d = 0.05 * (hi - lo);
      lo -= d;
      hi += d;
    }
  }
};

}  // namespace

std::string render_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
  if (series.empty()) throw EmptySelection("nothing to plot");
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  Range xr, yr;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.widths.size(); ++k) {
      xr.add(std::log2(s.widths[k]));
      yr.add(ty(s.lo[k]));
      yr.add(ty(s.hi[k]));
    }
  xr.pad();
  yr.pad();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double w) { return kLeft + (std::log2(w) - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double v) { return kTop + (1.0 - (ty(v) - yr.lo) / (yr.hi - yr.lo)) * ph; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  const std::string title =
      spec.title.empty() ? spec.metric + " (layer " + std::to_string(spec.layer) + ", " +
                               spec.kind + ")"
                         : spec.title;
  svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << escape(title) << "</text>\n";

  // Axes and ticks.
  svg << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
      << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\""
      << num(kLeft + pw) << "\" y2=\"" << num(kTop + ph) << "\"/>\n"
      << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\""
      << num(kLeft) << "\" y2=\"" << num(kTop + ph) << "\"/>\n</g>\n";
  svg << "<g class=\"ticks\" fill=\"black\">\n";
  for (int e = static_cast<int>(std::ceil(xr.lo)); e <= static_cast<int>(std::floor(xr.hi)); ++e) {
    const double x = kLeft + (e - xr.lo) / (xr.hi - xr.lo) * pw;
    svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(x)
        << "\" y2=\"" << num(kTop + ph + 5) << "\" stroke=\"black\"/>"
        << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + ph + 18)
        << "\" text-anchor=\"middle\">" << label(std::ldexp(1.0, e)) << "</text>\n";
  }
  for (int k = 0; k <= 5; ++k) {
    const double v = yr.lo + (yr.hi - yr.lo) * k / 5.0;
    const double y = kTop + (1.0 - k / 5.0) * ph;
    svg << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(kLeft) << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>"
        << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\">" << label(spec.log_y ? std::pow(10.0, v) : v)
        << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 15)
      << "\" text-anchor=\"middle\">width (log2)</text>\n"
      << "<text x=\"18\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 18 " << num(kTop + ph / 2) << ")\">"
      << escape(spec.metric) << (spec.log_y ? " (log10)" : "") << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kColors[si % (sizeof kColors / sizeof kColors[0])];
    svg << "<g class=\"series\" data-scheme=\"" << escape(s.scheme) << "\">\n";
    if (s.widths.size() > 1) {
      svg << "<polygon class=\"band\" fill=\"" << color
          << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t k = 0; k < s.widths.size(); ++k)
        svg << num(px(s.widths[k])) << ',' << num(py(s.hi[k])) << ' ';
      for (std::size_t k = s.widths.size(); k-- > 0;)
        svg << num(px(s.widths[k])) << ',' << num(py(s.lo[k])) << ' ';
      svg << "\"/>\n<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < s.widths.size(); ++k)
        svg << (k ? " " : "") << num(px(s.widths[k])) << ',' << num(py(s.mean[k]));
      svg << "\"/>\n";
    }
    for (std::size_t k = 0; k < s.widths.size(); ++k)
      svg << "<circle class=\"marker\" cx=\"" << num(px(s.widths[k])) << "\" cy=\""
          << num(py(s.mean[k])) << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    svg << "</g>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(si);
    svg << "<g class=\"legend\"><line x1=\"" << num(kLeft + pw + 15) << "\" y1=\""
        << num(ly) << "\" x2=\"" << num(kLeft + pw + 40) << "\" y2=\"" << num(ly)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\""
        << num(kLeft + pw + 46) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.scheme)
        << "</text></g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const std::filesystem::path& csv, const PlotSpec& spec,
               const std::filesystem::path& svg) {
  const auto series = select_series(read_csv(csv), spec);
  const std::string text = render_svg(series, spec);
  if (svg.has_parent_path()) std::filesystem::create_directories(svg.parent_path());
  std::ofstream out(svg, std::ios::binary);
  if (!out) throw Error("cannot write '" + svg.string() + "'");
  out << text;
}

}  // namespace muplab
