#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "backlab/errors.hpp"

namespace backlab {

// Minimal hand-rolled SVG plots: enough for training curves, schedule traces,
// re-injection series, and metric bars, with no drawing dependency.

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 400;
  // NaN bounds mean "fit to data".
  double y_min = std::numeric_limits<double>::quiet_NaN();
  double y_max = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline const char* plot_color(size_t i) {
  static const char* palette[] = {"#1f6f8b", "#c0392b", "#27ae60", "#8e44ad",
                                  "#d35400", "#2c3e50", "#16a085", "#7f8c8d"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Tick step of the form {1,2,5}*10^k giving 4-8 intervals.
inline double nice_step(double range) {
  if (range <= 0.0 || !std::isfinite(range)) return 1.0;
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  if (r < 1.5) return mag;
  if (r < 3.5) return 2.0 * mag;
  if (r < 7.5) return 5.0 * mag;
  return 10.0 * mag;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

inline std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotOptions& opt) {
  require(!series.empty(), ErrKind::config, "plot needs at least one series");
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = std::numeric_limits<double>::infinity(), y_max = -y_min;
  for (const PlotSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  require(std::isfinite(x_min) && std::isfinite(y_min), ErrKind::config,
          "plot has no finite points");
  if (!std::isnan(opt.y_min)) y_min = opt.y_min;
  if (!std::isnan(opt.y_max)) y_max = opt.y_max;
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;

  const double ml = 62, mr = 16, mt = 34, mb = 46;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  const auto X = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
  const auto Y = [&](double y) { return mt + ph - (y - y_min) / (y_max - y_min) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << opt.width << ' '
      << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << opt.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::xml_escape(opt.title) << "</text>\n";

  // Gridlines and ticks.
  const double ys = detail::nice_step(y_max - y_min);
  for (double v = std::ceil(y_min / ys) * ys; v <= y_max + 1e-12; v += ys) {
    svg << "<line x1=\"" << ml << "\" y1=\"" << Y(v) << "\" x2=\"" << ml + pw << "\" y2=\""
        << Y(v) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << Y(v) + 4
        << "\" text-anchor=\"end\">" << detail::fmt_tick(v) << "</text>\n";
  }
  const double xs = detail::nice_step(x_max - x_min);
  for (double v = std::ceil(x_min / xs) * xs; v <= x_max + 1e-12; v += xs) {
    svg << "<line x1=\"" << X(v) << "\" y1=\"" << mt << "\" x2=\"" << X(v) << "\" y2=\""
        << mt + ph << "\" stroke=\"#eeeeee\"/>\n";
    svg << "<text x=\"" << X(v) << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\">" << detail::fmt_tick(v) << "</text>\n";
  }
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 8
      << "\" text-anchor=\"middle\">" << detail::xml_escape(opt.x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << mt + ph / 2 << ")\">" << detail::xml_escape(opt.y_label) << "</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const char* color = detail::plot_color(i);
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (const auto& [x, y] : series[i].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      svg << X(x) << ',' << Y(y) << ' ';
    }
    svg << "\"/>\n";
    const double lx = ml + 10, lyy = mt + 14 + 16 * static_cast<double>(i);
    svg << "<line x1=\"" << lx << "\" y1=\"" << lyy - 4 << "\" x2=\"" << lx + 18 << "\" y2=\""
        << lyy - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << lx + 24 << "\" y=\"" << lyy << "\">"
        << detail::xml_escape(series[i].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline std::string svg_bar_chart(const std::vector<std::string>& labels,
                                 const std::vector<double>& values, const PlotOptions& opt) {
  require(!labels.empty() && labels.size() == values.size(), ErrKind::config,
          "bar chart needs matching labels and values");
  double y_max = std::isnan(opt.y_max) ? 0.0 : opt.y_max;
  if (std::isnan(opt.y_max)) {
    for (double v : values) y_max = std::max(y_max, v);
    if (y_max <= 0.0) y_max = 1.0;
  }
  const double y_min = std::isnan(opt.y_min) ? 0.0 : opt.y_min;

  const double ml = 62, mr = 16, mt = 34, mb = 64;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
  const double slot = pw / static_cast<double>(labels.size());

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << opt.width << ' '
      << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << opt.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::xml_escape(opt.title) << "</text>\n";
  const double ys = detail::nice_step(y_max - y_min);
  for (double v = std::ceil(y_min / ys) * ys; v <= y_max + 1e-12; v += ys) {
    const double yy = mt + ph - (v - y_min) / (y_max - y_min) * ph;
    svg << "<line x1=\"" << ml << "\" y1=\"" << yy << "\" x2=\"" << ml + pw << "\" y2=\"" << yy
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\">"
        << detail::fmt_tick(v) << "</text>\n";
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    const double frac = std::clamp((values[i] - y_min) / (y_max - y_min), 0.0, 1.0);
    const double bh = frac * ph;
    const double bx = ml + slot * static_cast<double>(i) + slot * 0.2;
    svg << "<rect x=\"" << bx << "\" y=\"" << mt + ph - bh << "\" width=\"" << slot * 0.6
        << "\" height=\"" << bh << "\" fill=\"" << detail::plot_color(i) << "\"/>\n";
    svg << "<text x=\"" << bx + slot * 0.3 << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\">" << detail::xml_escape(labels[i]) << "</text>\n";
    svg << "<text x=\"" << bx + slot * 0.3 << "\" y=\"" << mt + ph - bh - 4
        << "\" text-anchor=\"middle\">" << detail::fmt_tick(values[i]) << "</text>\n";
  }
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 8
      << "\" text-anchor=\"middle\">" << detail::xml_escape(opt.x_label) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrKind::io, "cannot open '" + path + "' for writing");
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  require(f.good(), ErrKind::io, "short write to '" + path + "'");
}

}  // namespace backlab
