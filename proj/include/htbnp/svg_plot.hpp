#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "htbnp/io.hpp"

namespace htbnp {

enum class PlotKind { line, band, scatter };

inline PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "line") return PlotKind::line;
  if (s == "band") return PlotKind::band;
  if (s == "scatter") return PlotKind::scatter;
  throw std::invalid_argument("plot kind must be line, band or scatter");
}

namespace detail {

struct Viewport {
  double x_lo, x_hi, y_lo, y_hi;
  static constexpr double kW = 720.0, kH = 480.0, kPad = 48.0;

  double px(double x) const {
    return kPad + (x - x_lo) / (x_hi - x_lo) * (kW - 2.0 * kPad);
  }
  double py(double y) const {
    return kH - kPad - (y - y_lo) / (y_hi - y_lo) * (kH - 2.0 * kPad);
  }
};

inline std::string path_from(const std::vector<double>& xs, const std::vector<double>& ys,
                             const Viewport& vp) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i)
    os << (i == 0 ? "M" : "L") << format_double(vp.px(xs[i])) << ' '
       << format_double(vp.py(ys[i])) << ' ';
  return os.str();
}

}  // namespace detail

/// Render a CSV table to a self-contained SVG. "line" draws every numeric
/// column against the first; "band" expects columns (x, mean, lo, hi) and
/// draws the envelope plus the mean; "scatter" expects (x, y). Plotting never
/// touches numeric artifacts; a schema mismatch names the missing column and
/// writes nothing.
inline void emit_plot(const std::filesystem::path& table_path, PlotKind kind,
                      const std::filesystem::path& out_path) {
  const CsvTable table = read_csv(table_path);
  if (table.rows.empty()) throw std::runtime_error("emit_plot: empty table " + table_path.string());

  std::vector<std::string> needed;
  switch (kind) {
    case PlotKind::band:
      needed = {table.columns.size() > 0 ? table.columns[0] : "x", "mean", "lo", "hi"};
      break;
    case PlotKind::scatter:
    case PlotKind::line:
      if (table.columns.size() < 2) throw std::runtime_error("emit_plot: missing column 'y'");
      needed = {table.columns[0], table.columns[1]};
      break;
  }
  for (const auto& col : needed)
    if (table.column_index(col) < 0)
      throw std::runtime_error("emit_plot: missing column '" + col + "'");

  const auto xs = table.numeric_column(table.columns[0]);
  std::vector<std::vector<double>> series;
  std::vector<std::string> labels;
  if (kind == PlotKind::band) {
    series = {table.numeric_column("mean"), table.numeric_column("lo"),
              table.numeric_column("hi")};
    labels = {"mean", "lo", "hi"};
    for (std::size_t c = 1; c < table.columns.size(); ++c) {
      const auto& name = table.columns[c];
      if (name != "mean" && name != "lo" && name != "hi") {
        series.push_back(table.numeric_column(name));
        labels.push_back(name);
      }
    }
  } else {
    for (std::size_t c = 1; c < table.columns.size(); ++c) {
      series.push_back(table.numeric_column(table.columns[c]));
      labels.push_back(table.columns[c]);
      if (kind == PlotKind::scatter) break;
    }
  }

  detail::Viewport vp{xs.front(), xs.front(), 0.0, 0.0};
  vp.x_lo = *std::min_element(xs.begin(), xs.end());
  vp.x_hi = *std::max_element(xs.begin(), xs.end());
  bool first = true;
  for (const auto& s : series)
    for (double v : s) {
      if (!std::isfinite(v)) continue;
      if (first) {
        vp.y_lo = vp.y_hi = v;
        first = false;
      }
      vp.y_lo = std::min(vp.y_lo, v);
      vp.y_hi = std::max(vp.y_hi, v);
    }
  if (vp.x_hi == vp.x_lo) vp.x_hi = vp.x_lo + 1.0;
  if (vp.y_hi == vp.y_lo) vp.y_hi = vp.y_lo + 1.0;

  static const char* kColors[] = {"#1f77b4", "#888888", "#888888", "#000000",
                                  "#d62728", "#2ca02c", "#9467bd"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
         "viewBox=\"0 0 720 480\">\n";
  svg << "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  // axes
  svg << "<path d=\"M" << detail::Viewport::kPad << ' ' << 480 - detail::Viewport::kPad << " L"
      << 720 - detail::Viewport::kPad << ' ' << 480 - detail::Viewport::kPad
      << "\" stroke=\"black\" fill=\"none\"/>\n";
  svg << "<path d=\"M" << detail::Viewport::kPad << ' ' << detail::Viewport::kPad << " L"
      << detail::Viewport::kPad << ' ' << 480 - detail::Viewport::kPad
      << "\" stroke=\"black\" fill=\"none\"/>\n";
  svg << "<text x=\"360\" y=\"472\" text-anchor=\"middle\" font-size=\"12\">"
      << table.columns[0] << "</text>\n";

  if (kind == PlotKind::band) {
    // shaded envelope as a closed polygon lo -> reversed hi
    std::ostringstream poly;
    poly << detail::path_from(xs, series[1], vp);
    for (std::size_t i = xs.size(); i-- > 0;)
      poly << "L" << format_double(vp.px(xs[i])) << ' ' << format_double(vp.py(series[2][i]))
           << ' ';
    poly << "Z";
    svg << "<path d=\"" << poly.str() << "\" fill=\"#cccccc\" fill-opacity=\"0.6\" "
           "stroke=\"none\"/>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 7];
    if (kind == PlotKind::scatter) {
      for (std::size_t i = 0; i < xs.size(); ++i)
        svg << "<circle cx=\"" << format_double(vp.px(xs[i])) << "\" cy=\""
            << format_double(vp.py(series[s][i])) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    } else {
      svg << "<path d=\"" << detail::path_from(xs, series[s], vp) << "\" stroke=\"" << color
          << "\" fill=\"none\" stroke-width=\"" << (labels[s] == "mean" ? 1.8 : 1.1)
          << "\"/>\n";
    }
    svg << "<text x=\"" << 720 - detail::Viewport::kPad + 4 << "\" y=\""
        << detail::Viewport::kPad + 14.0 * static_cast<double>(s) << "\" font-size=\"10\" fill=\""
        << color << "\">" << labels[s] << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw std::runtime_error("emit_plot: cannot open " + out_path.string());
  f << svg.str();
}

}  // namespace htbnp
