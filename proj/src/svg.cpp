#include "snrprobe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "snrprobe/colormap.hpp"
#include "snrprobe/error.hpp"

namespace snrprobe {

int colormap_index(double value, double lo, double hi) {
  if (!(hi > lo)) return 0;
  const double t = (value - lo) / (hi - lo);
  const long idx = std::lround(std::clamp(t, 0.0, 1.0) * 255.0);
  return static_cast<int>(idx);
}

std::string colormap_hex(int index) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%06x", kColormap[static_cast<std::size_t>(std::clamp(index, 0, 255))]);
  return buf;
}

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string text(double x, double y, const std::string& s, const std::string& extra = {}) {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\"" + extra + ">" + xml_escape(s) + "</text>\n";
}

constexpr const char* kHeader = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
constexpr const char* kMissingPattern =
    "<defs><pattern id=\"missing\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">"
    "<rect width=\"6\" height=\"6\" fill=\"#ffffff\"/>"
    "<path d=\"M0,6 L6,0\" stroke=\"#808080\" stroke-width=\"1\"/></pattern></defs>\n";

}  // namespace

std::string render_heatmap(const HeatmapSpec& spec) {
  const auto rows = static_cast<std::size_t>(spec.values.rows());
  const auto cols = static_cast<std::size_t>(spec.values.cols());
  if (rows == 0 || cols == 0) throw Error(ErrorCode::EmptyMatrix, "heatmap has no cells");
  if (spec.row_labels.size() != rows || spec.col_labels.size() != cols) {
    throw Error(ErrorCode::DimensionMismatch, "heatmap labels do not match the matrix");
  }

  const double cell_w = cols > 40 ? 12.0 : 24.0;
  const double cell_h = rows > 40 ? 12.0 : 18.0;
  const double left = 90.0, top = 40.0, legend_w = 90.0;
  const double bottom = 90.0;
  const double grid_w = cell_w * static_cast<double>(cols);
  const double grid_h = cell_h * static_cast<double>(rows);
  const double width = left + grid_w + legend_w;
  const double height = top + grid_h + bottom;

  std::string svg = kHeader;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"9\">\n";
  svg += kMissingPattern;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += text(left, 20.0, spec.title, " font-size=\"13\"");

  svg += "<g id=\"cells\">\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = spec.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      const std::string fill = std::isfinite(v) ? colormap_hex(colormap_index(v, spec.lo, spec.hi)) : "url(#missing)";
      svg += "<rect x=\"" + num(left + cell_w * static_cast<double>(c)) + "\" y=\"" +
             num(top + cell_h * static_cast<double>(r)) + "\" width=\"" + num(cell_w) + "\" height=\"" + num(cell_h) +
             "\" fill=\"" + fill + "\"><title>" + xml_escape(spec.row_labels[r]) + " / " +
             xml_escape(spec.col_labels[c]) + ": " + (std::isfinite(v) ? label_value(v) : std::string("missing")) +
             "</title></rect>\n";
    }
  }
  svg += "</g>\n<g id=\"ticks\">\n";
  for (std::size_t r = 0; r < rows; ++r) {
    svg += text(left - 4.0, top + cell_h * (static_cast<double>(r) + 0.7), spec.row_labels[r], " text-anchor=\"end\"");
  }
  for (std::size_t c = 0; c < cols; ++c) {
    const double x = left + cell_w * (static_cast<double>(c) + 0.5);
    const double y = top + grid_h + 6.0;
    svg += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" transform=\"rotate(60 " + num(x) + " " + num(y) +
           ")\">" + xml_escape(spec.col_labels[c]) + "</text>\n";
  }
  svg += "</g>\n";
  if (!spec.x_label.empty()) svg += text(left + grid_w / 2.0, height - 8.0, spec.x_label, " text-anchor=\"middle\"");
  if (!spec.y_label.empty()) {
    svg += "<text x=\"14\" y=\"" + num(top + grid_h / 2.0) + "\" transform=\"rotate(-90 14 " + num(top + grid_h / 2.0) +
           ")\" text-anchor=\"middle\">" + xml_escape(spec.y_label) + "</text>\n";
  }

  // Legend: 32 swatches from hi (top) to lo (bottom).
  const double lx = left + grid_w + 20.0;
  const double lh = std::max(grid_h, 64.0) / 32.0;
  svg += "<g id=\"legend\">\n";
  for (int k = 0; k < 32; ++k) {
    const double v = spec.hi - (spec.hi - spec.lo) * (static_cast<double>(k) + 0.5) / 32.0;
    svg += "<rect x=\"" + num(lx) + "\" y=\"" + num(top + lh * k) + "\" width=\"14\" height=\"" + num(lh) +
           "\" fill=\"" + colormap_hex(colormap_index(v, spec.lo, spec.hi)) + "\"/>\n";
  }
  svg += text(lx + 18.0, top + 8.0, label_value(spec.hi));
  svg += text(lx + 18.0, top + lh * 32.0, label_value(spec.lo));
  svg += "<rect x=\"" + num(lx) + "\" y=\"" + num(top + lh * 32.0 + 8.0) +
         "\" width=\"14\" height=\"10\" fill=\"url(#missing)\"/>\n";
  svg += text(lx + 18.0, top + lh * 32.0 + 17.0, "missing");
  svg += "</g>\n</svg>\n";
  return svg;
}

std::string render_curves(const std::vector<CurvePanel>& panels, const std::vector<std::string>& x_labels) {
  if (panels.empty() || x_labels.empty()) throw Error(ErrorCode::EmptyMatrix, "no curves to render");
  static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  const double left = 70.0, right = 20.0, panel_h = 180.0, gap = 60.0, top = 30.0;
  const double step = 22.0;
  const double plot_w = step * static_cast<double>(std::max<std::size_t>(x_labels.size() - 1, 1));
  const double width = left + plot_w + right + 120.0;
  const double height = top + (panel_h + gap) * static_cast<double>(panels.size()) + 40.0;

  std::string svg = kHeader;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"9\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const CurvePanel& panel = panels[p];
    const double y0 = top + (panel_h + gap) * static_cast<double>(p);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : panel.series) {
      if (s.y.size() != x_labels.size()) throw Error(ErrorCode::DimensionMismatch, "series length differs from x labels");
      for (double v : s.y) {
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi == lo) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto ymap = [&](double v) { return y0 + panel_h * (hi - v) / (hi - lo); };
    auto xmap = [&](std::size_t i) { return left + step * static_cast<double>(i); };

    svg += "<g id=\"panel" + std::to_string(p) + "\">\n";
    svg += text(left, y0 - 10.0, panel.title, " font-size=\"12\"");
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(y0) + "\" width=\"" + num(plot_w) + "\" height=\"" + num(panel_h) +
           "\" fill=\"none\" stroke=\"#000000\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double v = lo + (hi - lo) * k / 4.0;
      svg += text(left - 4.0, ymap(v) + 3.0, label_value(v), " text-anchor=\"end\"");
    }
    svg += "<text x=\"14\" y=\"" + num(y0 + panel_h / 2.0) + "\" transform=\"rotate(-90 14 " + num(y0 + panel_h / 2.0) +
           ")\" text-anchor=\"middle\">" + xml_escape(panel.y_label) + "</text>\n";
    for (std::size_t i = 0; i < x_labels.size(); ++i) {
      const double x = xmap(i), y = y0 + panel_h + 6.0;
      svg += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" transform=\"rotate(60 " + num(x) + " " + num(y) + ")\">" +
             xml_escape(x_labels[i]) + "</text>\n";
    }
    for (std::size_t s = 0; s < panel.series.size(); ++s) {
      const CurveSeries& series = panel.series[s];
      const std::string color = kPalette[s % std::size(kPalette)];
      std::string pts;
      for (std::size_t i = 0; i < series.y.size(); ++i) {
        if (!std::isfinite(series.y[i])) continue;
        if (!pts.empty()) pts += ' ';
        pts += num(xmap(i)) + "," + num(ymap(series.y[i]));
      }
      svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
      for (std::size_t i = 0; i < series.y.size(); ++i) {
        if (!std::isfinite(series.y[i])) continue;
        const double cx = xmap(i), cy = ymap(series.y[i]);
        const Marker m = series.markers.empty() ? Marker::None : series.markers[i];
        if (m == Marker::Triangle) {
          svg += "<polygon points=\"" + num(cx) + "," + num(cy - 5) + " " + num(cx - 5) + "," + num(cy + 4) + " " +
                 num(cx + 5) + "," + num(cy + 4) + "\" fill=\"#2ca02c\"/>\n";
        } else if (m == Marker::Star) {
          std::string star;
          for (int k = 0; k < 10; ++k) {
            const double r = k % 2 == 0 ? 6.0 : 2.5;
            const double a = -std::numbers::pi / 2.0 + k * std::numbers::pi / 5.0;
            if (k) star += ' ';
            star += num(cx + r * std::cos(a)) + "," + num(cy + r * std::sin(a));
          }
          svg += "<polygon points=\"" + star + "\" fill=\"#ff7f0e\"/>\n";
        } else {
          svg += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"2\" fill=\"" + color + "\"/>\n";
        }
      }
      svg += text(left + plot_w + 10.0, y0 + 12.0 + 12.0 * static_cast<double>(s), series.label,
                  " fill=\"" + color + "\"");
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace snrprobe
