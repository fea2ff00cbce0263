#pragma once

#include <string>
#include <vector>

#include "snrprobe/matrix.hpp"

namespace snrprobe {

/// Rows are drawn top to bottom in the given order. NaN cells are missing
/// and drawn with the hatch pattern `#missing`.
struct HeatmapSpec {
  std::string title;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Matrix values;
  double lo = 0.0;
  double hi = 1.0;
  std::string x_label;
  std::string y_label;
};

/// Self-contained SVG; byte-identical for identical input.
std::string render_heatmap(const HeatmapSpec& spec);

enum class Marker { None, Triangle, Star };

struct CurveSeries {
  std::string label;
  std::vector<double> y;
  std::vector<Marker> markers;  // empty or one per point
};

struct CurvePanel {
  std::string title;
  std::string y_label;
  std::vector<CurveSeries> series;
};

/// Vertically stacked line panels sharing categorical x labels.
std::string render_curves(const std::vector<CurvePanel>& panels, const std::vector<std::string>& x_labels);

std::string xml_escape(const std::string& text);

}  // namespace snrprobe
