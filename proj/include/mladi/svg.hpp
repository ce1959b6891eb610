#pragma once

#include <string>
#include <vector>

namespace mladi::svg {

// Just enough hand-rolled SVG to emit the three report figures (scatter,
// sorted bars, grouped box plot) without an external plotting dependency.

struct ScatterPoint {
  double x = 0;
  double y = 0;
  int color_group = 0;
};

struct ScatterSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  std::vector<std::string> group_labels;  // legend, indexed by color_group
  std::vector<ScatterPoint> points;
};

std::string scatter(const ScatterSpec& spec);

struct BarSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> labels;
  std::vector<double> values;
};

std::string bars(const BarSpec& spec);

struct Box {
  std::string label;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  std::size_t count = 0;
};

struct BoxPlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  double y_min = 0, y_max = 1;
  std::vector<Box> boxes;
};

std::string boxplot(const BoxPlotSpec& spec);

}  // namespace mladi::svg
