#pragma once

#include <string>
#include <vector>

namespace iobs {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  double stroke_width = 1.5;
  bool dashed = false;
};

// Filled region between two curves sharing one x grid.
struct Band {
  std::string label;
  std::vector<double> x, lower, upper;
  std::string color = "#1f77b4";
  double opacity = 0.18;
};

struct LinePlot {
  std::string title, x_label, y_label;
  std::vector<Band> bands;
  std::vector<Series> series;
};

void write_svg(const std::string& path, const LinePlot& plot,
               int width_px = 860, int height_px = 420);

}  // namespace iobs
