#pragma once

#include <string>
#include <vector>

namespace sadl {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;  // scatter points instead of a polyline
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

//! Plain SVG line/scatter plot. Nonpositive values are dropped on log axes.
std::string svg_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series);
void write_svg(const std::string& path, const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace sadl
