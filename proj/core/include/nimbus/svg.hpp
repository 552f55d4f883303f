#pragma once

#include <string>
#include <vector>

#include "nimbus/tensor.hpp"

namespace nimbus {

/// Zero-centered diverging heatmap (blue / white / red) of a [H,W] field.
std::string svg_heatmap(const Tensor& plane, int cell_px = 8);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Simple line plot with axes, tick labels and a legend.
std::string svg_line_plot(const std::vector<PlotSeries>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label);

}  // namespace nimbus
