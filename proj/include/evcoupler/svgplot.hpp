#pragma once
#include <string>
#include <vector>

namespace evc {

// Minimal polyline plot; enough to eyeball sweep and transfer CSVs without
// external tooling. Returns the SVG document text.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

std::string render_svg_plot(const std::vector<PlotSeries>& series,
                            const std::string& x_label,
                            const std::string& y_label,
                            int width_px = 720, int height_px = 480);

}  // namespace evc
