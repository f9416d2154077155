#include "evcoupler/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace evc {

static const char* kColors[] = {"#c0392b", "#2980b9", "#27ae60",
                                "#8e44ad", "#d35400", "#16a085"};

std::string render_svg_plot(const std::vector<PlotSeries>& series,
                            const std::string& x_label,
                            const std::string& y_label, int width_px,
                            int height_px) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw std::runtime_error("svg: series x/y length mismatch");
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmin > xmax) throw std::runtime_error("svg: no data");
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double padx = 0.06 * (xmax - xmin), pady = 0.08 * (ymax - ymin);
  xmin -= padx; xmax += padx; ymin -= pady; ymax += pady;

  const int ml = 64, mr = 16, mt = 16, mb = 44;
  const double pw = width_px - ml - mr, ph = height_px - mt - mb;
  auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double y) { return mt + (1 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_px
      << "\" height=\"" << height_px << "\" viewBox=\"0 0 " << width_px << " "
      << height_px << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";

  // 5 ticks per axis
  char buf[64];
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    std::snprintf(buf, sizeof buf, "%.4g", xv);
    out << "<text x=\"" << X(xv) << "\" y=\"" << height_px - mb + 18
        << "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#333\">" << buf
        << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.4g", yv);
    out << "<text x=\"" << ml - 6 << "\" y=\"" << Y(yv) + 4
        << "\" font-size=\"11\" text-anchor=\"end\" fill=\"#333\">" << buf
        << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height_px - 8
      << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#111\">" << x_label
      << "</text>\n";
  out << "<text x=\"14\" y=\"" << mt + ph / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#111\" "
         "transform=\"rotate(-90 14 "
      << mt + ph / 2 << ")\">" << y_label << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.x.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << kColors[si % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(s.x[i]), Y(s.y[i]));
      out << buf;
    }
    out << "\"/>\n";
    out << "<text x=\"" << width_px - mr - 4 << "\" y=\"" << mt + 16 + 14 * si
        << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << kColors[si % 6]
        << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace evc
