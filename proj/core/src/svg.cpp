#include "nimbus/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace nimbus {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// diverging blue-white-red, t in [-1,1]
std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  int r, g, b;
  if (t < 0) {
    const double a = -t;
    r = static_cast<int>(std::lround(255 * (1.0 - a) + 33 * a));
    g = static_cast<int>(std::lround(255 * (1.0 - a) + 102 * a));
    b = static_cast<int>(std::lround(255 * (1.0 - a) + 172 * a));
  } else {
    r = static_cast<int>(std::lround(255 * (1.0 - t) + 178 * t));
    g = static_cast<int>(std::lround(255 * (1.0 - t) + 24 * t));
    b = static_cast<int>(std::lround(255 * (1.0 - t) + 43 * t));
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string svg_heatmap(const Tensor& plane, int cell_px) {
  NIMBUS_CHECK(plane.rank() == 2, "heatmap expects a [H,W] field");
  const int h = plane.dim(0), w = plane.dim(1);
  double vmax = 0.0;
  for (std::int64_t i = 0; i < plane.size(); ++i) vmax = std::max(vmax, std::abs(plane[i]));

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w * cell_px << "\" height=\""
      << h * cell_px << "\" shape-rendering=\"crispEdges\">\n";
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double t = vmax == 0.0 ? 0.0 : plane.at2(y, x) / vmax;
      out << "<rect x=\"" << x * cell_px << "\" y=\"" << y * cell_px << "\" width=\"" << cell_px
          << "\" height=\"" << cell_px << "\" fill=\"" << diverging_color(t) << "\"/>\n";
    }
  out << "</svg>\n";
  return out.str();
}

std::string svg_line_plot(const std::vector<PlotSeries>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label) {
  const int width = 640, height = 420;
  const int ml = 64, mr = 150, mt = 36, mb = 48;
  const int pw = width - ml - mr, ph = height - mt - mb;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const PlotSeries& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  static const char* kColors[] = {"#1b6ca8", "#c0392b", "#27ae60", "#8e44ad",
                                  "#d68910", "#16a085", "#7f8c8d", "#2c3e50"};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    out << "<line x1=\"" << fmt(px(xv)) << "\" y1=\"" << mt + ph << "\" x2=\"" << fmt(px(xv))
        << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << fmt(py(yv)) << "\" x2=\"" << ml << "\" y2=\""
        << fmt(py(yv)) << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << fmt(py(yv) + 4)
        << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << mt + ph / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kColors[si % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) out << ' ';
      out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    const int ly = mt + 14 + static_cast<int>(si) * 18;
    out << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw + 30
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + pw + 36 << "\" y=\"" << ly << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace nimbus
