#include "iobs/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "iobs/errors.hpp"

namespace iobs {

namespace {

struct Extent {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void absorb(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  void pad() {
    if (lo > hi) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double margin = 0.05 * (hi - lo);
    lo -= margin;
    hi += margin;
  }
};

// Round tick spacing to a 1/2/5 decade multiple giving 4..9 ticks.
double tick_step(double range) {
  const double raw = range / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void write_svg(const std::string& path, const LinePlot& plot, int width_px,
               int height_px) {
  Extent ex, ey;
  for (const auto& b : plot.bands) {
    for (double v : b.x) ex.absorb(v);
    for (double v : b.lower) ey.absorb(v);
    for (double v : b.upper) ey.absorb(v);
  }
  for (const auto& s : plot.series) {
    for (double v : s.x) ex.absorb(v);
    for (double v : s.y) ey.absorb(v);
  }
  ex.pad();
  ey.pad();

  const double ml = 64, mr = 16, mt = 34, mb = 44;
  const double pw = width_px - ml - mr, ph = height_px - mt - mb;
  auto px = [&](double x) { return ml + pw * (x - ex.lo) / (ex.hi - ex.lo); };
  auto py = [&](double y) { return mt + ph * (ey.hi - y) / (ey.hi - ey.lo); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_px
      << "\" height=\"" << height_px << "\" viewBox=\"0 0 " << width_px << " "
      << height_px << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width_px / 2 << "\" y=\"20\" font-family=\"sans-serif\""
      << " font-size=\"14\" text-anchor=\"middle\">" << plot.title
      << "</text>\n";

  const double xstep = tick_step(ex.hi - ex.lo);
  const double ystep = tick_step(ey.hi - ey.lo);
  out << "<g font-family=\"sans-serif\" font-size=\"10\" fill=\"#444\">\n";
  for (double x = std::ceil(ex.lo / xstep) * xstep; x <= ex.hi + 1e-9 * xstep;
       x += xstep) {
    out << "<line x1=\"" << num(px(x)) << "\" y1=\"" << num(mt) << "\" x2=\""
        << num(px(x)) << "\" y2=\"" << num(mt + ph)
        << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
    out << "<text x=\"" << num(px(x)) << "\" y=\"" << num(mt + ph + 14)
        << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
  }
  for (double y = std::ceil(ey.lo / ystep) * ystep; y <= ey.hi + 1e-9 * ystep;
       y += ystep) {
    out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(py(y)) << "\" x2=\""
        << num(ml + pw) << "\" y2=\"" << num(py(y))
        << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
    out << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(py(y) + 3)
        << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
  }
  out << "</g>\n";

  for (const auto& b : plot.bands) {
    if (b.x.size() != b.lower.size() || b.x.size() != b.upper.size())
      throw invalid_input("write_svg: band arrays differ in length");
    if (b.x.empty()) continue;
    out << "<polygon fill=\"" << b.color << "\" fill-opacity=\""
        << num(b.opacity) << "\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < b.x.size(); ++i)
      out << num(px(b.x[i])) << "," << num(py(b.upper[i])) << " ";
    for (std::size_t i = b.x.size(); i-- > 0;)
      out << num(px(b.x[i])) << "," << num(py(b.lower[i])) << " ";
    out << "\"/>\n";
  }

  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size())
      throw invalid_input("write_svg: series arrays differ in length");
    if (s.x.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"" << num(s.stroke_width) << "\"";
    if (s.dashed) out << " stroke-dasharray=\"5,4\"";
    out << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
    out << "\"/>\n";
  }

  double ly = mt + 12;
  out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (const auto& s : plot.series) {
    if (s.label.empty()) continue;
    out << "<line x1=\"" << num(ml + pw - 120) << "\" y1=\"" << num(ly - 4)
        << "\" x2=\"" << num(ml + pw - 100) << "\" y2=\"" << num(ly - 4)
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"";
    if (s.dashed) out << " stroke-dasharray=\"5,4\"";
    out << "/>\n";
    out << "<text x=\"" << num(ml + pw - 94) << "\" y=\"" << num(ly) << "\">"
        << s.label << "</text>\n";
    ly += 15;
  }
  for (const auto& b : plot.bands) {
    if (b.label.empty()) continue;
    out << "<rect x=\"" << num(ml + pw - 120) << "\" y=\"" << num(ly - 11)
        << "\" width=\"20\" height=\"9\" fill=\"" << b.color
        << "\" fill-opacity=\"" << num(b.opacity) << "\"/>\n";
    out << "<text x=\"" << num(ml + pw - 94) << "\" y=\"" << num(ly) << "\">"
        << b.label << "</text>\n";
    ly += 15;
  }
  out << "</g>\n";

  out << "<text x=\"" << width_px / 2 << "\" y=\"" << height_px - 8
      << "\" font-family=\"sans-serif\" font-size=\"12\""
      << " text-anchor=\"middle\">" << plot.x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" font-family=\"sans-serif\" font-size=\"12\""
      << " text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">" << plot.y_label << "</text>\n";
  out << "</svg>\n";

  std::ofstream file(path, std::ios::binary);
  if (!file) throw invalid_input("write_svg: cannot open " + path);
  file << out.str();
}

}  // namespace iobs
