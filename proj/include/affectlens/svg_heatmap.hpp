#pragma once

// Static SVG heatmap with a diverging blue-white-red palette whose scale is
// symmetric about zero.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>

#include "affectlens/stats/matrix.hpp"

namespace affectlens {

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// t in [-1, 1] -> rgb; -1 blue, 0 white, +1 red.
inline std::string diverging_color(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, -1.0, 1.0);
  const double lo[3] = {33, 102, 172}, mid[3] = {247, 247, 247}, hi[3] = {178, 24, 43};
  const double* end = t < 0 ? lo : hi;
  const double a = std::abs(t);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(mid[0] + (end[0] - mid[0]) * a)),
                static_cast<int>(std::lround(mid[1] + (end[1] - mid[1]) * a)),
                static_cast<int>(std::lround(mid[2] + (end[2] - mid[2]) * a)));
  return buf;
}

}  // namespace detail

inline void write_svg_heatmap(std::ostream& out, const stats::Matrix& m, std::span<const std::string> row_labels,
                              std::span<const std::string> col_labels, const std::string& title) {
  const int cell = 22, left = 110, top = 40, bottom = 190;
  double scale = 0.0;
  for (double v : m.data) {
    if (std::isfinite(v)) scale = std::max(scale, std::abs(v));
  }
  if (scale == 0.0) scale = 1.0;
  const int width = left + cell * static_cast<int>(m.cols) + 90;
  const int height = top + cell * static_cast<int>(m.rows) + bottom;
  char buf[256];

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << detail::xml_escape(title) << "</text>\n";
  for (std::size_t r = 0; r < m.rows; ++r) {
    const int y = top + cell * static_cast<int>(r);
    out << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"end\">"
        << detail::xml_escape(row_labels[r]) << "</text>\n";
    for (std::size_t c = 0; c < m.cols; ++c) {
      const int x = left + cell * static_cast<int>(c);
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\"><title>%.4f</title></rect>\n", x,
                    y, cell, cell, detail::diverging_color(m(r, c) / scale).c_str(), m(r, c));
      out << buf;
    }
  }
  for (std::size_t c = 0; c < m.cols; ++c) {
    const int x = left + cell * static_cast<int>(c) + cell / 2;
    const int y = top + cell * static_cast<int>(m.rows) + 6;
    out << "<text transform=\"translate(" << x << "," << y << ") rotate(60)\">" << detail::xml_escape(col_labels[c])
        << "</text>\n";
  }
  // legend
  const int lx = left + cell * static_cast<int>(m.cols) + 20;
  for (int k = 0; k < 11; ++k) {
    const double t = 1.0 - k / 5.0;
    out << "<rect x=\"" << lx << "\" y=\"" << top + k * 12 << "\" width=\"14\" height=\"12\" fill=\""
        << detail::diverging_color(t) << "\"/>\n";
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\">%+.2f</text>\n<text x=\"%d\" y=\"%d\">%+.2f</text>\n",
                lx + 18, top + 10, scale, lx + 18, top + 10 * 12 + 10, -scale);
  out << buf;
  out << "</svg>\n";
}

}  // namespace affectlens
