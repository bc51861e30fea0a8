#pragma once

// Minimal SVG chart emitters for reports. Output is a pure function of the
// inputs so reruns produce identical files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace expectrl::svg {

inline constexpr int kWidth = 720;
inline constexpr int kHeight = 420;
inline constexpr int kLeft = 70, kRight = 20, kTop = 40, kBottom = 90;

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

inline std::string escape(const std::string& s) {
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

struct Axis {
  double lo, hi;

  static Axis covering(double lo, double hi) {
    if (!(hi > lo)) {
      const double pad = std::max(std::abs(lo) * 0.1, 0.5);
      return {lo - pad, hi + pad};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
  }
  double map(double v, double px_lo, double px_hi) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

inline void frame(std::ostringstream& out, const std::string& title, const Axis& y, const std::string& y_label) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  const int bottom = kHeight - kBottom;
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << bottom << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = y.lo + (y.hi - y.lo) * t / 4.0;
    const double py = y.map(v, bottom, kTop);
    out << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << num(py) << "\" x2=\"" << kLeft << "\" y2=\"" << num(py)
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  out << "<text x=\"16\" y=\"" << (kTop + bottom) / 2 << "\" transform=\"rotate(-90 16 " << (kTop + bottom) / 2
      << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
}

/// Bars with symmetric error whiskers.
inline std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<std::string>& labels,
                             const std::vector<double>& values, const std::vector<double>& errors) {
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    lo = std::min(lo, values[i] - errors[i]);
    hi = std::max(hi, values[i] + errors[i]);
  }
  const Axis y = Axis::covering(lo, hi);
  std::ostringstream out;
  frame(out, title, y, y_label);
  const int bottom = kHeight - kBottom;
  const double slot = static_cast<double>(kWidth - kLeft - kRight) / std::max<std::size_t>(values.size(), 1);
  const double zero = y.map(0.0, bottom, kTop);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = kLeft + slot * (i + 0.2);
    const double top = y.map(values[i], bottom, kTop);
    out << "<rect x=\"" << num(x) << "\" y=\"" << num(std::min(top, zero)) << "\" width=\"" << num(slot * 0.6)
        << "\" height=\"" << num(std::abs(zero - top)) << "\" fill=\"" << palette(i) << "\"/>\n";
    const double cx = x + slot * 0.3;
    const double e_hi = y.map(values[i] + errors[i], bottom, kTop), e_lo = y.map(values[i] - errors[i], bottom, kTop);
    out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(e_lo) << "\" x2=\"" << num(cx) << "\" y2=\"" << num(e_hi)
        << "\" stroke=\"black\"/>\n";
    const double lx = kLeft + slot * (i + 0.5);
    out << "<text x=\"" << num(lx) << "\" y=\"" << bottom + 14 << "\" text-anchor=\"end\" transform=\"rotate(-30 "
        << num(lx) << ' ' << bottom + 14 << ")\">" << escape(labels[i]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

struct Series {
  std::string name;
  std::vector<double> x, y;
};

/// Polylines with a legend.
inline std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<Series>& series) {
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool first = true;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x_lo = x_hi = s.x[i];
        y_lo = y_hi = s.y[i];
        first = false;
      }
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  const Axis x = Axis::covering(x_lo, x_hi), y = Axis::covering(y_lo, y_hi);
  std::ostringstream out;
  frame(out, title, y, y_label);
  const int bottom = kHeight - kBottom;
  for (int t = 0; t <= 4; ++t) {
    const double v = x.lo + (x.hi - x.lo) * t / 4.0;
    out << "<text x=\"" << num(x.map(v, kLeft, kWidth - kRight)) << "\" y=\"" << bottom + 14
        << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
  }
  out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << bottom + 32 << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    out << "<polyline fill=\"none\" stroke=\"" << palette(k) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << (i ? " " : "") << num(x.map(s.x[i], kLeft, kWidth - kRight)) << ',' << num(y.map(s.y[i], bottom, kTop));
    out << "\"/>\n";
    const int ly = bottom + 48 + 12 * static_cast<int>(k % 3);
    const int lx = kLeft + 220 * static_cast<int>(k / 3);
    out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 16 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << palette(k) << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << lx + 20 << "\" y=\"" << ly << "\">" << escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace expectrl::svg
