#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace livorlab::cli {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 70, kRight = 20, kTop = 40;
constexpr double kMainHeight = 280, kGap = 30, kResidualHeight = 90;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;  // data range
  double top, height;     // pixel band
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

void axes(std::string& svg, const Frame& f, bool x_labels) {
  svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(f.top) + "\" width=\"" + num(kWidth - kLeft - kRight) +
         "\" height=\"" + num(f.height) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(f.py(y) + 4) +
           "\" font-size=\"11\" text-anchor=\"end\">" + label(y) + "</text>\n";
  }
  if (!x_labels) return;
  for (int i = 0; i <= 8; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 8.0;
    svg += "<text x=\"" + num(f.px(x)) + "\" y=\"" + num(f.top + f.height + 16) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + label(x) + "</text>\n";
  }
}

}  // namespace

std::string render_fit_svg(const spectral::Spectrum& measured, const spectral::Spectrum& predicted,
                           std::string_view title) {
  const auto wl = measured.wavelengths();
  const auto m = measured.values();
  const auto p = predicted.values();
  const std::size_t n = std::min(m.size(), p.size());

  double lo = std::min(*std::min_element(m.begin(), m.end()), *std::min_element(p.begin(), p.end()));
  double hi = std::max(*std::max_element(m.begin(), m.end()), *std::max_element(p.begin(), p.end()));
  if (hi - lo < 1e-12) hi = lo + 1e-3;
  const double pad = 0.05 * (hi - lo);
  Frame main{wl.front(), wl.back(), lo - pad, hi + pad, kTop, kMainHeight};

  double rmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) rmax = std::max(rmax, std::abs(m[i] - p[i]));
  if (rmax == 0.0) rmax = 1e-6;
  Frame resid{wl.front(), wl.back(), -rmax * 1.1, rmax * 1.1, kTop + kMainHeight + kGap, kResidualHeight};

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                    num(kHeight) + "\" font-family=\"sans-serif\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kLeft) + "\" y=\"24\" font-size=\"14\">" + escape(title) + "</text>\n";
  axes(svg, main, false);
  axes(svg, resid, true);
  svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 8) +
         "\" font-size=\"12\" text-anchor=\"middle\">wavelength (nm)</text>\n";
  svg += "<text x=\"16\" y=\"" + num(kTop + kMainHeight / 2) + "\" font-size=\"12\" transform=\"rotate(-90 16 " +
         num(kTop + kMainHeight / 2) + ")\" text-anchor=\"middle\">reflectance</text>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kWidth - kRight) + "\" y1=\"" + num(resid.py(0)) + "\" y2=\"" +
         num(resid.py(0)) + "\" stroke=\"#bbb\"/>\n";

  svg += "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < n; ++i) svg += num(main.px(wl[i])) + "," + num(main.py(p[i])) + " ";
  svg += "\"/>\n";
  for (std::size_t i = 0; i < n; ++i) {
    svg += "<circle cx=\"" + num(main.px(wl[i])) + "\" cy=\"" + num(main.py(m[i])) + "\" r=\"2\" fill=\"#2c3e50\"/>\n";
  }
  svg += "<polyline fill=\"none\" stroke=\"#2c3e50\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < n; ++i) svg += num(resid.px(wl[i])) + "," + num(resid.py(m[i] - p[i])) + " ";
  svg += "\"/>\n";

  const double lx = kWidth - kRight - 150;
  svg += "<circle cx=\"" + num(lx) + "\" cy=\"" + num(kTop + 14) + "\" r=\"3\" fill=\"#2c3e50\"/>";
  svg += "<text x=\"" + num(lx + 10) + "\" y=\"" + num(kTop + 18) + "\" font-size=\"11\">measured</text>\n";
  svg += "<line x1=\"" + num(lx - 6) + "\" x2=\"" + num(lx + 6) + "\" y1=\"" + num(kTop + 30) + "\" y2=\"" +
         num(kTop + 30) + "\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>";
  svg += "<text x=\"" + num(lx + 10) + "\" y=\"" + num(kTop + 34) + "\" font-size=\"11\">predicted</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace livorlab::cli
