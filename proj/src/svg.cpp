#include "norb/svg.hpp"

#include <algorithm>
#include <cmath>

#include "norb/report.hpp"
#include "norb/util.hpp"

namespace norb {

namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kLeft = 56.0, kRight = 16.0, kTop = 34.0, kBottom = 44.0;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

std::string num(double v) { return format_double(std::round(v * 100.0) / 100.0); }

std::string header(const std::string& title) {
  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
      "viewBox=\"0 0 640 420\">\n"
      "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kLeft) + "\" y=\"22\" font-family=\"sans-serif\" "
       "font-size=\"14\">" + title + "</text>\n";
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" +
       num(kPlotW) + "\" height=\"" + num(kPlotH) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  return s;
}

std::string tick_label(double x, double y, const std::string& text,
                       bool vertical_axis) {
  std::string anchor = vertical_axis ? "end" : "middle";
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) +
         "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"" +
         anchor + "\">" + text + "</text>\n";
}

}  // namespace

std::string svg_histogram(const std::vector<double>& samples, int bins,
                          double lo, double hi,
                          const std::function<double(double)>& overlay,
                          const std::string& title) {
  if (samples.empty()) throw config_error("histogram needs samples");
  if (bins < 1 || !(hi > lo)) throw config_error("bad histogram axis");
  std::vector<double> count(std::size_t(bins), 0.0);
  const double w = (hi - lo) / double(bins);
  for (double v : samples) {
    int b = int((v - lo) / w);
    b = std::max(0, std::min(bins - 1, b));
    count[std::size_t(b)] += 1.0;
  }
  for (double& c : count) c /= double(samples.size()) * w;

  double ymax = *std::max_element(count.begin(), count.end());
  std::vector<std::pair<double, double>> curve;
  if (overlay) {
    for (int i = 0; i <= 256; ++i) {
      const double t = lo + (hi - lo) * double(i) / 256.0;
      const double y = overlay(t);
      if (std::isfinite(y)) {
        curve.push_back({t, y});
        // the densities here can blow up at the axis ends; let the curve
        // leave the canvas instead of flattening every bar
        if (y < 4.0 * ymax) ymax = std::max(ymax, y);
      }
    }
  }
  ymax *= 1.06;

  auto X = [&](double t) { return kLeft + (t - lo) / (hi - lo) * kPlotW; };
  auto Y = [&](double y) {
    return kTop + kPlotH - std::min(y / ymax, 1.0) * kPlotH;
  };

  std::string s = header(title);
  for (int b = 0; b < bins; ++b) {
    const double x0 = X(lo + double(b) * w), x1 = X(lo + double(b + 1) * w);
    const double y = Y(count[std::size_t(b)]);
    s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y) + "\" width=\"" +
         num(x1 - x0) + "\" height=\"" + num(kTop + kPlotH - y) +
         "\" fill=\"#7aa6d8\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
  }
  if (!curve.empty()) {
    s += "<polyline fill=\"none\" stroke=\"#c23\" stroke-width=\"1.5\" points=\"";
    for (const auto& [t, y] : curve)
      s += num(X(t)) + "," + num(Y(y)) + " ";
    s += "\"/>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double t = lo + (hi - lo) * double(i) / 4.0;
    s += tick_label(X(t), kTop + kPlotH + 16.0, format_double(t), false);
    const double y = ymax * double(i) / 4.0;
    s += tick_label(kLeft - 6.0, Y(y) + 4.0, num(y), true);
  }
  return s + "</svg>\n";
}

std::string svg_loglog(const std::vector<std::pair<double, double>>& pts,
                       const std::string& slope_label,
                       const std::string& title) {
  std::vector<std::pair<double, double>> lp;
  for (const auto& [x, y] : pts)
    if (x > 0.0 && y > 0.0) lp.push_back({std::log10(x), std::log10(y)});
  if (lp.size() < 2) throw config_error("log-log plot needs two positive points");

  double xlo = lp[0].first, xhi = lp[0].first;
  double ylo = lp[0].second, yhi = lp[0].second;
  for (const auto& [x, y] : lp) {
    xlo = std::min(xlo, x); xhi = std::max(xhi, x);
    ylo = std::min(ylo, y); yhi = std::max(yhi, y);
  }
  if (xhi - xlo < 1e-12) xhi = xlo + 1.0;
  if (yhi - ylo < 1e-12) yhi = ylo + 1.0;
  const double padx = 0.05 * (xhi - xlo), pady = 0.08 * (yhi - ylo);
  xlo -= padx; xhi += padx; ylo -= pady; yhi += pady;

  auto X = [&](double x) { return kLeft + (x - xlo) / (xhi - xlo) * kPlotW; };
  auto Y = [&](double y) { return kTop + kPlotH - (y - ylo) / (yhi - ylo) * kPlotH; };

  std::string s = header(title);
  s += "<polyline fill=\"none\" stroke=\"#2a6\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : lp) s += num(X(x)) + "," + num(Y(y)) + " ";
  s += "\"/>\n";
  for (const auto& [x, y] : lp)
    s += "<circle cx=\"" + num(X(x)) + "\" cy=\"" + num(Y(y)) +
         "\" r=\"3\" fill=\"#2a6\"/>\n";
  for (int d = int(std::ceil(xlo)); d <= int(std::floor(xhi)); ++d)
    s += tick_label(X(double(d)), kTop + kPlotH + 16.0,
                    "1e" + std::to_string(d), false);
  for (int d = int(std::ceil(ylo)); d <= int(std::floor(yhi)); ++d)
    s += tick_label(kLeft - 6.0, Y(double(d)) + 4.0, "1e" + std::to_string(d),
                    true);
  s += "<text x=\"" + num(kWidth - kRight - 8.0) + "\" y=\"" + num(kTop + 16.0) +
       "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">"
       "slope " + slope_label + "</text>\n";
  return s + "</svg>\n";
}

}  // namespace norb
