#pragma once
// Plot rendering straight to SVG primitives: density histograms with an
// optional overlay curve, and log-log decay lines with the fitted slope
// written onto the canvas.

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace norb {

std::string svg_histogram(const std::vector<double>& samples, int bins,
                          double lo, double hi,
                          const std::function<double(double)>& overlay,
                          const std::string& title);

// pts must have positive coordinates; the annotation renders as
// "slope <label>" in the upper right corner
std::string svg_loglog(const std::vector<std::pair<double, double>>& pts,
                       const std::string& slope_label,
                       const std::string& title);

}  // namespace norb
