#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

// Partial sums of the slowly converging series used as numeric references for
// the tail estimates, plus the shared log-log power-law fitter.

namespace norb {

// Fixed library of admissible weight functions g(j).
enum class GTag { zero, one, inv_log, pow_01, inv_sqrt };

GTag parse_gtag(const std::string& tag);
std::string gtag_name(GTag g);
double gtag_eval(GTag g, double j);

// S_n = sum_{j=1}^{n-1} (n-j)^{alpha-1} j^{-alpha}; converges to pi/sin(pi*alpha).
double series_one(double alpha, std::size_t n);

// Both weighted variants:
//   first  = sum_{j=1}^{n-1} j^{-alpha} g(j) (n-j)^{alpha-1}
//   second = sum_{j=1}^{n-1} (n-j)^{alpha-1} g(n-j) j^{-alpha}
// The second sum is accumulated in descending j so that the exact index
// reversal identity first(alpha) == second(1-alpha) holds bitwise.
std::pair<double, double> series_two(double alpha, GTag g, std::size_t n);

// (sum_{j<=n} g(j)/j) / log n.
double series_log_one(GTag g, std::size_t n);

// sum_{j=1}^{n-2} (g1(j)/j) * (g2(n-j)/log(n-j)).
double series_log_two(GTag g1, GTag g2, std::size_t n);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;   // log-space intercept
  double prefactor = 0.0;   // exp(intercept)
  std::size_t n_lo = 0;
  std::size_t n_hi = 0;
  double residual_rms = 0.0;
  std::size_t points = 0;
};

// Least squares of log(value) against log(n) over the window [n_lo, n_hi].
// seq[i] is the value at n = i+1. Windows longer than max_points are
// subsampled geometrically so every log-scale decade carries equal weight.
FitResult fit_power_law(const std::vector<double>& seq, std::size_t n_lo,
                        std::size_t n_hi, std::size_t max_points = 256);

// Same fit on explicit (n, value) points.
FitResult fit_power_law_points(const std::vector<std::pair<double, double>>& pts);

}  // namespace norb
