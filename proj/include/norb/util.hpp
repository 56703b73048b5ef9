#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Shared error types, compensated summation, and scalar root-finding helpers.

namespace norb {

// Bad user input (rejected parameters, malformed configs). CLI maps this to exit 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Runtime numeric failure (non-convergence, flag budgets exceeded). CLI maps this to exit 3.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Neumaier variant of Kahan summation; the correction term also captures the
// case where the addend dominates the running sum.
class NeumaierSum {
 public:
  void add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Solves z + B*z^q = w for z in (0, w], q > 1, B >= 0, w > 0.
// The left side is increasing and convex, and both w and (w/B)^{1/q} sit at or
// above the root, so Newton from min of the two decreases monotonically.
inline double solve_backward_step(double w, double B, double q) {
  if (!(w > 0.0)) return 0.0;
  if (B <= 0.0) return w;
  double z = w;
  double pw = std::pow(w / B, 1.0 / q);
  if (pw < z) z = pw;
  for (int it = 0; it < 200; ++it) {
    double zq = std::pow(z, q);
    double g = z + B * zq - w;
    double dg = 1.0 + q * B * (zq / z);
    double step = g / dg;
    double zn = z - step;
    if (zn <= 0.0) zn = 0.5 * z;
    if (std::abs(zn - z) <= 1e-16 * z) {
      z = zn;
      break;
    }
    z = zn;
  }
  return z;
}

// Safeguarded Newton for a strictly monotone function on [lo, hi].
// fdf must return {f(x) - target, f'(x)}. Falls back to bisection whenever the
// Newton step leaves the bracket or stalls.
template <class FDF>
double solve_monotone(FDF&& fdf, double lo, double hi, double x0, double xtol,
                      int max_iter = 200) {
  double flo_s = 0.0, fhi_s = 0.0;
  {
    auto [flo, d1] = fdf(lo);
    auto [fhi, d2] = fdf(hi);
    (void)d1;
    (void)d2;
    flo_s = flo;
    fhi_s = fhi;
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
      throw numeric_error("solve_monotone: no sign change over bracket");
  }
  bool increasing = fhi_s > flo_s;
  double x = x0;
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    auto [f, df] = fdf(x);
    if (f == 0.0) return x;
    bool below = increasing ? (f < 0.0) : (f > 0.0);
    if (below) {
      lo = x;
    } else {
      hi = x;
    }
    double step = (df != 0.0) ? f / df : 0.0;
    double xn = x - step;
    if (!(xn > lo && xn < hi) || step == 0.0) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) <= xtol) return xn;
    x = xn;
  }
  if (hi - lo <= 4.0 * xtol) return 0.5 * (lo + hi);
  throw numeric_error("solve_monotone: no convergence");
}

inline double sqr(double x) { return x * x; }

}  // namespace norb
