#include "norb/arcsine.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>

#include "norb/util.hpp"

namespace norb {

namespace {

constexpr double kPi = std::numbers::pi;

void check_alpha_p(double alpha, double p) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw config_error(
        "the two-ray occupation law has a density only for alpha in (0,1)");
  if (!(p > 0.0 && p < 1.0))
    throw config_error("ray weight must lie strictly inside (0,1)");
}

void check_simplex(const std::vector<double>& p) {
  if (p.empty())
    throw config_error("simplex point needs at least one component");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0))
      throw config_error("simplex components must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw config_error("simplex components must sum to 1");
}

// Integrand of the lower-tail integral after the substitution u = t^alpha.
// The substitution cancels the t^(alpha-1) endpoint factor: what remains is
// (1-t)^(alpha-1) over a positive quadratic form, bounded as long as t stays
// below the split point.
double lower_integrand(double alpha, double p_hat, double u) {
  const double t = std::pow(u, 1.0 / alpha);
  const double theta = alpha * kPi;
  const double c = std::pow(1.0 - t, alpha);
  const double a = p_hat * u + c * std::cos(theta);
  const double b = c * std::sin(theta);
  return p_hat * std::sin(theta) / (kPi * alpha) * (c / (1.0 - t)) /
         (a * a + b * b);
}

template <class F>
double simpson(const F& f, double a, double b, double fa, double fm, double fb,
               double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double flm = f(0.5 * (a + m));
  const double frm = f(0.5 * (m + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double lower = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double upper = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = lower + upper - whole;
  if (std::abs(delta) <= 15.0 * tol) return lower + upper + delta / 15.0;
  if (depth >= 40)
    throw numeric_error("distribution quadrature did not converge");
  return simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth + 1) +
         simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth + 1);
}

// Integral of the density over [0, x], valid for x bounded away from 1.
double lower_integral(double alpha, double p_hat, double x, double tol) {
  if (x <= 0.0) return 0.0;
  const double hi = std::pow(x, alpha);
  auto f = [alpha, p_hat](double u) { return lower_integrand(alpha, p_hat, u); };
  return simpson(f, 0.0, hi, f(0.0), f(0.5 * hi), f(hi), tol, 0);
}

// Coarse interior minimum of the density. Any interior split keeps both
// substituted halves bounded; the minimum only balances the work, so a scan
// is enough. The clamp keeps the unsubstituted endpoint factor of each half
// moderate when the minimum sits close to an edge.
double split_point(double alpha, double p) {
  double best_t = 0.5;
  double best_v = lamperti_pdf(alpha, p, 0.5);
  for (int i = 1; i < 64; ++i) {
    const double t = static_cast<double>(i) / 64.0;
    const double v = lamperti_pdf(alpha, p, t);
    if (v < best_v) {
      best_v = v;
      best_t = t;
    }
  }
  return std::min(0.95, std::max(0.05, best_t));
}

}  // namespace

SimplexPoint make_simplex(std::vector<double> components) {
  check_simplex(components);
  return SimplexPoint{std::move(components)};
}

double lamperti_pdf(double alpha, double p, double t) {
  check_alpha_p(alpha, p);
  if (!(t > 0.0 && t < 1.0))
    throw config_error(
        "the two-ray density diverges at the endpoints; need t in (0,1)");
  const double p_hat = 1.0 / p - 1.0;
  const double theta = alpha * kPi;
  const double ta = std::pow(t, alpha);
  const double ca = std::pow(1.0 - t, alpha);
  const double num = ta * ca / (1.0 - t) + ta / t * ca;
  const double den =
      p_hat * p_hat * ta * ta + 2.0 * p_hat * ta * ca * std::cos(theta) +
      ca * ca;
  return p_hat * std::sin(theta) / kPi * num / den;
}

double lamperti_cdf(double alpha, double p, double t) {
  check_alpha_p(alpha, p);
  if (!(t >= 0.0 && t <= 1.0))
    throw config_error("distribution function argument must lie in [0,1]");
  if (t == 0.0) return 0.0;
  const double p_hat = 1.0 / p - 1.0;
  const double s = split_point(alpha, p);
  constexpr double tol = 1e-9;
  if (t <= s) return lower_integral(alpha, p_hat, t, tol);
  // upper piece in mirrored coordinates: swapping the rays replaces the
  // weight by its reciprocal and moves the singularity at 1 to 0, where the
  // same substitution absorbs it
  return lower_integral(alpha, p_hat, s, tol) +
         lower_integral(alpha, 1.0 / p_hat, 1.0 - s, tol) -
         lower_integral(alpha, 1.0 / p_hat, 1.0 - t, tol);
}

double sample_stable(double alpha, double p_k, Xoshiro256pp& rng) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw config_error("one-sided stable sampler needs alpha in (0,1)");
  if (!(p_k >= 0.0))
    throw config_error("stable weight must be nonnegative");
  if (p_k == 0.0) return 0.0;
  const double u = kPi * rng.uniform_open();
  const double e = rng.exponential();
  // log domain: the three sine powers over- or underflow separately near
  // the ends of the angle range while their combination stays representable
  const double log_a =
      alpha / (1.0 - alpha) * std::log(std::sin(alpha * u)) +
      std::log(std::sin((1.0 - alpha) * u)) -
      1.0 / (1.0 - alpha) * std::log(std::sin(u));
  const double std_draw =
      std::exp((1.0 - alpha) / alpha * (log_a - std::log(e)));
  return std::pow(p_k, 1.0 / alpha) * std_draw;
}

SimplexPoint sample_Z(double alpha, const SimplexPoint& p, Xoshiro256pp& rng) {
  check_simplex(p.p);
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw config_error("simplex ratio variable needs alpha in (0,1]");
  if (alpha == 1.0) return p;
  SimplexPoint z;
  z.p.resize(p.p.size());
  double total = 0.0;
  for (std::size_t k = 0; k < p.p.size(); ++k) {
    z.p[k] = sample_stable(alpha, p.p[k], rng);
    total += z.p[k];
  }
  if (!std::isfinite(total)) {
    // a draw overflowed double range, so the ratio concentrates there
    const std::size_t top = std::size_t(
        std::max_element(z.p.begin(), z.p.end()) - z.p.begin());
    for (std::size_t k = 0; k < z.p.size(); ++k) z.p[k] = (k == top) ? 1.0 : 0.0;
    return z;
  }
  for (double& v : z.p) v /= total;
  return z;
}

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf) {
  if (samples.empty())
    throw config_error("the KS statistic needs at least one sample");
  std::sort(samples.begin(), samples.end());
  if (samples.front() < 0.0 || samples.back() > 1.0)
    throw config_error("KS samples must lie in [0,1]");
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - f,
                             f - static_cast<double>(i) / n));
  }
  return d;
}

}  // namespace norb
