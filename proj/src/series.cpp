#include "norb/series.hpp"

#include <algorithm>
#include <cmath>

#include "norb/util.hpp"

namespace norb {

GTag parse_gtag(const std::string& tag) {
  if (tag == "zero" || tag == "0") return GTag::zero;
  if (tag == "one" || tag == "1") return GTag::one;
  if (tag == "inv_log" || tag == "1/log") return GTag::inv_log;
  if (tag == "pow_01" || tag == "j^-0.1") return GTag::pow_01;
  if (tag == "inv_sqrt" || tag == "1/sqrt") return GTag::inv_sqrt;
  throw config_error("unknown g tag: " + tag);
}

std::string gtag_name(GTag g) {
  switch (g) {
    case GTag::zero: return "zero";
    case GTag::one: return "one";
    case GTag::inv_log: return "inv_log";
    case GTag::pow_01: return "pow_01";
    case GTag::inv_sqrt: return "inv_sqrt";
  }
  return "?";
}

double gtag_eval(GTag g, double j) {
  switch (g) {
    case GTag::zero: return 0.0;
    case GTag::one: return 1.0;
    case GTag::inv_log: return 1.0 / std::log(j + 2.0);
    case GTag::pow_01: return std::pow(j, -0.1);
    case GTag::inv_sqrt: return 1.0 / std::sqrt(j);
  }
  return 0.0;
}

double series_one(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("series_one: alpha must be in (0,1)");
  if (n < 2) throw config_error("series_one: n must be >= 2");
  NeumaierSum s;
  const double am1 = alpha - 1.0;
  for (std::size_t j = 1; j < n; ++j) {
    double dj = static_cast<double>(j);
    double dnj = static_cast<double>(n - j);
    s.add(std::pow(dnj, am1) * std::pow(dj, -alpha));
  }
  return s.value();
}

std::pair<double, double> series_two(double alpha, GTag g, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("series_two: alpha must be in (0,1)");
  if (n < 2) throw config_error("series_two: n must be >= 2");
  const double am1 = alpha - 1.0;
  NeumaierSum sa;
  for (std::size_t j = 1; j < n; ++j) {
    double dj = static_cast<double>(j);
    double dnj = static_cast<double>(n - j);
    sa.add(std::pow(dj, -alpha) * std::pow(dnj, am1) * gtag_eval(g, dj));
  }
  // Descending order makes the term sequence of the second sum at (1-alpha)
  // bitwise identical to the first sum's sequence at alpha.
  NeumaierSum sb;
  for (std::size_t j = n - 1; j >= 1; --j) {
    double dj = static_cast<double>(j);
    double dnj = static_cast<double>(n - j);
    sb.add(std::pow(dj, -alpha) * std::pow(dnj, am1) * gtag_eval(g, dnj));
    if (j == 1) break;
  }
  return {sa.value(), sb.value()};
}

double series_log_one(GTag g, std::size_t n) {
  if (n < 4) throw config_error("series_log_one: n must be >= 4");
  NeumaierSum s;
  for (std::size_t j = 1; j <= n; ++j) {
    double dj = static_cast<double>(j);
    s.add(gtag_eval(g, dj) / dj);
  }
  return s.value() / std::log(static_cast<double>(n));
}

double series_log_two(GTag g1, GTag g2, std::size_t n) {
  if (n < 4) throw config_error("series_log_two: n must be >= 4");
  NeumaierSum s;
  for (std::size_t j = 1; j + 2 <= n; ++j) {
    double dj = static_cast<double>(j);
    double dnj = static_cast<double>(n - j);
    s.add((gtag_eval(g1, dj) / dj) * (gtag_eval(g2, dnj) / std::log(dnj)));
  }
  return s.value();
}

FitResult fit_power_law_points(const std::vector<std::pair<double, double>>& pts) {
  if (pts.empty()) throw config_error("fit_power_law: empty window");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<std::pair<double, double>> logs;
  logs.reserve(pts.size());
  for (const auto& [n, v] : pts) {
    if (!(n > 0.0) || !(v > 0.0))
      throw numeric_error("fit_power_law: nonpositive entry in window");
    logs.emplace_back(std::log(n), std::log(v));
  }
  const double m = static_cast<double>(logs.size());
  for (const auto& [x, y] : logs) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = m * sxx - sx * sx;
  FitResult r;
  r.points = logs.size();
  if (denom == 0.0) {
    // Single point (or degenerate abscissas): report a flat law through it.
    r.slope = 0.0;
    r.intercept = sy / m;
  } else {
    r.slope = (m * sxy - sx * sy) / denom;
    r.intercept = (sy - r.slope * sx) / m;
  }
  r.prefactor = std::exp(r.intercept);
  double rss = 0;
  for (const auto& [x, y] : logs) rss += sqr(y - (r.intercept + r.slope * x));
  r.residual_rms = std::sqrt(rss / m);
  r.n_lo = static_cast<std::size_t>(pts.front().first);
  r.n_hi = static_cast<std::size_t>(pts.back().first);
  return r;
}

FitResult fit_power_law(const std::vector<double>& seq, std::size_t n_lo,
                        std::size_t n_hi, std::size_t max_points) {
  if (n_lo < 1 || n_hi < n_lo || n_hi > seq.size())
    throw config_error("fit_power_law: window outside sequence range");
  std::vector<std::pair<double, double>> pts;
  std::size_t count = n_hi - n_lo + 1;
  if (count <= max_points) {
    for (std::size_t n = n_lo; n <= n_hi; ++n)
      pts.emplace_back(static_cast<double>(n), seq[n - 1]);
  } else {
    double ratio = std::pow(static_cast<double>(n_hi) / static_cast<double>(n_lo),
                            1.0 / static_cast<double>(max_points - 1));
    std::size_t prev = 0;
    double x = static_cast<double>(n_lo);
    for (std::size_t i = 0; i < max_points; ++i) {
      auto n = static_cast<std::size_t>(std::llround(x));
      n = std::clamp(n, n_lo, n_hi);
      if (n != prev) pts.emplace_back(static_cast<double>(n), seq[n - 1]);
      prev = n;
      x *= ratio;
    }
  }
  auto r = fit_power_law_points(pts);
  r.n_lo = n_lo;
  r.n_hi = n_hi;
  return r;
}

}  // namespace norb
