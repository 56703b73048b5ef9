#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "norb/arcsine.hpp"
#include "norb/rng.hpp"
#include "norb/util.hpp"

using namespace norb;

namespace {

constexpr double kPi = std::numbers::pi;

double arcsine_cdf(double t) { return 2.0 / kPi * std::asin(std::sqrt(t)); }

// Sup distance between two empirical distribution functions, by a merge
// over both sorted samples.
double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

struct MeanCheck {
  std::vector<double> mean;
  std::vector<double> se;
};

MeanCheck component_means(double alpha, const SimplexPoint& p, int n,
                          std::uint64_t seed) {
  Xoshiro256pp rng(seed);
  const std::size_t d = p.p.size();
  std::vector<double> sum(d, 0.0);
  std::vector<double> sum2(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const SimplexPoint z = sample_Z(alpha, p, rng);
    for (std::size_t k = 0; k < d; ++k) {
      sum[k] += z.p[k];
      sum2[k] += z.p[k] * z.p[k];
    }
  }
  MeanCheck out;
  out.mean.resize(d);
  out.se.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    out.mean[k] = sum[k] / n;
    const double var = sum2[k] / n - out.mean[k] * out.mean[k];
    out.se[k] = std::sqrt(var / n);
  }
  return out;
}

}  // namespace

TEST_CASE("density and distribution reduce to the classical arcsine law") {
  for (int i = 1; i <= 9; ++i) {
    const double t = 0.1 * i;
    const double ref = 1.0 / (kPi * std::sqrt(t * (1.0 - t)));
    CHECK(std::abs(lamperti_pdf(0.5, 0.5, t) - ref) < 1e-12);
  }
  CHECK(std::abs(lamperti_pdf(0.5, 0.5, 0.5) - 2.0 / kPi) < 1e-12);
  for (double t : {0.25, 0.5, 0.75})
    CHECK(std::abs(lamperti_cdf(0.5, 0.5, t) - arcsine_cdf(t)) < 1e-8);
  CHECK(lamperti_cdf(0.5, 0.5, 0.0) == 0.0);
  CHECK(std::abs(lamperti_cdf(0.5, 0.5, 1.0) - 1.0) < 1e-8);
}

TEST_CASE("density symmetry and domain rejection") {
  Xoshiro256pp rng(2024);
  for (double alpha : {0.3, 0.5, 0.7})
    for (int i = 0; i < 64; ++i) {
      const double p = 0.05 + 0.9 * rng.uniform01();
      const double t = 0.01 + 0.98 * rng.uniform01();
      const double lhs = lamperti_pdf(alpha, p, t);
      const double rhs = lamperti_pdf(alpha, 1.0 - p, 1.0 - t);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
      CHECK(lhs > 0.0);
    }

  CHECK_THROWS_AS(lamperti_pdf(0.5, 0.5, 0.0), config_error);
  CHECK_THROWS_AS(lamperti_pdf(0.5, 0.5, 1.0), config_error);
  CHECK_THROWS_AS(lamperti_pdf(1.0, 0.5, 0.5), config_error);
  CHECK_THROWS_AS(lamperti_pdf(0.0, 0.5, 0.5), config_error);
  CHECK_THROWS_AS(lamperti_pdf(0.5, 0.0, 0.5), config_error);
  CHECK_THROWS_AS(lamperti_pdf(0.5, 1.0, 0.5), config_error);
  CHECK_THROWS_AS(lamperti_cdf(0.5, 0.5, -0.1), config_error);
  CHECK_THROWS_AS(lamperti_cdf(0.5, 0.5, 1.1), config_error);
  CHECK_THROWS_AS(lamperti_cdf(1.0, 0.5, 0.5), config_error);
}

TEST_CASE("distribution function is monotone and normalized") {
  struct Pair {
    double alpha, p;
  };
  for (Pair c : {Pair{1.0 / 3.0, 0.5}, Pair{0.5, 0.3}, Pair{0.7, 0.6}}) {
    double prev = 0.0;
    for (int i = 1; i <= 99; ++i) {
      const double cur = lamperti_cdf(c.alpha, c.p, i / 100.0);
      CHECK(cur > prev);
      prev = cur;
    }
    CHECK(prev < 1.0);
  }
  for (double alpha : {0.15, 0.3, 0.5, 0.7, 0.9})
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9})
      CHECK(std::abs(lamperti_cdf(alpha, p, 1.0) - 1.0) < 1e-8);
}

TEST_CASE("stable sampler matches its Laplace transform") {
  Xoshiro256pp zero_rng(1);
  CHECK(sample_stable(0.5, 0.0, zero_rng) == 0.0);
  CHECK_THROWS_AS(sample_stable(1.0, 1.0, zero_rng), config_error);
  CHECK_THROWS_AS(sample_stable(0.5, -1.0, zero_rng), config_error);

  for (double alpha : {0.4, 0.7}) {
    Xoshiro256pp r1(99);
    Xoshiro256pp r2(99);
    const double scale = std::pow(2.0, 1.0 / alpha);
    for (int i = 0; i < 100; ++i) {
      const double base = sample_stable(alpha, 1.0, r1);
      const double doubled = sample_stable(alpha, 2.0, r2);
      CHECK(base >= 0.0);
      CHECK(doubled == doctest::Approx(scale * base).epsilon(1e-12));
    }
  }

  const int n = 1000000;
  Xoshiro256pp rng(424242);
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[i] = sample_stable(0.5, 1.0, rng);
  for (double t : {0.1, 1.0, 10.0}) {
    double sum = 0.0;
    double sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = std::exp(-t * draws[i]);
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    const double target = std::exp(-std::sqrt(t));
    CHECK(std::abs(mean - target) <= 4.0 * se);
  }
}

TEST_CASE("simplex ratio variable: degenerate cases and moments") {
  CHECK_THROWS_AS(make_simplex({}), config_error);
  CHECK_THROWS_AS(make_simplex({0.5, -0.1, 0.6}), config_error);
  CHECK_THROWS_AS(make_simplex({0.5, 0.6}), config_error);

  Xoshiro256pp rng(7);
  const SimplexPoint p = make_simplex({0.3, 0.7});
  const SimplexPoint at_one = sample_Z(1.0, p, rng);
  CHECK(at_one.p[0] == 0.3);
  CHECK(at_one.p[1] == 0.7);

  const SimplexPoint with_zero = sample_Z(0.5, make_simplex({0.0, 1.0}), rng);
  CHECK(with_zero.p[0] == 0.0);
  CHECK(with_zero.p[1] == 1.0);
  CHECK_THROWS_AS(sample_Z(1.5, p, rng), config_error);

  struct Case {
    double alpha;
    std::vector<double> p;
    std::uint64_t seed;
  };
  const std::vector<Case> cases = {
      {0.5, {0.3, 0.7}, 11},
      {1.0 / 3.0, {0.5, 0.5}, 12},
      {0.7, {0.6, 0.4}, 13},
      {0.5, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 14},
  };
  for (const Case& c : cases) {
    const MeanCheck mc =
        component_means(c.alpha, make_simplex(c.p), 1000000, c.seed);
    for (std::size_t k = 0; k < c.p.size(); ++k)
      CHECK(std::abs(mc.mean[k] - c.p[k]) <= 3.0 * mc.se[k]);
  }
}

TEST_CASE("three exchangeable rays have matching marginals") {
  const SimplexPoint p = make_simplex({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  Xoshiro256pp rng(21);
  const int n = 100000;
  std::vector<std::vector<double>> marg(3, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    const SimplexPoint z = sample_Z(0.5, p, rng);
    for (std::size_t k = 0; k < 3; ++k) marg[k][std::size_t(i)] = z.p[k];
  }
  CHECK(ks_two_sample(marg[0], marg[1]) <= 0.01);
  CHECK(ks_two_sample(marg[0], marg[2]) <= 0.01);
  CHECK(ks_two_sample(marg[1], marg[2]) <= 0.01);
}

TEST_CASE("two-ray components follow the continuous distribution") {
  struct Pair {
    double alpha, p;
    std::uint64_t seed;
  };
  const int n = 100000;
  const double bound = 1.63 / std::sqrt(static_cast<double>(n));
  for (Pair c : {Pair{1.0 / 3.0, 0.5, 31}, Pair{0.5, 0.3, 32},
                 Pair{0.7, 0.6, 33}}) {
    Xoshiro256pp rng(c.seed);
    const SimplexPoint p = make_simplex({c.p, 1.0 - c.p});
    std::vector<double> first(n);
    for (int i = 0; i < n; ++i)
      first[std::size_t(i)] = sample_Z(c.alpha, p, rng).p[0];
    const double d = ks_statistic(
        first, [&](double t) { return lamperti_cdf(c.alpha, c.p, t); });
    CHECK(d <= bound);
  }
}

TEST_CASE("complement of the first component follows the swapped law") {
  struct Pair {
    double alpha, p;
  };
  const int n = 50000;
  const double bound = 1.63 * std::sqrt(2.0 / static_cast<double>(n));
  std::uint64_t seed = 51;
  for (Pair c : {Pair{1.0 / 3.0, 0.5}, Pair{0.5, 0.3}, Pair{0.7, 0.6}}) {
    Xoshiro256pp ra(seed++);
    Xoshiro256pp rb(seed++);
    const SimplexPoint p = make_simplex({c.p, 1.0 - c.p});
    const SimplexPoint q = make_simplex({1.0 - c.p, c.p});
    std::vector<double> flipped(n);
    std::vector<double> swapped(n);
    for (int i = 0; i < n; ++i) {
      flipped[std::size_t(i)] = 1.0 - sample_Z(c.alpha, p, ra).p[0];
      swapped[std::size_t(i)] = sample_Z(c.alpha, q, rb).p[0];
    }
    CHECK(ks_two_sample(flipped, swapped) <= bound);
  }
}

TEST_CASE("KS statistic exactness and null calibration") {
  CHECK_THROWS_AS(ks_statistic({}, arcsine_cdf), config_error);
  CHECK_THROWS_AS(ks_statistic({-0.2, 0.5}, arcsine_cdf), config_error);
  CHECK_THROWS_AS(ks_statistic({0.5, 1.2}, arcsine_cdf), config_error);

  const std::vector<double> constant(1000, 0.5);
  CHECK(ks_statistic(constant, arcsine_cdf) == doctest::Approx(0.5).epsilon(1e-12));
  const std::vector<double> low(1000, 0.25);
  CHECK(ks_statistic(low, arcsine_cdf) ==
        doctest::Approx(1.0 - arcsine_cdf(0.25)).epsilon(1e-12));

  const int n = 10000;
  Xoshiro256pp rng(61);
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    xs[std::size_t(i)] = std::pow(std::sin(0.5 * kPi * u), 2.0);
  }
  const double d = ks_statistic(xs, arcsine_cdf);
  CHECK(d <= 1.63 / std::sqrt(static_cast<double>(n)));
  CHECK(d >= 0.0);
  CHECK(d <= 1.0);
}
