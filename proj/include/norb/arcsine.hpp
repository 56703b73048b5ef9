#pragma once
// Occupation-time limit laws: the two-ray arcsine density and its
// distribution function, a one-sided stable sampler, the simplex-valued
// ratio variable built from it, and a Kolmogorov-Smirnov distance for
// goodness-of-fit checks.

#include <functional>
#include <vector>

#include "norb/rng.hpp"

namespace norb {

// Point of the probability simplex: nonnegative components summing to 1.
struct SimplexPoint {
  std::vector<double> p;
};

// Checks the simplex invariants (components nonnegative, sum 1 within
// 1e-12) and returns the point; throws config_error otherwise.
SimplexPoint make_simplex(std::vector<double> components);

// Density at t of the two-ray occupation limit with ray weight p and tail
// index alpha. Needs alpha in (0,1), p in (0,1) and t strictly inside
// (0,1); the density diverges at the endpoints and alpha = 1 is a point
// mass, so those arguments are rejected.
double lamperti_pdf(double alpha, double p, double t);

// Distribution function of the same law, for t in [0,1]. Adaptive
// quadrature of the density after power substitutions that absorb the
// endpoint singularities; absolute error at most 1e-8.
double lamperti_cdf(double alpha, double p, double t);

// One-sided alpha-stable draw with Laplace transform exp(-s^alpha p_k),
// alpha in (0,1), built by the Kanter construction from one uniform and
// one unit-exponential draw. p_k = 0 returns 0 without consuming
// randomness.
double sample_stable(double alpha, double p_k, Xoshiro256pp& rng);

// Simplex-valued ratio (zeta_1,...,zeta_d) / sum of zeta_k with
// independent one-sided stable zeta_k of weights p_k. For alpha = 1 the
// ratio degenerates to the deterministic point p, which is returned
// without consuming randomness.
SimplexPoint sample_Z(double alpha, const SimplexPoint& p, Xoshiro256pp& rng);

// Sup distance between the empirical distribution of the samples (values
// in [0,1]) and the reference distribution function, evaluated exactly at
// the sample points.
double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf);

}  // namespace norb
