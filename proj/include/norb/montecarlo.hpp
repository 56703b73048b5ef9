#pragma once
// Orbit and ensemble experiments: occupation counts near the neutral fixed
// points, ensemble pushforwards and their time averages, empirical-measure
// summaries with Wasserstein comparisons against fixed-point mixtures,
// simplex coverage of occupation vectors, and correlation estimates.
// Stochastic ops draw every trajectory from its own derived seed stream, so
// results are reproducible at any worker count.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "norb/arcsine.hpp"
#include "norb/cells.hpp"
#include "norb/maps.hpp"
#include "norb/rng.hpp"

namespace norb {

// Absolutely continuous initial density on the phase interval, sampled by
// inverse CDF from a single uniform draw per sample.
struct InitialDensity {
  std::string tag;
  int shape_a = 0, shape_b = 0;     // beta-like shapes, integers >= 1
  std::vector<double> edges, cum;   // histogram support and cumulative mass

  double sample(const IntervalMap& m, Xoshiro256pp& rng) const;
};

InitialDensity uniform_density();
InitialDensity beta_like_density(int a, int b);
// edges in phase coordinates, strictly increasing; one mass per cell
InitialDensity histogram_density(std::vector<double> edges,
                                 std::vector<double> mass);

// Visit counts of the eps-neighborhoods of the fixed points over the first
// n orbit points.
struct OccupationCount {
  std::vector<std::int64_t> steps;  // per fixed point
  std::int64_t n = 0;
  bool flagged = false;  // float orbit froze away from a true fixed point

  std::vector<double> fractions() const;
};

// Exact step-by-step counting.
OccupationCount occupation_fractions(const IntervalMap& m, double x0,
                                     std::int64_t n, double eps);
// Cell-skip counting: excursions are resolved through the cell table in one
// step each, with affine placement inside cells. Statistics-grade.
OccupationCount occupation_fractions(const IntervalMap& m, const CellTable& t,
                                     double x0, std::int64_t n, double eps);

struct OccupationEnsemble {
  std::uint64_t map_hash = 0;
  std::int64_t n = 0;
  double eps = 0.0;
  std::string lambda_tag;
  std::uint64_t seed = 0;
  bool cell_skip = true;
  std::vector<std::vector<double>> samples;  // per orbit, per fixed point
  std::vector<double> leftover;              // per orbit, time outside all B_eps
  std::vector<std::uint8_t> flagged;         // per orbit
  int flagged_count = 0;
  // set when natural weights are supplied: KS of the first component against
  // the continuous occupation law (d = 2, alpha < 1), or the fraction of
  // samples within 0.1 of the weight vector (alpha = 1)
  double ks_first = -1.0;
  double concentration = -1.0;
};

OccupationEnsemble occupation_ensemble(const IntervalMap& m, const CellTable& t,
                                       const InitialDensity& lambda, int N,
                                       std::int64_t n, double eps,
                                       std::uint64_t seed,
                                       const std::vector<double>& p_bar = {},
                                       bool cell_skip = true, int workers = 1);

// Histogram summary of an empirical or pushed-forward measure: geometric
// bins toward each fixed point, uniform bins on the inducing set, exact
// eps-neighborhood masses, and Wasserstein-1 distances against mixtures of
// point masses at the fixed points.
struct MeasureSummary {
  std::vector<double> bin_left, bin_right, mass;
  double eps = 0.0;
  std::vector<double> eps_mass;  // per fixed point, same counting as occupation
  double y_mass = 0.0;           // mass on the inducing set
  double w1_to_pbar = -1.0;      // set when weights are supplied
  double w1_min = -1.0;          // minimum over the simplex grid
  std::vector<double> w1_argmin;
  std::int64_t n = 0;
  bool flagged = false;
};

// Summary of one orbit's first n points, by direct iteration.
MeasureSummary empirical_measure(const IntervalMap& m, const InducingSet& Y,
                                 double x0, std::int64_t n, double eps);

// Empirical law of f^n over N lambda-samples, one summary per requested n
// (ascending); each trajectory is advanced once with snapshots.
std::vector<MeasureSummary> pushforward(const IntervalMap& m, const CellTable& t,
                                        const InitialDensity& lambda,
                                        const std::vector<std::int64_t>& n_list,
                                        double eps, int N, std::uint64_t seed,
                                        const std::vector<double>& p_bar = {},
                                        bool cell_skip = true, int workers = 1);

// Time average over j = 0..n-1 of the pushed ensemble, by direct iteration.
MeasureSummary cesaro_pushforward(const IntervalMap& m, const InducingSet& Y,
                                  const InitialDensity& lambda, std::int64_t n,
                                  double eps, int N, std::uint64_t seed,
                                  const std::vector<double>& p_bar = {},
                                  int workers = 1);

// Occupation-vector path of one orbit against a delta-net of the simplex.
struct CoverageReport {
  double delta = 0.1;
  std::int64_t n_max = 0;
  double covering_radius = 0.0;
  std::vector<std::vector<double>> net;  // net points, one weight per fixed point
  std::vector<double> net_distance;      // distance from each net point to the path
  std::vector<double> vertex_closest;    // closest approach to each vertex
  bool flagged = false;
};

CoverageReport simplex_coverage(const IntervalMap& m, const CellTable& t,
                                double x0, std::int64_t n_max, double delta,
                                double eps, bool cell_skip = true);

// Observables for correlation estimates: subinterval indicators and
// polynomials in ascending-degree coefficients.
struct Observable {
  std::string tag;
  double a = 0.0, b = 0.0;
  std::vector<double> coef;

  double eval(double x) const;
  double lebesgue_integral(double lo, double hi) const;
  bool continuous() const { return tag != "indicator"; }
};

Observable indicator_observable(double a, double b);
Observable polynomial_observable(std::vector<double> coef);

struct CorrelationPoint {
  std::int64_t n = 0;
  double estimate = 0.0;
  double se = 0.0;
};

struct CorrelationReport {
  std::vector<CorrelationPoint> points;
  double psi_integral = 0.0;  // exact Lebesgue integral of psi
  double limit = 0.0;         // psi integral times the weighted phi at the fixed points
  bool has_limit = false;
};

// Monte Carlo estimate of the integral of psi times phi after n steps,
// against the factorized limit. phi must be continuous at every fixed
// point, so indicators are rejected.
CorrelationReport correlation(const IntervalMap& m, const CellTable& t,
                              const Observable& psi, const Observable& phi,
                              const std::vector<std::int64_t>& n_list, int N,
                              std::uint64_t seed,
                              const std::vector<double>& p_bar = {},
                              bool cell_skip = true, int workers = 1);

// Sup distance between the empirical distribution functions of two samples.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace norb
