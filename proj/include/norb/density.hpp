#pragma once
// Invariant density of the first-return map on the inducing set, estimated
// by transfer-operator iteration over the return branches of the cell
// table, and the natural-measure weights derived from it.

#include <string>
#include <utility>
#include <vector>

#include "norb/cells.hpp"
#include "norb/maps.hpp"

namespace norb {

struct InitialDensity;

// Piecewise view of the return-map invariant density h on the inducing set:
// one uniform grid row per inducing interval, one value per grid cell,
// interpolated linearly between cell midpoints. Normalized so the integral
// of h over the inducing set is 1.
struct DensityGrid {
  std::vector<std::pair<double, double>> intervals;
  std::vector<std::vector<double>> values;
  double residual = 0.0;  // sup change of the last operator sweep
  int sweeps = 0;
  // total length of the return branches deeper than the cell table; their
  // preimage mass is dropped by the operator and restored by renormalization
  double truncation_defect = 0.0;

  double eval(double y) const;
  double integral() const;
  double cell_width(std::size_t row) const;
  double max_slope() const;  // steepest rise between adjacent cells
};

DensityGrid induced_density(const IntervalMap& m, const CellTable& t,
                            int grid_size, double tol);

struct NaturalWeights {
  std::vector<double> p_bar;  // weights on the fixed points, sum 1
  std::vector<double> c;      // return tail constant per fixed point
  // second reading of the interface-family endpoint constants, with the
  // drift factor exponent flipped to -1/alpha; kept so the tail fit can
  // arbitrate between the two (empty for the [0,1] family)
  std::vector<double> c_alt;
  std::string method;
};

NaturalWeights natural_weights_formula(const IntervalMap& m, const DensityGrid& h);
NaturalWeights natural_weights_tailfit(const IntervalMap& m, const CellTable& t,
                                       const DensityGrid& h);

// Decay of the mass an evolving ensemble keeps on the inducing set. Below
// the critical exponent the model is C*n^(alpha-1); at alpha = 1 it is
// C/log n and the fitted power law is replaced by the spread of
// mass*log n over the window.
struct DecayReport {
  std::vector<std::int64_t> n_list;
  std::vector<double> mass;  // measured ensemble mass on Y per horizon
  std::vector<double> se;    // binomial standard error per horizon
  double alpha = 0.0;
  double exponent = 0.0;   // fitted log-log slope; 0 at the critical exponent
  double prefactor = 0.0;  // fitted C
  double predicted = 0.0;  // C from the return-tail constants and mu(Y) = 1
  double variation = -1.0;  // alpha = 1 only: (max - min)/mean of mass*log n
  double residual = 0.0;    // rms log residual of the power fit
};

DecayReport return_mass_decay(const IntervalMap& m, const CellTable& t,
                              const InitialDensity& lambda,
                              const std::vector<std::int64_t>& n_list, int N,
                              std::uint64_t seed, int workers = 1);

}  // namespace norb
