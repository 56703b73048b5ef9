#pragma once
// Inducing set, Markov cell tables, and the first-return map: backward
// chains of cell edges in distance coordinates per neutral side, the
// derived return-time cells on the inducing set, and their tail laws.

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "norb/maps.hpp"
#include "norb/series.hpp"

namespace norb {

struct InducingSet {
  std::vector<std::pair<double, double>> y_intervals;  // components of Y, ordered
  std::vector<std::pair<double, double>> x_intervals;  // X_k, one per fixed point
  double y_length = 0.0;
  double gamma_minus = 0.0, gamma_plus = 0.0;  // interface families only

  bool contains(double x) const;
};

InducingSet build_inducing_set(const IntervalMap& m);

// Edges of the X-cells on one neutral side: edge[0] is the X-boundary
// distance and X_{k,n} spans z in [edge[n], edge[n-1]], so clen[n] is
// exactly B*edge[n]^q wherever the pure z-law applied.
struct SideChain {
  int fp_index = 0;
  int dir = +1;
  int branch_id = 0;
  double B = 1.0, q = 2.0, z_pure = 1.0;
  std::vector<double> edge;  // size n_max + 1
  std::vector<double> clen;  // size n_max + 1, [0] unused
  int n_max = 0;
  bool truncated = false;
};

// Return cells from one source branch entering one chain: the cell with
// X-depth n has return time n + 1; len uses the derivative transport of
// the X-cell length, mid is the cell midpoint on the source side.
struct YCellFamily {
  int source_branch = 0;
  int chain = 0;
  std::vector<double> len, mid;  // size n_max + 1, [0] unused
  std::vector<double> lo, hi;    // populated when n_max <= 100000
};

struct CellTable {
  std::uint64_t map_hash = 0;
  double alpha = 0.5;
  int n_max = 0;
  InducingSet Y;
  std::vector<SideChain> chains;
  std::vector<YCellFamily> families;

  int chain_index(int fp_index, int dir) const;
};

CellTable build_cells(const IntervalMap& m, const InducingSet& Y, int n_max);

// One backward step of the excursion ladder on a chain: the unique z with a
// single forward step from z landing at w, plus the cell length w - z
// (cancellation-free in the pure-law region).
struct BackStep {
  double z = 0.0;
  double len = 0.0;
};

BackStep chain_backward(const IntervalMap& m, const SideChain& c, double w);

struct ReturnMapSample {
  double entry = 0.0;
  std::int64_t tau = 0;
  std::vector<std::int64_t> tau_k;
  double exit = 0.0;
  bool stagnated = false;  // float fixed point hit or step cap exceeded
};

ReturnMapSample return_orbit(const IntervalMap& m, const InducingSet& Y, double x,
                             std::int64_t cap = 1000000000LL);

struct ReturnClass {
  std::int64_t tau = 1;
  int fp_index = -1;  // -1 for an immediate return
  int chain = -1;
  std::int64_t depth = 0;
  bool beyond_table = false;
};

// locates the return cell of y in one map application plus an edge search
ReturnClass classify_return(const IntervalMap& m, const CellTable& t, double y);

struct ChainFit {
  int index = 0;  // chain or family index
  FitResult fit;
  double expected_slope = 0.0, expected_prefactor = 0.0;
  bool pass = false;
};

struct CellAsymptotics {
  std::vector<ChainFit> x_fits;
  std::vector<ChainFit> y_fits;
  bool pass = false;
};

CellAsymptotics cell_asymptotics(const IntervalMap& m, const CellTable& t);

struct TailReport {
  double alpha = 0.5;
  // per fixed point, indexed by n in [1, n_max]; [0] unused
  std::vector<std::vector<double>> mass_eq;  // measure(tau^(k) = n)
  std::vector<std::vector<double>> mass_gt;  // measure(tau^(k) > n), exact interval transport
  std::vector<double> tau_eq, tau_gt;        // measure(tau = n), measure(tau > n)
  std::vector<double> c_hat;                 // plateau mean of n^alpha * mass_gt
  std::vector<double> plateau_slope;
  std::vector<bool> plateau_ok;
  double c_tau_hat = 0.0;
  FitResult tail_fit;  // exponent of measure(tau > n) over the window
  double h4_ratio = 0.0;
  bool h4_bounded = false;
};

// weights are Lebesgue unless a density evaluator is supplied
TailReport tail_statistics(const IntervalMap& m, const CellTable& t,
                           const std::function<double(double)>& h = {});

}  // namespace norb
