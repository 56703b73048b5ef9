#include "norb/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "norb/montecarlo.hpp"
#include "norb/series.hpp"
#include "norb/util.hpp"

namespace norb {

namespace {

// Uniform value lattice per inducing interval; values live at cell midpoints
// and interpolate linearly, clamped to a constant in the outer half-cells.
struct GridLayout {
  std::vector<double> lo;
  std::vector<double> width;
  std::vector<int> count;
  std::vector<int> offset;
  int total = 0;
};

GridLayout make_layout(const InducingSet& Y, int grid_size) {
  GridLayout L;
  const std::size_t rows = Y.y_intervals.size();
  L.lo.resize(rows);
  L.width.resize(rows);
  L.count.resize(rows);
  L.offset.resize(rows);
  int off = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& [a, b] = Y.y_intervals[r];
    const int n =
        std::max(8, int(std::llround(double(grid_size) * (b - a) / Y.y_length)));
    L.lo[r] = a;
    L.width[r] = (b - a) / n;
    L.count[r] = n;
    L.offset[r] = off;
    off += n;
  }
  L.total = off;
  return L;
}

struct Node {
  int idx = 0;
  double frac = 0.0;
};

// Values sit at cell midpoints; the outer half-cells extrapolate the edge
// pair linearly (frac outside [0,1]) so the scheme stays second order at
// the domain ends.
Node locate(const GridLayout& L, double x) {
  std::size_t r = 0;
  while (r + 1 < L.lo.size() &&
         x > L.lo[r] + L.width[r] * double(L.count[r]))
    ++r;
  const double u = (x - L.lo[r]) / L.width[r] - 0.5;
  int i0 = int(std::floor(u));
  if (i0 < 0) i0 = 0;
  if (i0 > L.count[r] - 2) i0 = L.count[r] - 2;
  return {L.offset[r] + i0, u - double(i0)};
}

struct Term {
  int idx = 0;
  float frac = 0.0f;
  double w = 0.0;
};

// Depths past this cap land in sub-grid cells, so consecutive preimages are
// merged per grid cell at their weight-averaged position.
constexpr int exact_depth_cap = 1024;

// Newton with a warm start for the millions of branch inversions in the
// operator build; falls back to the branch's own bracketed solver whenever
// an iterate leaves the domain or stalls.
double warm_inverse(const Branch& b, double y, double x0) {
  double x = std::min(std::max(x0, b.lo), b.hi);
  for (int it = 0; it < 24; ++it) {
    const double r = b.eval(x) - y;
    if (std::abs(r) < 1e-14) return x;
    const double xn = x - r / b.deriv(x);
    if (!(xn >= b.lo && xn <= b.hi)) break;
    x = xn;
  }
  return b.inverse(y);
}

// One backward ladder step, warm-started at the current depth; exact
// agreement with chain_backward is not needed here, only |f(z) - w| small.
double warm_back(const IntervalMap& m, const SideChain& c, double w) {
  if (w <= c.z_pure) {
    double z = w;
    for (int it = 0; it < 24; ++it) {
      const double p = c.B * std::pow(z, c.q - 1.0);
      const double r = z + p * z - w;
      if (std::abs(r) < 1e-15 * w) return z;
      const double zn = z - r / (1.0 + c.q * p);
      if (!(zn > 0.0 && zn < w)) break;
      z = zn;
    }
    return chain_backward(m, c, w).z;
  }
  const Branch& cb = m.branches[std::size_t(c.branch_id)];
  const double xi = m.fixed_points[std::size_t(c.fp_index)];
  const double z = c.dir * (warm_inverse(cb, xi + c.dir * w, xi + c.dir * w) - xi);
  if (!(z > 0.0 && z < w)) return chain_backward(m, c, w).z;
  return z;
}

}  // namespace

double DensityGrid::cell_width(std::size_t row) const {
  const auto& [a, b] = intervals[row];
  return (b - a) / double(values[row].size());
}

double DensityGrid::eval(double y) const {
  std::size_t r = 0;
  while (r + 1 < intervals.size() && y > intervals[r].second) ++r;
  const double w = cell_width(r);
  const auto& v = values[r];
  const double u = (y - intervals[r].first) / w - 0.5;
  int i0 = int(std::floor(u));
  if (i0 < 0) i0 = 0;
  if (i0 > int(v.size()) - 2) i0 = int(v.size()) - 2;
  const double frac = u - double(i0);
  return (1.0 - frac) * v[std::size_t(i0)] + frac * v[std::size_t(i0) + 1];
}

double DensityGrid::integral() const {
  NeumaierSum s;
  for (std::size_t r = 0; r < intervals.size(); ++r) {
    const double w = cell_width(r);
    for (double v : values[r]) s.add(w * v);
  }
  return s.value();
}

double DensityGrid::max_slope() const {
  double out = 0.0;
  for (std::size_t r = 0; r < intervals.size(); ++r) {
    const double w = cell_width(r);
    const auto& v = values[r];
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
      out = std::max(out, std::abs(v[i + 1] - v[i]) / w);
  }
  return out;
}

DensityGrid induced_density(const IntervalMap& m, const CellTable& t,
                            int grid_size, double tol) {
  if (t.n_max < 1000)
    throw config_error("density estimation needs a cell table of depth at least 1000");
  if (grid_size < 256)
    throw config_error("density grid needs at least 256 cells");

  const GridLayout L = make_layout(t.Y, grid_size);
  const int G = L.total;

  // the operator drops return branches deeper than the table; their total
  // phase-space length bounds the mass restored by renormalization
  double defect = 0.0;
  for (const YCellFamily& fam : t.families) {
    const SideChain& c = t.chains[std::size_t(fam.chain)];
    const Branch& src = m.branches[std::size_t(fam.source_branch)];
    const double xi = m.fixed_points[std::size_t(c.fp_index)];
    defect += std::abs(src.inverse(xi + c.dir * c.edge.back()) - src.inverse(xi));
  }
  // the dropped preimage mass is redistributed by renormalization, which
  // biases h at the order of the defect; past a few percent that is no
  // longer a density estimate worth returning
  if (defect > 0.05 * t.Y.y_length)
    throw config_error("truncated return branches hold " +
                       std::to_string(100.0 * defect / t.Y.y_length) +
                       "% of the inducing set: deepen the cell table");

  // node positions, one value per grid cell
  std::vector<double> node_x(std::size_t(G), 0.0);
  for (std::size_t r = 0; r < L.lo.size(); ++r)
    for (int i = 0; i < L.count[r]; ++i)
      node_x[std::size_t(L.offset[r] + i)] = L.lo[r] + (double(i) + 0.5) * L.width[r];

  // preimage expansion of every node through the return branches: one term
  // per single-step return, one per (chain depth, source branch) up to the
  // merge cap, then one per touched grid cell
  std::vector<Term> terms;
  terms.reserve(std::size_t(G) * std::size_t(std::min(t.n_max, exact_depth_cap) + 16));
  std::vector<std::size_t> begin(std::size_t(G) + 1, 0);

  struct Agg {
    double w = 0.0, wx = 0.0;
    int idx = -1;
  };

  for (int g = 0; g < G; ++g) {
    begin[std::size_t(g)] = terms.size();
    const double y = node_x[std::size_t(g)];

    for (const Branch& b : m.branches) {
      const double xt = b.inverse(y);
      if (t.Y.contains(xt)) {
        const Node nd = locate(L, xt);
        terms.push_back({nd.idx, float(nd.frac), 1.0 / b.deriv(xt)});
      }
    }

    for (const SideChain& c : t.chains) {
      const double xi = m.fixed_points[std::size_t(c.fp_index)];
      const Branch& cb = m.branches[std::size_t(c.branch_id)];
      const double xb = xi + c.dir * c.edge[0];
      const double img = cb.eval(xb);
      if (y <= std::min(xb, img) || y >= std::max(xb, img)) continue;

      const double p1 = cb.inverse(y);
      double zeta = c.dir * (p1 - xi);
      double W = 1.0 / cb.deriv(p1);
      std::vector<Agg> agg(m.branches.size());
      std::vector<double> xwarm(m.branches.size(), 0.0);
      std::vector<char> warm(m.branches.size(), 0);
      for (int n = 1; n <= c.n_max; ++n) {
        const double xline = xi + c.dir * zeta;
        for (int j = 0; j < int(m.branches.size()); ++j) {
          if (j == c.branch_id) continue;
          const Branch& src = m.branches[std::size_t(j)];
          const double xt = warm[std::size_t(j)]
                                ? warm_inverse(src, xline, xwarm[std::size_t(j)])
                                : src.inverse(xline);
          xwarm[std::size_t(j)] = xt;
          warm[std::size_t(j)] = 1;
          const double wj = W / src.deriv(xt);
          if (n <= exact_depth_cap) {
            const Node nd = locate(L, xt);
            terms.push_back({nd.idx, float(nd.frac), wj});
          } else {
            Agg& a = agg[std::size_t(j)];
            const int idx = locate(L, xt).idx;
            if (a.idx != -1 && idx != a.idx) {
              const Node nd = locate(L, a.wx / a.w);
              terms.push_back({nd.idx, float(nd.frac), a.w});
              a = Agg{};
            }
            a.idx = idx;
            a.w += wj;
            a.wx += wj * xt;
          }
        }
        if (n == c.n_max) break;
        zeta = warm_back(m, c, zeta);
        W /= cb.deriv(xi + c.dir * zeta);
      }
      for (Agg& a : agg) {
        if (a.idx == -1) continue;
        const Node nd = locate(L, a.wx / a.w);
        terms.push_back({nd.idx, float(nd.frac), a.w});
      }
    }
  }
  begin[std::size_t(G)] = terms.size();

  std::vector<double> cur(std::size_t(G), 1.0 / t.Y.y_length);
  std::vector<double> nxt(std::size_t(G), 0.0);
  double resid = 0.0;
  int sweep = 0;
  const int sweep_cap = 5000;
  for (; sweep < sweep_cap; ++sweep) {
    for (int g = 0; g < G; ++g) {
      double s = 0.0;
      for (std::size_t k = begin[std::size_t(g)]; k < begin[std::size_t(g) + 1]; ++k) {
        const Term& tm = terms[k];
        s += tm.w * ((1.0 - double(tm.frac)) * cur[std::size_t(tm.idx)] +
                     double(tm.frac) * cur[std::size_t(tm.idx) + 1]);
      }
      nxt[std::size_t(g)] = s;
    }
    double integ = 0.0;
    for (std::size_t r = 0; r < L.lo.size(); ++r) {
      double row = 0.0;
      for (int i = 0; i < L.count[r]; ++i) row += nxt[std::size_t(L.offset[r] + i)];
      integ += row * L.width[r];
    }
    // residual is the distance of the renormalized image from the iterate;
    // the update averages with the previous iterate because a two-branch
    // return map alternates the two sides of the cut, leaving the plain
    // operator with a -1 eigenvalue that never settles under power steps
    resid = 0.0;
    for (int g = 0; g < G; ++g) {
      const double img = nxt[std::size_t(g)] / integ;
      resid = std::max(resid, std::abs(img - cur[std::size_t(g)]));
      nxt[std::size_t(g)] = 0.5 * (cur[std::size_t(g)] + img);
    }
    cur.swap(nxt);
    if (resid < tol) break;
  }
  if (resid >= tol)
    throw numeric_error("transfer-operator iteration did not converge: residual " +
                        std::to_string(resid));

  DensityGrid out;
  out.intervals = t.Y.y_intervals;
  out.values.resize(L.lo.size());
  for (std::size_t r = 0; r < L.lo.size(); ++r)
    out.values[r].assign(cur.begin() + L.offset[r],
                         cur.begin() + L.offset[r] + L.count[r]);
  out.residual = resid;
  out.sweeps = sweep + 1;
  out.truncation_defect = defect;
  return out;
}

namespace {

bool in_grid_domain(const DensityGrid& h, double x) {
  for (const auto& [lo, hi] : h.intervals)
    if (x >= lo - 1e-12 && x <= hi + 1e-12) return true;
  return false;
}

void finish_weights(NaturalWeights& w) {
  double s = 0.0;
  for (double ck : w.c) s += ck;
  if (!(s > 0.0)) throw numeric_error("tail constants are not positive");
  w.p_bar.resize(w.c.size());
  for (std::size_t k = 0; k < w.c.size(); ++k) w.p_bar[k] = w.c[k] / s;
}

}  // namespace

NaturalWeights natural_weights_formula(const IntervalMap& m, const DensityGrid& h) {
  NaturalWeights w;
  w.method = "formula";
  const int d = m.d();
  w.c.assign(std::size_t(d), 0.0);
  if (m.family == Family::thaler) {
    for (int k = 0; k < d; ++k) {
      const double xi = m.fixed_points[std::size_t(k)];
      double s = 0.0;
      for (int j = 0; j < d; ++j) {
        if (j == k) continue;
        const double x = m.branches[std::size_t(j)].inverse(xi);
        if (!in_grid_domain(h, x))
          throw config_error("natural-weight anchor lies outside the inducing set");
        s += h.eval(x) / m.branches[std::size_t(j)].deriv(x);
      }
      w.c[std::size_t(k)] = double(m.sidedness[std::size_t(k)]) *
                            std::pow(m.bk[std::size_t(k)], -m.alpha) *
                            std::pow(m.alpha, m.alpha) * s;
    }
  } else {
    // both endpoint constants anchor at the interface point, where the
    // opposite branch sends its neutral endpoint
    if (!in_grid_domain(h, 0.0))
      throw config_error("natural-weight anchor lies outside the inducing set");
    const double h0 = h.eval(0.0);
    const double sp = std::pow(m.a_plus, -1.0 / m.k_plus);
    const double sm = std::pow(m.a_minus, -1.0 / m.k_minus);
    w.c = {h0 * sp * std::pow(m.ell * m.b_minus, -m.alpha),
           h0 * sm * std::pow(m.ell * m.b_plus, -m.alpha)};
    w.c_alt = {h0 * sp * std::pow(m.ell * m.b_minus, -1.0 / m.alpha) * m.alpha * m.alpha,
               h0 * sm * std::pow(m.ell * m.b_plus, -1.0 / m.alpha) * m.alpha * m.alpha};
  }
  finish_weights(w);
  return w;
}

NaturalWeights natural_weights_tailfit(const IntervalMap& m, const CellTable& t,
                                       const DensityGrid& h) {
  const TailReport rep =
      tail_statistics(m, t, [&h](double y) { return h.eval(y); });
  for (std::size_t k = 0; k < rep.plateau_ok.size(); ++k) {
    if (!rep.plateau_ok[k])
      throw numeric_error("tail constant plateau not reached: residual slope " +
                          std::to_string(rep.plateau_slope[k]));
  }
  NaturalWeights w;
  w.method = "tail-fit";
  w.c = rep.c_hat;
  finish_weights(w);
  return w;
}

DecayReport return_mass_decay(const IntervalMap& m, const CellTable& t,
                              const InitialDensity& lambda,
                              const std::vector<std::int64_t>& n_list, int N,
                              std::uint64_t seed, int workers) {
  if (n_list.empty()) throw config_error("decay needs at least one horizon");
  for (std::int64_t n : n_list)
    if (n < 10) throw config_error("decay horizons start at 10");

  const DensityGrid h = induced_density(m, t, 256, 1e-8);
  const NaturalWeights w = natural_weights_formula(m, h);
  double c_tau = 0.0;
  for (double c : w.c) c_tau += c;

  DecayReport rep;
  rep.n_list = n_list;
  rep.alpha = m.alpha;

  // the neighborhood radius only shapes the histogram summary, which this
  // estimate discards; any radius the map geometry admits will do
  const auto ps = pushforward(m, t, lambda, n_list, 1e-3, N, seed, {}, true,
                              workers);
  for (const MeasureSummary& s : ps) {
    rep.mass.push_back(s.y_mass);
    rep.se.push_back(std::sqrt(s.y_mass * (1.0 - s.y_mass) / double(N)));
  }
  for (std::size_t i = 0; i < rep.mass.size(); ++i)
    if (rep.mass[i] <= 0.0 || rep.se[i] > 0.2 * rep.mass[i])
      throw numeric_error("ensemble too small for the largest horizon; raise N");

  if (m.alpha < 1.0) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < rep.mass.size(); ++i)
      pts.push_back({double(n_list[i]), rep.mass[i]});
    const FitResult f = fit_power_law_points(pts);
    rep.exponent = f.slope;
    rep.prefactor = f.prefactor;
    rep.residual = f.residual_rms;
    rep.predicted = std::sin(M_PI * m.alpha) / (M_PI * c_tau);
  } else {
    double wsum = 0.0, csum = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < rep.mass.size(); ++i) {
      const double l = std::log(double(n_list[i]));
      const double c = rep.mass[i] * l, v = rep.se[i] * l;
      csum += c / (v * v);
      wsum += 1.0 / (v * v);
      lo = i == 0 ? c : std::min(lo, c);
      hi = i == 0 ? c : std::max(hi, c);
    }
    rep.prefactor = csum / wsum;
    rep.predicted = 1.0 / c_tau;
    rep.variation = (hi - lo) / rep.prefactor;
  }
  return rep;
}

}  // namespace norb
