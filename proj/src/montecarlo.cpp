#include "norb/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>

#include "norb/util.hpp"

namespace norb {

namespace {

constexpr double kBinRatio = 1.5;
constexpr int kNeutralBins = 64;   // geometric bins per fixed point
constexpr int kUniformBins = 128;  // uniform bins across the inducing set
// excursion depths beyond any reachable time budget collapse to a sentinel
constexpr std::int64_t kDeepDepth = std::int64_t(1) << 62;

void check_phase(const IntervalMap& m, double x0) {
  if (!(x0 >= m.x_min && x0 <= m.x_max))
    throw config_error("initial point lies outside the phase interval");
}

void check_eps(const IntervalMap& m, double eps) {
  if (!(eps > 0.0) || eps >= m.x_max - m.x_min)
    throw config_error("neighborhood radius must be positive and smaller than the phase interval");
  for (std::size_t i = 0; i + 1 < m.fixed_points.size(); ++i)
    if (m.fixed_points[i + 1] - m.fixed_points[i] <= 2.0 * eps)
      throw config_error("fixed-point neighborhoods overlap; shrink eps");
}

// Runs body(index, worker) over 0..N-1. Work stealing is dynamic, so any
// output that must be reproducible has to go into per-index slots or
// per-worker integer accumulators.
void run_indexed(int workers, int N,
                 const std::function<void(int, int)>& body) {
  if (workers <= 1 || N <= 1) {
    for (int i = 0; i < N; ++i) body(i, 0);
    return;
  }
  const int nw = std::min(workers, N);
  std::atomic<int> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(nw));
  for (int w = 0; w < nw; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < N && !stop.load();
             i = next.fetch_add(1))
          body(i, w);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
        stop.store(true);
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// Cell geometry of one neutral side with the table extended beyond its
// depth by the pure-drift asymptotic edge law.
struct ChainGeom {
  const SideChain* sc = nullptr;
  double xi = 0.0;
  int dir = +1;
  int branch = 0;
  double p = 1.0;  // drift order minus one
  double e_last = 0.0;
  double log_e_last = 0.0;
  double log_n_tab = 0.0;
  std::int64_t n_tab = 0;

  double edge_at(std::int64_t n) const {
    if (n <= n_tab) return sc->edge[std::size_t(n)];
    return e_last * std::exp((log_n_tab - std::log(double(n))) / p);
  }

  // depth m with edge_at(m) < z <= edge_at(m-1), for z in (0, edge[0]]
  std::int64_t depth_of(double z, double* u) const {
    const std::vector<double>& e = sc->edge;
    if (z > e_last) {
      std::size_t lo = 0, hi = std::size_t(n_tab);
      while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (e[mid] >= z ? lo : hi) = mid;
      }
      *u = (z - e[hi]) / (e[lo] - e[hi]);
      return std::int64_t(hi);
    }
    const double ln_nu = log_n_tab + p * (log_e_last - std::log(z));
    if (ln_nu > 42.0) {
      *u = 0.5;
      return kDeepDepth;
    }
    std::int64_t mm = std::int64_t(std::floor(std::exp(ln_nu))) + 1;
    if (mm <= n_tab) mm = n_tab + 1;
    const double eo = edge_at(mm - 1), ei = edge_at(mm);
    *u = std::clamp((z - ei) / (eo - ei), 0.0, 1.0);
    return mm;
  }
};

struct SkipIndex {
  struct Comp {
    double lo = 0.0, hi = 0.0;
    int fp = 0;
    int left = -1, right = -1;  // chain ids
  };
  const IntervalMap* m = nullptr;
  const InducingSet* Y = nullptr;
  std::vector<ChainGeom> chains;
  std::vector<Comp> comps;

  int comp_of(double x) const {
    for (std::size_t i = 0; i < comps.size(); ++i)
      if (x >= comps[i].lo && x <= comps[i].hi) return int(i);
    return -1;
  }
};

SkipIndex make_skip_index(const IntervalMap& m, const CellTable& t, double eps) {
  SkipIndex s;
  s.m = &m;
  s.Y = &t.Y;
  for (const SideChain& c : t.chains) {
    ChainGeom g;
    g.sc = &c;
    g.xi = m.fixed_points[std::size_t(c.fp_index)];
    g.dir = c.dir;
    g.branch = c.branch_id;
    g.p = c.q - 1.0;
    g.n_tab = c.n_max;
    g.e_last = c.edge[std::size_t(c.n_max)];
    g.log_e_last = std::log(g.e_last);
    g.log_n_tab = std::log(double(c.n_max));
    s.chains.push_back(g);
  }
  for (int k = 0; k < m.d(); ++k) {
    SkipIndex::Comp c;
    c.lo = t.Y.x_intervals[std::size_t(k)].first;
    c.hi = t.Y.x_intervals[std::size_t(k)].second;
    c.fp = k;
    for (std::size_t i = 0; i < t.chains.size(); ++i) {
      if (t.chains[i].fp_index != k) continue;
      (t.chains[i].dir < 0 ? c.left : c.right) = int(i);
    }
    s.comps.push_back(c);
    // an excursion is booked entirely against its own fixed point, so no
    // other neighborhood may reach into this component
    for (int j = 0; j < m.d(); ++j) {
      if (j == k) continue;
      const double xj = m.fixed_points[std::size_t(j)];
      const double dist = (xj < c.lo) ? c.lo - xj : (xj > c.hi ? xj - c.hi : 0.0);
      if (dist <= eps)
        throw config_error("neighborhood radius reaches a foreign component; use direct stepping");
    }
  }
  return s;
}

// Inside-region thresholds of one chain: cells at depth >= j_full lie in
// B_eps outright, and the cell below it is inside up to relative position
// u_eps from its inner edge.
struct EpsPlan {
  std::int64_t j_full = 1;
  double u_eps = -1.0;
};

EpsPlan make_plan(const ChainGeom& g, double eps) {
  EpsPlan pl;
  const std::vector<double>& e = g.sc->edge;
  std::int64_t istar = 0;
  if (e[0] <= eps) {
    istar = 0;
  } else if (eps >= g.e_last) {
    std::size_t lo = 0, hi = std::size_t(g.n_tab);
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (e[mid] > eps ? lo : hi) = mid;
    }
    istar = std::int64_t(hi);
  } else {
    const double ln_nu = g.log_n_tab + g.p * (g.log_e_last - std::log(eps));
    if (ln_nu > 42.0) {
      pl.j_full = kDeepDepth;
      return pl;
    }
    istar = std::int64_t(std::ceil(std::exp(ln_nu)));
    if (istar <= g.n_tab) istar = g.n_tab + 1;
  }
  pl.j_full = istar + 1;
  if (istar >= 1) {
    const double eo = g.edge_at(istar - 1), ei = g.edge_at(istar);
    pl.u_eps = (eps - ei) / (eo - ei);
  }
  return pl;
}

// Orbit advancer with two modes. Direct mode applies the map once per step.
// Skip mode resolves a whole neutral excursion from the entry cell: the
// depth fixes the excursion length, the relative cell position is carried
// affinely, and the exit point is one map application from the transported
// depth-1 position. Depths beyond the table use the asymptotic edges, and
// depths beyond any time budget pin the orbit at the entry point.
struct Walker {
  const IntervalMap* m = nullptr;
  const SkipIndex* idx = nullptr;  // null in direct mode
  const std::vector<EpsPlan>* plan = nullptr;
  double eps = 0.0;

  double x = 0.0;
  std::int64_t now = 0;
  int chain = -1;
  std::int64_t entry_depth = 0;
  std::int64_t entry_time = 0;
  double u = 0.0;
  double entry_z = 0.0;
  bool flagged = false;
  bool frozen = false;

  void reset(double x0) {
    x = x0;
    now = 0;
    chain = -1;
    flagged = false;
    frozen = false;
  }

  int member_of(double pos) const {
    for (std::size_t k = 0; k < m->fixed_points.size(); ++k)
      if (std::abs(pos - m->fixed_points[k]) <= eps) return int(k);
    return -1;
  }

  double position() const {
    if (chain < 0) return x;
    const ChainGeom& g = idx->chains[std::size_t(chain)];
    if (entry_depth >= kDeepDepth) return g.xi + (g.dir > 0 ? entry_z : -entry_z);
    const std::int64_t d = entry_depth - (now - entry_time);
    const double ei = g.edge_at(d);
    const double z = ei + u * (g.edge_at(d - 1) - ei);
    return g.xi + (g.dir > 0 ? z : -z);
  }

  bool begin_excursion(int ci) {
    const SkipIndex::Comp& c = idx->comps[std::size_t(ci)];
    const double xi = m->fixed_points[std::size_t(c.fp)];
    const int side =
        (x < xi) ? c.left : (x > xi ? c.right : (c.right >= 0 ? c.right : c.left));
    if (side < 0) return false;
    const ChainGeom& g = idx->chains[std::size_t(side)];
    chain = side;
    entry_time = now;
    entry_z = (x < xi) ? xi - x : x - xi;
    if (entry_z <= 0.0) {
      entry_depth = kDeepDepth;
      u = 0.5;
      return true;
    }
    entry_depth = g.depth_of(std::min(entry_z, g.sc->edge[0]), &u);
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    return true;
  }

  template <class Emit>
  void run_excursion(std::int64_t T, Emit&& emit) {
    const ChainGeom& g = idx->chains[std::size_t(chain)];
    const EpsPlan& pl = (*plan)[std::size_t(chain)];
    const bool deep = entry_depth >= kDeepDepth;
    const std::int64_t exit_t =
        deep ? std::numeric_limits<std::int64_t>::max() : entry_time + entry_depth;
    const std::int64_t j_in =
        (pl.j_full > 1 && u <= pl.u_eps) ? pl.j_full - 1 : pl.j_full;
    std::int64_t in_end;  // first step outside B_eps
    if (deep)
      in_end = (pl.j_full < kDeepDepth) ? std::numeric_limits<std::int64_t>::max()
                                        : entry_time;
    else if (entry_depth >= j_in)
      in_end = entry_time + (entry_depth - j_in) + 1;
    else
      in_end = entry_time;
    const std::int64_t stop = std::min(T, exit_t);
    const std::int64_t mid = std::clamp(in_end, now, stop);
    if (mid > now) emit(g.sc->fp_index, now, mid);
    if (stop > mid) emit(-1, mid, stop);
    now = stop;
    if (now == exit_t) {
      const double e1 = g.edge_at(1);
      const double z1 = e1 + u * (g.edge_at(0) - e1);
      const double xp = g.xi + (g.dir > 0 ? z1 : -z1);
      x = std::clamp(m->branches[std::size_t(g.branch)].eval(xp), m->x_min, m->x_max);
      chain = -1;
    }
  }

  // emit(kind, t0, t1): the orbit points at times [t0, t1) all lie inside
  // B_eps of fixed point kind, or outside every neighborhood for kind -1.
  template <class Emit>
  void advance_to(std::int64_t T, Emit&& emit) {
    while (now < T) {
      if (chain >= 0) {
        run_excursion(T, emit);
        continue;
      }
      if (frozen) {
        emit(member_of(x), now, T);
        now = T;
        return;
      }
      if (idx) {
        const int ci = idx->comp_of(x);
        if (ci >= 0 && !idx->Y->contains(x) && begin_excursion(ci)) continue;
      }
      emit(member_of(x), now, now + 1);
      const double fx = m->eval(x);
      if (fx == x) {
        frozen = true;
        bool at_fp = false;
        for (double xi : m->fixed_points) at_fp = at_fp || (x == xi);
        // a stalled float orbit away from a true fixed point is an artifact
        if (!at_fp) flagged = true;
      }
      x = fx;
      ++now;
    }
  }
};

struct WalkerKit {
  SkipIndex idx;
  std::vector<EpsPlan> plans;
  Walker proto;
  bool skip = false;
};

WalkerKit make_kit(const IntervalMap& m, const CellTable* t, double eps,
                   bool cell_skip) {
  WalkerKit kit;
  kit.skip = cell_skip && t != nullptr;
  kit.proto.m = &m;
  kit.proto.eps = eps;
  if (kit.skip) {
    kit.idx = make_skip_index(m, *t, eps);
    for (const ChainGeom& g : kit.idx.chains) kit.plans.push_back(make_plan(g, eps));
  }
  return kit;
}

// proto holds dangling internal pointers until armed against its kit
Walker arm(const WalkerKit& kit) {
  Walker w = kit.proto;
  if (kit.skip) {
    w.idx = &kit.idx;
    w.plan = &kit.plans;
  }
  return w;
}

void check_density(const InitialDensity& lam, const IntervalMap& m) {
  if (lam.tag == "uniform" || lam.tag == "beta") return;
  if (lam.tag == "histogram") {
    if (lam.edges.front() < m.x_min - 1e-12 || lam.edges.back() > m.x_max + 1e-12)
      throw config_error("histogram density support leaves the phase interval");
    return;
  }
  throw config_error("unknown initial density tag: " + lam.tag);
}

double beta_cdf_raw(double x, int a, int n) {
  // sum over j >= a of C(n,j) x^j (1-x)^(n-j), with x <= 1/2 so the first
  // term cannot underflow for the shape sizes admitted here
  double term = std::pow(1.0 - x, n);
  const double r = x / (1.0 - x);
  double s = (a == 0) ? term : 0.0;
  for (int j = 1; j <= n; ++j) {
    term *= r * (double(n - j + 1) / double(j));
    if (j >= a) s += term;
  }
  return s;
}

double beta_cdf(double x, int a, int b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const int n = a + b - 1;
  if (x > 0.5) return 1.0 - beta_cdf_raw(1.0 - x, b, n);
  return beta_cdf_raw(x, a, n);
}

double beta_pdf(double x, int a, int b) {
  const double lb = std::lgamma(double(a)) + std::lgamma(double(b)) -
                    std::lgamma(double(a + b));
  if (x <= 0.0) return a == 1 ? std::exp(-lb) : 0.0;
  if (x >= 1.0) return b == 1 ? std::exp(-lb) : 0.0;
  return std::exp((a - 1) * std::log(x) + (b - 1) * std::log1p(-x) - lb);
}

std::string density_tag(const InitialDensity& lam) {
  if (lam.tag == "beta")
    return "beta(" + std::to_string(lam.shape_a) + "," +
           std::to_string(lam.shape_b) + ")";
  return lam.tag;
}

// Histogram bin edges tiling the phase interval: geometric bins toward
// each fixed point inside its component, uniform bins across the inducing
// set. Every fixed point lands exactly on a bin edge.
struct BinSet {
  std::vector<double> edges;
  std::vector<double> left, right;
};

BinSet make_bins(const IntervalMap& m, const InducingSet& Y) {
  struct Region {
    double lo, hi;
    int fp;  // -1 for inducing-set pieces
  };
  std::vector<Region> regions;
  for (const auto& yi : Y.y_intervals) regions.push_back({yi.first, yi.second, -1});
  for (int k = 0; k < m.d(); ++k) {
    const auto& xi = Y.x_intervals[std::size_t(k)];
    regions.push_back({xi.first, xi.second, k});
  }
  std::sort(regions.begin(), regions.end(),
            [](const Region& a, const Region& b) { return a.lo < b.lo; });

  std::vector<double> edges;
  edges.push_back(m.x_min);
  const auto push = [&edges](double v) {
    if (v > edges.back() + 1e-15) edges.push_back(v);
  };
  for (const Region& r : regions) {
    if (r.fp < 0) {
      const int nb = std::max(
          1, int(std::lround(kUniformBins * (r.hi - r.lo) / Y.y_length)));
      for (int j = 1; j <= nb; ++j)
        push(r.lo + (r.hi - r.lo) * double(j) / double(nb));
      continue;
    }
    const double xi = m.fixed_points[std::size_t(r.fp)];
    if (xi <= r.lo) {
      const double D = r.hi - xi;
      for (int j = kNeutralBins - 1; j >= 0; --j)
        push(xi + D * std::pow(kBinRatio, -double(j)));
    } else if (xi >= r.hi) {
      const double D = xi - r.lo;
      for (int j = 1; j <= kNeutralBins - 1; ++j)
        push(xi - D * std::pow(kBinRatio, -double(j)));
      push(r.hi);
    } else {
      const int half = kNeutralBins / 2;
      const double DL = xi - r.lo, DR = r.hi - xi;
      for (int j = 1; j <= half - 1; ++j) push(xi - DL * std::pow(kBinRatio, -double(j)));
      push(xi);
      for (int j = half - 1; j >= 0; --j) push(xi + DR * std::pow(kBinRatio, -double(j)));
    }
  }
  if (edges.back() < m.x_max) edges.push_back(m.x_max);
  edges.back() = m.x_max;

  BinSet bs;
  bs.edges = edges;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    bs.left.push_back(edges[i]);
    bs.right.push_back(edges[i + 1]);
  }
  return bs;
}

std::size_t bin_of(const BinSet& bs, double x) {
  const auto it = std::upper_bound(bs.edges.begin(), bs.edges.end(), x);
  std::size_t i = std::size_t(it - bs.edges.begin());
  if (i == 0) return 0;
  if (i >= bs.edges.size()) return bs.edges.size() - 2;
  return i - 1;
}

// area between a linear distribution piece and a constant level
double seg_area(double l, double r, double F0, double F1, double c) {
  const double d0 = F0 - c, d1 = F1 - c;
  if ((d0 >= 0.0) == (d1 >= 0.0))
    return 0.5 * (std::abs(d0) + std::abs(d1)) * (r - l);
  const double tt = d0 / (d0 - d1);
  return 0.5 * (r - l) * (std::abs(d0) * tt + std::abs(d1) * (1.0 - tt));
}

// W1 distance between the histogram (mass uniform within bins) and the
// mixture of point masses w at the fixed points, via the CDF area.
double w1_to_mixture(const BinSet& bs, const std::vector<double>& mass,
                     const std::vector<double>& fp, const std::vector<double>& w) {
  NeumaierSum total;
  double Fh = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    const double F1 = Fh + mass[i];
    double c = 0.0;
    for (std::size_t k = 0; k < fp.size(); ++k)
      if (fp[k] <= bs.left[i]) c += w[k];
    total.add(seg_area(bs.left[i], bs.right[i], Fh, F1, c));
    Fh = F1;
  }
  return total.value();
}

void simplex_grid_rec(int d, int steps, int pos, int rem,
                      std::vector<int>& cur,
                      std::vector<std::vector<double>>& out) {
  if (pos == d - 1) {
    cur[std::size_t(pos)] = rem;
    std::vector<double> p(std::size_t(d), 0.0);
    for (int k = 0; k < d; ++k) p[std::size_t(k)] = double(cur[std::size_t(k)]) / steps;
    out.push_back(std::move(p));
    return;
  }
  for (int v = 0; v <= rem; ++v) {
    cur[std::size_t(pos)] = v;
    simplex_grid_rec(d, steps, pos + 1, rem - v, cur, out);
  }
}

std::vector<std::vector<double>> simplex_grid(int d, int steps) {
  std::vector<std::vector<double>> out;
  std::vector<int> cur(std::size_t(d), 0);
  simplex_grid_rec(d, steps, 0, steps, cur, out);
  return out;
}

MeasureSummary finish_summary(const BinSet& bs, const IntervalMap& m,
                              const std::vector<std::int64_t>& bin_counts,
                              const std::vector<std::int64_t>& eps_counts,
                              std::int64_t y_count, double denom, double eps,
                              const std::vector<double>& p_bar, std::int64_t n,
                              bool flagged) {
  MeasureSummary s;
  s.bin_left = bs.left;
  s.bin_right = bs.right;
  s.mass.resize(bin_counts.size());
  for (std::size_t i = 0; i < bin_counts.size(); ++i)
    s.mass[i] = double(bin_counts[i]) / denom;
  s.eps = eps;
  s.eps_mass.resize(eps_counts.size());
  for (std::size_t k = 0; k < eps_counts.size(); ++k)
    s.eps_mass[k] = double(eps_counts[k]) / denom;
  s.y_mass = double(y_count) / denom;
  s.n = n;
  s.flagged = flagged;
  const int steps = m.d() == 2 ? 64 : (m.d() == 3 ? 32 : 16);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> argmin;
  for (const auto& w : simplex_grid(m.d(), steps)) {
    const double v = w1_to_mixture(bs, s.mass, m.fixed_points, w);
    if (v < best) {
      best = v;
      argmin = w;
    }
  }
  s.w1_min = best;
  s.w1_argmin = argmin;
  if (!p_bar.empty()) {
    if (int(p_bar.size()) != m.d())
      throw config_error("weight vector length must match the fixed-point count");
    s.w1_to_pbar = w1_to_mixture(bs, s.mass, m.fixed_points, p_bar);
  }
  return s;
}

double poly_eval(const std::vector<double>& coef, double x) {
  double v = 0.0;
  for (std::size_t j = coef.size(); j-- > 0;) v = v * x + coef[j];
  return v;
}

}  // namespace

InitialDensity uniform_density() {
  InitialDensity d;
  d.tag = "uniform";
  return d;
}

InitialDensity beta_like_density(int a, int b) {
  if (a < 1 || b < 1 || a > 60 || b > 60)
    throw config_error("beta-like shapes must be integers in [1, 60]");
  InitialDensity d;
  d.tag = "beta";
  d.shape_a = a;
  d.shape_b = b;
  return d;
}

InitialDensity histogram_density(std::vector<double> edges,
                                 std::vector<double> mass) {
  if (edges.size() < 2 || mass.size() + 1 != edges.size())
    throw config_error("histogram density needs one mass per cell");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i + 1] > edges[i]))
      throw config_error("histogram density edges must increase strictly");
  double total = 0.0;
  for (double v : mass) {
    if (v < 0.0) throw config_error("histogram density mass must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) throw config_error("histogram density has no mass");
  InitialDensity d;
  d.tag = "histogram";
  d.edges = std::move(edges);
  d.cum.resize(d.edges.size());
  d.cum[0] = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i)
    d.cum[i + 1] = d.cum[i] + mass[i] / total;
  d.cum.back() = 1.0;
  return d;
}

double InitialDensity::sample(const IntervalMap& m, Xoshiro256pp& rng) const {
  const double uu = rng.uniform_open();
  if (tag == "histogram") {
    const auto it = std::upper_bound(cum.begin(), cum.end(), uu);
    std::size_t i = std::size_t(it - cum.begin());
    i = (i == 0) ? 0 : i - 1;
    if (i + 1 >= cum.size()) i = cum.size() - 2;
    const double w = cum[i + 1] - cum[i];
    const double frac = (w > 0.0) ? (uu - cum[i]) / w : 0.0;
    const double x = edges[i] + frac * (edges[i + 1] - edges[i]);
    return std::clamp(x, m.x_min, m.x_max);
  }
  double t = uu;
  if (tag == "beta") {
    const int a = shape_a, b = shape_b;
    t = solve_monotone(
        [&](double x) {
          return std::pair<double, double>(beta_cdf(x, a, b) - uu,
                                           beta_pdf(x, a, b));
        },
        0.0, 1.0, uu, 1e-13);
  }
  return m.x_min + t * (m.x_max - m.x_min);
}

std::vector<double> OccupationCount::fractions() const {
  std::vector<double> f(steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k)
    f[k] = double(steps[k]) / double(n);
  return f;
}

namespace {

OccupationCount occupation_run(const WalkerKit& kit, const IntervalMap& m,
                               double x0, std::int64_t n) {
  OccupationCount oc;
  oc.steps.assign(std::size_t(m.d()), 0);
  oc.n = n;
  Walker w = arm(kit);
  w.reset(x0);
  w.advance_to(n, [&](int k, std::int64_t t0, std::int64_t t1) {
    if (k >= 0) oc.steps[std::size_t(k)] += t1 - t0;
  });
  oc.flagged = w.flagged;
  return oc;
}

}  // namespace

OccupationCount occupation_fractions(const IntervalMap& m, double x0,
                                     std::int64_t n, double eps) {
  check_phase(m, x0);
  check_eps(m, eps);
  if (n < 1) throw config_error("orbit length must be positive");
  const WalkerKit kit = make_kit(m, nullptr, eps, false);
  return occupation_run(kit, m, x0, n);
}

OccupationCount occupation_fractions(const IntervalMap& m, const CellTable& t,
                                     double x0, std::int64_t n, double eps) {
  check_phase(m, x0);
  check_eps(m, eps);
  if (n < 1) throw config_error("orbit length must be positive");
  const WalkerKit kit = make_kit(m, &t, eps, true);
  return occupation_run(kit, m, x0, n);
}

OccupationEnsemble occupation_ensemble(const IntervalMap& m, const CellTable& t,
                                       const InitialDensity& lambda, int N,
                                       std::int64_t n, double eps,
                                       std::uint64_t seed,
                                       const std::vector<double>& p_bar,
                                       bool cell_skip, int workers) {
  check_eps(m, eps);
  check_density(lambda, m);
  if (N < 1) throw config_error("ensemble size must be positive");
  if (n < 1) throw config_error("orbit length must be positive");
  if (!p_bar.empty() && int(p_bar.size()) != m.d())
    throw config_error("weight vector length must match the fixed-point count");
  const WalkerKit kit = make_kit(m, &t, eps, cell_skip);

  OccupationEnsemble e;
  e.map_hash = m.hash();
  e.n = n;
  e.eps = eps;
  e.lambda_tag = density_tag(lambda);
  e.seed = seed;
  e.cell_skip = kit.skip;
  e.samples.assign(std::size_t(N), {});
  e.leftover.assign(std::size_t(N), 0.0);
  e.flagged.assign(std::size_t(N), 0);

  run_indexed(workers, N, [&](int i, int) {
    Xoshiro256pp rng(derive_stream_seed(seed, std::uint64_t(i)));
    const double x0 = lambda.sample(m, rng);
    const OccupationCount oc = occupation_run(kit, m, x0, n);
    e.samples[std::size_t(i)] = oc.fractions();
    double tot = 0.0;
    for (double f : e.samples[std::size_t(i)]) tot += f;
    e.leftover[std::size_t(i)] = 1.0 - tot;
    e.flagged[std::size_t(i)] = oc.flagged ? 1 : 0;
  });

  for (std::uint8_t f : e.flagged) e.flagged_count += f;
  if (std::int64_t(e.flagged_count) * 100 > N)
    throw numeric_error("more than 1% of orbits stalled at float fixed points");

  if (!p_bar.empty()) {
    if (m.alpha < 1.0 && m.d() >= 2) {
      std::vector<double> firsts(std::size_t(N), 0.0);
      for (int i = 0; i < N; ++i) firsts[std::size_t(i)] = e.samples[std::size_t(i)][0];
      const double a = m.alpha, p0 = p_bar[0];
      e.ks_first = ks_statistic(
          firsts, [a, p0](double tt) { return lamperti_cdf(a, p0, tt); });
    }
    if (m.alpha == 1.0) {
      int hit = 0;
      for (int i = 0; i < N; ++i) {
        double dev = 0.0;
        for (int k = 0; k < m.d(); ++k)
          dev = std::max(dev, std::abs(e.samples[std::size_t(i)][std::size_t(k)] -
                                       p_bar[std::size_t(k)]));
        if (dev <= 0.1) ++hit;
      }
      e.concentration = double(hit) / double(N);
    }
  }
  return e;
}

MeasureSummary empirical_measure(const IntervalMap& m, const InducingSet& Y,
                                 double x0, std::int64_t n, double eps) {
  check_phase(m, x0);
  check_eps(m, eps);
  if (n < 1) throw config_error("orbit length must be positive");
  const BinSet bs = make_bins(m, Y);
  std::vector<std::int64_t> bins(bs.left.size(), 0);
  std::vector<std::int64_t> eps_counts(std::size_t(m.d()), 0);
  std::int64_t y_count = 0;
  bool flagged = false, frozen = false;
  double x = x0;
  for (std::int64_t j = 0; j < n; ++j) {
    ++bins[bin_of(bs, x)];
    for (int k = 0; k < m.d(); ++k)
      if (std::abs(x - m.fixed_points[std::size_t(k)]) <= eps) {
        ++eps_counts[std::size_t(k)];
        break;
      }
    if (Y.contains(x)) ++y_count;
    if (frozen) continue;
    const double fx = m.eval(x);
    if (fx == x) {
      frozen = true;
      bool at_fp = false;
      for (double xi : m.fixed_points) at_fp = at_fp || (x == xi);
      if (!at_fp) flagged = true;
    }
    x = fx;
  }
  return finish_summary(bs, m, bins, eps_counts, y_count, double(n), eps, {}, n,
                        flagged);
}

std::vector<MeasureSummary> pushforward(const IntervalMap& m, const CellTable& t,
                                        const InitialDensity& lambda,
                                        const std::vector<std::int64_t>& n_list,
                                        double eps, int N, std::uint64_t seed,
                                        const std::vector<double>& p_bar,
                                        bool cell_skip, int workers) {
  check_eps(m, eps);
  check_density(lambda, m);
  if (N < 1) throw config_error("ensemble size must be positive");
  if (n_list.empty()) throw config_error("pushforward needs at least one time");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 0) throw config_error("pushforward times must be nonnegative");
    if (i > 0 && n_list[i] <= n_list[i - 1])
      throw config_error("pushforward times must increase strictly");
  }
  const WalkerKit kit = make_kit(m, &t, eps, cell_skip);
  const BinSet bs = make_bins(m, t.Y);
  const std::size_t K = n_list.size(), nb = bs.left.size(), d = std::size_t(m.d());

  const int nw = std::max(1, std::min(workers, N));
  struct Scratch {
    std::vector<std::int64_t> bins, eps_c, y_c;
  };
  std::vector<Scratch> scratch{std::size_t(nw)};
  for (auto& s : scratch) {
    s.bins.assign(K * nb, 0);
    s.eps_c.assign(K * d, 0);
    s.y_c.assign(K, 0);
  }
  std::vector<std::uint8_t> flagged(std::size_t(N), 0);

  run_indexed(workers, N, [&](int i, int w) {
    Xoshiro256pp rng(derive_stream_seed(seed, std::uint64_t(i)));
    const double x0 = lambda.sample(m, rng);
    Walker wk = arm(kit);
    wk.reset(x0);
    Scratch& sc = scratch[std::size_t(w)];
    for (std::size_t ni = 0; ni < K; ++ni) {
      wk.advance_to(n_list[ni], [](int, std::int64_t, std::int64_t) {});
      const double pos = wk.position();
      ++sc.bins[ni * nb + bin_of(bs, pos)];
      for (std::size_t k = 0; k < d; ++k)
        if (std::abs(pos - m.fixed_points[k]) <= eps) {
          ++sc.eps_c[ni * d + k];
          break;
        }
      if (t.Y.contains(pos)) ++sc.y_c[ni];
    }
    flagged[std::size_t(i)] = wk.flagged ? 1 : 0;
  });

  std::int64_t nflag = 0;
  for (std::uint8_t f : flagged) nflag += f;
  if (nflag * 100 > N)
    throw numeric_error("more than 1% of orbits stalled at float fixed points");

  std::vector<MeasureSummary> out;
  for (std::size_t ni = 0; ni < K; ++ni) {
    std::vector<std::int64_t> bins(nb, 0), eps_c(d, 0);
    std::int64_t y_c = 0;
    for (const Scratch& sc : scratch) {
      for (std::size_t b = 0; b < nb; ++b) bins[b] += sc.bins[ni * nb + b];
      for (std::size_t k = 0; k < d; ++k) eps_c[k] += sc.eps_c[ni * d + k];
      y_c += sc.y_c[ni];
    }
    out.push_back(finish_summary(bs, m, bins, eps_c, y_c, double(N), eps, p_bar,
                                 n_list[ni], nflag > 0));
  }
  return out;
}

MeasureSummary cesaro_pushforward(const IntervalMap& m, const InducingSet& Y,
                                  const InitialDensity& lambda, std::int64_t n,
                                  double eps, int N, std::uint64_t seed,
                                  const std::vector<double>& p_bar, int workers) {
  check_eps(m, eps);
  check_density(lambda, m);
  if (N < 1) throw config_error("ensemble size must be positive");
  if (n < 1) throw config_error("orbit length must be positive");
  const BinSet bs = make_bins(m, Y);
  const std::size_t nb = bs.left.size(), d = std::size_t(m.d());

  const int nw = std::max(1, std::min(workers, N));
  struct Scratch {
    std::vector<std::int64_t> bins, eps_c;
    std::int64_t y_c = 0;
  };
  std::vector<Scratch> scratch{std::size_t(nw)};
  for (auto& s : scratch) {
    s.bins.assign(nb, 0);
    s.eps_c.assign(d, 0);
  }
  std::vector<std::uint8_t> flagged(std::size_t(N), 0);

  run_indexed(workers, N, [&](int i, int w) {
    Xoshiro256pp rng(derive_stream_seed(seed, std::uint64_t(i)));
    double x = lambda.sample(m, rng);
    Scratch& sc = scratch[std::size_t(w)];
    bool frozen = false, flag = false;
    for (std::int64_t j = 0; j < n; ++j) {
      ++sc.bins[bin_of(bs, x)];
      for (std::size_t k = 0; k < d; ++k)
        if (std::abs(x - m.fixed_points[k]) <= eps) {
          ++sc.eps_c[k];
          break;
        }
      if (Y.contains(x)) ++sc.y_c;
      if (frozen) continue;
      const double fx = m.eval(x);
      if (fx == x) {
        frozen = true;
        bool at_fp = false;
        for (double xi : m.fixed_points) at_fp = at_fp || (x == xi);
        if (!at_fp) flag = true;
      }
      x = fx;
    }
    flagged[std::size_t(i)] = flag ? 1 : 0;
  });

  std::int64_t nflag = 0;
  for (std::uint8_t f : flagged) nflag += f;
  if (nflag * 100 > N)
    throw numeric_error("more than 1% of orbits stalled at float fixed points");

  std::vector<std::int64_t> bins(nb, 0), eps_c(d, 0);
  std::int64_t y_c = 0;
  for (const Scratch& sc : scratch) {
    for (std::size_t b = 0; b < nb; ++b) bins[b] += sc.bins[b];
    for (std::size_t k = 0; k < d; ++k) eps_c[k] += sc.eps_c[k];
    y_c += sc.y_c;
  }
  return finish_summary(bs, m, bins, eps_c, y_c, double(N) * double(n), eps,
                        p_bar, n, nflag > 0);
}

CoverageReport simplex_coverage(const IntervalMap& m, const CellTable& t,
                                double x0, std::int64_t n_max, double delta,
                                double eps, bool cell_skip) {
  check_phase(m, x0);
  check_eps(m, eps);
  if (!(m.alpha < 1.0))
    throw config_error("occupation vectors do not sweep the simplex at the critical exponent");
  if (n_max < 1000000)
    throw config_error("simplex coverage needs at least 1e6 steps");
  if (!(delta > 0.0 && delta <= 1.0))
    throw config_error("net spacing must lie in (0, 1]");
  const int steps = std::max(1, int(std::lround(1.0 / delta)));
  const int d = m.d();

  CoverageReport rep;
  rep.delta = delta;
  rep.n_max = n_max;
  rep.net = simplex_grid(d, steps);
  std::vector<double> net_d2(rep.net.size(),
                             std::numeric_limits<double>::infinity());
  std::vector<double> vert_d2(std::size_t(d),
                              std::numeric_limits<double>::infinity());

  const WalkerKit kit = make_kit(m, &t, eps, cell_skip);
  Walker w = arm(kit);
  w.reset(x0);

  std::vector<double> S(std::size_t(d), 0.0);
  std::vector<double> pa(std::size_t(d), 0.0), pb(std::size_t(d), 0.0), ab(std::size_t(d), 0.0);
  const auto seg_update = [&](int kind, std::int64_t t0, std::int64_t t1) {
    const std::int64_t ta = std::max<std::int64_t>(t0, 1);
    if (t1 < ta) return;
    for (int k = 0; k < d; ++k) {
      const double inc = (k == kind) ? 1.0 : 0.0;
      pa[std::size_t(k)] = (S[std::size_t(k)] + inc * double(ta - t0)) / double(ta);
      pb[std::size_t(k)] = (S[std::size_t(k)] + inc * double(t1 - t0)) / double(t1);
      ab[std::size_t(k)] = pb[std::size_t(k)] - pa[std::size_t(k)];
    }
    double vv = 0.0;
    for (int k = 0; k < d; ++k) vv += ab[std::size_t(k)] * ab[std::size_t(k)];
    const auto dist2 = [&](const std::vector<double>& q) {
      double wc = 0.0;
      if (vv > 0.0) {
        for (int k = 0; k < d; ++k)
          wc += (q[std::size_t(k)] - pa[std::size_t(k)]) * ab[std::size_t(k)];
        wc = std::clamp(wc / vv, 0.0, 1.0);
      }
      double s2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double dd =
            q[std::size_t(k)] - (pa[std::size_t(k)] + wc * ab[std::size_t(k)]);
        s2 += dd * dd;
      }
      return s2;
    };
    for (std::size_t q = 0; q < rep.net.size(); ++q)
      net_d2[q] = std::min(net_d2[q], dist2(rep.net[q]));
    for (int k = 0; k < d; ++k) {
      std::vector<double> vq(std::size_t(d), 0.0);
      vq[std::size_t(k)] = 1.0;
      vert_d2[std::size_t(k)] = std::min(vert_d2[std::size_t(k)], dist2(vq));
    }
  };

  w.advance_to(n_max, [&](int kind, std::int64_t t0, std::int64_t t1) {
    seg_update(kind, t0, t1);
    if (kind >= 0) S[std::size_t(kind)] += double(t1 - t0);
  });

  rep.net_distance.resize(rep.net.size());
  double worst = 0.0;
  for (std::size_t q = 0; q < rep.net.size(); ++q) {
    rep.net_distance[q] = std::sqrt(net_d2[q]);
    worst = std::max(worst, rep.net_distance[q]);
  }
  rep.covering_radius = worst;
  rep.vertex_closest.resize(std::size_t(d));
  for (int k = 0; k < d; ++k)
    rep.vertex_closest[std::size_t(k)] = std::sqrt(vert_d2[std::size_t(k)]);
  rep.flagged = w.flagged;
  return rep;
}

double Observable::eval(double x) const {
  if (tag == "indicator") return (x >= a && x <= b) ? 1.0 : 0.0;
  return poly_eval(coef, x);
}

double Observable::lebesgue_integral(double lo, double hi) const {
  if (tag == "indicator")
    return std::max(0.0, std::min(b, hi) - std::max(a, lo));
  NeumaierSum s;
  double pl = lo, ph = hi;
  for (std::size_t j = 0; j < coef.size(); ++j) {
    s.add(coef[j] * (ph - pl) / double(j + 1));
    pl *= lo;
    ph *= hi;
  }
  return s.value();
}

Observable indicator_observable(double a, double b) {
  if (!(a < b)) throw config_error("indicator needs a nonempty interval");
  Observable o;
  o.tag = "indicator";
  o.a = a;
  o.b = b;
  return o;
}

Observable polynomial_observable(std::vector<double> coef) {
  if (coef.empty()) throw config_error("polynomial needs at least one coefficient");
  Observable o;
  o.tag = "poly";
  o.coef = std::move(coef);
  return o;
}

CorrelationReport correlation(const IntervalMap& m, const CellTable& t,
                              const Observable& psi, const Observable& phi,
                              const std::vector<std::int64_t>& n_list, int N,
                              std::uint64_t seed,
                              const std::vector<double>& p_bar, bool cell_skip,
                              int workers) {
  if (!phi.continuous())
    throw config_error(
        "the delayed observable must be continuous at the fixed points; use a polynomial");
  if (N < 2) throw config_error("correlation needs at least two samples");
  if (n_list.empty()) throw config_error("correlation needs at least one time");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 0) throw config_error("correlation times must be nonnegative");
    if (i > 0 && n_list[i] <= n_list[i - 1])
      throw config_error("correlation times must increase strictly");
  }
  const WalkerKit kit = make_kit(m, &t, 1e-3, cell_skip);
  const std::size_t K = n_list.size();
  const double L = m.x_max - m.x_min;
  std::vector<double> vals(std::size_t(N) * K);

  run_indexed(workers, N, [&](int i, int) {
    Xoshiro256pp rng(derive_stream_seed(seed, std::uint64_t(i)));
    const double x0 = m.x_min + L * rng.uniform01();
    const double wpsi = psi.eval(x0);
    Walker wk = arm(kit);
    wk.reset(x0);
    for (std::size_t ni = 0; ni < K; ++ni) {
      wk.advance_to(n_list[ni], [](int, std::int64_t, std::int64_t) {});
      vals[std::size_t(i) * K + ni] = wpsi * phi.eval(wk.position());
    }
  });

  CorrelationReport rep;
  for (std::size_t ni = 0; ni < K; ++ni) {
    NeumaierSum sum;
    for (int i = 0; i < N; ++i) sum.add(vals[std::size_t(i) * K + ni]);
    const double mean = sum.value() / double(N);
    NeumaierSum var;
    for (int i = 0; i < N; ++i) {
      const double dv = vals[std::size_t(i) * K + ni] - mean;
      var.add(dv * dv);
    }
    const double sd = std::sqrt(var.value() / double(N - 1));
    CorrelationPoint pt;
    pt.n = n_list[ni];
    pt.estimate = L * mean;
    pt.se = L * sd / std::sqrt(double(N));
    rep.points.push_back(pt);
  }
  rep.psi_integral = psi.lebesgue_integral(m.x_min, m.x_max);
  if (!p_bar.empty()) {
    if (int(p_bar.size()) != m.d())
      throw config_error("weight vector length must match the fixed-point count");
    double fx = 0.0;
    for (int k = 0; k < m.d(); ++k)
      fx += p_bar[std::size_t(k)] * phi.eval(m.fixed_points[std::size_t(k)]);
    rep.limit = rep.psi_integral * fx;
    rep.has_limit = true;
  }
  return rep;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw config_error("two-sample distance needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    const double v = (i < a.size() && (j >= b.size() || a[i] <= b[j])) ? a[i] : b[j];
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  return d;
}

}  // namespace norb
