#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "norb/cells.hpp"
#include "norb/maps.hpp"
#include "norb/rng.hpp"
#include "norb/util.hpp"

using namespace norb;

namespace {

// independent root finder for oracle values
template <class F>
double bisect(F&& f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((flo <= 0.0) == (fm <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double uniform_in(Xoshiro256pp& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.uniform01();
}

}  // namespace

TEST_CASE("inducing set of the symmetric two-branch map") {
  const IntervalMap m = build_thaler_map(0.5, {0.5});
  const InducingSet Y = build_inducing_set(m);
  REQUIRE(Y.x_intervals.size() == 2);
  REQUIRE(Y.y_intervals.size() == 1);

  const double r = bisect([](double x) { return x + 4.0 * x * x * x - 0.5; }, 0.0, 0.5);
  CHECK(Y.x_intervals[0].first == 0.0);
  CHECK(Y.x_intervals[0].second == doctest::Approx(r).epsilon(1e-10));
  CHECK(Y.x_intervals[1].second == 1.0);
  CHECK(std::abs(Y.x_intervals[1].first - (1.0 - r)) < 1e-12);
  CHECK(Y.y_intervals[0].first == Y.x_intervals[0].second);
  CHECK(Y.y_intervals[0].second == Y.x_intervals[1].first);
  CHECK(std::abs(Y.y_length - (1.0 - 2.0 * r)) < 1e-12);
  CHECK(std::abs(r - 0.34116) < 5e-4);

  CHECK(Y.contains(0.5));
  CHECK(Y.contains(Y.y_intervals[0].first));
  CHECK(!Y.contains(0.2));
  CHECK(!Y.contains(0.9));
}

TEST_CASE("inducing set anchors at interior cuts") {
  const IntervalMap m = build_thaler_map(0.5, {0.4});
  const InducingSet Y = build_inducing_set(m);
  const double b1 = m.bk[0], b2 = m.bk[1];
  const double x0 = bisect([&](double x) { return x + b1 * x * x * x - 0.4; }, 0.0, 0.4);
  const double z1 = bisect([&](double z) { return z + b2 * z * z * z - 0.6; }, 0.0, 0.6);
  CHECK(Y.x_intervals[0].second == doctest::Approx(x0).epsilon(1e-10));
  CHECK(Y.x_intervals[1].first == doctest::Approx(1.0 - z1).epsilon(1e-10));

  const IntervalMap m3 = build_thaler_map(0.5, {1.0 / 3.0, 2.0 / 3.0});
  const InducingSet Y3 = build_inducing_set(m3);
  REQUIRE(Y3.x_intervals.size() == 3);
  REQUIRE(Y3.y_intervals.size() == 2);
  // the middle fixed point sits at 1/2, so its block is symmetric
  CHECK(std::abs(Y3.x_intervals[1].first + Y3.x_intervals[1].second - 1.0) < 1e-12);
  double total = Y3.y_length;
  for (const auto& [lo, hi] : Y3.x_intervals) total += hi - lo;
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("period-two inducing interval of the interface map") {
  const IntervalMap m = build_interface_map(2.0);
  const InducingSet Y = build_inducing_set(m);
  REQUIRE(Y.y_intervals.size() == 1);
  CHECK(std::abs(Y.gamma_plus + Y.gamma_minus) < 1e-12);

  auto fm = [](double x) { return x + std::pow(1.0 + x, 3.0); };
  auto fp = [](double y) { return y - std::pow(1.0 - y, 3.0); };
  const double t0 = bisect([&](double x) { return fm(x); }, -1.0, 0.0);
  const double gm = bisect([&](double x) { return fp(fm(x)) - x; }, t0, 0.0);
  CHECK(Y.gamma_minus == doctest::Approx(gm).epsilon(1e-10));
  CHECK(std::abs(Y.gamma_minus + 0.2293) < 5e-4);
  CHECK(Y.x_intervals[0].first == -1.0);
  CHECK(Y.x_intervals[0].second == Y.gamma_minus);
  CHECK(Y.x_intervals[1].first == Y.gamma_plus);
  CHECK(Y.x_intervals[1].second == 1.0);

  const InducingSet Ys = build_inducing_set(build_interface_map_singular(1.25, 2.0, 2.0));
  CHECK(Ys.gamma_minus < 0.0);
  CHECK(Ys.gamma_plus > 0.0);
  CHECK(Ys.contains(0.0));

  // a branch that re-crosses the identity leaves nothing to induce on
  CHECK_THROWS_AS(build_inducing_set(build_interface_map_singular(4.0, 0.5, 0.5)),
                  config_error);
}

TEST_CASE("cell edges follow the backward recursion") {
  const IntervalMap m = build_thaler_map(0.5, {0.5});
  const InducingSet Y = build_inducing_set(m);
  const CellTable t = build_cells(m, Y, 10000);
  REQUIRE(t.chains.size() == 2);
  REQUIRE(t.families.size() == 2);
  CHECK(t.map_hash == m.hash());

  const SideChain& c = t.chains[std::size_t(t.chain_index(0, +1))];
  const double r = Y.x_intervals[0].second;
  CHECK(std::abs(c.edge[0] - r) < 1e-12);
  const double e1 = bisect([&](double z) { return z + 4.0 * z * z * z - r; }, 0.0, r);
  CHECK(c.edge[1] == doctest::Approx(e1).epsilon(1e-10));
  CHECK(std::abs(c.edge[1] - 0.26598) < 5e-4);

  for (int n = 1; n <= t.n_max; ++n) {
    CHECK(c.edge[std::size_t(n)] < c.edge[std::size_t(n - 1)]);
    if (n <= 64)
      CHECK(std::abs(c.clen[std::size_t(n)] -
                     (c.edge[std::size_t(n - 1)] - c.edge[std::size_t(n)])) < 1e-15);
  }
  for (int n : {1, 2, 10, 100, 1000, 10000}) {
    const double img = m.eval(c.edge[std::size_t(n)]);
    CHECK(std::abs(img - c.edge[std::size_t(n - 1)]) < 1e-10);
  }

  double total = Y.y_length;
  for (const SideChain& ch : t.chains) {
    NeumaierSum s;
    for (int n = 1; n <= ch.n_max; ++n) s.add(ch.clen[std::size_t(n)]);
    s.add(ch.edge[std::size_t(ch.n_max)]);
    total += s.value();
  }
  CHECK(std::abs(total - 1.0) < 1e-8);

  CHECK_THROWS_AS(build_cells(m, Y, 0), config_error);
}

TEST_CASE("interface cell edges chain through the period-two point") {
  for (bool singular : {false, true}) {
    const IntervalMap m =
        singular ? build_interface_map_singular(1.25, 2.0, 2.0) : build_interface_map(2.0);
    const InducingSet Y = build_inducing_set(m);
    const CellTable t = build_cells(m, Y, 2000);
    const SideChain& cp = t.chains[std::size_t(t.chain_index(1, -1))];
    CHECK(std::abs(cp.edge[0] - (1.0 - Y.gamma_plus)) < 1e-12);
    for (int n : {1, 2, 5, 50, 500}) {
      const double x = 1.0 - cp.edge[std::size_t(n)];
      const double img_expected = 1.0 - cp.edge[std::size_t(n - 1)];
      CHECK(std::abs(m.eval(x) - img_expected) < 1e-9);
    }
    double total = Y.y_length;
    for (const SideChain& ch : t.chains) {
      NeumaierSum s;
      for (int n = 1; n <= ch.n_max; ++n) s.add(ch.clen[std::size_t(n)]);
      s.add(ch.edge[std::size_t(ch.n_max)]);
      total += s.value();
    }
    CHECK(std::abs(total - 2.0) < 1e-8);
  }
}

TEST_CASE("return orbit counts excursion steps") {
  const IntervalMap m = build_thaler_map(0.5, {0.5});
  const InducingSet Y = build_inducing_set(m);
  const CellTable t = build_cells(m, Y, 10000);

  const ReturnMapSample one = return_orbit(m, Y, 0.6);
  CHECK(one.tau == 1);
  CHECK(std::abs(one.exit - 0.344) < 1e-15);
  CHECK(one.tau_k[0] == 0);
  CHECK(one.tau_k[1] == 0);
  CHECK(!one.stagnated);

  // the cell with depth n returns in n + 1 steps, all of them at one fixed point
  for (const YCellFamily& fam : t.families) {
    const int fp = t.chains[std::size_t(fam.chain)].fp_index;
    for (int n : {1, 3, 10, 50}) {
      const ReturnMapSample s = return_orbit(m, Y, fam.mid[std::size_t(n)]);
      CHECK(s.tau == n + 1);
      CHECK(s.tau_k[std::size_t(fp)] == n);
      CHECK(s.tau_k[std::size_t(1 - fp)] == 0);
      CHECK(Y.contains(s.exit));
      CHECK(!s.stagnated);
    }
  }

  CHECK_THROWS_AS(return_orbit(m, Y, 0.1), config_error);
  CHECK_THROWS_AS(classify_return(m, t, 0.97), config_error);
}

TEST_CASE("classification by cell lookup matches direct iteration") {
  struct Case {
    IntervalMap m;
    int draws;
  };
  const std::vector<Case> cases = {{build_thaler_map(0.5, {0.5}), 2000},
                                   {build_thaler_map(0.5, {0.4}), 2000},
                                   {build_thaler_map(0.5, {1.0 / 3.0, 2.0 / 3.0}), 1000},
                                   {build_interface_map(2.0), 1000},
                                   {build_interface_map_singular(1.25, 2.0, 2.0), 500}};
  for (const Case& cs : cases) {
    const InducingSet Y = build_inducing_set(cs.m);
    const CellTable t = build_cells(cs.m, Y, 10000);
    Xoshiro256pp rng(derive_stream_seed(20260822, std::size_t(cs.draws)));
    for (int i = 0; i < cs.draws; ++i) {
      const auto& [lo, hi] = Y.y_intervals[std::size_t(rng.uniform01() * Y.y_intervals.size()) %
                                           Y.y_intervals.size()];
      const double y = uniform_in(rng, lo, hi);
      const ReturnMapSample s = return_orbit(cs.m, Y, y);
      if (s.stagnated) continue;
      const ReturnClass c = classify_return(cs.m, t, y);
      if (c.beyond_table) continue;
      CHECK(c.tau == s.tau);
      std::int64_t side_sum = 0;
      for (std::int64_t v : s.tau_k) side_sum += v;
      CHECK(side_sum == s.tau - 1);
      if (c.fp_index >= 0) CHECK(s.tau_k[std::size_t(c.fp_index)] == s.tau - 1);
    }
  }
}

TEST_CASE("classification extrapolates beyond the table") {
  const IntervalMap m = build_thaler_map(0.5, {0.5});
  const InducingSet Y = build_inducing_set(m);
  const CellTable t = build_cells(m, Y, 1000);
  const SideChain& c = t.chains[std::size_t(t.chain_index(0, +1))];
  // aim one map step into the chain below the last tabulated edge
  const double z_deep = 0.5 * c.edge[std::size_t(c.n_max)];
  const double y = m.inverse_branch(1, z_deep);
  REQUIRE(Y.contains(y));
  const ReturnClass cls = classify_return(m, t, y);
  CHECK(cls.beyond_table);
  CHECK(cls.depth > c.n_max);
  const ReturnMapSample s = return_orbit(m, Y, y);
  REQUIRE(!s.stagnated);
  CHECK(std::abs(double(cls.depth - (s.tau - 1))) < 0.1 * double(s.tau));
}

TEST_CASE("cell lengths follow the tail power law") {
  SUBCASE("symmetric two-branch map") {
    const IntervalMap m = build_thaler_map(0.5, {0.5});
    const CellTable t = build_cells(m, build_inducing_set(m), 10000);
    const CellAsymptotics a = cell_asymptotics(m, t);
    REQUIRE(a.x_fits.size() == 2);
    REQUIRE(a.y_fits.size() == 2);
    for (const ChainFit& f : a.x_fits) {
      CHECK(f.expected_slope == doctest::Approx(-1.5));
      CHECK(f.expected_prefactor ==
            doctest::Approx(std::pow(4.0, -0.5) * std::pow(0.5, 1.5)));
      CHECK(std::abs(f.fit.slope - f.expected_slope) < 0.05);
      CHECK(f.fit.prefactor / f.expected_prefactor == doctest::Approx(1.0).epsilon(0.1));
      CHECK(f.pass);
    }
    for (const ChainFit& f : a.y_fits) {
      CHECK(std::abs(f.fit.slope + 1.5) < 0.05);
      CHECK(f.pass);
    }
    CHECK(a.pass);
  }
  SUBCASE("three branches") {
    const IntervalMap m = build_thaler_map(0.5, {1.0 / 3.0, 2.0 / 3.0});
    const CellTable t = build_cells(m, build_inducing_set(m), 10000);
    const CellAsymptotics a = cell_asymptotics(m, t);
    REQUIRE(a.x_fits.size() == 4);
    REQUIRE(a.y_fits.size() == 8);
    CHECK(a.pass);
  }
  SUBCASE("interface maps") {
    for (bool singular : {false, true}) {
      const IntervalMap m = singular ? build_interface_map_singular(1.25, 2.0, 2.0)
                                     : build_interface_map(2.0);
      const CellTable t = build_cells(m, build_inducing_set(m), 10000);
      const CellAsymptotics a = cell_asymptotics(m, t);
      for (const ChainFit& f : a.x_fits) {
        // the drift exponent at the endpoints is 1/ell on both sides
        CHECK(f.expected_slope == doctest::Approx(-(1.0 + 1.0 / m.ell)));
        CHECK(f.pass);
      }
      for (const ChainFit& f : a.y_fits) {
        CHECK(f.expected_slope == doctest::Approx(-(1.0 + m.alpha)));
        CHECK(f.pass);
      }
      CHECK(a.pass);
    }
  }
  SUBCASE("depth precondition") {
    const IntervalMap m = build_thaler_map(0.5, {0.5});
    const CellTable t = build_cells(m, build_inducing_set(m), 100);
    CHECK_THROWS_AS(cell_asymptotics(m, t), config_error);
  }
}

TEST_CASE("tail masses match the analytic constants") {
  const IntervalMap m = build_thaler_map(0.5, {0.5});
  const InducingSet Y = build_inducing_set(m);
  const CellTable t = build_cells(m, Y, 10000);
  const TailReport r = tail_statistics(m, t);

  CHECK(std::abs(r.tail_fit.slope + 0.5) < 0.05);
  CHECK(r.plateau_ok[0]);
  CHECK(r.plateau_ok[1]);
  CHECK(r.h4_bounded);
  CHECK(r.c_hat[0] == doctest::Approx(r.c_hat[1]).epsilon(0.02));

  // Lebesgue excursion constant: b^{-a} a^a times the entry derivative
  const double gp = 1.0 / m.deriv(0.5);
  const double c_leb = std::pow(4.0, -0.5) * std::pow(0.5, 0.5) * gp;
  CHECK(r.c_hat[0] == doctest::Approx(c_leb).epsilon(0.1));
  CHECK(r.c_tau_hat == doctest::Approx(2.0 * c_leb).epsilon(0.1));

  // mass balance: the jump of the tail equals the cell mass
  for (std::size_t n : {std::size_t(5), std::size_t(50), std::size_t(500)}) {
    const double jump = r.mass_gt[0][n - 1] - r.mass_gt[0][n];
    CHECK(jump == doctest::Approx(r.mass_eq[0][n]).epsilon(1e-3));
  }

  // immediate returns carry the rest of the inducing interval
  double excursion = r.mass_gt[0][0] + r.mass_gt[1][0];
  CHECK(r.tau_eq[1] == doctest::Approx(Y.y_length - excursion).epsilon(1e-12));
  CHECK(r.tau_eq[1] > 0.05);
  CHECK(std::abs(r.tau_gt[0] - Y.y_length) < 1e-12);
}

TEST_CASE("measure weights rescale the tail constants") {
  const IntervalMap m = build_thaler_map(0.5, {0.5});
  const CellTable t = build_cells(m, build_inducing_set(m), 10000);
  const TailReport leb = tail_statistics(m, t);
  const TailReport wtd = tail_statistics(m, t, [](double x) { return 1.0 + x; });
  // both excursion gateways sit at x = 1/2, so the constants scale by h(1/2)
  CHECK(wtd.c_hat[0] / leb.c_hat[0] == doctest::Approx(1.5).epsilon(0.02));
  CHECK(wtd.c_hat[1] / leb.c_hat[1] == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("asymmetric cuts skew the tail constants") {
  const IntervalMap m = build_thaler_map(0.5, {0.4});
  const CellTable t = build_cells(m, build_inducing_set(m), 10000);
  const TailReport r = tail_statistics(m, t);
  const double g1 = 1.0 / m.branches[1].deriv(0.4);
  const double g0 = 1.0 / m.branches[0].deriv(0.4);
  const double c0 = std::pow(m.bk[0], -0.5) * std::pow(0.5, 0.5) * g1;
  const double c1 = std::pow(m.bk[1], -0.5) * std::pow(0.5, 0.5) * g0;
  CHECK(r.c_hat[0] / r.c_hat[1] == doctest::Approx(c0 / c1).epsilon(0.05));
  CHECK(r.h4_bounded);
}

TEST_CASE("interface tails reproduce the endpoint constants") {
  const IntervalMap m = build_interface_map(2.0);
  const InducingSet Y = build_inducing_set(m);
  const CellTable t = build_cells(m, Y, 10000);
  const TailReport r = tail_statistics(m, t);

  CHECK(std::abs(r.tail_fit.slope + 0.5) < 0.05);
  CHECK(r.c_hat[0] == doctest::Approx(r.c_hat[1]).epsilon(0.02));
  // entry through f_+ near zero with slope a_+, drift exponent ell at -1
  const double c_minus = (1.0 / m.a_plus) * std::pow(m.ell * m.b_minus, -m.alpha);
  CHECK(r.c_hat[0] == doctest::Approx(c_minus).epsilon(0.1));
  CHECK(r.h4_bounded);

  // every return is an excursion, so immediate returns carry no mass
  const double excursion = r.mass_gt[0][0] + r.mass_gt[1][0];
  CHECK(std::abs(r.tau_eq[1]) < 1e-8);
  CHECK(excursion == doctest::Approx(Y.y_length).epsilon(1e-8));
}

TEST_CASE("distortion of return branches stays Hoelder bounded") {
  const IntervalMap m = build_thaler_map(0.5, {0.5});
  const InducingSet Y = build_inducing_set(m);
  const CellTable t = build_cells(m, Y, 10000);
  Xoshiro256pp rng(derive_stream_seed(711, 5));

  auto log_return_deriv = [&](double x, std::int64_t tau, double* exit) {
    double acc = 0.0;
    double cur = x;
    for (std::int64_t i = 0; i < tau; ++i) {
      acc += std::log(m.deriv(cur));
      cur = m.eval(cur);
    }
    *exit = cur;
    return acc;
  };

  double cmax = 0.0;
  std::vector<double> ratios;
  for (const YCellFamily& fam : t.families) {
    for (int n = 1; n <= 30; ++n) {
      const double lo = fam.lo[std::size_t(n)], hi = fam.hi[std::size_t(n)];
      for (int rep = 0; rep < 40; ++rep) {
        const double x = uniform_in(rng, lo, hi);
        const double y = uniform_in(rng, lo, hi);
        double fx, fy;
        const double dx = log_return_deriv(x, n + 1, &fx);
        const double dy = log_return_deriv(y, n + 1, &fy);
        if (std::abs(fx - fy) < 1e-12) continue;
        ratios.push_back(std::abs(dx - dy) / std::abs(fx - fy));
      }
    }
  }
  REQUIRE(ratios.size() > 1000);
  for (std::size_t i = 0; i < ratios.size() / 2; ++i) cmax = std::max(cmax, ratios[i]);
  REQUIRE(cmax > 0.0);
  for (std::size_t i = ratios.size() / 2; i < ratios.size(); ++i)
    CHECK(ratios[i] <= 2.0 * cmax);
}
