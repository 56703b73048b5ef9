// Map construction, evaluation, inversion and validation for the two
// families: exact power-form branches anchored at neutral fixed points,
// and interface maps on [-1,1] built as g o s with a reparametrized
// interface at 0.

#include "norb/maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "norb/rng.hpp"
#include "norb/series.hpp"
#include "norb/util.hpp"

namespace norb {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::thaler: return "thaler";
    case Family::interface_smooth: return "interface";
    case Family::interface_singular: return "interface-singular";
  }
  throw config_error("unknown family enum value");
}

Family parse_family(const std::string& name) {
  if (name == "thaler") return Family::thaler;
  if (name == "interface") return Family::interface_smooth;
  if (name == "interface-singular") return Family::interface_singular;
  throw config_error("unknown map family: " + name);
}

double PowerPiece::eval(double x) const {
  if (fp_left) return x + B * std::pow(x - fp, q);
  return x - B * std::pow(fp - x, q);
}

double PowerPiece::deriv(double x) const {
  double z = fp_left ? x - fp : fp - x;
  return 1.0 + q * B * std::pow(z, q - 1.0);
}

double Reparam::eval(double x) const {
  if (identity) return x;
  if (x <= x0) return std::pow(x, k);
  if (x >= x1) return x;
  double t = x - x0;
  return c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
}

double Reparam::deriv(double x) const {
  if (identity) return 1.0;
  if (x <= x0) return k * std::pow(x, k - 1.0);
  if (x >= x1) return 1.0;
  double t = x - x0;
  return c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
}

double Reparam::inverse(double u) const {
  if (identity) return u;
  if (u <= c[0]) return std::pow(u, 1.0 / k);
  if (u >= x1) return u;
  auto fdf = [&](double x) { return std::pair<double, double>(eval(x) - u, deriv(x)); };
  return solve_monotone(fdf, x0, x1, 0.5 * (x0 + x1), 1e-15, 200);
}

double SingularHalf::eval(double x) const {
  double v = mirrored ? -x : x;
  double u = s.eval(v);
  double g = u - std::pow(1.0 - u, 1.0 + ell);
  return mirrored ? -g : g;
}

double SingularHalf::deriv(double x) const {
  double v = mirrored ? -x : x;
  double u = s.eval(v);
  double gp = 1.0 + (1.0 + ell) * std::pow(1.0 - u, ell);
  return gp * s.deriv(v);
}

double SingularHalf::image_offset(double x) const {
  double v = mirrored ? -x : x;
  double u = s.eval(v);
  // distance from the endpoint the interface side maps to; equals
  // u + 1 - (1-u)^{1+ell} without the cancellation of the direct form
  return u - std::expm1((1.0 + ell) * std::log1p(-u));
}

double SingularHalf::inverse(double y) const {
  double target = mirrored ? -y : y;
  double zu = solve_backward_step(1.0 - target, 1.0, 1.0 + ell);
  double u = std::clamp(1.0 - zu, 0.0, 1.0);
  double v = s.inverse(u);
  return mirrored ? -v : v;
}

double Branch::eval(double x) const {
  if (singular) return singular->eval(x);
  if (pieces.size() == 2 && x > pieces[0].hi) return pieces[1].eval(x);
  return pieces[0].eval(x);
}

double Branch::deriv(double x) const {
  if (singular) return singular->deriv(x);
  if (pieces.size() == 2 && x > pieces[0].hi) return pieces[1].deriv(x);
  return pieces[0].deriv(x);
}

double Branch::inverse(double y) const {
  double x;
  if (singular) {
    x = singular->inverse(y);
  } else if (pieces.size() == 2) {
    double xi = pieces[0].hi;
    if (y <= xi) {
      x = xi - solve_backward_step(xi - y, pieces[0].B, pieces[0].q);
    } else {
      x = xi + solve_backward_step(y - xi, pieces[1].B, pieces[1].q);
    }
  } else {
    const PowerPiece& p = pieces[0];
    if (p.fp_left) {
      x = p.fp + solve_backward_step(y - p.fp, p.B, p.q);
    } else {
      x = p.fp - solve_backward_step(p.fp - y, p.B, p.q);
    }
  }
  return std::clamp(x, lo, hi);
}

int IntervalMap::branch_of(double x) const {
  return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

double IntervalMap::eval(double x) const {
  if (!(x >= x_min && x <= x_max))
    throw config_error("eval: x = " + fmt(x) + " outside phase interval");
  double y = branches[branch_of(x)].eval(x);
  // the true image lies in the phase interval; clamp the final rounding
  return std::clamp(y, x_min, x_max);
}

double IntervalMap::deriv(double x) const {
  if (!(x >= x_min && x <= x_max))
    throw config_error("deriv: x = " + fmt(x) + " outside phase interval");
  return branches[branch_of(x)].deriv(x);
}

double IntervalMap::inverse_branch(int branch_id, double y) const {
  if (branch_id < 0 || branch_id >= static_cast<int>(branches.size()))
    throw config_error("inverse_branch: branch id " + std::to_string(branch_id) + " out of range");
  if (!(y >= x_min && y <= x_max))
    throw config_error("inverse_branch: y = " + fmt(y) + " outside phase interval");
  return branches[branch_id].inverse(y);
}

const SideLaw& IntervalMap::side(int fp_index, int dir) const {
  for (const SideLaw& s : sides)
    if (s.fp_index == fp_index && s.dir == dir) return s;
  throw config_error("no side law for fixed point " + std::to_string(fp_index) +
                     ", dir " + std::to_string(dir));
}

std::uint64_t IntervalMap::hash() const { return fnv1a64_str(map_to_json(*this).dump()); }

IntervalMap build_thaler_map(double alpha, const std::vector<double>& cuts,
                             const std::vector<double>& interior_fixed_points) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw config_error("alpha must lie in (0, 1]");
  if (cuts.empty()) throw config_error("at least one cut is required");
  for (double c : cuts)
    if (!(c > 0.0 && c < 1.0)) throw config_error("cuts must lie strictly inside (0, 1)");
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (!(cuts[i] < cuts[i + 1])) throw config_error("cuts must be strictly increasing");
  const int d = static_cast<int>(cuts.size()) + 1;
  if (alpha == 1.0 && d >= 3)
    throw config_error("alpha = 1 does not admit C2 gluing at interior fixed points");
  if (!interior_fixed_points.empty() &&
      static_cast<int>(interior_fixed_points.size()) != d - 2)
    throw config_error("interior_fixed_points must list exactly d-2 positions");

  IntervalMap m;
  m.family = Family::thaler;
  m.x_min = 0.0;
  m.x_max = 1.0;
  m.alpha = alpha;
  m.q = 1.0 + 1.0 / alpha;
  m.cuts = cuts;
  m.fixed_points.assign(d, 0.0);
  m.sidedness.assign(d, 2);
  m.bk.assign(d, 0.0);
  m.fixed_points[0] = 0.0;
  m.fixed_points[d - 1] = 1.0;
  m.sidedness[0] = m.sidedness[d - 1] = 1;
  m.bk[0] = (1.0 - cuts[0]) / std::pow(cuts[0], m.q);
  m.bk[d - 1] = cuts[d - 2] / std::pow(1.0 - cuts[d - 2], m.q);

  for (int k = 1; k + 1 < d; ++k) {
    double cl = cuts[k - 1], cr = cuts[k];
    // equal left/right drift constants pin the fixed point in closed form
    double rho = std::pow((1.0 - cr) / cl, 1.0 / m.q);
    double xi = (cr + rho * cl) / (1.0 + rho);
    if (!interior_fixed_points.empty()) {
      double res = interior_fixed_points[k - 1] - xi;
      if (std::abs(res) > 1e-6)
        throw config_error("interior fixed point " + std::to_string(k) + " at " +
                           fmt(interior_fixed_points[k - 1]) +
                           " is infeasible: gluing requires " + fmt(xi) +
                           " (residual " + fmt(res) + ")");
    }
    m.fixed_points[k] = xi;
    m.bk[k] = cl / std::pow(xi - cl, m.q);
  }

  for (int k = 0; k < d; ++k) {
    Branch b;
    b.id = k;
    b.lo = (k == 0) ? 0.0 : cuts[k - 1];
    b.hi = (k == d - 1) ? 1.0 : cuts[k];
    if (k == 0) {
      b.pieces.push_back({b.lo, b.hi, 0.0, true, m.bk[0], m.q});
      m.sides.push_back({0, +1, m.bk[0], m.q, b.hi, b.hi, 0});
    } else if (k == d - 1) {
      b.pieces.push_back({b.lo, b.hi, 1.0, false, m.bk[k], m.q});
      m.sides.push_back({k, -1, m.bk[k], m.q, 1.0 - b.lo, 1.0 - b.lo, k});
    } else {
      double xi = m.fixed_points[k];
      b.pieces.push_back({b.lo, xi, xi, false, m.bk[k], m.q});
      b.pieces.push_back({xi, b.hi, xi, true, m.bk[k], m.q});
      m.sides.push_back({k, -1, m.bk[k], m.q, xi - b.lo, xi - b.lo, k});
      m.sides.push_back({k, +1, m.bk[k], m.q, b.hi - xi, b.hi - xi, k});
    }
    m.branches.push_back(std::move(b));
  }
  return m;
}

IntervalMap build_interface_map(double ell) {
  if (!(ell > 1.0))
    throw config_error("ell must exceed 1 (the invariant measure is finite otherwise)");
  IntervalMap m;
  m.family = Family::interface_smooth;
  m.x_min = -1.0;
  m.x_max = 1.0;
  m.ell = ell;
  m.alpha = 1.0 / ell;
  m.q = 1.0 + ell;
  m.cuts = {0.0};
  m.fixed_points = {-1.0, 1.0};
  m.sidedness = {1, 1};
  m.bk = {1.0, 1.0};
  m.k_plus = m.k_minus = 1.0;
  m.a_plus = m.a_minus = 2.0 + ell;
  m.b_plus = m.b_minus = 1.0;

  Branch neg;
  neg.id = 0;
  neg.lo = -1.0;
  neg.hi = 0.0;
  neg.pieces.push_back({-1.0, 0.0, -1.0, true, 1.0, m.q});
  m.branches.push_back(std::move(neg));
  Branch pos;
  pos.id = 1;
  pos.lo = 0.0;
  pos.hi = 1.0;
  pos.pieces.push_back({0.0, 1.0, 1.0, false, 1.0, m.q});
  m.branches.push_back(std::move(pos));
  m.sides.push_back({0, +1, 1.0, m.q, 1.0, 1.0, 0});
  m.sides.push_back({1, -1, 1.0, m.q, 1.0, 1.0, 1});
  return m;
}

namespace {

Reparam make_reparam(double k, double x0) {
  Reparam s;
  s.k = k;
  if (k == 1.0) {
    s.identity = true;
    s.x0 = 0.0;
    s.x1 = 0.0;
    return s;
  }
  s.identity = false;
  s.x0 = x0;
  double v0 = std::pow(x0, k);
  double start = std::clamp(v0 + 0.25, 0.3, 0.9);
  for (double x1 = start; x1 <= 0.9 + 1e-9; x1 += 0.1) {
    x1 = std::min(x1, 0.9);
    if (x1 <= x0 + 0.05 || x1 <= v0 + 0.02) continue;
    Reparam cand = s;
    cand.x1 = x1;
    double h = x1 - x0;
    double c0 = v0;
    double c1 = k * std::pow(x0, k - 1.0);
    double c2 = 0.5 * k * (k - 1.0) * std::pow(x0, k - 2.0);
    double r0 = x1 - (c0 + h * (c1 + h * c2));
    double r1 = 1.0 - (c1 + 2.0 * c2 * h);
    double r2 = -2.0 * c2;
    double A = r0 / (h * h * h), Bq = r1 / (h * h), C = r2 / h;
    cand.c = {c0, c1, c2, 10.0 * A - 4.0 * Bq + 0.5 * C, (-15.0 * A + 7.0 * Bq - C) / h,
              (12.0 * A - 6.0 * Bq + C) / (2.0 * h * h)};
    bool monotone = true;
    for (int i = 0; i <= 2000 && monotone; ++i) {
      double x = x0 + h * static_cast<double>(i) / 2000.0;
      if (!(cand.deriv(x) > 0.0)) monotone = false;
    }
    if (monotone && std::abs(cand.eval(x1) - x1) < 1e-9) return cand;
  }
  throw config_error("interface glue is not monotone for k = " + fmt(k) +
                     ", blend_point = " + fmt(x0) + "; move blend_point");
}

}  // namespace

IntervalMap build_interface_map_singular(double ell, double k_plus, double k_minus,
                                         double blend_point) {
  if (!(ell > 1.0))
    throw config_error("ell must exceed 1 (the invariant measure is finite otherwise)");
  if (!(k_plus > 0.0 && k_minus > 0.0)) throw config_error("interface orders must be positive");
  if (!(blend_point > 0.0 && blend_point < 0.85))
    throw config_error("blend_point must lie in (0, 0.85)");
  if (k_plus == 1.0 && k_minus == 1.0) return build_interface_map(ell);
  double alpha_plus = 1.0 / (ell * k_minus);
  double alpha_minus = 1.0 / (ell * k_plus);
  if (std::abs(alpha_plus - alpha_minus) > 1e-12)
    throw config_error("tail exponents differ: alpha_+ = " + fmt(alpha_plus) +
                       ", alpha_- = " + fmt(alpha_minus) + "; equal exponents required");
  if (!(ell * std::min(k_plus, k_minus) > 1.0))
    throw config_error("ell*min(k) must exceed 1 so the tail exponent stays below 1");

  IntervalMap m;
  m.family = Family::interface_singular;
  m.x_min = -1.0;
  m.x_max = 1.0;
  m.ell = ell;
  m.alpha = alpha_plus;
  m.q = 1.0 + ell;
  m.cuts = {0.0};
  m.fixed_points = {-1.0, 1.0};
  m.sidedness = {1, 1};
  m.bk = {1.0, 1.0};
  m.k_plus = k_plus;
  m.k_minus = k_minus;
  m.a_plus = m.a_minus = 2.0 + ell;
  m.b_plus = m.b_minus = 1.0;
  m.blend_point = blend_point;

  Reparam sp = make_reparam(k_plus, blend_point);
  Reparam sm = make_reparam(k_minus, blend_point);

  Branch neg;
  neg.id = 0;
  neg.lo = -1.0;
  neg.hi = 0.0;
  neg.singular = SingularHalf{sm, ell, true};
  m.branches.push_back(std::move(neg));
  Branch pos;
  pos.id = 1;
  pos.lo = 0.0;
  pos.hi = 1.0;
  pos.singular = SingularHalf{sp, ell, false};
  m.branches.push_back(std::move(pos));
  // the z-law at each endpoint is exact while s is the identity there
  m.sides.push_back({0, +1, 1.0, m.q, 1.0 - sm.x1, 1.0, 0});
  m.sides.push_back({1, -1, 1.0, m.q, 1.0 - sp.x1, 1.0, 1});
  return m;
}

nlohmann::json map_to_json(const IntervalMap& m) {
  nlohmann::json j;
  j["schema"] = "map/v1";
  j["family"] = family_name(m.family);
  switch (m.family) {
    case Family::thaler:
      j["alpha"] = m.alpha;
      j["cuts"] = m.cuts;
      if (m.d() > 2)
        j["interior_fixed_points"] = std::vector<double>(m.fixed_points.begin() + 1,
                                                         m.fixed_points.end() - 1);
      break;
    case Family::interface_smooth:
      j["ell"] = m.ell;
      break;
    case Family::interface_singular:
      j["ell"] = m.ell;
      j["k_plus"] = m.k_plus;
      j["k_minus"] = m.k_minus;
      j["blend_point"] = m.blend_point;
      break;
  }
  j["derived"] = {{"alpha", m.alpha},
                  {"q", m.q},
                  {"fixed_points", m.fixed_points},
                  {"bk", m.bk}};
  return j;
}

IntervalMap map_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("schema", std::string()) != "map/v1")
      throw config_error("unsupported map document; expected schema map/v1");
    const std::string fam = j.at("family").get<std::string>();
    IntervalMap m;
    if (fam == "thaler") {
      m = build_thaler_map(j.at("alpha").get<double>(), j.at("cuts").get<std::vector<double>>(),
                           j.value("interior_fixed_points", std::vector<double>{}));
    } else if (fam == "interface") {
      m = build_interface_map(j.at("ell").get<double>());
    } else if (fam == "interface-singular") {
      m = build_interface_map_singular(j.at("ell").get<double>(), j.at("k_plus").get<double>(),
                                       j.at("k_minus").get<double>(),
                                       j.value("blend_point", 0.1));
    } else {
      throw config_error("unknown map family: " + fam);
    }
    if (j.contains("derived")) {
      auto fp = j["derived"].value("fixed_points", std::vector<double>{});
      auto bk = j["derived"].value("bk", std::vector<double>{});
      bool ok = fp.size() == m.fixed_points.size() && bk.size() == m.bk.size();
      for (std::size_t i = 0; ok && i < fp.size(); ++i)
        ok = std::abs(fp[i] - m.fixed_points[i]) <= 1e-12 &&
             std::abs(bk[i] - m.bk[i]) <= 1e-12 * std::max(1.0, std::abs(m.bk[i]));
      if (!ok) throw config_error("map derived block disagrees with the rebuilt map");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed map document: ") + e.what());
  }
}

ValidationReport validate_map(const IntervalMap& m) {
  ValidationReport R;
  R.monotone_ok = true;
  R.onto_ok = true;

  for (const SideLaw& s : m.sides) {
    FixedPointCheck c;
    c.fp_index = s.fp_index;
    c.dir = s.dir;
    c.expected_exponent = s.q;
    c.expected_prefactor = s.B;
    const double xi = m.fixed_points[s.fp_index];
    const Branch& br = m.branches[s.branch_id];

    c.fixed_exact = br.eval(xi) == xi;
    c.deriv_one = std::abs(br.deriv(xi) - 1.0) <= 1e-10;

    // window where the drift is extractable from eval outputs: B z^q must
    // clear the representation grain near xi by three digits
    double z_lo = 1e-6;
    if (xi != 0.0)
      z_lo = std::max(z_lo, std::pow(1e3 * 2.3e-16 * std::abs(xi) / s.B, 1.0 / s.q));
    else
      z_lo = std::max(z_lo, std::pow(1e3 * 2.3e-16 / s.B, 1.0 / (s.q - 1.0)));
    double z_hi = std::min({1e-2, 0.5 * s.z_cut, s.z_pure});
    std::vector<std::pair<double, double>> pts;
    const int n_grid = 48;
    for (int i = 0; i < n_grid; ++i) {
      double z = z_lo * std::pow(z_hi / z_lo, static_cast<double>(i) / (n_grid - 1));
      double x = xi + s.dir * z;
      double zx = s.dir > 0 ? x - xi : xi - x;
      double y = br.eval(x);
      double zy = s.dir > 0 ? y - xi : xi - y;
      double drift = zy - zx;
      if (drift > 0.0 && zx > 0.0) pts.push_back({zx, drift});
    }
    auto fit = fit_power_law_points(pts);
    c.fitted_exponent = fit.slope;
    c.fitted_prefactor = fit.prefactor;

    double z0 = std::max(4.0 * z_lo, 0.25 * z_hi), h = 0.25 * z0;
    auto drift_at = [&](double z) {
      double x = xi + s.dir * z;
      double y = br.eval(x);
      return (s.dir > 0 ? y - xi : xi - y) - (s.dir > 0 ? x - xi : xi - x);
    };
    c.convex_ok = drift_at(z0 + h) - 2.0 * drift_at(z0) + drift_at(z0 - h) > 0.0;

    c.pass = c.fixed_exact && c.deriv_one && c.convex_ok &&
             std::abs(c.fitted_exponent - c.expected_exponent) <= 0.02 &&
             std::abs(c.fitted_prefactor / c.expected_prefactor - 1.0) <= 0.02;
    if (!c.pass)
      R.notes.push_back("fixed point " + std::to_string(c.fp_index) + " side " +
                        std::to_string(c.dir) + ": fitted exponent " + fmt(c.fitted_exponent) +
                        ", prefactor " + fmt(c.fitted_prefactor));
    R.fixed_point_checks.push_back(c);
  }

  if (m.family == Family::interface_smooth) {
    for (int side : {-1, +1}) {
      LocalFormCheck lc;
      lc.side = side;
      lc.fitted_order = lc.expected_order = 1.0;
      lc.expected_coef = side > 0 ? m.a_plus : m.a_minus;
      lc.fitted_coef = m.branches[side > 0 ? 1 : 0].deriv(0.0);
      lc.pass = std::abs(lc.fitted_coef - lc.expected_coef) <= 1e-10;
      R.interface_checks.push_back(lc);
    }
  } else if (m.family == Family::interface_singular) {
    for (int side : {-1, +1}) {
      LocalFormCheck lc;
      lc.side = side;
      lc.expected_order = side > 0 ? m.k_plus : m.k_minus;
      lc.expected_coef = side > 0 ? m.a_plus : m.a_minus;
      const Branch& br = m.branches[side > 0 ? 1 : 0];
      std::vector<std::pair<double, double>> pts;
      for (int i = 0; i < 48; ++i) {
        double ax = 1e-6 * std::pow(1e3, static_cast<double>(i) / 47.0);
        pts.push_back({ax, br.singular->image_offset(side > 0 ? ax : -ax)});
      }
      auto fit = fit_power_law_points(pts);
      lc.fitted_order = fit.slope;
      lc.fitted_coef = fit.prefactor;
      // the coefficient band is wide: the finite fit window sees the
      // curvature of g on top of the leading a|x|^k term
      lc.pass = std::abs(lc.fitted_order - lc.expected_order) <= 0.02 &&
                std::abs(lc.fitted_coef / lc.expected_coef - 1.0) <= 0.10;
      R.interface_checks.push_back(lc);
    }
  }

  const double excl = 0.05;
  if (m.family == Family::interface_singular) {
    // a reparametrized interface cannot keep f' >= 1 pointwise; the source
    // conditions only require expansion along composed first returns
    R.expansion_deferred = true;
    R.notes.push_back(
        "single-step derivative dips below 1 away from the neutral points; "
        "expansion is checked along induced returns instead");
  }
  double min_deriv = std::numeric_limits<double>::infinity();
  const int n_samp = 20001;
  for (int i = 1; i < n_samp - 1; ++i) {
    double x = m.x_min + (m.x_max - m.x_min) * static_cast<double>(i) / (n_samp - 1);
    bool excluded = false;
    for (double xi : m.fixed_points)
      if (std::abs(x - xi) < excl) excluded = true;
    for (double c : m.cuts)
      if (std::abs(x - c) < 1e-12) excluded = true;  // branches are open at cuts
    if (excluded) continue;
    min_deriv = std::min(min_deriv, m.deriv(x));
  }
  R.min_deriv = min_deriv;

  for (const Branch& br : m.branches) {
    for (int i = 1; i < 10000; ++i) {
      double x = br.lo + (br.hi - br.lo) * static_cast<double>(i) / 10000.0;
      if (!(br.deriv(x) > 0.0)) {
        R.monotone_ok = false;
        R.notes.push_back("branch " + std::to_string(br.id) + " not increasing at x = " + fmt(x));
        break;
      }
    }
    if (std::abs(br.eval(br.lo) - m.x_min) > 1e-12 || std::abs(br.eval(br.hi) - m.x_max) > 1e-12)
      R.onto_ok = false;
  }

  bool deriv_ok = R.expansion_deferred ? R.min_deriv > 0.0 : R.min_deriv >= 1.0 - 1e-12;
  R.pass = R.monotone_ok && R.onto_ok && deriv_ok;
  for (const auto& c : R.fixed_point_checks) R.pass = R.pass && c.pass;
  for (const auto& c : R.interface_checks) R.pass = R.pass && c.pass;
  return R;
}

}  // namespace norb
