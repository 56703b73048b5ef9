#pragma once
// Interval maps with neutral fixed points, built from exact power-form
// branches: multi-branch maps on [0,1] with a neutral point per branch
// endpoint, and two-branch maps on [-1,1] whose branches meet at an
// interface point where the derivative may jump, vanish, or diverge.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace norb {

enum class Family { thaler, interface_smooth, interface_singular };

std::string family_name(Family f);
Family parse_family(const std::string& name);

// One monotone piece f(x) = x +- B|x - fp|^q anchored at a neutral endpoint
// of its domain. In distance coordinates z = |x - fp| the piece is exactly
// z -> z + B z^q on both sides.
struct PowerPiece {
  double lo = 0.0, hi = 1.0;
  double fp = 0.0;      // anchor, equal to lo or hi
  bool fp_left = true;  // anchor at lo: f = x + B(x-lo)^q; else f = x - B(hi-x)^q
  double B = 1.0;
  double q = 2.0;

  double eval(double x) const;
  double deriv(double x) const;
};

// Monotone reparametrization s of [0,1]: pure power x^k on [0, x0], quintic
// blend on [x0, x1], identity on [x1, 1]. k = 1 collapses to the identity.
struct Reparam {
  double k = 1.0;
  double x0 = 0.1;
  double x1 = 0.5;
  std::array<double, 6> c{};  // blend coefficients in powers of (x - x0)
  bool identity = true;

  double eval(double x) const;
  double deriv(double x) const;
  double inverse(double u) const;
};

// One half of a singular interface map: f(x) = g(s(x)) on [0,1] with
// g(u) = u - (1-u)^{1+ell}; the left half is the odd mirror -g(s(-x)).
struct SingularHalf {
  Reparam s;
  double ell = 2.0;
  bool mirrored = false;

  double eval(double x) const;
  double deriv(double x) const;
  // distance of f(x) from the endpoint the branch maps x0-side points to,
  // computed without cancellation (right half: f(x) + 1)
  double image_offset(double x) const;
  double inverse(double y) const;
};

struct Branch {
  int id = 0;
  double lo = 0.0, hi = 1.0;
  std::vector<PowerPiece> pieces;  // one piece, or two around an interior fixed point
  std::optional<SingularHalf> singular;

  double eval(double x) const;
  double deriv(double x) const;
  double inverse(double y) const;  // unique preimage in [lo, hi], |f(x)-y| driven below 1e-14
};

// Exact z -> z + B z^q law on one side of a neutral fixed point, valid for
// z <= z_pure; beyond that the branch is only reachable through Branch::inverse.
struct SideLaw {
  int fp_index = 0;
  int dir = +1;  // +1: z = x - xi, -1: z = xi - x
  double B = 1.0;
  double q = 2.0;
  double z_pure = 1.0;
  double z_cut = 1.0;  // distance from xi to the branch boundary on this side
  int branch_id = 0;
};

struct IntervalMap {
  Family family = Family::thaler;
  double x_min = 0.0, x_max = 1.0;
  double alpha = 0.5;  // return-tail exponent
  double q = 3.0;      // neutral drift order: 1 + 1/alpha, or 1 + ell
  std::vector<double> fixed_points;
  std::vector<int> sidedness;  // 1 at phase-interval endpoints, 2 interior
  std::vector<double> bk;      // drift constant at each fixed point
  std::vector<double> cuts;    // branch boundaries interior to the phase interval
  std::vector<Branch> branches;
  std::vector<SideLaw> sides;

  // interface-family parameters (unused for the [0,1] family)
  double ell = 0.0;
  double k_plus = 1.0, k_minus = 1.0;
  double a_plus = 0.0, a_minus = 0.0;
  double b_plus = 0.0, b_minus = 0.0;
  double blend_point = 0.0;

  int d() const { return static_cast<int>(fixed_points.size()); }
  int branch_of(double x) const;  // right-continuous at cuts
  double eval(double x) const;
  double deriv(double x) const;
  double inverse_branch(int branch_id, double y) const;
  const SideLaw& side(int fp_index, int dir) const;
  std::uint64_t hash() const;
};

// alpha in (0,1]; cuts strictly increasing inside (0,1). Interior fixed
// points are solved from the equal-drift-constant gluing condition; a
// nonempty interior_fixed_points list is checked against the solved
// positions and rejected with the residual if it disagrees.
IntervalMap build_thaler_map(double alpha, const std::vector<double>& cuts,
                             const std::vector<double>& interior_fixed_points = {});

// f(x) = x + (1+x)^{1+ell} on [-1,0), x - (1-x)^{1+ell} on [0,1]; ell > 1.
IntervalMap build_interface_map(double ell);

// Halves g o s with s = x^k near 0; k_plus, k_minus > 0 with
// ell*min(k) > 1 and equal tail exponents on both sides.
IntervalMap build_interface_map_singular(double ell, double k_plus, double k_minus,
                                         double blend_point = 0.1);

nlohmann::json map_to_json(const IntervalMap& m);
IntervalMap map_from_json(const nlohmann::json& j);

struct FixedPointCheck {
  int fp_index = 0;
  int dir = 0;
  double fitted_exponent = 0.0, expected_exponent = 0.0;
  double fitted_prefactor = 0.0, expected_prefactor = 0.0;
  bool fixed_exact = false;   // eval(xi) == xi
  bool deriv_one = false;     // |f'(xi) - 1| <= 1e-10
  bool convex_ok = false;     // drift strictly convex in z on this side
  bool pass = false;
};

struct LocalFormCheck {
  int side = +1;  // -1: form at 0-, +1: form at 0+
  double fitted_order = 0.0, expected_order = 0.0;
  double fitted_coef = 0.0, expected_coef = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<FixedPointCheck> fixed_point_checks;
  std::vector<LocalFormCheck> interface_checks;
  double min_deriv = 0.0;  // outside excluded neighborhoods
  bool monotone_ok = false;
  bool onto_ok = false;
  bool expansion_deferred = false;  // critical interface order: see induced-map checks
  bool pass = false;
  std::vector<std::string> notes;
};

ValidationReport validate_map(const IntervalMap& m);

}  // namespace norb
