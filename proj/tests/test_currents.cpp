#include "symphodge/currents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "symphodge/errors.hpp"
#include "symphodge/smoothing.hpp"

using namespace symph;

namespace {

Eigen::VectorXd pt(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Mask mk(std::initializer_list<int> axes_1based) {
  Mask m = 0;
  for (int a : axes_1based) m |= Mask(1) << (a - 1);
  return m;
}

PolyChain segment(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                  double coeff = 1.0) {
  PolyChain c(static_cast<int>(a.size()), 1);
  c.add(coeff, Simplex({a, b}));
  return c;
}

// unit square spanned by axes (i, j), offset to `base`, split into two
// positively oriented triangles
PolyChain square_on_axes(int ambient, int i, int j, const Eigen::VectorXd& base,
                         double side = 1.0) {
  Eigen::VectorXd o = base, ei = base, ej = base, eij = base;
  ei[i] += side;
  ej[j] += side;
  eij[i] += side;
  eij[j] += side;
  PolyChain c(ambient, 2);
  c.add(1.0, Simplex({o, ei, eij}));
  c.add(1.0, Simplex({o, eij, ej}));
  return c;
}

// the cube [0, side]^d as d! simplices carrying the positive orientation
PolyChain kuhn_cube(int d, double side) {
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  PolyChain c(d, d);
  do {
    int inversions = 0;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        if (perm[i] > perm[j]) ++inversions;
    std::vector<Eigen::VectorXd> v(d + 1, Eigen::VectorXd::Zero(d));
    for (int k = 1; k <= d; ++k) {
      v[k] = v[k - 1];
      v[k][perm[k - 1]] += side;
    }
    c.add(inversions % 2 == 0 ? 1.0 : -1.0, Simplex(v));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return c;
}

PolyChain rectangle_loop_2d(double x0, double y0, double x1, double y1) {
  PolyChain c(2, 1);
  c += segment(pt({x0, y0}), pt({x1, y0}));
  c += segment(pt({x1, y0}), pt({x1, y1}));
  c += segment(pt({x1, y1}), pt({x0, y1}));
  c += segment(pt({x0, y1}), pt({x0, y0}));
  return c;
}

DualCurrent chain_current(const PolyChain& c, const SymplecticStructure& S) {
  return DualCurrent(CurrentRep::from_chain(c), S);
}

DualCurrent field_current(const FieldForm& f, const SymplecticStructure& S) {
  return DualCurrent(CurrentRep::from_field(f), S);
}

// |a - b| within tol relative to the magnitudes involved
void check_near(double a, double b, double tol) {
  CHECK(std::abs(a - b) <= tol * (1.0 + std::abs(a) + std::abs(b)));
}

}  // namespace

TEST_CASE("construction, degree bookkeeping, and pairing guards") {
  auto S = make_standard_symplectic(2);
  TorusGrid g{2, 8};

  PolyChain tri(4, 2);
  tri.add(1.0, Simplex({pt({0.1, 0.1, 0.1, 0.1}), pt({0.6, 0.1, 0.2, 0.1}),
                        pt({0.2, 0.5, 0.3, 0.2})}));
  DualCurrent T = chain_current(tri, S);
  CHECK(T.dimension() == 2);
  CHECK(T.degree() == 2);

  DualCurrent LT = L_c(T);
  CHECK(LT.degree() == 4);
  CHECK(LT.dimension() == 0);
  CHECK(LT.rep().kind == CurrentRep::Kind::FormWedgeChain);

  DualCurrent sT = star_c(d_c(T));
  CHECK(sT.degree() == 4 - 3);
  CHECK_FALSE(sT.vanishes_by_degree());

  // degree overflow: the current vanishes identically
  DualCurrent over = L_c(L_c(L_c(T)));
  CHECK(over.vanishes_by_degree());
  CurrentBattery b{g, 8, 1, 77, QuadratureSpec{8}};
  CHECK(battery_sup(over, b) == 0.0);

  // a dimension-2 current pairs only with 2-forms on the same torus
  CHECK_THROWS_AS(T.evaluate(FieldForm::random_band_limited(g, 1, 1, 3)),
                  DomainError);
  CHECK_THROWS_AS(T.evaluate(FieldForm::random_band_limited(TorusGrid{1, 8}, 2, 1, 3)),
                  DomainError);
  CHECK_THROWS_AS(T.evaluate(PointwiseForm::scalar(2, 1.0)), DomainError);

  // ambient mismatch at construction
  PolyChain seg2(2, 1);
  seg2.add(1.0, Simplex({pt({0.0, 0.0}), pt({0.5, 0.5})}));
  CHECK_THROWS_AS(chain_current(seg2, S), DomainError);
}

TEST_CASE("the Lefschetz factor annihilates the Lagrangian x-torus") {
  auto S = make_standard_symplectic(2);
  TorusGrid g{2, 8};
  // unit 2-torus along the x_1, x_2 axes: omega restricts to zero on it
  PolyChain xtorus = square_on_axes(4, 0, 2, Eigen::VectorXd::Zero(4));
  DualCurrent T = chain_current(xtorus, S);

  DualCurrent LT = L_c(T);
  CHECK(LT.rep().kind == CurrentRep::Kind::FormWedgeChain);
  CHECK(LT.evaluate(PointwiseForm::scalar(2, 1.0)) == doctest::Approx(0.0).epsilon(1e-14));

  CurrentBattery b{g, 50, 1, 2026, QuadratureSpec{12}};
  CHECK(battery_sup(LT, b) <= 1e-9);

  // a cell spanning a conjugate pair is hit squarely by omega
  DualCurrent cell = chain_current(square_on_axes(4, 0, 1, Eigen::VectorXd::Zero(4)), S);
  DualCurrent Lcell = L_c(cell);
  CHECK(std::abs(Lcell.evaluate(PointwiseForm::scalar(2, 3.0)) - 3.0) <= 1e-12);
  CHECK(battery_sup(Lcell, b) > 1e-3);
}

TEST_CASE("degree counting eigenvalues at the extreme dimensions") {
  SUBCASE("two-torus") {
    auto S = make_standard_symplectic(1);
    TorusGrid g{1, 16};
    CurrentBattery b{g, 50, 2, 11, QuadratureSpec{12}};

    // top-dimensional current: eigenvalue +n
    DualCurrent top = chain_current(kuhn_cube(2, 1.0), S);
    CHECK(top.dimension() == 2);
    for (const FieldForm& phi : battery_forms(b, 2))
      check_near(H_c(top).evaluate(phi, b.quad), 1.0 * top.evaluate(phi, b.quad), 1e-10);

    // point mass: eigenvalue -n
    PolyChain point(2, 0);
    point.add(1.5, Simplex({pt({0.3, 0.4})}));
    DualCurrent P = chain_current(point, S);
    CHECK(P.dimension() == 0);
    for (const FieldForm& phi : battery_forms(b, 0))
      check_near(H_c(P).evaluate(phi, b.quad), -1.0 * P.evaluate(phi, b.quad), 1e-10);
  }
  SUBCASE("four-torus, constant test forms") {
    auto S = make_standard_symplectic(2);
    PointwiseForm vol = PointwiseForm::basis(2, mk({1, 2, 3, 4}), 0.7);
    DualCurrent top = chain_current(kuhn_cube(4, 1.0), S);
    check_near(H_c(top).evaluate(vol), 2.0 * top.evaluate(vol), 1e-13);

    PolyChain point(4, 0);
    point.add(2.0, Simplex({pt({0.1, 0.9, 0.4, 0.2})}));
    DualCurrent P = chain_current(point, S);
    check_near(H_c(P).evaluate(PointwiseForm::scalar(2, 1.3)),
               -2.0 * P.evaluate(PointwiseForm::scalar(2, 1.3)), 1e-13);
  }
}

TEST_CASE("sl2 commutator relations on currents") {
  auto run = [](const SymplecticStructure& S, const TorusGrid& g, int deg,
                const DualCurrent& T, int count, int kmax) {
    CurrentBattery b{g, count, kmax, 555 + static_cast<std::uint64_t>(deg),
                     QuadratureSpec{12}};
    auto LHS_rhs = [&](const DualCurrent& A, const DualCurrent& B) {
      for (const FieldForm& phi : battery_forms(b, A.dimension()))
        check_near(A.evaluate(phi, b.quad), B.evaluate(phi, b.quad), 1e-8);
    };
    // [Lambda, L] = H
    {
      DualCurrent lhs1 = Lambda_c(L_c(T));
      DualCurrent lhs2 = L_c(Lambda_c(T));
      DualCurrent rhs = H_c(T);
      for (const FieldForm& phi : battery_forms(b, rhs.dimension()))
        check_near(lhs1.evaluate(phi, b.quad) - lhs2.evaluate(phi, b.quad),
                   rhs.evaluate(phi, b.quad), 1e-8);
    }
    // [H, Lambda] = 2 Lambda
    {
      DualCurrent lhs1 = H_c(Lambda_c(T));
      DualCurrent lhs2 = Lambda_c(H_c(T));
      DualCurrent rhs = Lambda_c(T);
      if (!rhs.vanishes_by_degree())
        for (const FieldForm& phi : battery_forms(b, rhs.dimension()))
          check_near(lhs1.evaluate(phi, b.quad) - lhs2.evaluate(phi, b.quad),
                     2.0 * rhs.evaluate(phi, b.quad), 1e-8);
    }
    // [H, L] = -2 L
    {
      DualCurrent lhs1 = H_c(L_c(T));
      DualCurrent lhs2 = L_c(H_c(T));
      DualCurrent rhs = L_c(T);
      if (!rhs.vanishes_by_degree())
        for (const FieldForm& phi : battery_forms(b, rhs.dimension()))
          check_near(lhs1.evaluate(phi, b.quad) - lhs2.evaluate(phi, b.quad),
                     -2.0 * rhs.evaluate(phi, b.quad), 1e-8);
    }
    (void)LHS_rhs;
  };

  SUBCASE("field currents on the two-torus") {
    auto S = make_standard_symplectic(1);
    TorusGrid g{1, 16};
    for (int deg = 0; deg <= 2; ++deg)
      run(S, g, deg,
          field_current(FieldForm::random_band_limited(g, deg, 2, 91 + deg), S),
          50, 2);
  }
  SUBCASE("field currents on the four-torus") {
    auto S = make_standard_symplectic(2);
    TorusGrid g{2, 8};
    run(S, g, 2, field_current(FieldForm::random_band_limited(g, 2, 1, 17), S),
        50, 1);
  }
  SUBCASE("a smoothed chain current") {
    auto S = make_standard_symplectic(1);
    TorusGrid g{1, 16};
    PolyChain c = segment(pt({0.15, 0.3}), pt({0.8, 0.55}));
    DualCurrent T = smooth_current(chain_current(c, S), g, 0.2);
    CHECK(T.rep().kind == CurrentRep::Kind::Field);
    run(S, g, 1, T, 50, 2);
  }
}

TEST_CASE("differential commutator relations on currents") {
  auto S = make_standard_symplectic(2);
  TorusGrid g{2, 8};
  CurrentBattery b{g, 50, 1, 9001, QuadratureSpec{12}};

  auto pair_all = [&](const DualCurrent& A, const DualCurrent& B, double scale_b,
                      double tol) {
    REQUIRE(A.degree() == B.degree());
    if (A.vanishes_by_degree()) return;
    for (const FieldForm& phi : battery_forms(b, A.dimension()))
      check_near(A.evaluate(phi, b.quad), scale_b * B.evaluate(phi, b.quad), tol);
  };
  auto pair_diff = [&](const DualCurrent& A1, const DualCurrent& A2,
                       const DualCurrent* B, double tol) {
    REQUIRE(A1.degree() == A2.degree());
    if (A1.vanishes_by_degree()) return;
    for (const FieldForm& phi : battery_forms(b, A1.dimension())) {
      const double lhs = A1.evaluate(phi, b.quad) - A2.evaluate(phi, b.quad);
      const double rhs = B ? B->evaluate(phi, b.quad) : 0.0;
      check_near(lhs, rhs, tol);
    }
  };

  for (int deg = 1; deg <= 2; ++deg) {
    DualCurrent T =
        field_current(FieldForm::random_band_limited(g, deg, 1, 40 + deg), S);

    // d L = L d
    pair_diff(d_c(L_c(T)), L_c(d_c(T)), nullptr, 1e-8);
    // dl Lambda = Lambda dl
    pair_diff(dlambda_c(Lambda_c(T)), Lambda_c(dlambda_c(T)), nullptr, 1e-8);
    // d Lambda - Lambda d = dl  (the stacked composition against the
    // single-operator form fixes the duality sign)
    {
      DualCurrent rhs = dlambda_c(T);
      pair_diff(d_c(Lambda_c(T)), Lambda_c(d_c(T)), &rhs, 1e-8);
    }
    // dl L - L dl = d
    {
      DualCurrent rhs = d_c(T);
      pair_diff(dlambda_c(L_c(T)), L_c(dlambda_c(T)), &rhs, 1e-8);
    }
    // the two differentials anticommute and square to zero
    {
      DualCurrent a = d_c(dlambda_c(T));
      DualCurrent bb = dlambda_c(d_c(T));
      if (!a.vanishes_by_degree())
        for (const FieldForm& phi : battery_forms(b, a.dimension()))
          check_near(a.evaluate(phi, b.quad) + bb.evaluate(phi, b.quad), 0.0, 1e-8);
    }
    pair_all(d_c(d_c(T)), d_c(d_c(T)), 0.0, 1e-8);
    pair_all(dlambda_c(dlambda_c(T)), dlambda_c(dlambda_c(T)), 0.0, 1e-8);
  }
}

TEST_CASE("cycles are d-closed; constant currents are dl-closed") {
  SUBCASE("rectangle cycle on the two-torus") {
    auto S = make_standard_symplectic(1);
    TorusGrid g{1, 16};
    DualCurrent T = chain_current(rectangle_loop_2d(0.2, 0.3, 0.8, 0.7), S);
    CurrentBattery b{g, 50, 2, 31, QuadratureSpec{12}};
    CHECK(battery_sup(d_c(T), b) <= 1e-9);
  }
  SUBCASE("the unit x-torus closes up over the period") {
    auto S = make_standard_symplectic(2);
    TorusGrid g{2, 8};
    DualCurrent T =
        chain_current(square_on_axes(4, 0, 2, Eigen::VectorXd::Zero(4)), S);
    CurrentBattery b{g, 50, 1, 32, QuadratureSpec{12}};
    CHECK(battery_sup(d_c(T), b) <= 1e-8);
  }
  SUBCASE("constant field current") {
    auto S = make_standard_symplectic(2);
    TorusGrid g{2, 8};
    PointwiseForm c(2);
    c.set_coeff(mk({1, 2}), 0.8);
    c.set_coeff(mk({2, 4}), -1.3);
    c.set_coeff(mk({3, 4}), 0.45);
    DualCurrent T = field_current(FieldForm::constant(g, c), S);
    CurrentBattery b{g, 50, 1, 33, QuadratureSpec{12}};
    CHECK(battery_sup(dlambda_c(T), b) <= 1e-9);
    CHECK(battery_sup(d_c(T), b) <= 1e-9);
  }
}

TEST_CASE("Hodge star by duality") {
  auto S = make_standard_symplectic(2);
  TorusGrid g{2, 8};
  CurrentBattery b{g, 50, 1, 202, QuadratureSpec{12}};

  SUBCASE("involution on a chain current with operators") {
    PolyChain c(4, 1);
    c.add(1.0, Simplex({pt({0.2, 0.1, 0.7, 0.4}), pt({0.5, 0.45, 0.8, 0.3})}));
    DualCurrent T = d_c(chain_current(c, S));
    CHECK(star_c(T).degree() == 4 - T.degree());
    DualCurrent TT = star_c(star_c(T));
    CHECK(TT.degree() == T.degree());
    for (const FieldForm& phi : battery_forms(b, T.dimension()))
      check_near(TT.evaluate(phi, b.quad), T.evaluate(phi, b.quad), 1e-9);
  }
  SUBCASE("field consistency: the dual star matches the pointwise star") {
    FieldForm alpha = FieldForm::random_band_limited(g, 2, 1, 404);
    DualCurrent T = field_current(alpha, S);
    DualCurrent sT = star_c(T);
    DualCurrent direct = field_current(lift_star(S, alpha), S);
    for (const FieldForm& phi : battery_forms(b, sT.dimension()))
      check_near(sT.evaluate(phi, b.quad), direct.evaluate(phi, b.quad), 1e-9);
    FieldForm m = materialize_field(sT) - lift_star(S, alpha);
    CHECK(m.max_abs() <= 1e-10);
  }
  SUBCASE("odd-degree involution on the two-torus") {
    auto S1 = make_standard_symplectic(1);
    TorusGrid g1{1, 16};
    CurrentBattery b1{g1, 50, 2, 203, QuadratureSpec{12}};
    DualCurrent T = chain_current(segment(pt({0.1, 0.2}), pt({0.6, 0.9})), S1);
    DualCurrent TT = star_c(star_c(T));
    for (const FieldForm& phi : battery_forms(b1, T.dimension()))
      check_near(TT.evaluate(phi, b1.quad), T.evaluate(phi, b1.quad), 1e-9);
  }
}

TEST_CASE("primitivity of chain currents") {
  auto S = make_standard_symplectic(2);
  TorusGrid g{2, 8};
  CurrentBattery b{g, 50, 1, 606, QuadratureSpec{12}};

  DualCurrent lag =
      chain_current(square_on_axes(4, 0, 2, Eigen::VectorXd::Zero(4)), S);
  CHECK(is_primitive_c(lag, b));

  DualCurrent cell =
      chain_current(square_on_axes(4, 0, 1, Eigen::VectorXd::Zero(4)), S);
  CHECK_FALSE(is_primitive_c(cell, b));

  // degree 3 > n: primitivity is not defined
  PolyChain c(4, 1);
  c.add(1.0, Simplex({pt({0.0, 0.0, 0.0, 0.0}), pt({0.3, 0.2, 0.1, 0.4})}));
  CHECK_THROWS_AS(is_primitive_c(chain_current(c, S), b), DomainError);
}

TEST_CASE("Lefschetz decomposition and L-power inversion of field currents") {
  auto S = make_standard_symplectic(2);
  TorusGrid g{2, 8};
  CurrentBattery b{g, 50, 1, 808, QuadratureSpec{12}};

  SUBCASE("non-field bases are refused") {
    PolyChain c(4, 1);
    c.add(1.0, Simplex({pt({0.0, 0.0, 0.0, 0.0}), pt({0.3, 0.2, 0.1, 0.4})}));
    DualCurrent T = chain_current(c, S);
    CHECK_THROWS_AS(lefschetz_decompose_c(T), DomainError);
    CHECK_THROWS_AS(invert_L_power_c(1, T), DomainError);
    CHECK_THROWS_AS(materialize_field(T), DomainError);
  }
  SUBCASE("decomposition reassembles and components are primitive") {
    FieldForm a = FieldForm::random_band_limited(g, 2, 1, 121);
    DualCurrent T = field_current(a, S);
    auto comps = lefschetz_decompose_c(T);
    CHECK(comps.size() >= 1);
    FieldForm sum(g, 2);
    for (const auto& [r, comp] : comps) {
      FieldForm beta = materialize_field(comp);
      CHECK(lift_is_primitive(S, beta, 1e-8));
      double rfact = 1.0;
      for (int t = 2; t <= r; ++t) rfact *= t;
      FieldForm lifted = beta;
      for (int t = 0; t < r; ++t) lifted = lift_L(S, lifted);
      sum += (1.0 / rfact) * lifted;
    }
    CHECK((sum - a).max_abs() <= 1e-9);
  }
  SUBCASE("inversion round trip") {
    for (int k : {1, 2}) {
      FieldForm a = FieldForm::random_band_limited(g, 2 - k, 1, 500 + k);
      DualCurrent T = field_current(a, S);
      DualCurrent Lk = T;
      for (int t = 0; t < k; ++t) Lk = L_c(Lk);
      DualCurrent back = invert_L_power_c(k, Lk, 1e-10);
      for (const FieldForm& phi : battery_forms(b, T.dimension()))
        check_near(back.evaluate(phi, b.quad), T.evaluate(phi, b.quad), 1e-7);
    }
  }
}

TEST_CASE("primitivity equivalence for smoothed currents of low degree") {
  auto S = make_standard_symplectic(2);
  TorusGrid g{2, 8};
  CurrentBattery b{g, 50, 1, 909, QuadratureSpec{12}};

  FieldForm a = FieldForm::random_band_limited(g, 2, 1, 321);
  DualCurrent T = field_current(a, S);
  auto comps = lefschetz_decompose_c(T);
  bool found_primitive_part = false;
  for (const auto& [r, comp] : comps) {
    if (r != 0 || comp.degree() != 2) continue;
    found_primitive_part = true;
    const double scale = 1.0 + mass_scale(comp);
    // both characterizations, separately
    CHECK(battery_sup(L_c(comp), b) <= 1e-8 * scale);
    CHECK(battery_sup(Lambda_c(comp), b) <= 1e-8 * scale);
    CHECK(is_primitive_c(comp, b));
  }
  CHECK(found_primitive_part);

  // a generic degree-2 field fails both routes
  const double scale = 1.0 + mass_scale(T);
  CHECK(battery_sup(L_c(T), b) > 1e-6 * scale);
  CHECK(battery_sup(Lambda_c(T), b) > 1e-6 * scale);
  CHECK_FALSE(is_primitive_c(T, b));
}

TEST_CASE("components of a harmonic current are closed and primitive") {
  auto S = make_standard_symplectic(2);
  TorusGrid g{2, 8};

  // c * omega + h(y_1, y_2) dy_1 ^ dy_2 is d- and dl-closed
  FieldForm a = FieldForm::constant(g, 0.6 * standard_omega(2));
  FieldForm hpart(g, 2);
  hpart.set_component(mk({2, 4}), [](const std::vector<double>& x) {
    return 0.9 * std::sin(2 * M_PI * x[1]) +
           0.4 * std::cos(2 * M_PI * (x[1] + x[3])) + 0.3;
  });
  a += hpart;
  REQUIRE(is_harmonic(S, a, 1e-10));

  auto comps = lefschetz_decompose_c(field_current(a, S));
  CHECK(comps.size() == 2);
  for (const auto& [r, comp] : comps) {
    FieldForm beta = materialize_field(comp);
    CHECK(is_closed(beta, 1e-8));
    CHECK(lift_is_primitive(S, beta, 1e-8));
  }

  // a random constant current is harmonic with constant components
  PointwiseForm cst(2);
  cst.set_coeff(mk({1, 2}), -0.7);
  cst.set_coeff(mk({1, 3}), 0.5);
  cst.set_coeff(mk({2, 4}), 1.1);
  DualCurrent C = field_current(FieldForm::constant(g, cst), S);
  REQUIRE(is_harmonic(S, materialize_field(C), 1e-12));
  for (const auto& [r, comp] : lefschetz_decompose_c(C)) {
    FieldForm beta = materialize_field(comp);
    CHECK(is_closed(beta, 1e-10));
    CHECK(lift_is_primitive(S, beta, 1e-8));
  }
}

TEST_CASE("smoothing a current matches mollified test forms") {
  SUBCASE("segments on the two-torus") {
    auto S = make_standard_symplectic(1);
    TorusGrid g{1, 16};
    const double w = 0.22;
    PolyChain c = segment(pt({0.15, 0.35}), pt({0.7, 0.6}));
    c += segment(pt({0.5, 0.1}), pt({0.45, 0.8}), -0.7);
    DualCurrent T = chain_current(c, S);
    DualCurrent A = smooth_current(T, g, w);
    CHECK(A.rep().kind == CurrentRep::Kind::Field);
    CurrentBattery b{g, 50, 2, 2024, QuadratureSpec{12}};
    for (const FieldForm& phi : battery_forms(b, 1))
      check_near(A.evaluate(phi, b.quad),
                 symph::evaluate(T.rep(), smooth(phi, w), b.quad), 1e-8);
    // the mollifier preserves integrals: constants pair identically
    PointwiseForm cst(1);
    cst.set_coeff(mk({1}), 1.2);
    cst.set_coeff(mk({2}), -0.4);
    check_near(A.evaluate(cst), T.evaluate(cst), 1e-11);
  }
  SUBCASE("point masses") {
    auto S = make_standard_symplectic(1);
    TorusGrid g{1, 16};
    const double w = 0.2;
    PolyChain c(2, 0);
    c.add(1.0, Simplex({pt({0.3, 0.55})}));
    c.add(-2.0, Simplex({pt({0.8, 0.2})}));
    DualCurrent T = chain_current(c, S);
    DualCurrent A = smooth_current(T, g, w);
    CurrentBattery b{g, 50, 3, 2025, QuadratureSpec{12}};
    for (const FieldForm& phi : battery_forms(b, 0))
      check_near(A.evaluate(phi, b.quad),
                 symph::evaluate(T.rep(), smooth(phi, w), b.quad), 1e-10);
  }
  SUBCASE("a triangle on the four-torus") {
    auto S = make_standard_symplectic(2);
    TorusGrid g{2, 8};
    const double w = 0.25;
    PolyChain c(4, 2);
    c.add(1.0, Simplex({pt({0.1, 0.2, 0.15, 0.4}), pt({0.7, 0.3, 0.2, 0.45}),
                        pt({0.3, 0.6, 0.55, 0.5})}));
    DualCurrent T = chain_current(c, S);
    DualCurrent A = smooth_current(T, g, w);
    CurrentBattery b{g, 20, 1, 2027, QuadratureSpec{12}};
    for (const FieldForm& phi : battery_forms(b, 2))
      check_near(A.evaluate(phi, b.quad),
                 symph::evaluate(T.rep(), smooth(phi, w), b.quad), 1e-8);
  }
  SUBCASE("operator stacks ride along") {
    auto S = make_standard_symplectic(1);
    TorusGrid g{1, 16};
    const double w = 0.22;
    DualCurrent T = chain_current(segment(pt({0.2, 0.3}), pt({0.75, 0.85})), S);
    DualCurrent V = star_c(d_c(T));
    DualCurrent A = smooth_current(V, g, w);
    CHECK(A.ops().size() == V.ops().size());
    CurrentBattery b{g, 30, 2, 2028, QuadratureSpec{12}};
    for (const FieldForm& phi : battery_forms(b, V.dimension()))
      check_near(A.evaluate(phi, b.quad), V.evaluate(smooth(phi, w), b.quad), 1e-8);
  }
  SUBCASE("constant wedge factors") {
    auto S = make_standard_symplectic(1);
    TorusGrid g{1, 16};
    const double w = 0.2;
    PolyChain c = rectangle_loop_2d(0.25, 0.25, 0.7, 0.8);
    PointwiseForm alpha(1);
    alpha.set_coeff(mk({2}), 1.4);
    DualCurrent T =
        DualCurrent(CurrentRep::form_wedge_chain(alpha, c), S);
    DualCurrent A = smooth_current(T, g, w);
    CHECK(A.rep().kind == CurrentRep::Kind::Field);
    CurrentBattery b{g, 30, 2, 2029, QuadratureSpec{12}};
    for (const FieldForm& phi : battery_forms(b, T.dimension()))
      check_near(A.evaluate(phi, b.quad),
                 symph::evaluate(T.rep(), smooth(phi, w), b.quad), 1e-8);
    // nonconstant factors refuse to smooth
    DualCurrent W = DualCurrent(
        CurrentRep::form_wedge_chain(FieldForm::random_band_limited(g, 1, 1, 5), c), S);
    CHECK_THROWS_AS(smooth_current(W, g, w), DomainError);
  }
}

TEST_CASE("battery configuration is honored") {
  auto S = make_standard_symplectic(1);
  TorusGrid g{1, 16};
  DualCurrent T = chain_current(segment(pt({0.1, 0.1}), pt({0.4, 0.7})), S);

  CurrentBattery small{g, 7, 1, 42, QuadratureSpec{10}};
  CHECK(battery_forms(small, 1).size() == 7);
  const double s1 = battery_sup(T, small);
  const double s2 = battery_sup(T, small);
  CHECK(s1 == s2);  // deterministic

  CurrentBattery other{g, 7, 1, 43, QuadratureSpec{10}};
  CHECK(battery_sup(T, other) != s1);

  CurrentBattery dflt;
  CHECK(dflt.count >= 50);

  CurrentBattery bad{g, 0, 1, 1, QuadratureSpec{4}};
  CHECK_THROWS_AS(battery_forms(bad, 1), DomainError);
}
