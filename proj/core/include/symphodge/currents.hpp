#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "symphodge/chain.hpp"

namespace symph {

// Operators applied to a current by duality: each acts on the test form at
// evaluation time, so the current itself never has to be re-represented.
enum class CurrentOp { L, Lambda, H, Star, D, DLambda };

// A compactly supported current on the torus T^{2n}: a concrete base
// representation plus a stack of operators. A current of dimension j pairs
// with j-forms; its degree is 2n - j. Evaluation walks the operator stack
// from the outside in, transforming the test form:
//
//   (L T)(a)      = T(omega ^ a)
//   (Lambda T)(a) = T(i_pi a)
//   (H T)(a)      = T(-sum_i (n-i) Pi^i a)
//   (star T)(a)   = T(star a)
//   (d T)(a)      = (-1)^{j+1} T(d a)   for T of dimension j
//   (dl T)        = (d Lambda - Lambda d) T, equivalently
//                   (dl T)(a) = (-1)^{deg T} T(dl a)
class DualCurrent {
 public:
  DualCurrent(CurrentRep rep, SymplecticStructure S);

  int n() const { return S_.n(); }
  int two_n() const { return 2 * S_.n(); }
  const SymplecticStructure& structure() const { return S_; }
  const CurrentRep& rep() const { return rep_; }
  const std::vector<CurrentOp>& ops() const { return ops_; }

  // degree after the operator stack; dimension = 2n - degree
  int degree() const;
  int dimension() const { return two_n() - degree(); }
  // degree outside [0, 2n]: the current is identically zero
  bool vanishes_by_degree() const;

  // pairing with a test form of degree dimension(); throws DomainError on a
  // degree or torus mismatch
  double evaluate(const FieldForm& phi, QuadratureSpec q = {}) const;
  // constant test forms (exact chain pairings, no quadrature error)
  double evaluate(const PointwiseForm& phi, QuadratureSpec q = {}) const;

  DualCurrent with_op(CurrentOp op) const;

 private:
  CurrentRep rep_;
  SymplecticStructure S_;
  int base_degree_ = 0;
  std::vector<CurrentOp> ops_;
};

// degree bookkeeping of an operator stack applied to a base of the given
// degree (L +2, Lambda -2, H 0, star reflects, d +1, dl -1)
int degree_after_ops(int base_degree, const std::vector<CurrentOp>& ops,
                     int two_n);

// The test form the base representation sees: the duality transforms of the
// stack applied outside-in. degree_after is the degree of the full current
// (base plus stack); phi must have degree 2n - degree_after. Shared by
// DualCurrent::evaluate and by composite currents built out of other bases.
FieldForm pull_test_form(const SymplecticStructure& S,
                         const std::vector<CurrentOp>& ops, int degree_after,
                         const FieldForm& phi);

DualCurrent L_c(const DualCurrent& T);
DualCurrent Lambda_c(const DualCurrent& T);
DualCurrent H_c(const DualCurrent& T);
DualCurrent star_c(const DualCurrent& T);
DualCurrent d_c(const DualCurrent& T);
DualCurrent dlambda_c(const DualCurrent& T);

// Seeded battery of random band-limited test forms. Currents are defined by
// their evaluations, so operator identities are asserted against batteries.
struct CurrentBattery {
  TorusGrid grid{1, 8};
  int count = 50;
  int kmax = 1;
  std::uint64_t seed = 2026;
  QuadratureSpec quad{};
};

std::vector<FieldForm> battery_forms(const CurrentBattery& b, int degree);

// sup over the battery of |T(phi)|; 0 when T vanishes by degree
double battery_sup(const DualCurrent& T, const CurrentBattery& b);

// crude magnitude of the base representation, used to scale tolerances
double mass_scale(const DualCurrent& T);

// Primitivity of a degree-i current, 0 <= i <= n: battery test of
// L^{n-i+1} T = 0, cross-checked against Lambda T = 0 (the two are
// equivalent in this degree range); disagreement throws ConsistencyError.
bool is_primitive_c(const DualCurrent& T, const CurrentBattery& b,
                    double tol = 1e-8);

// The Field-representation current as a concrete field: the operator stack
// applied pointwise. Throws DomainError for Chain / FormWedgeChain bases —
// smooth the current first; conversions are never implicit.
FieldForm materialize_field(const DualCurrent& T);

// Lefschetz decomposition T = sum_r L^r/r! T_{k-2r} with primitive
// components, and least-norm inversion of L^k. Field representation only.
std::vector<std::pair<int, DualCurrent>> lefschetz_decompose_c(
    const DualCurrent& T);
DualCurrent invert_L_power_c(int k, const DualCurrent& T, double tol = 1e-9);

}  // namespace symph
