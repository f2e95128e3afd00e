#include "symphodge/currents.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "symphodge/errors.hpp"

namespace symph {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

DualCurrent::DualCurrent(CurrentRep rep, SymplecticStructure S)
    : rep_(std::move(rep)), S_(std::move(S)) {
  const int tn = 2 * S_.n();
  switch (rep_.kind) {
    case CurrentRep::Kind::Chain:
      if (rep_.chain.ambient() != tn)
        throw DomainError("chain ambient dimension does not match the torus");
      break;
    case CurrentRep::Kind::Field:
      if (rep_.field.n() != S_.n())
        throw DomainError("field torus dimension does not match the structure");
      break;
    case CurrentRep::Kind::FormWedgeChain:
      if (rep_.chain.ambient() != tn)
        throw DomainError("chain ambient dimension does not match the torus");
      if (rep_.wedge_field && rep_.wedge_field->n() != S_.n())
        throw DomainError("wedge factor torus dimension mismatch");
      if (!rep_.wedge_field && !rep_.wedge_const.is_zero() &&
          rep_.wedge_const.n() != S_.n())
        throw DomainError("wedge factor dimension mismatch");
      break;
  }
  base_degree_ = tn - rep_.dimension(tn);
}

int degree_after_ops(int base_degree, const std::vector<CurrentOp>& ops,
                     int two_n) {
  int s = base_degree;
  for (CurrentOp op : ops) {
    switch (op) {
      case CurrentOp::L: s += 2; break;
      case CurrentOp::Lambda: s -= 2; break;
      case CurrentOp::H: break;
      case CurrentOp::Star: s = two_n - s; break;
      case CurrentOp::D: s += 1; break;
      case CurrentOp::DLambda: s -= 1; break;
    }
  }
  return s;
}

int DualCurrent::degree() const {
  return degree_after_ops(base_degree_, ops_, two_n());
}

bool DualCurrent::vanishes_by_degree() const {
  const int s = degree();
  return s < 0 || s > two_n();
}

double DualCurrent::evaluate(const FieldForm& phi, QuadratureSpec q) const {
  if (phi.n() != n())
    throw DomainError("test form lives on a different torus");
  if (phi.degree() != dimension()) {
    std::ostringstream os;
    os << "a current of dimension " << dimension()
       << " pairs only with forms of that degree, got " << phi.degree();
    throw DomainError(os.str());
  }
  if (vanishes_by_degree()) return 0.0;

  const FieldForm psi = pull_test_form(S_, ops_, degree(), phi);
  if (psi.is_empty()) return 0.0;
  return symph::evaluate(rep_, psi, q);
}

FieldForm pull_test_form(const SymplecticStructure& S,
                         const std::vector<CurrentOp>& ops, int degree_after,
                         const FieldForm& phi) {
  const int tn = 2 * S.n();
  FieldForm psi = phi;
  int s = degree_after;
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
    if (psi.is_empty()) return psi;
    switch (*it) {
      case CurrentOp::L:
        psi = lift_L(S, psi);
        s -= 2;
        break;
      case CurrentOp::Lambda:
        psi = lift_Lambda(S, psi);
        s += 2;
        break;
      case CurrentOp::H:
        psi = lift_H(S, psi);
        psi *= -1.0;
        break;
      case CurrentOp::Star:
        psi = lift_star(S, psi);
        s = tn - s;
        break;
      case CurrentOp::D: {
        psi = d(psi);
        if (s % 2 != 0) psi *= -1.0;  // (dT)(a) = (-1)^{deg dT} T(da)
        s -= 1;
        break;
      }
      case CurrentOp::DLambda: {
        psi = dlambda(S, psi);
        if (s % 2 == 0) psi *= -1.0;  // (dl T)(a) = (-1)^{deg T} T(dl a)
        s += 1;
        break;
      }
    }
  }
  return psi;
}

double DualCurrent::evaluate(const PointwiseForm& phi, QuadratureSpec q) const {
  if (!phi.is_zero() && phi.n() != n())
    throw DomainError("test form lives on a different torus");
  if (!phi.is_zero() &&
      (!phi.is_homogeneous() || phi.degree() != dimension()))
    throw DomainError(
        "a current pairs only with homogeneous forms of its dimension");
  if (vanishes_by_degree()) return 0.0;

  PointwiseForm psi = phi;
  int s = degree();
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (psi.is_zero()) return 0.0;
    switch (*it) {
      case CurrentOp::L:
        psi = S_.L(psi);
        s -= 2;
        break;
      case CurrentOp::Lambda:
        psi = S_.Lambda(psi);
        s += 2;
        break;
      case CurrentOp::H:
        psi = S_.H(psi);
        psi *= -1.0;
        break;
      case CurrentOp::Star:
        psi = S_.star(psi);
        s = two_n() - s;
        break;
      case CurrentOp::D:
      case CurrentOp::DLambda:
        return 0.0;  // exterior derivative of a constant form
    }
  }
  if (psi.is_zero()) return 0.0;
  return symph::evaluate(rep_, psi, q);
}

DualCurrent DualCurrent::with_op(CurrentOp op) const {
  DualCurrent out = *this;
  out.ops_.push_back(op);
  return out;
}

DualCurrent L_c(const DualCurrent& T) {
  // a fresh chain base acquires the factor directly: (L T_c)(a) = T_c(w ^ a)
  if (T.ops().empty() && T.rep().kind == CurrentRep::Kind::Chain)
    return DualCurrent(
        CurrentRep::form_wedge_chain(T.structure().omega(), T.rep().chain),
        T.structure());
  return T.with_op(CurrentOp::L);
}

DualCurrent Lambda_c(const DualCurrent& T) { return T.with_op(CurrentOp::Lambda); }
DualCurrent H_c(const DualCurrent& T) { return T.with_op(CurrentOp::H); }
DualCurrent star_c(const DualCurrent& T) { return T.with_op(CurrentOp::Star); }
DualCurrent d_c(const DualCurrent& T) { return T.with_op(CurrentOp::D); }
DualCurrent dlambda_c(const DualCurrent& T) { return T.with_op(CurrentOp::DLambda); }

std::vector<FieldForm> battery_forms(const CurrentBattery& b, int degree) {
  if (b.count < 1) throw DomainError("battery must contain at least one form");
  std::vector<FieldForm> out;
  out.reserve(static_cast<std::size_t>(b.count));
  for (int i = 0; i < b.count; ++i)
    out.push_back(FieldForm::random_band_limited(
        b.grid, degree, b.kmax, splitmix64(b.seed + static_cast<std::uint64_t>(i))));
  return out;
}

double battery_sup(const DualCurrent& T, const CurrentBattery& b) {
  if (T.vanishes_by_degree()) return 0.0;
  if (b.grid.n != T.n())
    throw DomainError("battery grid lives on a different torus");
  double sup = 0.0;
  for (const FieldForm& phi : battery_forms(b, T.dimension()))
    sup = std::max(sup, std::abs(T.evaluate(phi, b.quad)));
  return sup;
}

double mass_scale(const DualCurrent& T) {
  switch (T.rep().kind) {
    case CurrentRep::Kind::Chain:
      return mass(T.rep().chain);
    case CurrentRep::Kind::Field:
      return T.rep().field.max_abs();
    case CurrentRep::Kind::FormWedgeChain:
      return mass(T.rep().chain) * (T.rep().wedge_field
                                        ? T.rep().wedge_field->max_abs()
                                        : T.rep().wedge_const.max_abs());
  }
  return 0.0;
}

bool is_primitive_c(const DualCurrent& T, const CurrentBattery& b, double tol) {
  const int i = T.degree();
  if (i < 0 || i > T.n())
    throw DomainError("primitivity is defined for currents of degree <= n");
  const double scale = 1.0 + mass_scale(T);

  DualCurrent power = T;
  for (int r = 0; r < T.n() - i + 1; ++r) power = L_c(power);
  const double sup_power = battery_sup(power, b);
  const double sup_contract = battery_sup(Lambda_c(T), b);

  const bool by_power = sup_power <= tol * scale;
  const bool by_contract = sup_contract <= tol * scale;
  if (by_power != by_contract) {
    std::ostringstream os;
    os << "primitivity criteria disagree: |L^{n-i+1} T| sup " << sup_power
       << ", |Lambda T| sup " << sup_contract << ", threshold " << tol * scale;
    throw ConsistencyError(os.str());
  }
  return by_power;
}

FieldForm materialize_field(const DualCurrent& T) {
  if (T.rep().kind != CurrentRep::Kind::Field)
    throw DomainError(
        "a smoothed (Field) representation is required: smooth the current "
        "first, conversions are never implicit");
  FieldForm f = T.rep().field;
  const SymplecticStructure& S = T.structure();
  for (CurrentOp op : T.ops()) {
    if (f.is_empty()) break;
    switch (op) {
      case CurrentOp::L: f = lift_L(S, f); break;
      case CurrentOp::Lambda: f = lift_Lambda(S, f); break;
      case CurrentOp::H: f = lift_H(S, f); break;
      case CurrentOp::Star: f = lift_star(S, f); break;
      case CurrentOp::D: f = d(f); break;
      case CurrentOp::DLambda: f = dlambda(S, f); break;
    }
  }
  if (f.is_empty()) return FieldForm(T.rep().field.grid(), T.degree());
  return f;
}

std::vector<std::pair<int, DualCurrent>> lefschetz_decompose_c(
    const DualCurrent& T) {
  const FieldForm f = materialize_field(T);
  std::vector<std::pair<int, DualCurrent>> out;
  for (const auto& [r, beta] : lift_lefschetz_decompose(T.structure(), f))
    out.emplace_back(r, DualCurrent(CurrentRep::from_field(beta), T.structure()));
  return out;
}

DualCurrent invert_L_power_c(int k, const DualCurrent& T, double tol) {
  if (k < 0) throw DomainError("negative power");
  const FieldForm f = materialize_field(T);
  return DualCurrent(CurrentRep::from_field(lift_invert_L_power(T.structure(), k, f, tol)),
                     T.structure());
}

}  // namespace symph
