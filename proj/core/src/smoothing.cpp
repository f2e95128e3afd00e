#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "symphodge/errors.hpp"
#include "symphodge/smoothing.hpp"

namespace symph {

namespace {

bool has_nyquist_bin(const TorusGrid& g, std::size_t idx) {
  if (g.N % 2 != 0) return false;
  std::size_t v = idx;
  for (int a = 0; a < g.dim(); ++a) {
    if (static_cast<int>(v % g.N) == g.N / 2) return true;
    v /= g.N;
  }
  return false;
}

}  // namespace

FieldForm mollify_chain(const PolyChain& c, const TorusGrid& g, double width) {
  const int tn = g.dim();
  if (!c.empty() && c.ambient() != tn)
    throw DomainError("chain ambient dimension does not match the grid");
  const int p = c.dim();
  if (p < 0 || p > tn) throw DomainError("chain dimension outside [0, 2n]");

  // spectral multiplier of the discrete mollifier, read off by smoothing a
  // unit-mass grid delta (its interpolation coefficients are all 1)
  FieldForm delta(g, 0);
  delta.comp(0)[0] = std::pow(static_cast<double>(g.N), tn);
  const std::vector<std::complex<double>> mult = smooth(delta, width).spectral(0);

  const Mask full = (Mask(1) << tn) - 1;
  FieldForm out(g, tn - p);
  for (auto& [m, spec] : chain_spectra(c, g)) {
    const Mask mc = full & ~m;
    const double sgn = wedge_sign(mc, m);
    for (std::size_t idx = 0; idx < spec.size(); ++idx) {
      if (has_nyquist_bin(g, idx)) {
        spec[idx] = 0.0;  // unpaired bins would make the field complex
      } else {
        spec[idx] *= sgn * mult[idx].real();
      }
    }
    out.set_spectral(mc, spec);
  }
  return out;
}

DualCurrent smooth_current(const DualCurrent& T, const TorusGrid& g,
                           double width) {
  if (g.n != T.n())
    throw DomainError("smoothing grid lives on a different torus");
  const CurrentRep& r = T.rep();
  CurrentRep base;
  switch (r.kind) {
    case CurrentRep::Kind::Chain:
      base = CurrentRep::from_field(mollify_chain(r.chain, g, width));
      break;
    case CurrentRep::Kind::Field:
      base = CurrentRep::from_field(smooth(r.field, width));
      break;
    case CurrentRep::Kind::FormWedgeChain: {
      if (r.wedge_field)
        throw DomainError(
            "a nonconstant wedge factor does not commute with the mollifier; "
            "smooth before wedging");
      // (alpha ^ T)(K phi) = T(K(alpha ^ phi)) = integral (A ^ alpha) ^ phi
      const FieldForm A = mollify_chain(r.chain, g, width);
      base = CurrentRep::from_field(
          wedge(A, FieldForm::constant(g, r.wedge_const)));
      break;
    }
  }
  DualCurrent out(std::move(base), T.structure());
  for (CurrentOp op : T.ops()) out = out.with_op(op);
  return out;
}

}  // namespace symph
