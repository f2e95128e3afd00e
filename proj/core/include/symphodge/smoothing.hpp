#pragma once

#include <complex>
#include <vector>

#include "symphodge/currents.hpp"

namespace symph {

// Fourier coefficients of the chain against one tangent component: the entry
// at bin kappa is  int_c e^{-2 pi i kappa . x} dmu_m,  where dmu_m is the
// signed measure "integrate the p-form dx^m over the chain". Exact up to the
// divided-difference series truncation (~1e-14); simplices are bisected
// internally until the phase spread per simplex is small.
std::vector<std::complex<double>> chain_spectrum(const PolyChain& c,
                                                 const TorusGrid& g, Mask m);

// all tangent components at once (the divided differences are shared)
std::vector<std::pair<Mask, std::vector<std::complex<double>>>> chain_spectra(
    const PolyChain& c, const TorusGrid& g);

// Mollification of a p-chain: the band-limited (2n-p)-field A with
//   integral_wedge(A, phi) == (chain integral of smooth(phi, width))
// for every field phi on g, using exactly the discrete mollifier of
// smooth(). Nyquist bins are dropped so A stays real.
FieldForm mollify_chain(const PolyChain& c, const TorusGrid& g, double width);

// Smoothing of a current: mollifies the base representation and keeps the
// operator stack (the mollifier is translation invariant, so it commutes
// with every stacked operator). Chain bases are splatted on g; Field bases
// are smoothed on their own grid; FormWedgeChain bases are handled for
// constant factors only (a nonconstant factor does not commute with the
// mollifier) and otherwise throw DomainError.
DualCurrent smooth_current(const DualCurrent& T, const TorusGrid& g,
                           double width);

}  // namespace symph
