#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "symphodge/errors.hpp"
#include "symphodge/smoothing.hpp"

namespace symph {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Divided difference [z_0, ..., z_p] of exp, via the mean-shifted series
//   exp(zbar) * sum_{j >= 0} h_j(z - zbar) / (p + j)!
// with h_j the complete homogeneous symmetric polynomials. Stable while the
// node spread around the mean stays moderate; callers bisect their simplices
// so that the spread is below ~10.
cplx dd_exp(std::vector<cplx> z) {
  const int p = static_cast<int>(z.size()) - 1;
  cplx mean(0.0, 0.0);
  for (const cplx& v : z) mean += v;
  mean /= static_cast<double>(z.size());
  double spread = 0.0;
  for (cplx& v : z) {
    v -= mean;
    spread = std::max(spread, std::abs(v));
  }
  const int J = std::min(480, 48 + static_cast<int>(std::ceil(3.2 * spread)));

  // h_j over a growing variable set: h(S + w)_j = h(S)_j + w h(S + w)_{j-1}
  std::vector<cplx> h(static_cast<std::size_t>(J) + 1, cplx(0.0, 0.0));
  h[0] = 1.0;
  for (const cplx& w : z)
    for (int j = 1; j <= J; ++j) h[j] += w * h[j - 1];

  double fact = 1.0;
  for (int t = 2; t <= p; ++t) fact *= t;
  double inv = 1.0 / fact;  // 1 / (p + j)! at j = 0
  cplx acc(0.0, 0.0);
  int quiet = 0;
  for (int j = 0; j <= J; ++j) {
    if (j > 0) inv /= static_cast<double>(p + j);
    const cplx term = h[j] * inv;
    acc += term;
    if (std::abs(term) < 1e-18 * (1.0 + std::abs(acc))) {
      if (++quiet >= 4) break;
    } else {
      quiet = 0;
    }
  }
  return std::exp(mean) * acc;
}

double diameter(const Simplex& s) {
  double d = 0.0;
  for (std::size_t i = 0; i < s.v.size(); ++i)
    for (std::size_t j = i + 1; j < s.v.size(); ++j)
      d = std::max(d, (s.v[i] - s.v[j]).norm());
  return d;
}

// longest-edge bisection (orientation preserving) until the diameter target
void bisect_into(double coeff, const Simplex& s, double target, int depth,
                 PolyChain& out) {
  if (depth > 100 || diameter(s) <= target) {
    out.add_if_nondegenerate(coeff, s);
    return;
  }
  std::size_t bi = 0, bj = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < s.v.size(); ++i)
    for (std::size_t j = i + 1; j < s.v.size(); ++j) {
      const double len = (s.v[i] - s.v[j]).norm();
      if (len > best) {
        best = len;
        bi = i;
        bj = j;
      }
    }
  const Eigen::VectorXd mid = 0.5 * (s.v[bi] + s.v[bj]);
  Simplex a = s;
  a.v[bi] = mid;
  Simplex b = s;
  b.v[bj] = mid;
  bisect_into(coeff, a, target, depth + 1, out);
  bisect_into(coeff, b, target, depth + 1, out);
}

}  // namespace

std::vector<std::pair<Mask, std::vector<cplx>>> chain_spectra(
    const PolyChain& c, const TorusGrid& g) {
  const int tn = g.dim();
  if (!c.empty() && c.ambient() != tn)
    throw DomainError("chain ambient dimension does not match the grid");
  const int p = c.dim();
  if (p < 0 || p > tn) throw DomainError("chain dimension outside [0, 2n]");

  const std::size_t sz = g.size();
  std::vector<std::pair<Mask, std::vector<cplx>>> out;
  for (Mask m : masks_of_degree(tn, p))
    out.emplace_back(m, std::vector<cplx>(sz, cplx(0.0, 0.0)));
  if (c.empty()) return out;

  // keep the per-simplex phase spread over the full grid band below ~8
  const double target = 8.0 / (0.5 * kTwoPi * g.N * std::sqrt(double(tn)));
  PolyChain fine(tn, p);
  for (const auto& [coeff, s] : c.terms()) bisect_into(coeff, s, target, 0, fine);

  // signed frequency vectors for every bin, decoded once
  std::vector<int> kappa(sz * static_cast<std::size_t>(tn));
  {
    std::vector<int> mi(tn, 0);
    for (std::size_t idx = 0; idx < sz; ++idx) {
      for (int a = 0; a < tn; ++a)
        kappa[idx * tn + a] = g.signed_freq(mi[a]);
      for (int a = tn - 1; a >= 0; --a) {
        if (++mi[a] < g.N) break;
        mi[a] = 0;
      }
    }
  }

  std::vector<cplx> z;
  for (const auto& [coeff, s] : fine.terms()) {
    const Eigen::MatrixXd E = s.edges();
    // exact integral of dx^m over the simplex, per mask
    std::vector<double> weights(out.size());
    bool any = false;
    for (std::size_t mi = 0; mi < out.size(); ++mi) {
      if (p == 0) {
        weights[mi] = coeff;
      } else {
        Eigen::MatrixXd sub(p, p);
        int row = 0;
        const Mask m = out[mi].first;
        for (int a = 0; a < tn; ++a)
          if (m & (Mask(1) << a)) sub.row(row++) = E.row(a);
        weights[mi] = coeff * sub.determinant();
      }
      if (std::abs(weights[mi]) > 1e-300) any = true;
    }
    if (!any) continue;

    z.assign(s.v.size(), cplx(0.0, 0.0));
    for (std::size_t idx = 0; idx < sz; ++idx) {
      const int* kap = &kappa[idx * tn];
      for (std::size_t vi = 0; vi < s.v.size(); ++vi) {
        double phase = 0.0;
        for (int a = 0; a < tn; ++a) phase += kap[a] * s.v[vi][a];
        z[vi] = cplx(0.0, -kTwoPi * phase);
      }
      const cplx dd = dd_exp(z);
      for (std::size_t mi = 0; mi < out.size(); ++mi)
        if (std::abs(weights[mi]) > 1e-300) out[mi].second[idx] += weights[mi] * dd;
    }
  }
  return out;
}

std::vector<cplx> chain_spectrum(const PolyChain& c, const TorusGrid& g, Mask m) {
  for (auto& [mm, vec] : chain_spectra(c, g))
    if (mm == m) return std::move(vec);
  throw DomainError("mask degree does not match the chain dimension");
}

}  // namespace symph
