#include "symphodge/field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace symph {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::vector<int> grid_dims(const TorusGrid& g) {
  return std::vector<int>(g.dim(), g.N);
}

// raw unnormalized DFT, sign = FFTW_FORWARD / FFTW_BACKWARD
void dft(const TorusGrid& g, std::vector<std::complex<double>>& data, int sign) {
  auto dims = grid_dims(g);
  fftw_plan plan = fftw_plan_dft(
      g.dim(), dims.data(), reinterpret_cast<fftw_complex*>(data.data()),
      reinterpret_cast<fftw_complex*>(data.data()), sign, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

// coefficients of exp(2 pi i kappa . x) from nodal samples
std::vector<std::complex<double>> to_spectral(const TorusGrid& g,
                                              const std::vector<double>& nodal) {
  std::vector<std::complex<double>> s(nodal.begin(), nodal.end());
  dft(g, s, FFTW_FORWARD);
  double inv = 1.0 / static_cast<double>(g.size());
  for (auto& c : s) c *= inv;
  return s;
}

std::vector<double> to_nodal(const TorusGrid& g,
                             std::vector<std::complex<double>> spec) {
  dft(g, spec, FFTW_BACKWARD);
  std::vector<double> out(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) out[i] = spec[i].real();
  return out;
}

// per-axis bin of a flat index
inline int axis_bin(const TorusGrid& g, std::size_t idx, int axis) {
  int from_right = g.dim() - 1 - axis;
  std::size_t v = idx;
  for (int i = 0; i < from_right; ++i) v /= g.N;
  return static_cast<int>(v % g.N);
}

}  // namespace

FieldForm::FieldForm(TorusGrid g, int degree) : grid_(g), degree_(degree) {
  if (g.N < 2 || (g.N & (g.N - 1)) != 0)
    throw DomainError("FieldForm: nodes per axis must be a power of two >= 2");
  if (degree >= 0) masks_ = masks_of_degree(grid_.dim(), degree);
  data_.assign(masks_.size(), std::vector<double>(grid_.size(), 0.0));
}

int FieldForm::comp_pos(Mask m) const {
  auto it = std::lower_bound(masks_.begin(), masks_.end(), m);
  if (it == masks_.end() || *it != m)
    throw DomainError("FieldForm: mask is not a component of this degree");
  return static_cast<int>(it - masks_.begin());
}

std::vector<double>& FieldForm::comp(Mask m) { return data_[comp_pos(m)]; }
const std::vector<double>& FieldForm::comp(Mask m) const { return data_[comp_pos(m)]; }

void FieldForm::set_component(
    Mask m, const std::function<double(const std::vector<double>&)>& f) {
  auto& v = data_[comp_pos(m)];
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid_.node(i));
}

FieldForm FieldForm::constant(TorusGrid g, const PointwiseForm& value) {
  int deg = value.is_zero() ? 0 : value.degree();
  FieldForm f(g, deg);
  for (const auto& [m, c] : value.terms())
    std::fill(f.comp(m).begin(), f.comp(m).end(), c);
  return f;
}

FieldForm FieldForm::random_band_limited(TorusGrid g, int degree, int kmax,
                                         std::uint64_t seed, double amplitude) {
  if (kmax >= (g.N + 1) / 2) kmax = g.N / 2 - 1;
  if (kmax < 0) kmax = 0;
  FieldForm f(g, degree);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::size_t sz = g.size();
  for (std::size_t ci = 0; ci < f.masks_.size(); ++ci) {
    std::vector<std::complex<double>> spec(sz, 0.0);
    for (std::size_t idx = 0; idx < sz; ++idx) {
      bool in_band = true;
      for (int a = 0; a < g.dim() && in_band; ++a)
        if (std::abs(g.signed_freq(axis_bin(g, idx, a))) > kmax) in_band = false;
      if (in_band) spec[idx] = {gauss(rng), gauss(rng)};
    }
    // Hermitian-symmetrize so the nodal field is real
    std::vector<std::complex<double>> sym(sz);
    std::vector<int> mi(g.dim());
    for (std::size_t idx = 0; idx < sz; ++idx) {
      std::size_t conj_idx = 0;
      for (int a = 0; a < g.dim(); ++a) {
        int b = axis_bin(g, idx, a);
        conj_idx = conj_idx * g.N + ((g.N - b) % g.N);
      }
      sym[idx] = 0.5 * (spec[idx] + std::conj(spec[conj_idx]));
    }
    f.data_[ci] = to_nodal(g, sym);
    for (auto& v : f.data_[ci]) v *= amplitude;
  }
  return f;
}

PointwiseForm FieldForm::value_at(std::size_t node_idx) const {
  std::vector<std::pair<Mask, double>> terms;
  for (std::size_t ci = 0; ci < masks_.size(); ++ci)
    terms.emplace_back(masks_[ci], data_[ci][node_idx]);
  return PointwiseForm(grid_.n, std::move(terms));
}

PointwiseForm FieldForm::mean() const {
  std::vector<std::pair<Mask, double>> terms;
  double inv = 1.0 / static_cast<double>(grid_.size());
  for (std::size_t ci = 0; ci < masks_.size(); ++ci) {
    double s = 0;
    for (double v : data_[ci]) s += v;
    terms.emplace_back(masks_[ci], s * inv);
  }
  return PointwiseForm(grid_.n, std::move(terms));
}

double FieldForm::integral() const {
  if (degree_ != grid_.dim())
    throw DomainError("FieldForm::integral: form must have top degree");
  Mask full = (Mask(1) << grid_.dim()) - 1;
  return mean().coeff(full);
}

double FieldForm::l2_norm() const { return std::sqrt(l2_inner(*this, *this)); }

double FieldForm::max_abs() const {
  double m = 0;
  for (const auto& v : data_)
    for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::vector<std::complex<double>> FieldForm::spectral(Mask m) const {
  return to_spectral(grid_, data_[comp_pos(m)]);
}

void FieldForm::set_spectral(Mask m, const std::vector<std::complex<double>>& coeffs) {
  if (coeffs.size() != grid_.size())
    throw DomainError("set_spectral: wrong coefficient count");
  data_[comp_pos(m)] = to_nodal(grid_, coeffs);
}

FieldForm& FieldForm::operator+=(const FieldForm& o) {
  if (o.is_empty()) return *this;  // componentless fields act as zero
  if (is_empty()) return *this = o;
  if (!(grid_ == o.grid_) || degree_ != o.degree_)
    throw DomainError("FieldForm: mismatched grid or degree in addition");
  for (std::size_t ci = 0; ci < data_.size(); ++ci)
    for (std::size_t i = 0; i < data_[ci].size(); ++i)
      data_[ci][i] += o.data_[ci][i];
  return *this;
}

FieldForm& FieldForm::operator-=(const FieldForm& o) {
  FieldForm neg = o;
  neg *= -1.0;
  return *this += neg;
}

FieldForm& FieldForm::operator*=(double s) {
  for (auto& v : data_)
    for (double& x : v) x *= s;
  return *this;
}

FieldForm d(const FieldForm& a) {
  const TorusGrid& g = a.grid();
  FieldForm out(g, a.degree() + 1);
  if (a.degree() >= g.dim()) return out;
  std::size_t sz = g.size();
  std::vector<std::vector<std::complex<double>>> acc;
  auto out_masks = out.comp_masks();
  acc.assign(out_masks.size(), std::vector<std::complex<double>>(sz, 0.0));
  auto pos_of = [&](Mask m) {
    return static_cast<std::size_t>(
        std::lower_bound(out_masks.begin(), out_masks.end(), m) - out_masks.begin());
  };
  for (Mask m : a.comp_masks()) {
    auto spec = a.spectral(m);
    for (int axis = 0; axis < g.dim(); ++axis) {
      Mask bit = Mask(1) << axis;
      if (m & bit) continue;
      double sgn = wedge_sign(bit, m);
      auto& tgt = acc[pos_of(m | bit)];
      for (std::size_t idx = 0; idx < sz; ++idx) {
        int f = g.deriv_freq(axis_bin(g, idx, axis));
        if (f == 0) continue;
        tgt[idx] += spec[idx] * std::complex<double>(0.0, sgn * two_pi * f);
      }
    }
  }
  for (std::size_t ci = 0; ci < out_masks.size(); ++ci)
    out.set_spectral(out_masks[ci], acc[ci]);
  return out;
}

namespace {

// spread coarse-grid spectra onto a doubled grid (Nyquist split evenly)
std::vector<std::complex<double>> embed_fine(const TorusGrid& g, const TorusGrid& gf,
                                             const std::vector<std::complex<double>>& spec) {
  std::vector<std::complex<double>> fine(gf.size(), 0.0);
  std::size_t sz = g.size();
  int d = g.dim();
  std::vector<int> freqs(d);
  for (std::size_t idx = 0; idx < sz; ++idx) {
    if (spec[idx] == std::complex<double>(0.0)) continue;
    int nyq = 0;
    for (int a = 0; a < d; ++a) {
      freqs[a] = g.signed_freq(axis_bin(g, idx, a));
      if (2 * freqs[a] == g.N) ++nyq;
    }
    double w = std::pow(0.5, nyq);
    // enumerate the +-Nyquist sign choices
    for (int choice = 0; choice < (1 << nyq); ++choice) {
      std::size_t fidx = 0;
      int ni = 0;
      for (int a = 0; a < d; ++a) {
        int f = freqs[a];
        if (2 * f == g.N) {
          if ((choice >> ni) & 1) f = -f;
          ++ni;
        }
        fidx = fidx * gf.N + ((f % gf.N + gf.N) % gf.N);
      }
      fine[fidx] += w * spec[idx];
    }
  }
  return fine;
}

// project a fine-grid spectrum back down, folding +-Nyquist into the Nyquist bin
std::vector<std::complex<double>> restrict_coarse(const TorusGrid& g, const TorusGrid& gf,
                                                  const std::vector<std::complex<double>>& fine) {
  std::vector<std::complex<double>> spec(g.size(), 0.0);
  int d = g.dim();
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    std::vector<int> freqs(d);
    int nyq = 0;
    for (int a = 0; a < d; ++a) {
      freqs[a] = g.signed_freq(axis_bin(g, idx, a));
      if (2 * freqs[a] == g.N) ++nyq;
    }
    std::complex<double> acc = 0.0;
    for (int choice = 0; choice < (1 << nyq); ++choice) {
      std::size_t fidx = 0;
      int ni = 0;
      for (int a = 0; a < d; ++a) {
        int f = freqs[a];
        if (2 * f == g.N) {
          if ((choice >> ni) & 1) f = -f;
          ++ni;
        }
        fidx = fidx * gf.N + ((f % gf.N + gf.N) % gf.N);
      }
      acc += fine[fidx];
    }
    spec[idx] = acc;
  }
  return spec;
}

}  // namespace

FieldForm wedge(const FieldForm& a, const FieldForm& b) {
  if (!(a.grid() == b.grid())) throw DomainError("wedge: mismatched grids");
  const TorusGrid& g = a.grid();
  TorusGrid gf{g.n, 2 * g.N};
  int deg = a.degree() + b.degree();
  FieldForm out(g, deg);
  if (deg > g.dim()) return out;

  // upsample both operands
  std::map<Mask, std::vector<double>> fa, fb;
  for (Mask m : a.comp_masks()) fa[m] = to_nodal(gf, embed_fine(g, gf, a.spectral(m)));
  for (Mask m : b.comp_masks()) fb[m] = to_nodal(gf, embed_fine(g, gf, b.spectral(m)));

  std::map<Mask, std::vector<double>> prod;
  for (Mask m : out.comp_masks()) prod[m].assign(gf.size(), 0.0);
  for (const auto& [ma, va] : fa)
    for (const auto& [mb, vb] : fb) {
      if (ma & mb) continue;
      double sgn = wedge_sign(ma, mb);
      auto& tgt = prod[ma | mb];
      for (std::size_t i = 0; i < tgt.size(); ++i) tgt[i] += sgn * va[i] * vb[i];
    }
  for (Mask m : out.comp_masks())
    out.set_spectral(m, restrict_coarse(g, gf, to_spectral(gf, prod[m])));
  return out;
}

FieldForm lift_linear(const Eigen::MatrixXd& M, int deg_in, int deg_out,
                      const FieldForm& a) {
  const TorusGrid& g = a.grid();
  if (a.degree() != deg_in) throw DomainError("lift_linear: degree mismatch");
  FieldForm out(g, deg_out);
  if (deg_out < 0 || deg_out > g.dim()) return out;
  auto in_masks = a.comp_masks();
  auto out_masks = out.comp_masks();
  for (std::size_t o = 0; o < out_masks.size(); ++o) {
    auto& tgt = out.comp(out_masks[o]);
    for (std::size_t i = 0; i < in_masks.size(); ++i) {
      double w = M(static_cast<int>(o), static_cast<int>(i));
      if (w == 0.0) continue;
      const auto& src = a.comp(in_masks[i]);
      for (std::size_t idx = 0; idx < tgt.size(); ++idx) tgt[idx] += w * src[idx];
    }
  }
  return out;
}

FieldForm lift_L(const SymplecticStructure& S, const FieldForm& a) {
  return lift_linear(S.matrix_of_L(a.degree()), a.degree(), a.degree() + 2, a);
}

FieldForm lift_Lambda(const SymplecticStructure& S, const FieldForm& a) {
  if (a.degree() < 2) return FieldForm(a.grid(), a.degree() - 2);
  return lift_linear(S.matrix_of_Lambda(a.degree()), a.degree(), a.degree() - 2, a);
}

FieldForm lift_H(const SymplecticStructure& S, const FieldForm& a) {
  FieldForm out = a;
  out *= static_cast<double>(S.n() - a.degree());
  return out;
}

FieldForm lift_star(const SymplecticStructure& S, const FieldForm& a) {
  return lift_linear(S.matrix_of_star(a.degree()), a.degree(),
                     a.grid().dim() - a.degree(), a);
}

FieldForm dlambda_commutator(const SymplecticStructure& S, const FieldForm& a) {
  int k = a.degree();
  if (k <= 0) return FieldForm(a.grid(), k - 1);
  FieldForm second = lift_Lambda(S, d(a));  // degree k-1
  if (k == 1) {
    second *= -1.0;
    return second;  // d Lambda a vanishes below degree 2
  }
  FieldForm first = d(lift_Lambda(S, a));
  return first -= second;
}

FieldForm dlambda_via_star(const SymplecticStructure& S, const FieldForm& a) {
  double sgn = (a.degree() % 2 == 0) ? 1.0 : -1.0;  // (-1)^k
  FieldForm out = lift_star(S, d(lift_star(S, a)));
  out *= sgn;
  return out;
}

FieldForm dlambda(const SymplecticStructure& S, const FieldForm& a) {
  FieldForm via_star = dlambda_via_star(S, a);
  FieldForm comm = dlambda_commutator(S, a);
  FieldForm diff = via_star;
  diff -= comm;
  if (diff.l2_norm() > 1e-8 * (1.0 + a.l2_norm()))
    throw ConsistencyError("dlambda: star route and commutator route disagree");
  return via_star;
}

FieldForm solve_d(const FieldForm& rhs, double tol) {
  const TorusGrid& g = rhs.grid();
  if (rhs.degree() < 1) throw DomainError("solve_d: right-hand side must have degree >= 1");
  FieldForm gform(g, rhs.degree() - 1);
  std::size_t sz = g.size();

  std::map<Mask, std::vector<std::complex<double>>> rspec;
  for (Mask m : rhs.comp_masks()) rspec[m] = rhs.spectral(m);

  int dim = g.dim();
  for (Mask m : gform.comp_masks()) {
    std::vector<std::complex<double>> gs(sz, 0.0);
    for (std::size_t idx = 0; idx < sz; ++idx) {
      double k2 = 0;
      std::vector<int> f(dim);
      for (int a = 0; a < dim; ++a) {
        f[a] = g.deriv_freq(axis_bin(g, idx, a));
        k2 += static_cast<double>(f[a]) * f[a];
      }
      if (k2 == 0) continue;
      std::complex<double> acc = 0.0;
      for (int a = 0; a < dim; ++a) {
        Mask bit = Mask(1) << a;
        if (m & bit) continue;
        if (f[a] == 0) continue;
        acc += static_cast<double>(f[a]) * wedge_sign(bit, m) * rspec[m | bit][idx];
      }
      gs[idx] = acc / std::complex<double>(0.0, two_pi * k2);
    }
    gform.set_spectral(m, gs);
  }
  FieldForm check = d(gform);
  check -= rhs;
  if (check.l2_norm() > tol * (1.0 + rhs.l2_norm()))
    throw NotSolvableError("solve_d: right-hand side is not an exact form on this grid");
  return gform;
}

FieldForm smooth(const FieldForm& a, double width) {
  if (width <= 0 || width >= 0.5)
    throw DomainError("smooth: width must lie in (0, 0.5)");
  const TorusGrid& g = a.grid();
  std::size_t sz = g.size();
  auto bump = [width](double t) {
    double u = t / width;
    if (std::abs(u) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - u * u));
  };
  std::vector<double> kernel(sz);
  double total = 0;
  for (std::size_t idx = 0; idx < sz; ++idx) {
    double v = 1.0;
    for (int axis = 0; axis < g.dim(); ++axis) {
      int b = axis_bin(g, idx, axis);
      double x = static_cast<double>(b) / g.N;
      double dist = std::min(x, 1.0 - x);
      v *= bump(dist);
      if (v == 0.0) break;
    }
    kernel[idx] = v;
    total += v;
  }
  if (total <= 0) throw DomainError("smooth: kernel vanishes at every node; enlarge width");
  double hs = 1.0;  // h^{2n}
  for (int a = 0; a < g.dim(); ++a) hs /= g.N;
  for (auto& v : kernel) v /= (total * hs);

  std::vector<std::complex<double>> kspec(kernel.begin(), kernel.end());
  dft(g, kspec, FFTW_FORWARD);

  FieldForm out(g, a.degree());
  for (Mask m : a.comp_masks()) {
    const auto& src = a.comp(m);
    std::vector<std::complex<double>> fs(src.begin(), src.end());
    dft(g, fs, FFTW_FORWARD);
    for (std::size_t i = 0; i < sz; ++i) fs[i] *= kspec[i] * hs;
    dft(g, fs, FFTW_BACKWARD);
    auto& tgt = out.comp(m);
    double inv = 1.0 / static_cast<double>(sz);
    for (std::size_t i = 0; i < sz; ++i) tgt[i] = fs[i].real() * inv;
  }
  return out;
}

bool is_closed(const FieldForm& a, double tol) {
  return d(a).l2_norm() <= tol * (1.0 + a.l2_norm());
}

std::vector<std::pair<int, FieldForm>> lift_lefschetz_decompose(
    const SymplecticStructure& S, const FieldForm& a) {
  int k = a.degree();
  int n = S.n();
  std::vector<std::pair<int, FieldForm>> out;
  if (k < 0 || k > 2 * n) return out;
  int r_lo = std::max(k - n, 0);
  int r_hi = k / 2;

  // the decomposition is one constant linear projection per (k, r) pair
  std::vector<Eigen::MatrixXd> bases;
  std::vector<int> offsets;
  int cols = 0;
  int dim_k = static_cast<int>(masks_of_degree(2 * n, k).size());
  for (int r = r_lo; r <= r_hi; ++r) {
    bases.push_back(S.primitive_basis(k - 2 * r));
    offsets.push_back(cols);
    cols += static_cast<int>(bases.back().cols());
  }
  Eigen::MatrixXd M(dim_k, cols);
  for (int r = r_lo; r <= r_hi; ++r) {
    const Eigen::MatrixXd& B = bases[r - r_lo];
    double rf = 1;
    for (int i = 2; i <= r; ++i) rf *= i;
    for (int c = 0; c < B.cols(); ++c) {
      PointwiseForm beta = PointwiseForm::from_dense(n, k - 2 * r, B.col(c));
      M.col(offsets[r - r_lo] + c) = S.L_power(r, beta).dense(k) / rf;
    }
  }
  Eigen::MatrixXd pinv = (M.transpose() * M).ldlt().solve(M.transpose());
  for (int r = r_lo; r <= r_hi; ++r) {
    const Eigen::MatrixXd& B = bases[r - r_lo];
    if (B.cols() == 0) continue;
    Eigen::MatrixXd T = B * pinv.middleRows(offsets[r - r_lo], B.cols());
    out.emplace_back(r, lift_linear(T, k, k - 2 * r, a));
  }
  return out;
}

FieldForm lift_invert_L_power(const SymplecticStructure& S, int k,
                              const FieldForm& a, double tol) {
  int n = S.n();
  if (k < 0 || k > n) throw DomainError("lift_invert_L_power: need 0 <= k <= n");
  int deg_b = a.degree();
  int j = deg_b - 2 * k;
  if (j < 0) throw DomainError("lift_invert_L_power: target degree below 0");
  int dim_j = static_cast<int>(masks_of_degree(2 * n, j).size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(dim_j, dim_j);
  for (int s = 0; s < k; ++s) M = (S.matrix_of_L(j + 2 * s) * M).eval();
  Eigen::MatrixXd pinv;
  if (deg_b == n + k && j == n - k) {
    pinv = M.partialPivLu().inverse();
  } else {
    pinv = M.completeOrthogonalDecomposition().pseudoInverse();
  }
  FieldForm x = lift_linear(pinv, deg_b, j, a);
  FieldForm back = lift_linear(M, j, deg_b, x);
  back -= a;
  if (back.l2_norm() > tol * (1.0 + a.l2_norm()))
    throw NotSolvableError("lift_invert_L_power: field is not in the image of L^k");
  return x;
}

bool lift_is_primitive(const SymplecticStructure& S, const FieldForm& a, double tol) {
  int k = a.degree();
  double scale = 1.0 + a.max_abs();
  bool lam = lift_Lambda(S, a).max_abs() <= tol * scale;
  if (k > S.n()) return lam;
  FieldForm w = a;
  for (int i = 0; i < S.n() - k + 1; ++i) w = lift_L(S, w);
  bool wed = w.max_abs() <= tol * scale;
  if (lam != wed)
    throw ConsistencyError("lift_is_primitive: contraction and wedge criteria disagree");
  return lam;
}

bool is_harmonic(const SymplecticStructure& S, const FieldForm& a, double tol) {
  double scale = 1.0 + a.max_abs();
  if (d(a).max_abs() > tol * scale) return false;
  return dlambda(S, a).max_abs() <= tol * scale;
}

double l2_inner(const FieldForm& a, const FieldForm& b) {
  if (!(a.grid() == b.grid()) || a.degree() != b.degree())
    throw DomainError("l2_inner: mismatched fields");
  double acc = 0;
  for (Mask m : a.comp_masks()) {
    const auto& va = a.comp(m);
    const auto& vb = b.comp(m);
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
  }
  return acc / static_cast<double>(a.grid().size());
}

double integral_wedge(const FieldForm& a, const FieldForm& b) {
  if (a.degree() + b.degree() != a.grid().dim())
    throw DomainError("integral_wedge: degrees must sum to the torus dimension");
  return wedge(a, b).integral();
}

}  // namespace symph
