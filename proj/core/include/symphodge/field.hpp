#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "symphodge/exterior.hpp"

namespace symph {

// Uniform nodal grid on the torus (R/Z)^{2n}, N nodes per axis at x_i = i/N.
struct TorusGrid {
  int n = 1;
  int N = 8;

  int dim() const { return 2 * n; }
  double h() const { return 1.0 / N; }
  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < dim(); ++a) s *= static_cast<std::size_t>(N);
    return s;
  }
  // row-major, last axis fastest
  std::size_t index(const std::vector<int>& mi) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim(); ++a) idx = idx * N + ((mi[a] % N + N) % N);
    return idx;
  }
  std::vector<int> multi_index(std::size_t idx) const {
    std::vector<int> mi(dim());
    for (int a = dim() - 1; a >= 0; --a) {
      mi[a] = static_cast<int>(idx % N);
      idx /= N;
    }
    return mi;
  }
  std::vector<double> node(std::size_t idx) const {
    auto mi = multi_index(idx);
    std::vector<double> x(dim());
    for (int a = 0; a < dim(); ++a) x[a] = static_cast<double>(mi[a]) / N;
    return x;
  }
  // bin 0..N-1 -> signed frequency; the Nyquist bin carries +N/2
  int signed_freq(int k) const { return (k > N / 2) ? k - N : k; }
  // frequency used by differentiation: the Nyquist derivative is zero at nodes
  int deriv_freq(int k) const {
    int f = signed_freq(k);
    return (2 * f == N) ? 0 : f;
  }
  bool operator==(const TorusGrid&) const = default;
};

// A differential k-form with one real nodal array per coordinate component.
class FieldForm {
 public:
  FieldForm() = default;
  // degrees outside [0, 2n] produce a componentless field that acts as zero
  FieldForm(TorusGrid g, int degree);

  static FieldForm constant(TorusGrid g, const PointwiseForm& value);
  // real trigonometric polynomial with independent modes on |kappa_a| <= kmax
  static FieldForm random_band_limited(TorusGrid g, int degree, int kmax,
                                       std::uint64_t seed, double amplitude = 1.0);

  const TorusGrid& grid() const { return grid_; }
  int degree() const { return degree_; }
  int n() const { return grid_.n; }
  bool is_empty() const { return masks_.empty(); }

  const std::vector<Mask>& comp_masks() const { return masks_; }
  std::vector<double>& comp(Mask m);
  const std::vector<double>& comp(Mask m) const;

  void set_component(Mask m,
                     const std::function<double(const std::vector<double>&)>& f);

  PointwiseForm value_at(std::size_t node_idx) const;
  PointwiseForm mean() const;   // componentwise integral over the unit-volume torus
  double integral() const;      // top-degree density integral
  double l2_norm() const;
  double max_abs() const;

  // trig-expansion coefficients of one component: entry at bin index kappa
  // multiplies exp(2 pi i kappa . x)
  std::vector<std::complex<double>> spectral(Mask m) const;
  void set_spectral(Mask m, const std::vector<std::complex<double>>& coeffs);

  FieldForm& operator+=(const FieldForm& o);
  FieldForm& operator-=(const FieldForm& o);
  FieldForm& operator*=(double s);
  friend FieldForm operator+(FieldForm a, const FieldForm& b) { return a += b; }
  friend FieldForm operator-(FieldForm a, const FieldForm& b) { return a -= b; }
  friend FieldForm operator*(double s, FieldForm a) { return a *= s; }

 private:
  TorusGrid grid_;
  int degree_ = 0;
  std::vector<Mask> masks_;
  std::vector<std::vector<double>> data_;  // parallel to masks_
  int comp_pos(Mask m) const;
};

// exterior derivative of the trigonometric interpolant (exact on band-limited data)
FieldForm d(const FieldForm& a);

// dealiased pointwise wedge: evaluated on a doubled grid, then projected back
FieldForm wedge(const FieldForm& a, const FieldForm& b);

// nodewise application of a constant linear operator between component spaces
FieldForm lift_linear(const Eigen::MatrixXd& M, int deg_in, int deg_out,
                      const FieldForm& a);
FieldForm lift_L(const SymplecticStructure& S, const FieldForm& a);
FieldForm lift_Lambda(const SymplecticStructure& S, const FieldForm& a);
FieldForm lift_H(const SymplecticStructure& S, const FieldForm& a);
FieldForm lift_star(const SymplecticStructure& S, const FieldForm& a);

// symplectic codifferential; computes both the commutator and the star route,
// asserts they agree, and returns the star-route value
FieldForm dlambda(const SymplecticStructure& S, const FieldForm& a);
// the commutator route: d Lambda - Lambda d
FieldForm dlambda_commutator(const SymplecticStructure& S, const FieldForm& a);
// the star route: with the pairing normalized so (e^1, e^2) = 1 and the star
// determined by star(a) ^ b = (a,b) vol, the matching sign is (-1)^k star d star
FieldForm dlambda_via_star(const SymplecticStructure& S, const FieldForm& a);

// least-norm g with d g = rhs; throws NotSolvableError when rhs is not exact
FieldForm solve_d(const FieldForm& rhs, double tol = 1e-8);

// circular convolution with a normalized compactly supported bump of radius
// `width` per axis; preserves integrals exactly and commutes with d
FieldForm smooth(const FieldForm& a, double width);

// nodewise Lefschetz decomposition; each component is a primitive-field lift
std::vector<std::pair<int, FieldForm>> lift_lefschetz_decompose(
    const SymplecticStructure& S, const FieldForm& a);
// nodewise least-norm solve of L^k x = a
FieldForm lift_invert_L_power(const SymplecticStructure& S, int k,
                              const FieldForm& a, double tol = 1e-9);
// nodewise primitivity: contraction and wedge-power criteria, cross-asserted
bool lift_is_primitive(const SymplecticStructure& S, const FieldForm& a,
                       double tol = 1e-9);

bool is_closed(const FieldForm& a, double tol = 1e-8);
// sup-norm test of d a = 0 and dlambda a = 0
bool is_harmonic(const SymplecticStructure& S, const FieldForm& a,
                 double tol = 1e-8);

double l2_inner(const FieldForm& a, const FieldForm& b);

// integral of a ^ b over the torus (degrees summing to the full dimension)
double integral_wedge(const FieldForm& a, const FieldForm& b);

}  // namespace symph
