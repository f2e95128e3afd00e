#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "symphodge/errors.hpp"

namespace symph {

/// Basis covectors of R^{2n} are indexed 0..2n-1 internally (1..2n in files).
/// A monomial e^{i1} ^ ... ^ e^{ik} with i1 < ... < ik is stored as a bitmask.
using Mask = std::uint32_t;

inline int mask_degree(Mask m) { return std::popcount(m); }

/// Sign of e^A ^ e^B -> e^{A|B} for disjoint masks (count of transpositions).
int wedge_sign(Mask a, Mask b);

/// Sign picked up by contracting index j out of monomial m (j must be in m).
int contract_sign(Mask m, int j);

/// List of all masks of the given degree over 2n indices, ascending as integers.
std::vector<Mask> masks_of_degree(int two_n, int degree);

/// Position of `m` within masks_of_degree(two_n, degree(m)).
int mask_rank(int two_n, Mask m);

/// Alternating multilinear form with constant real coefficients on R^{2n}.
/// Terms are kept sorted by mask; zero terms are pruned at `coeff_eps`.
/// Mixed-degree combinations are allowed (Lefschetz machinery produces them),
/// but most operations require homogeneous input and say so.
class PointwiseForm {
 public:
  static constexpr double coeff_eps = 1e-12;

  PointwiseForm() : n_(0) {}
  explicit PointwiseForm(int n) : n_(n) {}
  PointwiseForm(int n, std::vector<std::pair<Mask, double>> terms);

  static PointwiseForm scalar(int n, double c);
  static PointwiseForm basis(int n, Mask m, double c = 1.0);

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  bool is_zero() const { return terms_.empty(); }
  /// Degree if homogeneous (0 for the zero form); throws otherwise.
  int degree() const;
  bool is_homogeneous() const;

  const std::vector<std::pair<Mask, double>>& terms() const { return terms_; }
  double coeff(Mask m) const;
  void set_coeff(Mask m, double c);

  PointwiseForm& operator+=(const PointwiseForm& o);
  PointwiseForm& operator-=(const PointwiseForm& o);
  PointwiseForm& operator*=(double s);
  friend PointwiseForm operator+(PointwiseForm a, const PointwiseForm& b) { return a += b; }
  friend PointwiseForm operator-(PointwiseForm a, const PointwiseForm& b) { return a -= b; }
  friend PointwiseForm operator*(double s, PointwiseForm a) { return a *= s; }

  double norm() const;      // Euclidean norm of coefficients
  double max_abs() const;

  /// Coefficients of the degree-k part as a dense vector over masks_of_degree.
  Eigen::VectorXd dense(int k) const;
  static PointwiseForm from_dense(int n, int k, const Eigen::VectorXd& v);

 private:
  void canonicalize();
  int n_;
  std::vector<std::pair<Mask, double>> terms_;
};

PointwiseForm wedge(const PointwiseForm& a, const PointwiseForm& b);

/// Contravariant alternating tensor (same storage as PointwiseForm); used for
/// the Poisson bivector. A bivector term c * (e_i ^ e_j) contracts a form as
/// c * i_{e_i}(i_{e_j}(alpha)): the second factor is applied first.
class PolyVector {
 public:
  PolyVector() : n_(0) {}
  PolyVector(int n, std::vector<std::pair<Mask, double>> terms)
      : n_(n), terms_(std::move(terms)) {}
  int n() const { return n_; }
  const std::vector<std::pair<Mask, double>>& terms() const { return terms_; }

 private:
  int n_;
  std::vector<std::pair<Mask, double>> terms_;
};

/// Contraction of a form by a (sum of) decomposable bivector terms.
PointwiseForm contract_bivector(const PolyVector& pi, const PointwiseForm& a);

/// A symplectic vector space (R^{2n}, omega) with the full operator suite.
///
/// Construction computes pi = omega^{-1} and the covector pairing, then
/// verifies the commutation relations [Lambda,L] = H, [H,Lambda] = 2 Lambda,
/// [H,L] = -2 L on the whole monomial basis; failure throws ConsistencyError.
class SymplecticStructure {
 public:
  /// omega must be a nondegenerate 2-form on R^{2n}.
  explicit SymplecticStructure(const PointwiseForm& omega);

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  const PointwiseForm& omega() const { return omega_; }
  const PolyVector& pi() const { return pi_; }
  /// Pairing matrix on 1-forms, (e^i, e^j).
  const Eigen::MatrixXd& covector_pairing() const { return G_; }
  /// Coefficient of omega^n / n! on e^{1..2n} (the symplectic volume).
  double volume_coeff() const { return vol_; }

  PointwiseForm L(const PointwiseForm& a) const;        // omega ^ a
  PointwiseForm Lambda(const PointwiseForm& a) const;   // i_pi a
  PointwiseForm H(const PointwiseForm& a) const;        // sum_k (n-k) Pi^k
  PointwiseForm L_power(int k, const PointwiseForm& a) const;

  /// Pairing extended from 1-forms by Gram determinants; inputs must be
  /// homogeneous of equal degree.
  double pairing(const PointwiseForm& a, const PointwiseForm& b) const;

  /// Symplectic star: the unique (2n-k)-form with star(a) ^ b = pairing(a,b) omega^n/n!.
  PointwiseForm star(const PointwiseForm& a) const;

  /// Whether Lambda(a) vanishes. Cross-asserts the equivalent wedge test
  /// omega^{n-k+1} ^ a = 0 for degree k <= n; disagreement throws.
  bool is_primitive(const PointwiseForm& a, double tol = 1e-10) const;

  struct LefschetzComponent {
    int r;                 // the L-power
    PointwiseForm beta;    // primitive, degree k - 2r
  };
  /// a = sum_r L^r/r! beta_{k-2r} with every beta primitive; dense solve.
  std::vector<LefschetzComponent> lefschetz_decompose(const PointwiseForm& a) const;
  /// Same decomposition through the sl2 extraction recursion (cross-check).
  std::vector<LefschetzComponent> lefschetz_decompose_recursive(const PointwiseForm& a) const;
  PointwiseForm assemble_lefschetz(const std::vector<LefschetzComponent>& comps, int n_hint = -1) const;

  /// Solve L^k a = b. For deg b = n+k this inversion is exact and unique;
  /// other degrees use the minimal-norm least-squares solution and throw
  /// NotSolvableError if the system is inconsistent beyond tol.
  PointwiseForm invert_L_power(int k, const PointwiseForm& b, double tol = 1e-9) const;

  /// Matrix of L : degree k -> k+2 in the monomial bases.
  Eigen::MatrixXd matrix_of_L(int k) const;
  /// Matrix of Lambda : degree k -> k-2.
  Eigen::MatrixXd matrix_of_Lambda(int k) const;
  /// Matrix of star : degree k -> 2n-k.
  Eigen::MatrixXd matrix_of_star(int k) const;
  /// Orthonormal basis (columns) of the primitive subspace in degree k.
  Eigen::MatrixXd primitive_basis(int k) const;

 private:
  void check_sl2() const;
  int n_;
  PointwiseForm omega_;
  PolyVector pi_;
  Eigen::MatrixXd W_;   // omega(e_i, e_j)
  Eigen::MatrixXd G_;   // pairing on 1-forms
  double vol_;
};

/// The standard structure: omega = sum_i e^{2i-1} ^ e^{2i} (1-based labels),
/// coordinates ordered (x_1, y_1, ..., x_n, y_n).
SymplecticStructure make_standard_symplectic(int n);
PointwiseForm standard_omega(int n);

struct ComassOptions {
  int samples = 2000;        // random simple covectors tried
  int refine_iters = 120;    // projected-ascent steps from the best starts
  int refine_starts = 8;
  std::uint64_t seed = 1;
};

struct ComassResult {
  double lower_bound;   // best value over admissible simple unit k-vectors
  double heuristic;     // after local refinement (= lower_bound if exact path)
  bool exact;           // true when a closed-form path was used
};

/// Comass sup{ <a, w> : w simple unit k-vector }. Exact for k in
/// {0, 1, 2, 2n-2, 2n-1, 2n}; sampled + refined otherwise.
ComassResult comass(const PointwiseForm& a, const ComassOptions& opts = {});

}  // namespace symph
