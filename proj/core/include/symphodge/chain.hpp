#pragma once

#include <functional>
#include <limits>
#include <optional>

#include "symphodge/field.hpp"

namespace symph {

// Oriented p-simplex in R^N; vertex order defines the orientation.
struct Simplex {
  static constexpr double degeneracy_eps = 1e-12;

  std::vector<Eigen::VectorXd> v;

  Simplex() = default;
  explicit Simplex(std::vector<Eigen::VectorXd> vertices);

  int p() const { return static_cast<int>(v.size()) - 1; }
  int ambient() const { return v.empty() ? 0 : static_cast<int>(v[0].size()); }
  // columns v_i - v_0
  Eigen::MatrixXd edges() const;
  // Euclidean p-volume (1 for a point)
  double volume() const;
  Eigen::VectorXd barycenter() const;
  bool is_degenerate() const { return volume() <= degeneracy_eps; }
  // point of the simplex closest to x, with its distance
  double distance_to(const Eigen::VectorXd& x) const;
};

// Real polyhedral p-chain: formal sum of weighted oriented simplices.
class PolyChain {
 public:
  PolyChain() = default;
  PolyChain(int ambient_N, int p) : N_(ambient_N), p_(p) {}

  int ambient() const { return N_; }
  int dim() const { return p_; }
  bool empty() const { return terms_.empty(); }
  const std::vector<std::pair<double, Simplex>>& terms() const { return terms_; }

  // throws DomainError on dimension mismatch or a degenerate simplex
  void add(double coeff, Simplex s);
  // silently drops degenerate simplices; returns whether the term was kept
  bool add_if_nondegenerate(double coeff, Simplex s);
  // merge identically-placed simplices (orientation-aware) and prune zeros
  void canonicalize(double coeff_eps = 1e-12);

  PolyChain& operator+=(const PolyChain& o);
  PolyChain& operator*=(double s);
  friend PolyChain operator+(PolyChain a, const PolyChain& b) { return a += b; }
  friend PolyChain operator*(double s, PolyChain a) { return a *= s; }
  PolyChain operator-() const;

 private:
  friend PolyChain boundary(const PolyChain&);
  int N_ = 0;
  int p_ = 0;
  std::vector<std::pair<double, Simplex>> terms_;
};

// alternating face sum; p = 0 gives the empty chain
PolyChain boundary(const PolyChain& c);

double mass(const PolyChain& c);
double normal_norm(const PolyChain& c);  // mass(c) + mass(boundary(c))

// translate each simplex by one integer vector (the floor of its barycenter)
// so its geometry survives; a simplex straddling a cell wall keeps vertices
// slightly outside [0,1], which is the honest picture on the torus
PolyChain wrap_to_fundamental(const PolyChain& c);

// minimal Euclidean distance from x to the support; +inf for the empty chain
double support_distance(const PolyChain& c, const Eigen::VectorXd& x);
// deterministic sample cloud covering every simplex
std::vector<Eigen::VectorXd> support_cloud(const PolyChain& c, int per_simplex);

struct QuadratureSpec {
  int order = 4;  // Gauss points per collapsed axis
};

// integral over the chain of a pointwise-valued integrand x -> form of degree p
using FormAtPoint = std::function<PointwiseForm(const Eigen::VectorXd&)>;
double integrate_over_chain(const PolyChain& c, const FormAtPoint& phi,
                            int n, QuadratureSpec q = {});

// constant integrand: exact via tangent minors, no quadrature
double integrate_over_chain(const PolyChain& c, const PointwiseForm& phi);

// band-limited evaluation of a FieldForm anywhere on the torus
class FieldEvaluator {
 public:
  explicit FieldEvaluator(const FieldForm& f, double prune_eps = 1e-14);
  PointwiseForm operator()(const Eigen::VectorXd& x) const;
  int degree() const { return degree_; }

 private:
  struct Wave {
    std::vector<int> kappa;
    std::complex<double> coeff;
  };
  int n_ = 0;
  int degree_ = 0;
  std::vector<std::pair<Mask, std::vector<Wave>>> comps_;
};

double integrate_over_chain(const PolyChain& c, const FieldForm& phi,
                            QuadratureSpec q = {});
// spec-facing alias: pair a field with a cycle
double pair_with_cycle(const FieldForm& phi, const PolyChain& c,
                       QuadratureSpec q = {});

PolyChain pushforward_affine(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                             const PolyChain& c);

struct SmoothPushforward {
  PolyChain chain;
  double hausdorff_estimate = 0.0;
};
// piecewise-linear pushforward after `subdivisions` rounds of barycentric
// subdivision; throws RefinementError if the estimate exceeds error_budget
SmoothPushforward pushforward_smooth(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const PolyChain& c, int subdivisions,
    double error_budget = std::numeric_limits<double>::infinity());

// One round of barycentric subdivision (orientation preserved).
PolyChain barycentric_subdivide(const PolyChain& c);

// A current over T^{2n}, one of three concrete representations:
//   Chain           — integration over a polyhedral chain
//   Field           — phi -> integral of field ^ phi
//   FormWedgeChain  — (alpha ^ T_c)(phi) = T_c(alpha ^ phi), alpha a field
struct CurrentRep {
  enum class Kind { Chain, Field, FormWedgeChain };
  Kind kind = Kind::Chain;
  PolyChain chain;                      // Chain, FormWedgeChain
  FieldForm field;                      // Field
  std::optional<FieldForm> wedge_field; // FormWedgeChain factor (nonconstant)
  PointwiseForm wedge_const;            // FormWedgeChain factor (constant)

  static CurrentRep from_chain(PolyChain c);
  static CurrentRep from_field(FieldForm f);
  static CurrentRep form_wedge_chain(PointwiseForm alpha, PolyChain c);
  static CurrentRep form_wedge_chain(FieldForm alpha, PolyChain c);

  // dimension as a current on T^{2n}; degree = 2n - dimension
  int dimension(int two_n) const;
};

double evaluate(const CurrentRep& T, const FieldForm& phi, QuadratureSpec q = {});
double evaluate(const CurrentRep& T, const PointwiseForm& phi, QuadratureSpec q = {});

}  // namespace symph
