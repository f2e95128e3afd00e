#pragma once

#include <tuple>

#include "symphodge/exterior.hpp"

namespace symph {

// Finite complex of invariant forms on a 2n-dimensional Lie group, encoded by
// structure constants, together with a compatible constant symplectic form.
// Construction validates the Jacobi identity, d(omega) = 0, and nondegeneracy.
class CEModel {
 public:
  // entries are (i, j, k, c) with 1-based indices: [X_i, X_j] = sum_k c X_k
  using StructureEntry = std::tuple<int, int, int, double>;

  CEModel(int n, const std::vector<StructureEntry>& structure, PointwiseForm omega);

  // torus model: every generator closed
  static CEModel abelian(int n);
  // nil-model with de^3 = e^1^e^2 and omega = e^1^e^4 + e^2^e^3
  static CEModel kodaira_thurston();

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  const PointwiseForm& omega() const { return symp_.omega(); }
  const SymplecticStructure& symp() const { return symp_; }
  const PointwiseForm& d_generator(int i) const;  // de^i, 0-based index
  double jacobi_residual() const;

  // differential as an antiderivation determined by the structure constants
  PointwiseForm d(const PointwiseForm& a) const;
  // symplectic codifferential d Lambda - Lambda d on the invariant complex
  PointwiseForm dlambda(const PointwiseForm& a) const;

  Eigen::MatrixXd d_matrix(int k) const;        // degree k -> k+1
  Eigen::MatrixXd dlambda_matrix(int k) const;  // degree k -> k-1

 private:
  int n_;
  std::vector<Eigen::MatrixXd> c_;   // c_[k](i,j), 0-based
  std::vector<PointwiseForm> dgen_;  // de^i
  SymplecticStructure symp_;
};

// numeric rank with a relative singular-value threshold
int rank_svd(const Eigen::MatrixXd& M, double rel_tol = 1e-9);
// exact rank over the rationals (double entries are converted exactly)
int rank_exact(const Eigen::MatrixXd& M);
// both ranks, which must agree; disagreement throws CertificationError
int rank_certified(const Eigen::MatrixXd& M, double rel_tol = 1e-9);

struct DegreeCohomology {
  int betti = 0;
  // orthonormal representative columns (coefficient vectors over the degree-k
  // monomial basis), spanning ker d orthogonally to im d
  Eigen::MatrixXd reps;
};

struct Cohomology {
  std::vector<DegreeCohomology> deg;  // index 0..2n
  int betti(int k) const { return deg.at(k).betti; }
};

Cohomology cohomology(const CEModel& m);

// coordinates of the class of a closed form in the representative basis
Eigen::VectorXd class_coordinates(const Cohomology& co, int k, const PointwiseForm& a);

// matrix of [omega^power ^ .] : H^k -> H^{k+2 power} on representatives
Eigen::MatrixXd induced_L_power(const CEModel& m, const Cohomology& co, int k, int power);

// per k = 0..n: is [omega^k ^ .] : H^{n-k} -> H^{n+k} an isomorphism
std::vector<bool> hard_lefschetz_test(const CEModel& m);

struct PrimitiveCohomology {
  int dim = 0;
  Eigen::MatrixXd kernel_coords;       // coordinates in the H^r basis
  std::vector<PointwiseForm> reps;     // closed representatives of a basis
};
// kernel of [omega^{n-r+1} ^ .] : H^r -> H^{2n-r+2}, for 0 <= r <= n
PrimitiveCohomology ph(const CEModel& m, int r);

struct PrimitiveDCohomology {
  int dim = 0;
  std::vector<PointwiseForm> reps;  // primitive, d- and dlambda-closed forms
  // whether d maps the degree r-1 primitive dlambda-closed space into the
  // degree r one (used implicitly by the quotient; verified, not assumed)
  bool d_maps_into_next = true;
};
// (ker d intersect P'^r) / d P'^{r-1} with P'^r = primitive dlambda-closed
// r-forms, for 1 <= r <= n
PrimitiveDCohomology ph_d(const CEModel& m, int r);

struct TripleDims {
  int ker_d_cap_im_dlambda = 0;
  int im_d_cap_ker_dlambda = 0;
  int im_ddlambda = 0;
};
// the three subspace dimensions per degree 0..2n
std::vector<TripleDims> ddlambda_subspaces(const CEModel& m);

// rank of the class map from ph_d(m, r) into ph(m, r)
int natural_map_rank(const CEModel& m, int r);

// given primitive alpha in the image of d dlambda, return a primitive beta
// with d dlambda beta = alpha (top Lefschetz component of any preimage)
PointwiseForm primitive_ddlambda_refine(const CEModel& m, const PointwiseForm& alpha);

struct CohomologyReport {
  std::vector<int> betti;            // 0..2n
  std::vector<bool> hl_iso;          // 0..n
  std::vector<int> ph_dims;          // 0..n
  std::vector<int> phd_dims;         // index r valid for 1..n
  std::vector<TripleDims> ddlambda_dims;  // 0..2n
  std::vector<int> natmap_rank;      // index r valid for 1..n
};
CohomologyReport full_report(const CEModel& m);

}  // namespace symph
