#pragma once

#include "symphodge/chain.hpp"

namespace symph {

// Axis-aligned cubical grid of scale epsilon, shifted by an offset in
// [0, epsilon)^N. In periodic mode the grid must tile the period lattice.
struct GridSpec {
  int ambient_N = 2;
  double epsilon = 1.0;
  Eigen::VectorXd offset;   // empty means zero
  bool periodic = false;
  Eigen::VectorXd periods;  // required when periodic; epsilon must divide each

  void validate() const;  // throws DomainError on a malformed spec
  Eigen::VectorXd offset_or_zero() const;
};

struct DeformCertificate {
  double bound = 0.0;               // 2 N epsilon
  double sup_PR_to_T = 0.0;         // sampled sup of dist(supp P u supp R, supp T)
  double sup_S_to_boundary = 0.0;   // sampled sup of dist(supp S, supp dT)
  double identity_residual = 0.0;   // max |<T - P - dR - S, phi>| over the battery
  double skeletal_residual = 0.0;   // max deviation of P simplices from p-faces
  double mass_T = 0.0, mass_P = 0.0, mass_R = 0.0, mass_S = 0.0;  // informative
  Eigen::VectorXd offset_used;
  int retries = 0;
};

// T = P + dR + S with P supported on the grid p-skeleton, R of dimension p+1
// tracking the projection homotopy, and S the deformation debris of dT.
struct DeformResult {
  PolyChain P, R, S;
  DeformCertificate certificate;
};

// Cell-by-cell central projection from jittered cell centers, one skeleton
// level at a time. Degenerate incidences trigger a reseeded offset, up to
// max_retries; persistent degeneracy throws DegeneracyError.
DeformResult deform(const PolyChain& T, const GridSpec& g, std::uint64_t seed = 1,
                    int max_retries = 12);

struct CertificateReport {
  bool ok = true;
  double bound = 0.0;
  double sup_PR_to_T = 0.0;
  double sup_S_to_boundary = 0.0;
  double identity_residual = 0.0;
  double skeletal_residual = 0.0;
};

// Recheck a result from scratch: support bounds against fresh sample clouds,
// the current identity against a fresh random form battery, and skeletal
// placement of P. A violation throws CertificationError naming a witness.
CertificateReport verify_certificate(const PolyChain& T, const GridSpec& g,
                                     const DeformResult& result,
                                     std::uint64_t seed = 99,
                                     double identity_tol = 1e-8);

// distance from x to the support, with wraparound shifts in periodic mode
double grid_support_distance(const PolyChain& c, const Eigen::VectorXd& x,
                             const GridSpec& g);

}  // namespace symph
