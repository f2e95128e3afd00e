#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "symphodge/cemodel.hpp"
#include "symphodge/deform.hpp"
#include "symphodge/smoothing.hpp"

namespace symph {

// ---------------------------------------------------------------------------
// Cone corrections
//
// The wedge of a constant 2k-form with a 2k-dimensional simplex is a measure
// spread over the simplex. A ConePiece is the 1-dimensional current
// z * (spread measure) joining that measure to its total charge placed at a
// chosen vertex:  d(cone) = (density ^ base) - charge * delta_apex, exactly.
// These are the non-polyhedral part of the potential Gamma; they live inside
// the convex hull of apex and base, so they never enlarge supports.
// ---------------------------------------------------------------------------
struct ConePiece {
  Eigen::VectorXd apex;    // grid vertex the charge is concentrated at
  Simplex base;            // simplex carrying the spread measure
  PointwiseForm density;   // constant form weighting the measure
  double charge = 0.0;     // total signed mass of the spread measure

  int ambient() const { return base.ambient(); }
};

// total charge of density ^ base (the exact integral of the density over it)
double cone_charge(const PointwiseForm& density, const Simplex& base);

// pairing of the cone with a 1-form given pointwise
double cone_evaluate(const ConePiece& c, const FormAtPoint& phi,
                     QuadratureSpec q = {});
double cone_evaluate(const ConePiece& c, const FieldForm& phi,
                     QuadratureSpec q = {});

// band-limited field A with  integral_wedge(A, phi) = cone(smooth(phi, w))
// for every 1-form phi on g, mirroring mollify_chain bin for bin
FieldForm cone_mollify(const ConePiece& c, const TorusGrid& g, double width);

// ---------------------------------------------------------------------------
// Formal linear combinations of currents
// ---------------------------------------------------------------------------

// a cone base with the same duality-operator stack DualCurrent carries
struct ConeCurrent {
  ConePiece piece;
  std::vector<CurrentOp> ops;
  int base_degree = 0;  // 2n - 1

  int degree(int two_n) const { return degree_after_ops(base_degree, ops, two_n); }
};

struct WeightedPiece {
  double weight = 1.0;
  std::variant<DualCurrent, ConeCurrent> cur;
};

// A finite sum of weighted currents of one common degree. Evaluation groups
// pieces by operator stack so each battery form is transformed (and its
// evaluator built) once per group rather than once per piece.
class CurrentSum {
 public:
  CurrentSum() = default;
  explicit CurrentSum(SymplecticStructure S) : S_(std::move(S)) {}

  void add(double weight, DualCurrent T);
  void add(double weight, ConePiece cone, std::vector<CurrentOp> ops = {});
  // the sum with an extra operator applied to every piece
  CurrentSum with_op(CurrentOp op) const;

  bool empty() const { return pieces_.empty(); }
  const std::vector<WeightedPiece>& pieces() const { return pieces_; }
  const SymplecticStructure& structure() const;
  int degree() const;  // common degree; ConsistencyError if pieces disagree
  int dimension() const;

  double evaluate(const FieldForm& phi, QuadratureSpec q = {}) const;

  // mollified field of the sum: each base splatted on g, stacks applied as
  // lifts, weights folded in
  FieldForm mollify(const TorusGrid& g, double width) const;

 private:
  std::optional<SymplecticStructure> S_;
  std::vector<WeightedPiece> pieces_;
};

// sup over a battery of |sum(phi)|
double battery_sup(const CurrentSum& T, const CurrentBattery& b);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------
struct PipelineConfig {
  int n = 2;             // torus T^{2n}
  int grid_N = 16;       // field nodes per axis (power of two)
  PolyChain Q;           // (2n-p)-cycle in the fundamental domain
  int p = 2;             // degree of the dual class
  double epsilon = 0.25; // deformation / potential-solve grid scale
  double width = 0.25;   // mollifier width
  double step_tol = 1e-8;
  double end_tol = 1e-6;
  double ball_tol = 1e-8;     // pointwise comass threshold for the empty ball
  int battery_count = 50;
  int battery_kmax = 1;
  int quad_order = 12;
  std::uint64_t seed = 2026;
  bool run_cross_check = true;            // independent smooth-field route
  bool localized_gamma = true;            // solve for Gamma near the charges
  std::optional<PolyChain> gamma_override;  // caller-chosen grid potential
  // optional anchors, one per cell of Q in order: the charge of that cell is
  // deposited at the coarse-grid vertex nearest its anchor instead of its
  // barycenter, so charges of several cells can share one cone apex
  std::vector<Eigen::VectorXd> apex_override;

  void validate() const;  // throws DomainError on malformed input
};

// Width at which the sampled bump kernel loses all response in the
// alternating (highest representable) grid mode.  At such a width the splat
// of a lattice-aligned cell vanishes at every node beyond the kernel support
// instead of ringing there, which is what makes machine-clean empty balls
// possible on a finite grid.  Returns the zero crossing nearest `prefer`.
double nyquist_quiet_width(int N, double lo = 0.18, double hi = 0.42,
                           double prefer = 0.25);

struct BallWitness {
  std::vector<double> center;
  double radius = 0.0;          // Euclidean, torus metric
  int radius_cells = 0;         // floor(radius / h)
  double max_comass_inside = 0.0;
  bool found = false;
};

struct StepTiming {
  std::string name;
  double seconds = 0.0;
};

struct PipelineReport {
  bool short_circuit = false;
  std::string branch;  // "short-circuit" or "full"

  // precondition: class pairings of omega^{n-p+1} ^ Q against the constant
  // basis in the complementary degree (all must vanish)
  std::vector<std::pair<Mask, double>> primitivity_pairings;
  double primitivity_residual = 0.0;

  // step residuals (battery sups, scaled by nothing -- raw)
  double w_battery = 0.0;           // sup |W(phi)| used for the short-circuit
  double gamma_boundary_residual = 0.0;  // exact cochain residual of the solve
  double eq_potential_residual = 0.0;    // | W - d(Gamma + cones) | battery
  double eq_deformed_residual = 0.0;     // | W - d(P + S + cones) | battery
  double eq_inverse_residual = 0.0;      // | L^{n-p+1} B - (P+S+cones) | battery
  double nodewise_inverse_agreement = 0.0;  // field of B vs nodewise inversion
  double cross_check_residual = -1.0;       // smooth-field potential route

  // end-to-end
  double dT_residual = 0.0;
  double LT_residual = 0.0;
  double class_residual = 0.0;  // sup |<T - Q, phi>| over closed forms
  bool harmonic = false;
  double d_final_sup = 0.0;
  double dlambda_final_sup = 0.0;
  BallWitness ball;
  double support_fraction = 0.0;  // nodes with comass above ball_tol

  // masses and bookkeeping
  double mass_Q = 0.0, mass_W = 0.0, mass_Gamma = 0.0;
  double mass_P = 0.0, mass_R = 0.0, mass_S = 0.0, mass_cones = 0.0;
  DeformCertificate deform_certificate;
  std::vector<StepTiming> timings;
  std::vector<std::string> notes;
};

// the run's artifacts: everything the report claims is recomputable from here
struct PipelineResult {
  explicit PipelineResult(SymplecticStructure s) : structure(std::move(s)) {}

  PipelineConfig cfg;
  PipelineReport report;
  SymplecticStructure structure;
  TorusGrid grid;

  CurrentSum T;          // the closed primitive current Q - dB
  FieldForm final_field; // S(T), degree p
  FieldForm B_field;     // mollified B (empty on the short-circuit branch)
  FieldForm W_field;     // mollified W (empty when W vanishes by degree)
  PolyChain gamma, P, R, S;
  std::vector<ConePiece> cones;
};

// Executes the construction: W = omega^{n-p+1} ^ Q; short-circuit to T = Q
// when W is battery-zero; otherwise solve for a localized grid potential
// Gamma (plus exact cone corrections), deform it, invert the Lefschetz power
// on P + S + cones to get B, and emit T = Q - dB with its mollified field.
// Every intermediate identity is battery-checked before the next step runs.
PipelineResult run(const PipelineConfig& cfg);

// Recompute the report's claims from the artifacts with a reseeded battery;
// a claim that fails to reproduce throws ConsistencyError.
PipelineReport verify_pipeline(const PipelineResult& r);

// ---------------------------------------------------------------------------
// Support tracking of B's Lefschetz components
// ---------------------------------------------------------------------------
struct LefschetzComponentSupport {
  int r = 0;
  FieldForm component;
  double max_excess = 0.0;  // distance beyond width + tol of the worst node
  std::optional<std::size_t> witness_node;
};

struct LefschetzBReport {
  bool vacuous = false;  // B = 0
  bool ok = true;
  double reconstruction_residual = 0.0;   // sum_r L^r/r! B_r vs B
  bool index_range_consistent = true;     // every component in the allowed range
  double shifted_exponent_residual = 0.0; // the (n-p+r-1) display, for the record
  std::vector<LefschetzComponentSupport> components;
};

// decompose a field-level B and check every component's above-tol nodes stay
// within width of the given support simplices (torus metric)
LefschetzBReport lefschetz_support_check(const SymplecticStructure& S,
                                         const FieldForm& B,
                                         const std::vector<Simplex>& support,
                                         double width, double tol = 1e-6);

// the pipeline overload: support = P, S and the cone hulls; also validates
// the decomposition exponents against the inversion actually used
LefschetzBReport lefschetz_decompose_B(const PipelineResult& r,
                                       double tol = 1e-6);

// ---------------------------------------------------------------------------
// Thom-class branch classifier for product subtori
// ---------------------------------------------------------------------------
enum class ThomBranch { small_support, nowhere_vanishing };

struct ThomReport {
  std::vector<int> axes;  // 1-based coordinate axes spanning the subtorus
  int codim = 0;
  bool codim_odd = false;
  bool isotropic = false;
  bool symplectic_subtorus = false;
  PointwiseForm tau;                  // dual class as an invariant form
  double omega_wedge_tau_norm = 0.0;  // |[omega ^ tau]| (must vanish when isotropic)
  double omega_power_tau_norm = 0.0;  // |[omega^{n-p} ^ tau]| for codim 2p
  ThomBranch branch = ThomBranch::small_support;
};

// dual class of the product subtorus spanned by the given axes, computed and
// classified in the invariant model; requires an abelian model
ThomReport thom_checks(const CEModel& model, const std::vector<int>& axes);

}  // namespace symph
