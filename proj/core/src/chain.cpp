#include "symphodge/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

namespace symph {
namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Gauss-Legendre nodes/weights on [0,1] via the Golub-Welsch eigenproblem.
void gauss_legendre_01(int q, std::vector<double>& nodes, std::vector<double>& weights) {
  if (q < 1) throw DomainError("quadrature order must be >= 1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(q, q);
  for (int k = 1; k < q; ++k) {
    double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes.resize(q);
  weights.resize(q);
  for (int i = 0; i < q; ++i) {
    nodes[i] = 0.5 * (es.eigenvalues()(i) + 1.0);     // [-1,1] -> [0,1]
    double v0 = es.eigenvectors()(0, i);
    weights[i] = v0 * v0;                              // 2*v0^2, halved for [0,1]
  }
}

// Lexicographic vertex sort; returns the permutation parity (+1/-1).
int sort_vertices_lex(std::vector<Eigen::VectorXd>& verts) {
  auto lex_less = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (int i = 0; i < a.size(); ++i) {
      if (a[i] < b[i]) return true;
      if (a[i] > b[i]) return false;
    }
    return false;
  };
  int sign = 1;
  // selection sort, counting transpositions
  const int m = static_cast<int>(verts.size());
  for (int i = 0; i < m; ++i) {
    int best = i;
    for (int j = i + 1; j < m; ++j)
      if (lex_less(verts[j], verts[best])) best = j;
    if (best != i) {
      std::swap(verts[i], verts[best]);
      sign = -sign;
    }
  }
  return sign;
}

std::vector<double> flatten(const std::vector<Eigen::VectorXd>& verts) {
  std::vector<double> key;
  for (const auto& v : verts) key.insert(key.end(), v.data(), v.data() + v.size());
  return key;
}

}  // namespace

Simplex::Simplex(std::vector<Eigen::VectorXd> vertices) : v(std::move(vertices)) {
  if (v.empty()) throw DomainError("simplex needs at least one vertex");
  for (const auto& w : v)
    if (w.size() != v[0].size())
      throw DomainError("simplex vertices must share one ambient dimension");
}

Eigen::MatrixXd Simplex::edges() const {
  const int p_ = p();
  Eigen::MatrixXd E(ambient(), std::max(p_, 0));
  for (int i = 1; i <= p_; ++i) E.col(i - 1) = v[i] - v[0];
  return E;
}

double Simplex::volume() const {
  const int p_ = p();
  if (p_ == 0) return 1.0;  // points carry counting measure
  Eigen::MatrixXd E = edges();
  double g = (E.transpose() * E).determinant();
  if (g <= 0.0) return 0.0;
  double fact = 1.0;
  for (int i = 2; i <= p_; ++i) fact *= i;
  return std::sqrt(g) / fact;
}

Eigen::VectorXd Simplex::barycenter() const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(ambient());
  for (const auto& w : v) b += w;
  return b / static_cast<double>(v.size());
}

double Simplex::distance_to(const Eigen::VectorXd& x) const {
  if (x.size() != ambient())
    throw DomainError("distance_to: ambient dimension mismatch");
  const int p_ = p();
  if (p_ == 0) return (x - v[0]).norm();
  Eigen::MatrixXd E = edges();
  Eigen::VectorXd t = (E.transpose() * E).ldlt().solve(E.transpose() * (x - v[0]));
  bool inside = t.minCoeff() >= -1e-12 && t.sum() <= 1.0 + 1e-12;
  if (inside) return (x - v[0] - E * t).norm();
  double best = std::numeric_limits<double>::infinity();
  for (int drop = 0; drop <= p_; ++drop) {
    std::vector<Eigen::VectorXd> fv;
    for (int i = 0; i <= p_; ++i)
      if (i != drop) fv.push_back(v[i]);
    best = std::min(best, Simplex(std::move(fv)).distance_to(x));
  }
  return best;
}

void PolyChain::add(double coeff, Simplex s) {
  if (s.p() != p_ || s.ambient() != N_)
    throw DomainError("chain term has wrong dimension or ambient space");
  if (s.is_degenerate())
    throw DomainError("degenerate simplex added to a chain");
  terms_.emplace_back(coeff, std::move(s));
}

bool PolyChain::add_if_nondegenerate(double coeff, Simplex s) {
  if (s.p() != p_ || s.ambient() != N_)
    throw DomainError("chain term has wrong dimension or ambient space");
  if (s.is_degenerate()) return false;
  terms_.emplace_back(coeff, std::move(s));
  return true;
}

void PolyChain::canonicalize(double coeff_eps) {
  std::map<std::vector<double>, std::pair<double, Simplex>> merged;
  for (auto& [a, s] : terms_) {
    std::vector<Eigen::VectorXd> verts = s.v;
    int sign = sort_vertices_lex(verts);
    auto key = flatten(verts);
    auto it = merged.find(key);
    if (it == merged.end())
      merged.emplace(std::move(key), std::make_pair(a * sign, Simplex(std::move(verts))));
    else
      it->second.first += a * sign;
  }
  terms_.clear();
  for (auto& [key, cs] : merged)
    if (std::abs(cs.first) > coeff_eps) terms_.emplace_back(cs.first, std::move(cs.second));
}

PolyChain& PolyChain::operator+=(const PolyChain& o) {
  if (o.terms_.empty()) return *this;
  if (terms_.empty() && N_ == 0) {
    *this = o;
    return *this;
  }
  if (o.N_ != N_ || o.p_ != p_)
    throw DomainError("chain addition: mismatched ambient space or dimension");
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  return *this;
}

PolyChain& PolyChain::operator*=(double s) {
  for (auto& [a, sx] : terms_) a *= s;
  return *this;
}

PolyChain PolyChain::operator-() const {
  PolyChain r = *this;
  r *= -1.0;
  return r;
}

PolyChain boundary(const PolyChain& c) {
  PolyChain out(c.ambient(), std::max(c.dim() - 1, 0));
  if (c.dim() == 0) return out;
  for (const auto& [a, s] : c.terms()) {
    for (int drop = 0; drop <= c.dim(); ++drop) {
      std::vector<Eigen::VectorXd> fv;
      for (int i = 0; i <= c.dim(); ++i)
        if (i != drop) fv.push_back(s.v[i]);
      double sign = (drop % 2 == 0) ? 1.0 : -1.0;
      out.terms_.emplace_back(a * sign, Simplex(std::move(fv)));
    }
  }
  out.canonicalize();
  return out;
}

double mass(const PolyChain& c) {
  double m = 0.0;
  for (const auto& [a, s] : c.terms()) m += std::abs(a) * s.volume();
  return m;
}

double normal_norm(const PolyChain& c) { return mass(c) + mass(boundary(c)); }

PolyChain wrap_to_fundamental(const PolyChain& c) {
  PolyChain out(c.ambient(), c.dim());
  for (const auto& [a, s] : c.terms()) {
    // Shift the whole simplex by one lattice vector instead of wrapping
    // vertices one by one: per-vertex wrapping would glue a vertex sitting
    // at coordinate 1 onto its partner at 0 and collapse the cell.
    Eigen::VectorXd bary = s.barycenter();
    std::vector<Eigen::VectorXd> verts = s.v;
    for (int i = 0; i < bary.size(); ++i) {
      const double shift = std::floor(bary[i]);
      if (shift != 0.0)
        for (auto& w : verts) w[i] -= shift;
    }
    out.add(a, Simplex(std::move(verts)));
  }
  return out;
}

double support_distance(const PolyChain& c, const Eigen::VectorXd& x) {
  PolyChain cc = c;
  cc.canonicalize();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [a, s] : cc.terms()) best = std::min(best, s.distance_to(x));
  return best;
}

std::vector<Eigen::VectorXd> support_cloud(const PolyChain& c, int per_simplex) {
  PolyChain cc = c;
  cc.canonicalize();
  std::vector<Eigen::VectorXd> pts;
  std::uint64_t term_idx = 0;
  for (const auto& [a, s] : cc.terms()) {
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull ^ term_idx++);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    int produced = 0;
    for (std::size_t i = 0; i < s.v.size() && produced < per_simplex; ++i, ++produced)
      pts.push_back(s.v[i]);
    if (produced < per_simplex) {
      pts.push_back(s.barycenter());
      ++produced;
    }
    while (produced < per_simplex) {
      // uniform barycentric weights via sorted-uniform spacings
      std::vector<double> cuts(s.v.size() - 1);
      for (auto& t : cuts) t = uni(rng);
      std::sort(cuts.begin(), cuts.end());
      Eigen::VectorXd x = Eigen::VectorXd::Zero(s.ambient());
      double prev = 0.0;
      for (std::size_t i = 0; i < s.v.size(); ++i) {
        double next = (i + 1 < s.v.size()) ? cuts[i] : 1.0;
        x += (next - prev) * s.v[i];
        prev = next;
      }
      pts.push_back(std::move(x));
      ++produced;
    }
  }
  return pts;
}

namespace {

// tangent minors det(E[rows(m), :]) over all degree-p masks
std::vector<double> tangent_minors(const Eigen::MatrixXd& E,
                                   const std::vector<Mask>& masks, int p) {
  std::vector<double> J(masks.size());
  Eigen::MatrixXd sub(p, p);
  for (std::size_t r = 0; r < masks.size(); ++r) {
    int row = 0;
    for (int i = 0; i < E.rows(); ++i)
      if (masks[r] & (Mask{1} << i)) sub.row(row++) = E.row(i);
    J[r] = sub.determinant();
  }
  return J;
}

}  // namespace

double integrate_over_chain(const PolyChain& c, const FormAtPoint& phi,
                            int n, QuadratureSpec q) {
  if (c.ambient() != 2 * n)
    throw DomainError("integrate_over_chain: chain ambient space must be 2n");
  const int p = c.dim();
  if (p == 0) {
    double acc = 0.0;
    for (const auto& [a, s] : c.terms()) acc += a * phi(s.v[0]).coeff(0);
    return acc;
  }
  std::vector<double> gl_x, gl_w;
  gauss_legendre_01(q.order, gl_x, gl_w);
  const auto masks = masks_of_degree(2 * n, p);

  double acc = 0.0;
  for (const auto& [a, s] : c.terms()) {
    Eigen::MatrixXd E = s.edges();
    std::vector<double> J = tangent_minors(E, masks, p);
    // iterate the tensor Gauss grid on (0,1)^p, Duffy-collapsed onto the simplex
    std::vector<int> mi(p, 0);
    double term = 0.0;
    bool checked = false;
    while (true) {
      double w = 1.0, jac = 1.0, shrink = 1.0;
      Eigen::VectorXd t(p);
      for (int i = 0; i < p; ++i) {
        double u = gl_x[mi[i]];
        w *= gl_w[mi[i]];
        t[i] = u * shrink;
        if (i < p - 1) {
          for (int rep = 0; rep < p - 1 - i; ++rep) jac *= (1.0 - u);
          shrink *= (1.0 - u);
        }
      }
      Eigen::VectorXd x = s.v[0] + E * t;
      PointwiseForm val = phi(x);
      if (!checked) {
        if (!val.is_zero() && val.degree() != p)
          throw DomainError("integrate_over_chain: integrand degree must equal the chain dimension");
        checked = true;
      }
      double pair = 0.0;
      for (std::size_t r = 0; r < masks.size(); ++r) pair += val.coeff(masks[r]) * J[r];
      term += w * jac * pair;
      int axis = p - 1;
      while (axis >= 0 && ++mi[axis] == q.order) mi[axis--] = 0;
      if (axis < 0) break;
    }
    acc += a * term;
  }
  return acc;
}

double integrate_over_chain(const PolyChain& c, const PointwiseForm& phi) {
  const int p = c.dim();
  if (!phi.is_zero() && phi.degree() != p)
    throw DomainError("integrate_over_chain: integrand degree must equal the chain dimension");
  if (p == 0) {
    double acc = 0.0;
    for (const auto& [a, s] : c.terms()) acc += a * phi.coeff(0);
    return acc;
  }
  const auto masks = masks_of_degree(c.ambient(), p);
  double fact = 1.0;
  for (int i = 2; i <= p; ++i) fact *= i;
  double acc = 0.0;
  for (const auto& [a, s] : c.terms()) {
    std::vector<double> J = tangent_minors(s.edges(), masks, p);
    double pair = 0.0;
    for (std::size_t r = 0; r < masks.size(); ++r) pair += phi.coeff(masks[r]) * J[r];
    acc += a * pair / fact;
  }
  return acc;
}

FieldEvaluator::FieldEvaluator(const FieldForm& f, double prune_eps)
    : n_(f.n()), degree_(f.degree()) {
  const TorusGrid& g = f.grid();
  for (Mask m : f.comp_masks()) {
    auto spec = f.spectral(m);
    std::vector<Wave> waves;
    for (std::size_t idx = 0; idx < spec.size(); ++idx) {
      if (std::abs(spec[idx]) <= prune_eps) continue;
      auto mi = g.multi_index(idx);
      Wave w;
      w.kappa.resize(g.dim());
      for (int a = 0; a < g.dim(); ++a) w.kappa[a] = g.signed_freq(mi[a]);
      w.coeff = spec[idx];
      waves.push_back(std::move(w));
    }
    if (!waves.empty()) comps_.emplace_back(m, std::move(waves));
  }
}

PointwiseForm FieldEvaluator::operator()(const Eigen::VectorXd& x) const {
  if (x.size() != 2 * n_)
    throw DomainError("FieldEvaluator: point has wrong ambient dimension");
  std::vector<std::pair<Mask, double>> terms;
  for (const auto& [m, waves] : comps_) {
    double val = 0.0;
    for (const auto& w : waves) {
      double phase = 0.0;
      for (std::size_t a = 0; a < w.kappa.size(); ++a) phase += w.kappa[a] * x[a];
      val += (w.coeff * std::polar(1.0, two_pi * phase)).real();
    }
    terms.emplace_back(m, val);
  }
  return PointwiseForm(n_, std::move(terms));
}

double integrate_over_chain(const PolyChain& c, const FieldForm& phi, QuadratureSpec q) {
  if (phi.grid().dim() != c.ambient())
    throw DomainError("integrate_over_chain: field lives on a different torus");
  if (phi.is_empty()) return 0.0;
  if (phi.degree() != c.dim())
    throw DomainError("integrate_over_chain: integrand degree must equal the chain dimension");
  FieldEvaluator ev(phi);
  return integrate_over_chain(
      c, [&ev](const Eigen::VectorXd& x) { return ev(x); }, phi.n(), q);
}

double pair_with_cycle(const FieldForm& phi, const PolyChain& c, QuadratureSpec q) {
  return integrate_over_chain(c, phi, q);
}

PolyChain pushforward_affine(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                             const PolyChain& c) {
  if (A.cols() != c.ambient() || b.size() != A.rows())
    throw DomainError("pushforward_affine: incompatible map dimensions");
  PolyChain out(static_cast<int>(A.rows()), c.dim());
  for (const auto& [a, s] : c.terms()) {
    std::vector<Eigen::VectorXd> verts;
    verts.reserve(s.v.size());
    for (const auto& v : s.v) verts.emplace_back(A * v + b);
    out.add_if_nondegenerate(a, Simplex(std::move(verts)));
  }
  double lip = A.size() == 0 ? 0.0 : A.jacobiSvd().singularValues()(0);
  double bound = std::pow(lip, c.dim()) * mass(c);
  if (mass(out) > bound * (1.0 + 1e-9) + 1e-12)
    throw ConsistencyError("pushforward_affine: mass exceeds the Lipschitz bound");
  return out;
}

PolyChain barycentric_subdivide(const PolyChain& c) {
  PolyChain out(c.ambient(), c.dim());
  const int p = c.dim();
  for (const auto& [a, s] : c.terms()) {
    if (p == 0) {
      out.add(a, s);
      continue;
    }
    Eigen::MatrixXd E = s.edges();
    Eigen::LDLT<Eigen::MatrixXd> gram(E.transpose() * E);
    std::vector<int> perm(p + 1);
    for (int i = 0; i <= p; ++i) perm[i] = i;
    do {
      // cell vertices: barycenters of the growing prefix of the permutation
      std::vector<Eigen::VectorXd> verts(p + 1);
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(s.ambient());
      for (int i = 0; i <= p; ++i) {
        sum += s.v[perm[i]];
        verts[i] = sum / static_cast<double>(i + 1);
      }
      Simplex cell(std::move(verts));
      // orient the cell to agree with the parent
      Eigen::MatrixXd C = gram.solve(E.transpose() * cell.edges());
      double sign = C.determinant() >= 0.0 ? 1.0 : -1.0;
      out.add(a * sign, std::move(cell));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return out;
}

SmoothPushforward pushforward_smooth(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const PolyChain& c, int subdivisions, double error_budget) {
  PolyChain fine = c;
  for (int r = 0; r < subdivisions; ++r) fine = barycentric_subdivide(fine);

  SmoothPushforward result;
  if (fine.empty()) {
    result.chain = PolyChain(c.ambient(), c.dim());
    return result;
  }
  const int p = c.dim();
  int target_dim = static_cast<int>(f(fine.terms().front().second.v[0]).size());
  PolyChain out(target_dim, p);
  double est = 0.0;
  for (const auto& [a, s] : fine.terms()) {
    std::vector<Eigen::VectorXd> images;
    images.reserve(s.v.size());
    for (const auto& v : s.v) images.emplace_back(f(v));
    // deviation between f and its linear interpolant at midpoints and barycenter
    for (std::size_t i = 0; i <= static_cast<std::size_t>(p); ++i)
      for (std::size_t j = i + 1; j <= static_cast<std::size_t>(p); ++j) {
        Eigen::VectorXd mid = 0.5 * (s.v[i] + s.v[j]);
        est = std::max(est, (f(mid) - 0.5 * (images[i] + images[j])).norm());
      }
    Eigen::VectorXd pl_bary = Eigen::VectorXd::Zero(target_dim);
    for (const auto& w : images) pl_bary += w;
    pl_bary /= static_cast<double>(images.size());
    est = std::max(est, (f(s.barycenter()) - pl_bary).norm());
    out.add_if_nondegenerate(a, Simplex(std::move(images)));
  }
  if (est > error_budget)
    throw RefinementError("pushforward_smooth: estimated deviation " + std::to_string(est) +
                          " exceeds the budget " + std::to_string(error_budget));
  result.chain = std::move(out);
  result.hausdorff_estimate = est;
  return result;
}

CurrentRep CurrentRep::from_chain(PolyChain c) {
  CurrentRep T;
  T.kind = Kind::Chain;
  T.chain = std::move(c);
  return T;
}

CurrentRep CurrentRep::from_field(FieldForm f) {
  CurrentRep T;
  T.kind = Kind::Field;
  T.field = std::move(f);
  return T;
}

CurrentRep CurrentRep::form_wedge_chain(PointwiseForm alpha, PolyChain c) {
  if (!alpha.is_zero() && 2 * alpha.n() != c.ambient())
    throw DomainError("form_wedge_chain: factor and chain live in different spaces");
  CurrentRep T;
  T.kind = Kind::FormWedgeChain;
  T.wedge_const = std::move(alpha);
  T.chain = std::move(c);
  return T;
}

CurrentRep CurrentRep::form_wedge_chain(FieldForm alpha, PolyChain c) {
  if (alpha.grid().dim() != c.ambient())
    throw DomainError("form_wedge_chain: factor and chain live in different spaces");
  CurrentRep T;
  T.kind = Kind::FormWedgeChain;
  T.wedge_field = std::move(alpha);
  T.chain = std::move(c);
  return T;
}

int CurrentRep::dimension(int two_n) const {
  switch (kind) {
    case Kind::Chain:
      return chain.dim();
    case Kind::Field:
      return two_n - field.degree();
    case Kind::FormWedgeChain: {
      int deg = wedge_field ? wedge_field->degree()
                            : (wedge_const.is_zero() ? 0 : wedge_const.degree());
      return chain.dim() - deg;
    }
  }
  return 0;
}

double evaluate(const CurrentRep& T, const FieldForm& phi, QuadratureSpec q) {
  switch (T.kind) {
    case CurrentRep::Kind::Chain:
      return integrate_over_chain(T.chain, phi, q);
    case CurrentRep::Kind::Field:
      return integral_wedge(T.field, phi);
    case CurrentRep::Kind::FormWedgeChain: {
      FieldEvaluator ep(phi);
      if (T.wedge_field) {
        FieldEvaluator ea(*T.wedge_field);
        return integrate_over_chain(
            T.chain,
            [&](const Eigen::VectorXd& x) { return wedge(ea(x), ep(x)); },
            phi.n(), q);
      }
      const PointwiseForm& alpha = T.wedge_const;
      return integrate_over_chain(
          T.chain, [&](const Eigen::VectorXd& x) { return wedge(alpha, ep(x)); },
          phi.n(), q);
    }
  }
  throw DomainError("evaluate: unknown current representation");
}

double evaluate(const CurrentRep& T, const PointwiseForm& phi, QuadratureSpec q) {
  switch (T.kind) {
    case CurrentRep::Kind::Chain:
      return integrate_over_chain(T.chain, phi);
    case CurrentRep::Kind::Field:
      return integral_wedge(T.field, FieldForm::constant(T.field.grid(), phi));
    case CurrentRep::Kind::FormWedgeChain: {
      if (T.wedge_field) {
        FieldEvaluator ea(*T.wedge_field);
        return integrate_over_chain(
            T.chain, [&](const Eigen::VectorXd& x) { return wedge(ea(x), phi); },
            T.wedge_field->n(), q);
      }
      return integrate_over_chain(T.chain, wedge(T.wedge_const, phi));
    }
  }
  throw DomainError("evaluate: unknown current representation");
}

}  // namespace symph
