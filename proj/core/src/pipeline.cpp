#include "symphodge/pipeline.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>

#include "symphodge/errors.hpp"

namespace symph {

namespace {

constexpr double kPi = 3.14159265358979323846;

void gauss_legendre_01(int order, std::vector<double>& x,
                       std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(order), 0.0);
  w.assign(static_cast<std::size_t>(order), 0.0);
  for (int i = 0; i < order; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (order + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= order; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = order * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= order; ++k) {
      double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = order * (t * p1 - p0) / (t * t - 1.0);
    x[static_cast<std::size_t>(i)] = 0.5 * (1.0 - t);
    w[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
}

// barycentric nodes over the standard p-simplex; weights sum to 1/p!
struct SimplexRule {
  std::vector<Eigen::VectorXd> t;
  std::vector<double> w;
};

SimplexRule simplex_rule(int p, int order) {
  SimplexRule rule;
  if (p == 0) {
    rule.t.push_back(Eigen::VectorXd::Zero(0));
    rule.w.push_back(1.0);
    return rule;
  }
  std::vector<double> gx, gw;
  gauss_legendre_01(order, gx, gw);
  std::vector<int> mi(static_cast<std::size_t>(p), 0);
  while (true) {
    double w = 1.0, jac = 1.0, shrink = 1.0;
    Eigen::VectorXd t(p);
    for (int i = 0; i < p; ++i) {
      double u = gx[static_cast<std::size_t>(mi[static_cast<std::size_t>(i)])];
      w *= gw[static_cast<std::size_t>(mi[static_cast<std::size_t>(i)])];
      t[i] = u * shrink;
      if (i < p - 1) {
        for (int rep = 0; rep < p - 1 - i; ++rep) jac *= (1.0 - u);
        shrink *= (1.0 - u);
      }
    }
    rule.t.push_back(t);
    rule.w.push_back(w * jac);
    int axis = p - 1;
    while (axis >= 0 && ++mi[static_cast<std::size_t>(axis)] ==
                            static_cast<int>(gx.size()))
      mi[static_cast<std::size_t>(axis--)] = 0;
    if (axis < 0) break;
  }
  return rule;
}

double simplex_diameter(const Simplex& s) {
  double d = 0.0;
  for (std::size_t i = 0; i < s.v.size(); ++i)
    for (std::size_t j = i + 1; j < s.v.size(); ++j)
      d = std::max(d, (s.v[i] - s.v[j]).norm());
  return d;
}

// longest-edge bisection until every piece has diameter <= target
void bisect_into(double coeff, const Simplex& s, double target, int depth,
                 std::vector<std::pair<double, Simplex>>& out) {
  if (depth > 100 || simplex_diameter(s) <= target) {
    out.emplace_back(coeff, s);
    return;
  }
  std::size_t bi = 0, bj = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < s.v.size(); ++i)
    for (std::size_t j = i + 1; j < s.v.size(); ++j) {
      double d = (s.v[i] - s.v[j]).norm();
      if (d > best) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  Eigen::VectorXd mid = 0.5 * (s.v[bi] + s.v[bj]);
  Simplex a = s, b = s;
  a.v[bj] = mid;
  b.v[bi] = mid;
  bisect_into(coeff, a, target, depth + 1, out);
  bisect_into(coeff, b, target, depth + 1, out);
}

// A fixed-order Gauss rule only tracks an oscillatory integrand while each
// piece stays small against the shortest wavelength present.  Battery forms
// keep |kappa|_inf <= battery_kmax (default 1), and a 12-point rule on pieces
// of this diameter resolves those waves to machine precision.
constexpr double kEvalDiam = 0.35;

PolyChain bisected_to(const PolyChain& c, double target) {
  PolyChain out(c.ambient(), c.dim());
  std::vector<std::pair<double, Simplex>> pieces;
  for (const auto& [w, s] : c.terms()) {
    pieces.clear();
    bisect_into(w, s, target, 0, pieces);
    for (auto& [pw, ps] : pieces) out.add(pw, std::move(ps));
  }
  return out;
}

bool has_nyquist_bin(const TorusGrid& g, std::size_t idx) {
  if (g.N % 2 != 0) return false;
  std::size_t v = idx;
  for (int a = 0; a < g.dim(); ++a) {
    if (static_cast<int>(v % static_cast<std::size_t>(g.N)) == g.N / 2)
      return true;
    v /= static_cast<std::size_t>(g.N);
  }
  return false;
}

// signed frequency vectors for every spectral bin, flattened
std::vector<double> bin_frequencies(const TorusGrid& g) {
  const int tn = g.dim();
  const std::size_t sz = g.size();
  std::vector<double> kap(sz * static_cast<std::size_t>(tn));
  for (std::size_t idx = 0; idx < sz; ++idx) {
    std::size_t v = idx;
    for (int a = tn - 1; a >= 0; --a) {
      kap[idx * static_cast<std::size_t>(tn) + static_cast<std::size_t>(a)] =
          g.signed_freq(static_cast<int>(v % static_cast<std::size_t>(g.N)));
      v /= static_cast<std::size_t>(g.N);
    }
  }
  return kap;
}

// t-integral of e^{-i a t} over [0,1]
std::complex<double> segment_phase_integral(double a) {
  if (std::abs(a) < 1e-6) {
    const std::complex<double> ia(0.0, a);
    return 1.0 - ia / 2.0 + ia * ia / 6.0 - ia * ia * ia / 24.0;
  }
  const std::complex<double> ia(0.0, a);
  return (1.0 - std::exp(-ia)) / ia;
}

double fold_elapsed(std::vector<StepTiming>& timings, const std::string& name,
                    std::chrono::steady_clock::time_point& mark) {
  auto now = std::chrono::steady_clock::now();
  double sec = std::chrono::duration<double>(now - mark).count();
  timings.push_back({name, sec});
  mark = now;
  return sec;
}

double torus_l2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    double d = std::abs(a[i] - b[i]);
    d = std::min(d, 1.0 - d);
    s += d * d;
  }
  return std::sqrt(s);
}

// distance from a point to a simplex, minimized over period shifts of the
// simplex in every axis touching the boundary region
double torus_simplex_distance(const Simplex& s, const Eigen::VectorXd& x) {
  const int tn = s.ambient();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> sh(static_cast<std::size_t>(tn), -1);
  while (true) {
    Eigen::VectorXd y = x;
    for (int a = 0; a < tn; ++a) y[a] += sh[static_cast<std::size_t>(a)];
    best = std::min(best, s.distance_to(y));
    int axis = 0;
    while (axis < tn && ++sh[static_cast<std::size_t>(axis)] == 2)
      sh[static_cast<std::size_t>(axis++)] = -1;
    if (axis == tn) break;
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cones
// ---------------------------------------------------------------------------

double cone_charge(const PointwiseForm& density, const Simplex& base) {
  PolyChain c(base.ambient(), base.p());
  c.add(1.0, base);
  return integrate_over_chain(c, density);
}

double cone_evaluate(const ConePiece& c, const FormAtPoint& phi,
                     QuadratureSpec q) {
  const int tn = c.ambient();
  const int pb = c.base.p();
  if (c.apex.size() != tn)
    throw DomainError("cone: apex dimension does not match the base");
  for (const auto& [m, w] : c.density.terms())
    if (mask_degree(m) != pb)
      throw DomainError("cone: density degree must equal the base dimension");

  std::vector<std::pair<double, Simplex>> pieces;
  bisect_into(1.0, c.base, kEvalDiam, 0, pieces);
  const SimplexRule rs = simplex_rule(pb, q.order);
  std::vector<double> gx, gw;
  gauss_legendre_01(q.order, gx, gw);

  double acc = 0.0;
  for (const auto& [pc, s] : pieces) {
    const Eigen::MatrixXd E = s.edges();
    // constant scalar density of the spread measure against the piece's own
    // barycentric measure
    double rho = 0.0;
    for (const auto& [m, w] : c.density.terms()) {
      Eigen::MatrixXd sub(pb, pb);
      int row = 0;
      for (int i = 0; i < tn; ++i)
        if (m & (Mask{1} << i)) sub.row(row++) = E.row(i);
      rho += w * sub.determinant();
    }
    if (rho == 0.0) continue;
    for (std::size_t i = 0; i < rs.t.size(); ++i) {
      const Eigen::VectorXd y = s.v[0] + E * rs.t[i];
      const Eigen::VectorXd vec = y - c.apex;
      const int panels =
          std::max(1, static_cast<int>(std::ceil(vec.norm() / kEvalDiam)));
      double line = 0.0;
      for (int pnl = 0; pnl < panels; ++pnl)
        for (std::size_t j = 0; j < gx.size(); ++j) {
          const double t = (static_cast<double>(pnl) + gx[j]) / panels;
          const Eigen::VectorXd x = c.apex + t * vec;
          const PointwiseForm val = phi(x);
          double pair = 0.0;
          for (int axis = 0; axis < tn; ++axis)
            pair += val.coeff(Mask{1} << axis) * vec[axis];
          line += gw[j] * pair;
        }
      acc += pc * rho * rs.w[i] * line / panels;
    }
  }
  return acc;
}

double cone_evaluate(const ConePiece& c, const FieldForm& phi,
                     QuadratureSpec q) {
  if (phi.degree() != 1)
    throw DomainError("a cone is a 1-dimensional current; it pairs with 1-forms");
  if (phi.is_empty()) return 0.0;
  const int tn = c.ambient();
  const TorusGrid& g = phi.grid();
  if (g.dim() != tn)
    throw DomainError("cone: test form lives on a different torus");
  const int pb = c.base.p();
  if (c.apex.size() != tn)
    throw DomainError("cone: apex dimension does not match the base");
  for (const auto& [m, w] : c.density.terms())
    if (mask_degree(m) != pb)
      throw DomainError("cone: density degree must equal the base dimension");

  // collect the waves the form is built from, grouped by frequency; the
  // radial integral of each wave against the cone is analytic, so only the
  // base needs quadrature
  struct KWave {
    Eigen::VectorXd kappa;
    Eigen::VectorXcd coeff;  // per-axis wave coefficients
    std::complex<double> apex_phase;
  };
  std::map<std::vector<int>, Eigen::VectorXcd> by_kappa;
  std::size_t occupied = 0;
  for (Mask m : phi.comp_masks()) {
    int axis = 0;
    while (!(m & (Mask{1} << axis))) ++axis;
    const auto spec = phi.spectral(m);
    for (std::size_t idx = 0; idx < spec.size(); ++idx) {
      if (std::abs(spec[idx]) == 0.0) continue;
      if (++occupied > 16384) {
        // dense spectrum: fall back to pointwise evaluation
        FieldEvaluator ev(phi);
        return cone_evaluate(
            c, [&ev](const Eigen::VectorXd& x) { return ev(x); }, q);
      }
      std::vector<int> kv(static_cast<std::size_t>(tn));
      std::size_t v = idx;
      for (int a = 0; a < tn; ++a) {
        kv[static_cast<std::size_t>(a)] =
            g.signed_freq(static_cast<int>(v % static_cast<std::size_t>(g.N)));
        v /= static_cast<std::size_t>(g.N);
      }
      auto [it, fresh] = by_kappa.try_emplace(std::move(kv));
      if (fresh) it->second = Eigen::VectorXcd::Zero(tn);
      it->second[axis] += spec[idx];
    }
  }
  if (by_kappa.empty()) return 0.0;

  double kmax = 0.0;
  std::vector<KWave> kwaves;
  kwaves.reserve(by_kappa.size());
  for (auto& [kv, coeff] : by_kappa) {
    KWave w;
    w.kappa.resize(tn);
    double ka = 0.0;
    for (int a = 0; a < tn; ++a) {
      w.kappa[a] = kv[static_cast<std::size_t>(a)];
      ka += w.kappa[a] * c.apex[a];
    }
    kmax = std::max(kmax, w.kappa.norm());
    w.coeff = std::move(coeff);
    w.apex_phase = std::polar(1.0, 2.0 * kPi * ka);
    kwaves.push_back(std::move(w));
  }

  const double target = std::min(kEvalDiam, 0.7 / (1.0 + kmax));
  std::vector<std::pair<double, Simplex>> pieces;
  bisect_into(1.0, c.base, target, 0, pieces);
  const SimplexRule rs = simplex_rule(pb, q.order);

  std::complex<double> acc(0.0, 0.0);
  for (const auto& [pc, s] : pieces) {
    const Eigen::MatrixXd E = s.edges();
    double rho = 0.0;
    for (const auto& [m, w] : c.density.terms()) {
      Eigen::MatrixXd sub(pb, pb);
      int row = 0;
      for (int i = 0; i < tn; ++i)
        if (m & (Mask{1} << i)) sub.row(row++) = E.row(i);
      rho += w * sub.determinant();
    }
    if (rho == 0.0) continue;
    for (std::size_t i = 0; i < rs.t.size(); ++i) {
      const Eigen::VectorXd y = s.v[0] + E * rs.t[i];
      const Eigen::VectorXd vec = y - c.apex;
      const double ww = pc * rho * rs.w[i];
      for (const KWave& w : kwaves) {
        // int_0^1 e^{i a t} dt, the conjugate of the splat phase factor
        const std::complex<double> radial =
            std::conj(segment_phase_integral(2.0 * kPi * w.kappa.dot(vec)));
        std::complex<double> val(0.0, 0.0);
        for (int a = 0; a < tn; ++a) val += w.coeff[a] * vec[a];
        acc += ww * w.apex_phase * radial * val;
      }
    }
  }
  return acc.real();
}

FieldForm cone_mollify(const ConePiece& c, const TorusGrid& g, double width) {
  const int tn = g.dim();
  if (c.ambient() != tn)
    throw DomainError("cone ambient dimension does not match the grid");
  const int pb = c.base.p();

  FieldForm delta(g, 0);
  delta.comp(0)[0] = std::pow(static_cast<double>(g.N), tn);
  const std::vector<std::complex<double>> mult = smooth(delta, width).spectral(0);

  const Eigen::MatrixXd E0 = c.base.edges();
  double rho = 0.0;
  for (const auto& [m, w] : c.density.terms()) {
    Eigen::MatrixXd sub(pb, pb);
    int row = 0;
    for (int i = 0; i < tn; ++i)
      if (m & (Mask{1} << i)) sub.row(row++) = E0.row(i);
    rho += w * sub.determinant();
  }

  FieldForm out(g, tn - 1);
  if (rho == 0.0) return out;

  // quadrature points of the spread measure, bisected for phase resolution
  const double target = 8.0 / (kPi * g.N * std::sqrt(static_cast<double>(tn)));
  std::vector<std::pair<double, Simplex>> pieces;
  bisect_into(1.0, c.base, target, 0, pieces);
  const SimplexRule rs = simplex_rule(pb, 12);

  struct Node {
    Eigen::VectorXd vec;  // y - apex
    double w;
  };
  std::vector<Node> nodes;
  for (const auto& [pc, s] : pieces) {
    const Eigen::MatrixXd E = s.edges();
    // density relative to the piece's own barycentric measure
    double prho = 0.0;
    for (const auto& [m, w] : c.density.terms()) {
      Eigen::MatrixXd sub(pb, pb);
      int row = 0;
      for (int i = 0; i < tn; ++i)
        if (m & (Mask{1} << i)) sub.row(row++) = E.row(i);
      prho += w * sub.determinant();
    }
    for (std::size_t i = 0; i < rs.t.size(); ++i)
      nodes.push_back({s.v[0] + E * rs.t[i] - c.apex, pc * prho * rs.w[i]});
  }

  const std::vector<double> kap = bin_frequencies(g);
  const std::size_t sz = g.size();
  const Mask full = (Mask(1) << tn) - 1;

  // the spread only extends along some of the axes, and the phase integrals
  // factor through those; tabulate them once per active frequency tuple
  std::vector<int> act;
  for (int a = 0; a < tn; ++a) {
    double ext = 0.0;
    for (const Node& nd : nodes) ext = std::max(ext, std::abs(nd.vec[a]));
    if (ext > 1e-15) act.push_back(a);
  }
  const std::size_t na = act.size();
  std::size_t sub_sz = 1;
  for (std::size_t i = 0; i < na; ++i) sub_sz *= static_cast<std::size_t>(g.N);
  std::vector<std::complex<double>> table(
      sub_sz * std::max<std::size_t>(na, 1), {0.0, 0.0});
  for (std::size_t sidx = 0; sidx < sub_sz; ++sidx) {
    std::vector<double> kv(na);
    bool nyq = false;
    std::size_t v = sidx;
    for (std::size_t i = 0; i < na; ++i) {
      const int mi = static_cast<int>(v % static_cast<std::size_t>(g.N));
      if (g.N % 2 == 0 && mi == g.N / 2) nyq = true;
      kv[i] = g.signed_freq(mi);
      v /= static_cast<std::size_t>(g.N);
    }
    if (nyq) continue;
    for (const Node& nd : nodes) {
      double aph = 0.0;
      for (std::size_t i = 0; i < na; ++i)
        aph += kv[i] * nd.vec[act[i]];
      const std::complex<double> ph = segment_phase_integral(2.0 * kPi * aph);
      for (std::size_t i = 0; i < na; ++i)
        table[sidx * na + i] += nd.w * ph * nd.vec[act[i]];
    }
  }

  std::vector<std::vector<std::complex<double>>> spec(
      static_cast<std::size_t>(tn),
      std::vector<std::complex<double>>(sz, {0.0, 0.0}));
  for (std::size_t idx = 0; idx < sz; ++idx) {
    if (has_nyquist_bin(g, idx)) continue;
    const double* kv = &kap[idx * static_cast<std::size_t>(tn)];
    double kz = 0.0;
    for (int a = 0; a < tn; ++a) kz += kv[a] * c.apex[a];
    const std::complex<double> zphase =
        std::exp(std::complex<double>(0.0, -2.0 * kPi * kz));
    // mixed-radix key built from the digits of the active axes
    std::size_t key = 0;
    {
      std::size_t v = idx;
      std::size_t place = 1;
      std::size_t ai = 0;
      for (int a = 0; a < tn && ai < na; ++a) {
        const std::size_t digit = v % static_cast<std::size_t>(g.N);
        if (a == act[ai]) {
          key += digit * place;
          place *= static_cast<std::size_t>(g.N);
          ++ai;
        }
        v /= static_cast<std::size_t>(g.N);
      }
    }
    for (std::size_t i = 0; i < na; ++i)
      spec[static_cast<std::size_t>(act[i])][idx] =
          zphase * table[key * na + i];
  }

  for (int ax = 0; ax < tn; ++ax) {
    const Mask m = Mask{1} << ax;
    const Mask mc = full & ~m;
    const double sgn = wedge_sign(mc, m);
    auto& sp = spec[static_cast<std::size_t>(ax)];
    for (std::size_t idx = 0; idx < sz; ++idx)
      sp[idx] *= sgn * mult[idx].real();
    out.set_spectral(mc, sp);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CurrentSum
// ---------------------------------------------------------------------------

void CurrentSum::add(double weight, DualCurrent T) {
  if (!S_) S_.emplace(T.structure());
  pieces_.push_back({weight, std::move(T)});
}

void CurrentSum::add(double weight, ConePiece cone, std::vector<CurrentOp> ops) {
  if (!S_)
    throw ConsistencyError("CurrentSum: add a structured piece first, or "
                           "construct with a structure");
  ConeCurrent cc{std::move(cone), std::move(ops), 2 * S_->n() - 1};
  pieces_.push_back({weight, std::move(cc)});
}

const SymplecticStructure& CurrentSum::structure() const {
  if (!S_) throw ConsistencyError("CurrentSum: empty sum has no structure");
  return *S_;
}

CurrentSum CurrentSum::with_op(CurrentOp op) const {
  CurrentSum out;
  out.S_ = S_;
  for (const WeightedPiece& p : pieces_) {
    if (std::holds_alternative<DualCurrent>(p.cur)) {
      out.pieces_.push_back(
          {p.weight, std::get<DualCurrent>(p.cur).with_op(op)});
    } else {
      ConeCurrent cc = std::get<ConeCurrent>(p.cur);
      cc.ops.push_back(op);
      out.pieces_.push_back({p.weight, std::move(cc)});
    }
  }
  return out;
}

int CurrentSum::degree() const {
  if (pieces_.empty())
    throw ConsistencyError("CurrentSum: empty sum has no degree");
  const int tn = 2 * structure().n();
  int deg = 0;
  bool first = true;
  for (const WeightedPiece& p : pieces_) {
    int d = std::holds_alternative<DualCurrent>(p.cur)
                ? std::get<DualCurrent>(p.cur).degree()
                : std::get<ConeCurrent>(p.cur).degree(tn);
    if (first) {
      deg = d;
      first = false;
    } else if (d != deg) {
      throw ConsistencyError("CurrentSum: pieces have mixed degrees");
    }
  }
  return deg;
}

int CurrentSum::dimension() const { return 2 * structure().n() - degree(); }

double CurrentSum::evaluate(const FieldForm& phi, QuadratureSpec q) const {
  if (pieces_.empty()) return 0.0;
  const SymplecticStructure& S = structure();
  const int tn = 2 * S.n();
  const int deg = degree();
  if (deg < 0 || deg > tn) return 0.0;
  if (phi.degree() != tn - deg)
    throw DomainError("CurrentSum: test form degree must match the dimension");
  if (phi.is_empty()) return 0.0;

  // group pieces by operator stack: one pull + one evaluator per group
  std::map<std::vector<CurrentOp>, std::vector<const WeightedPiece*>> groups;
  for (const WeightedPiece& p : pieces_) {
    const std::vector<CurrentOp>& ops =
        std::holds_alternative<DualCurrent>(p.cur)
            ? std::get<DualCurrent>(p.cur).ops()
            : std::get<ConeCurrent>(p.cur).ops;
    groups[ops].push_back(&p);
  }

  double acc = 0.0;
  for (const auto& [ops, members] : groups) {
    const FieldForm psi = pull_test_form(S, ops, deg, phi);
    if (psi.is_empty()) continue;

    // merge plain chain bases into a single quadrature pass
    PolyChain merged;
    bool have_merged = false;
    std::optional<FieldEvaluator> ev;
    auto evaluator = [&]() -> const FieldEvaluator& {
      if (!ev) ev.emplace(psi);
      return *ev;
    };
    for (const WeightedPiece* p : members) {
      if (std::holds_alternative<DualCurrent>(p->cur)) {
        const DualCurrent& t = std::get<DualCurrent>(p->cur);
        const CurrentRep& r = t.rep();
        if (r.kind == CurrentRep::Kind::Chain) {
          if (!have_merged) {
            merged = PolyChain(tn, r.chain.dim());
            have_merged = true;
          }
          for (const auto& [c, s] : r.chain.terms())
            merged.add(p->weight * c, s);
        } else if (r.kind == CurrentRep::Kind::FormWedgeChain) {
          const PolyChain fine = bisected_to(r.chain, kEvalDiam);
          const CurrentRep rr =
              r.wedge_field
                  ? CurrentRep::form_wedge_chain(*r.wedge_field, fine)
                  : CurrentRep::form_wedge_chain(r.wedge_const, fine);
          acc += p->weight * symph::evaluate(rr, psi, q);
        } else {
          acc += p->weight * symph::evaluate(r, psi, q);
        }
      } else {
        const ConeCurrent& cc = std::get<ConeCurrent>(p->cur);
        acc += p->weight * cone_evaluate(cc.piece, psi, q);
      }
    }
    if (have_merged && !merged.empty()) {
      const FieldEvaluator& E = evaluator();
      acc += integrate_over_chain(
          bisected_to(merged, kEvalDiam),
          [&E](const Eigen::VectorXd& x) { return E(x); }, S.n(), q);
    }
  }
  return acc;
}

FieldForm CurrentSum::mollify(const TorusGrid& g, double width) const {
  const SymplecticStructure& S = structure();
  const int tn = 2 * S.n();
  const int deg = degree();
  FieldForm out(g, deg);
  if (deg < 0 || deg > tn) return out;

  std::map<std::vector<CurrentOp>, std::vector<const WeightedPiece*>> groups;
  for (const WeightedPiece& p : pieces_) {
    const std::vector<CurrentOp>& ops =
        std::holds_alternative<DualCurrent>(p.cur)
            ? std::get<DualCurrent>(p.cur).ops()
            : std::get<ConeCurrent>(p.cur).ops;
    groups[ops].push_back(&p);
  }

  for (const auto& [ops, members] : groups) {
    // mollified base of the whole group
    std::optional<FieldForm> base;
    auto accumulate = [&](FieldForm f) {
      if (!base)
        base = std::move(f);
      else
        *base += f;
    };
    PolyChain merged;
    bool have_merged = false;
    for (const WeightedPiece* p : members) {
      if (std::holds_alternative<DualCurrent>(p->cur)) {
        const CurrentRep& r = std::get<DualCurrent>(p->cur).rep();
        switch (r.kind) {
          case CurrentRep::Kind::Chain: {
            if (!have_merged) {
              merged = PolyChain(tn, r.chain.dim());
              have_merged = true;
            }
            for (const auto& [c, s] : r.chain.terms())
              merged.add(p->weight * c, s);
            break;
          }
          case CurrentRep::Kind::Field:
            accumulate(p->weight * smooth(r.field, width));
            break;
          case CurrentRep::Kind::FormWedgeChain: {
            if (r.wedge_field)
              throw DomainError(
                  "a nonconstant wedge factor does not commute with the "
                  "mollifier");
            accumulate(p->weight * wedge(mollify_chain(r.chain, g, width),
                                         FieldForm::constant(g, r.wedge_const)));
            break;
          }
        }
      } else {
        const ConeCurrent& cc = std::get<ConeCurrent>(p->cur);
        accumulate(p->weight * cone_mollify(cc.piece, g, width));
      }
    }
    if (have_merged && !merged.empty())
      accumulate(mollify_chain(merged, g, width));
    if (!base) continue;

    // the stack, applied as lifts in application order
    FieldForm f = std::move(*base);
    for (CurrentOp op : ops) {
      if (f.is_empty()) break;
      switch (op) {
        case CurrentOp::L: f = lift_L(S, f); break;
        case CurrentOp::Lambda: f = lift_Lambda(S, f); break;
        case CurrentOp::H: f = lift_H(S, f); break;
        case CurrentOp::Star: f = lift_star(S, f); break;
        case CurrentOp::D: f = d(f); break;
        case CurrentOp::DLambda: f = dlambda(S, f); break;
      }
    }
    if (!f.is_empty()) out += f;
  }
  return out;
}

double battery_sup(const CurrentSum& T, const CurrentBattery& b) {
  if (T.empty()) return 0.0;
  const int deg = T.degree();
  if (deg < 0 || deg > 2 * T.structure().n()) return 0.0;
  double sup = 0.0;
  for (const FieldForm& phi : battery_forms(b, T.dimension()))
    sup = std::max(sup, std::abs(T.evaluate(phi, b.quad)));
  return sup;
}

// ---------------------------------------------------------------------------
// Config validation
// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
  if (n < 1) throw DomainError("pipeline: n must be at least 1");
  if (grid_N < 2 || (grid_N & (grid_N - 1)) != 0)
    throw DomainError("pipeline: grid resolution must be a power of two >= 2");
  if (p < 1 || p > n)
    throw DomainError("pipeline: the class degree must satisfy 1 <= p <= n");
  const int tn = 2 * n;
  if (Q.empty()) throw DomainError("pipeline: Q must be a nonempty cycle");
  if (Q.ambient() != tn)
    throw DomainError("pipeline: Q must live in dimension 2n");
  if (Q.dim() != tn - p)
    throw DomainError("pipeline: Q must have dimension 2n - p");
  for (const auto& [c, s] : Q.terms())
    for (const auto& v : s.v)
      for (int a = 0; a < tn; ++a)
        if (v[a] < -1e-12 || v[a] > 1.0 + 1e-12)
          throw DomainError("pipeline: Q must lie in the fundamental domain");
  PolyChain bd = wrap_to_fundamental(boundary(Q));
  bd.canonicalize();
  if (!bd.empty())
    throw DomainError("pipeline: Q must be a cycle (boundary must cancel)");
  const double m = 1.0 / epsilon;
  if (!(epsilon > 0.0) || std::abs(m - std::round(m)) > 1e-9 ||
      std::llround(m) < 2)
    throw DomainError("pipeline: the grid scale must divide the period");
  if (!(width > 0.0) || width >= 0.5)
    throw DomainError("pipeline: mollifier width must lie in (0, 1/2)");
  if (battery_count < 1) throw DomainError("pipeline: battery count >= 1");
  if (gamma_override) {
    if (gamma_override->ambient() != tn || gamma_override->dim() != p - 1)
      throw DomainError("pipeline: gamma override must be a (p-1)-chain in 2n");
  }
  if (!apex_override.empty()) {
    if (apex_override.size() != Q.terms().size())
      throw DomainError("pipeline: apex anchors need one entry per cell of Q");
    for (const auto& a : apex_override) {
      if (a.size() != tn)
        throw DomainError("pipeline: apex anchors must live in dimension 2n");
      for (int i = 0; i < tn; ++i) {
        const double cells = a[i] / epsilon;
        if (a[i] < -1e-9 || a[i] > 1.0 + 1e-9 ||
            std::abs(cells - std::round(cells)) > 1e-9)
          throw DomainError(
              "pipeline: apex anchors must be vertices of the coarse grid");
      }
    }
  }
}

double nyquist_quiet_width(int N, double lo, double hi, double prefer) {
  if (N < 2 || N % 2 != 0)
    throw DomainError("nyquist-quiet width: grid resolution must be even");
  if (!(lo > 0.0) || !(hi > lo) || hi >= 0.5)
    throw DomainError("nyquist-quiet width: need 0 < lo < hi < 1/2");
  auto response = [N](double w) {
    double tot = 0.0, alt = 0.0;
    for (int j = 0; j < N; ++j) {
      const double dist = std::min(j, N - j) / static_cast<double>(N);
      const double u = dist / w;
      const double k = (u < 1.0) ? std::exp(-1.0 / (1.0 - u * u)) : 0.0;
      tot += k;
      alt += (j % 2 == 0) ? k : -k;
    }
    return alt / tot;
  };
  const int steps = 800;
  double best = -1.0;
  double prev_w = lo, prev_v = response(lo);
  for (int i = 1; i <= steps; ++i) {
    const double w = lo + (hi - lo) * i / steps;
    const double v = response(w);
    if (prev_v * v <= 0.0 && (prev_v != 0.0 || v != 0.0)) {
      double a = prev_w, fa = prev_v, b = w;
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = response(m);
        if ((fa <= 0.0) == (fm <= 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      const double root = 0.5 * (a + b);
      if (best < 0.0 || std::abs(root - prefer) < std::abs(best - prefer))
        best = root;
    }
    prev_w = w;
    prev_v = v;
  }
  if (best < 0.0)
    throw NotSolvableError(
        "nyquist-quiet width: the kernel keeps a one-signed alternating sum "
        "over the whole given range");
  return best;
}

// ---------------------------------------------------------------------------
// Localized grid potential: solve (boundary of Gamma) = atom charges
// ---------------------------------------------------------------------------

namespace {

struct GammaSolveOut {
  PolyChain gamma;
  double residual = 0.0;
  std::string note;
};

// least-norm edge chain on the scale-eps grid with the prescribed vertex
// charges as boundary, restricted (when localized) to a margin box around the
// charges so the potential does not spread over the whole torus
GammaSolveOut solve_gamma_grid(
    const std::map<std::vector<int>, double>& atoms, int M, int tn, double eps,
    bool localized) {
  GammaSolveOut out;
  out.gamma = PolyChain(tn, 1);
  if (atoms.empty()) {
    out.note = "no charges";
    return out;
  }

  double total = 0.0, scale = 0.0;
  for (const auto& [v, q] : atoms) {
    total += q;
    scale += std::abs(q);
  }
  if (std::abs(total) > 1e-10 * (1.0 + scale))
    throw NotSolvableError(
        "grid potential: total charge does not cancel; the class pairing "
        "against constants is nonzero");

  // per-axis vertex window: smallest circular interval holding every charge.
  // No margin: everything the solve may touch stays inside the tight box, so
  // the correction is supported exactly between the charges it cancels.
  std::vector<std::vector<int>> axis_coords(static_cast<std::size_t>(tn));
  for (int a = 0; a < tn; ++a) {
    std::vector<int> lo_hi;
    if (!localized) {
      for (int c = 0; c < M; ++c)
        axis_coords[static_cast<std::size_t>(a)].push_back(c);
      continue;
    }
    std::vector<int> cs;
    for (const auto& [v, q] : atoms) cs.push_back(v[static_cast<std::size_t>(a)]);
    std::sort(cs.begin(), cs.end());
    cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
    // largest circular gap between consecutive charge coordinates
    int best_gap = -1, start_after = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      int nxt = cs[(i + 1) % cs.size()];
      int gap = (i + 1 == cs.size()) ? nxt + M - cs[i] : nxt - cs[i];
      if (gap > best_gap) {
        best_gap = gap;
        start_after = cs[i];
      }
    }
    int lo = (start_after + best_gap) % M;  // first charge after the gap
    int len = M - best_gap + 1;             // charges span [lo, lo+len-1]
    if (len >= M) {
      lo = 0;
      len = M;
    }
    for (int i = 0; i < len; ++i)
      axis_coords[static_cast<std::size_t>(a)].push_back(lo + i);
  }

  // enumerate box vertices
  std::map<std::vector<int>, int> vindex;  // wrapped coordinate -> index
  std::vector<std::vector<int>> vraw;      // unwrapped coordinates
  {
    std::vector<std::size_t> mi(static_cast<std::size_t>(tn), 0);
    while (true) {
      std::vector<int> raw(static_cast<std::size_t>(tn));
      std::vector<int> wrapped(static_cast<std::size_t>(tn));
      for (int a = 0; a < tn; ++a) {
        raw[static_cast<std::size_t>(a)] =
            axis_coords[static_cast<std::size_t>(a)]
                       [mi[static_cast<std::size_t>(a)]];
        wrapped[static_cast<std::size_t>(a)] =
            ((raw[static_cast<std::size_t>(a)] % M) + M) % M;
      }
      if (!vindex.count(wrapped)) {
        vindex[wrapped] = static_cast<int>(vraw.size());
        vraw.push_back(raw);
      }
      int axis = 0;
      while (axis < tn &&
             ++mi[static_cast<std::size_t>(axis)] ==
                 axis_coords[static_cast<std::size_t>(axis)].size())
        mi[static_cast<std::size_t>(axis++)] = 0;
      if (axis == tn) break;
    }
  }
  const int nv = static_cast<int>(vraw.size());

  // edges between wrapped-adjacent vertices of the box
  struct GridEdge {
    int tail, head, axis;
  };
  std::vector<GridEdge> edges;
  for (int vi = 0; vi < nv; ++vi) {
    for (int a = 0; a < tn; ++a) {
      std::vector<int> nb = vraw[static_cast<std::size_t>(vi)];
      nb[static_cast<std::size_t>(a)] += 1;
      std::vector<int> wrapped(static_cast<std::size_t>(tn));
      for (int b = 0; b < tn; ++b)
        wrapped[static_cast<std::size_t>(b)] =
            ((nb[static_cast<std::size_t>(b)] % M) + M) % M;
      auto it = vindex.find(wrapped);
      if (it == vindex.end()) continue;
      if (M == 1 && it->second == vi) continue;
      edges.push_back({vi, it->second, a});
    }
  }

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv);
  for (const auto& [v, q] : atoms) {
    std::vector<int> wrapped(static_cast<std::size_t>(tn));
    for (int a = 0; a < tn; ++a)
      wrapped[static_cast<std::size_t>(a)] =
          ((v[static_cast<std::size_t>(a)] % M) + M) % M;
    auto it = vindex.find(wrapped);
    if (it == vindex.end())
      throw ConsistencyError("grid potential: a charge fell outside the box");
    rhs[it->second] += q;
  }

  // graph Laplacian; least-norm solve of (incidence) gamma = rhs
  std::vector<Eigen::Triplet<double>> trip;
  for (const GridEdge& e : edges) {
    trip.emplace_back(e.tail, e.tail, 1.0);
    trip.emplace_back(e.head, e.head, 1.0);
    trip.emplace_back(e.tail, e.head, -1.0);
    trip.emplace_back(e.head, e.tail, -1.0);
  }
  Eigen::SparseMatrix<double> lap(nv, nv);
  lap.setFromTriplets(trip.begin(), trip.end());
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>,
                           Eigen::Lower | Eigen::Upper>
      cg;
  cg.setTolerance(1e-14);
  cg.setMaxIterations(20 * nv + 200);
  cg.compute(lap);
  Eigen::VectorXd x = cg.solve(rhs);

  Eigen::VectorXd resid = lap * x - rhs;
  out.residual = resid.cwiseAbs().maxCoeff() / (1.0 + scale);
  if (out.residual > 1e-9) {
    std::ostringstream os;
    os << "grid potential: solve residual " << out.residual
       << " exceeds budget (box " << nv << " vertices)";
    throw NotSolvableError(os.str());
  }

  double gmax = 0.0;
  for (const GridEdge& e : edges)
    gmax = std::max(gmax, std::abs(x[e.head] - x[e.tail]));
  for (const GridEdge& e : edges) {
    double val = x[e.head] - x[e.tail];
    if (std::abs(val) <= 1e-13 * (1.0 + gmax)) continue;
    // fold whole periods so the segment stays inside [0,1]^{tn}
    std::vector<int> t = vraw[static_cast<std::size_t>(e.tail)];
    std::vector<int> h = t;
    h[static_cast<std::size_t>(e.axis)] += 1;
    for (int a = 0; a < tn; ++a) {
      int lo = std::min(t[static_cast<std::size_t>(a)],
                        h[static_cast<std::size_t>(a)]);
      int fold = ((lo % M) + M) % M - lo;
      t[static_cast<std::size_t>(a)] += fold;
      h[static_cast<std::size_t>(a)] += fold;
    }
    Eigen::VectorXd v0(tn), v1(tn);
    for (int a = 0; a < tn; ++a) {
      v0[a] = t[static_cast<std::size_t>(a)] * eps;
      v1[a] = h[static_cast<std::size_t>(a)] * eps;
    }
    out.gamma.add(val, Simplex({v0, v1}));
  }
  std::ostringstream os;
  os << "potential solved on a " << nv << "-vertex box, "
     << out.gamma.terms().size() << " edges kept";
  out.note = os.str();
  return out;
}

// battery of closed test forms: the constant basis plus differentials of
// random band-limited forms one degree down
std::vector<FieldForm> closed_battery(const CurrentBattery& b, int degree) {
  std::vector<FieldForm> out;
  const int tn = b.grid.dim();
  if (degree < 0 || degree > tn) return out;
  for (Mask m : masks_of_degree(tn, degree))
    out.push_back(FieldForm::constant(
        b.grid, PointwiseForm::basis(b.grid.n, m)));
  if (degree >= 1) {
    CurrentBattery lower = b;
    lower.seed = b.seed * 2 + 11;
    for (const FieldForm& psi : battery_forms(lower, degree - 1)) {
      FieldForm df = d(psi);
      if (!df.is_empty()) out.push_back(std::move(df));
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

struct NodeComass {
  std::vector<double> value;  // comass lower bound per node
};

NodeComass node_comass(const FieldForm& F, const TorusGrid& g) {
  NodeComass out;
  out.value.resize(g.size());
  ComassOptions copt;
  copt.samples = 200;
  copt.refine_iters = 40;
  copt.refine_starts = 2;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const PointwiseForm v = F.value_at(idx);
    out.value[idx] = v.is_zero() ? 0.0 : comass(v, copt).heuristic;
  }
  return out;
}

BallWitness empty_ball_witness(const FieldForm& F, const TorusGrid& g,
                               double ball_tol) {
  BallWitness ball;
  const int tn = g.dim();
  const double h = g.h();
  const NodeComass cm = node_comass(F, g);

  std::vector<std::size_t> bad;
  for (std::size_t idx = 0; idx < g.size(); ++idx)
    if (cm.value[idx] > ball_tol) bad.push_back(idx);

  if (bad.empty()) {
    ball.found = true;
    ball.center.assign(static_cast<std::size_t>(tn), 0.0);
    ball.radius = 0.5;  // the whole torus qualifies; report the inradius
    ball.radius_cells = g.N / 2;
    ball.max_comass_inside = 0.0;
    return ball;
  }
  if (bad.size() == g.size()) return ball;

  // Chebyshev distance-to-bad by iterative dilation
  const int INF = g.N;
  std::vector<int> dist(g.size(), INF);
  for (std::size_t idx : bad) dist[idx] = 0;
  for (int round = 0; round < g.N / 2 + 1; ++round) {
    bool changed = false;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
      std::vector<int> mi = g.multi_index(idx);
      int best = dist[idx];
      std::vector<int> sh(static_cast<std::size_t>(tn), -1);
      while (true) {
        std::vector<int> nb = mi;
        for (int a = 0; a < tn; ++a)
          nb[static_cast<std::size_t>(a)] += sh[static_cast<std::size_t>(a)];
        best = std::min(best, dist[g.index(nb)] + 1);
        int axis = 0;
        while (axis < tn && ++sh[static_cast<std::size_t>(axis)] == 2)
          sh[static_cast<std::size_t>(axis++)] = -1;
        if (axis == tn) break;
      }
      if (best < dist[idx]) {
        dist[idx] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }

  std::size_t center = 0;
  int best = -1;
  for (std::size_t idx = 0; idx < g.size(); ++idx)
    if (dist[idx] > best) {
      best = dist[idx];
      center = idx;
    }
  if (best < 1) return ball;

  // exact Euclidean clearance at the chosen center
  const std::vector<int> cmi = g.multi_index(center);
  Eigen::VectorXd cx(tn);
  for (int a = 0; a < tn; ++a)
    cx[a] = cmi[static_cast<std::size_t>(a)] * h;
  double clearance = 0.5;
  for (std::size_t idx : bad) {
    const std::vector<int> bmi = g.multi_index(idx);
    Eigen::VectorXd bx(tn);
    for (int a = 0; a < tn; ++a)
      bx[a] = bmi[static_cast<std::size_t>(a)] * h;
    clearance = std::min(clearance, torus_l2(cx, bx));
  }
  if (clearance < h) return ball;

  double inside_max = 0.0;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const std::vector<int> bmi = g.multi_index(idx);
    Eigen::VectorXd bx(tn);
    for (int a = 0; a < tn; ++a)
      bx[a] = bmi[static_cast<std::size_t>(a)] * h;
    if (torus_l2(cx, bx) < clearance)
      inside_max = std::max(inside_max, cm.value[idx]);
  }

  ball.found = true;
  ball.center.assign(cx.data(), cx.data() + tn);
  ball.radius = clearance;
  ball.radius_cells = static_cast<int>(std::floor(clearance / h));
  ball.max_comass_inside = inside_max;
  return ball;
}

double support_fraction_of(const FieldForm& F, const TorusGrid& g,
                           double ball_tol) {
  const NodeComass cm = node_comass(F, g);
  std::size_t n = 0;
  for (double v : cm.value)
    if (v > ball_tol) ++n;
  return static_cast<double>(n) / static_cast<double>(g.size());
}

}  // namespace

PipelineResult run(const PipelineConfig& cfg) {
  cfg.validate();
  const int n = cfg.n;
  const int tn = 2 * n;
  const int p = cfg.p;
  const int k = n - p + 1;

  SymplecticStructure S = make_standard_symplectic(n);
  PipelineResult result(S);
  result.cfg = cfg;
  result.grid = TorusGrid{n, cfg.grid_N};
  PipelineReport& rep = result.report;

  const TorusGrid& grid = result.grid;
  CurrentBattery bat;
  bat.grid = grid;
  bat.count = cfg.battery_count;
  bat.kmax = cfg.battery_kmax;
  bat.seed = cfg.seed;
  bat.quad.order = cfg.quad_order;

  auto mark = std::chrono::steady_clock::now();

  // ---- W = omega^{n-p+1} ^ Q, primitivity precondition --------------------
  const PointwiseForm omega_k = S.L_power(k, PointwiseForm::scalar(n, 1.0));
  DualCurrent W(CurrentRep::form_wedge_chain(omega_k, cfg.Q), S);
  rep.mass_Q = mass(cfg.Q);
  const double scale = rep.mass_Q * (1.0 + omega_k.max_abs());

  if (p >= 2) {
    for (Mask m : masks_of_degree(tn, p - 2)) {
      const double v = W.evaluate(PointwiseForm::basis(n, m));
      rep.primitivity_pairings.emplace_back(m, v);
      rep.primitivity_residual = std::max(rep.primitivity_residual, std::abs(v));
    }
    if (rep.primitivity_residual > cfg.step_tol * (1.0 + scale)) {
      Mask worst = 0;
      double wv = 0.0;
      for (const auto& [m, v] : rep.primitivity_pairings)
        if (std::abs(v) > std::abs(wv)) {
          worst = m;
          wv = v;
        }
      std::ostringstream os;
      os << "the class of Q is not primitive: pairing of omega^" << k
         << " ^ Q with the constant form of mask " << worst << " is " << wv;
      throw DomainError(os.str());
    }
  }
  fold_elapsed(rep.timings, "precondition", mark);

  // ---- short-circuit test -------------------------------------------------
  rep.w_battery = battery_sup(
      [&]() {
        CurrentSum w(S);
        w.add(1.0, W);
        return w;
      }(),
      bat);
  double w_mass = 0.0;
  if (omega_k.degree() == cfg.Q.dim()) {
    // only when the wedge factor saturates the cells does the spread of W
    // reduce to a scalar charge per cell
    for (const auto& [c, s] : cfg.Q.terms()) {
      PolyChain one(tn, s.p());
      one.add(c, s);
      w_mass += std::abs(integrate_over_chain(one, omega_k));
    }
  }
  rep.mass_W = w_mass;
  const bool short_circuit =
      W.vanishes_by_degree() || rep.w_battery <= cfg.step_tol * (1.0 + scale);
  fold_elapsed(rep.timings, "wedge-battery", mark);

  CurrentSum T(S);
  T.add(1.0, DualCurrent(CurrentRep::from_chain(cfg.Q), S));

  if (short_circuit) {
    rep.short_circuit = true;
    rep.branch = "short-circuit";
    rep.notes.push_back(
        W.vanishes_by_degree()
            ? "W vanishes by degree (p = 1)"
            : "W is battery-zero: Q is coisotropic enough to stand as T");
    result.final_field = mollify_chain(cfg.Q, grid, cfg.width);
    fold_elapsed(rep.timings, "mollify", mark);
  } else {
    rep.branch = "full";
    if (p != 2)
      throw NotSolvableError(
          "the full construction is implemented for p = 2 (p = 1 always "
          "short-circuits); higher p needs the iterated cone cascade");

    // ---- charges, cones, grid potential -----------------------------------
    const int M = static_cast<int>(std::llround(1.0 / cfg.epsilon));
    std::map<std::vector<int>, double> atoms;
    double cone_mass = 0.0;
    const auto& qterms = cfg.Q.terms();
    for (std::size_t ti = 0; ti < qterms.size(); ++ti) {
      const auto& [c, s] = qterms[ti];
      PolyChain one(tn, s.p());
      one.add(1.0, s);
      const double q = c * integrate_over_chain(one, omega_k);
      if (std::abs(q) <= 1e-13 * (1.0 + scale)) continue;
      const Eigen::VectorXd anchor = cfg.apex_override.empty()
                                         ? s.barycenter()
                                         : cfg.apex_override[ti];
      std::vector<int> vi(static_cast<std::size_t>(tn));
      Eigen::VectorXd apex(tn);
      for (int a = 0; a < tn; ++a) {
        vi[static_cast<std::size_t>(a)] =
            static_cast<int>(std::llround(anchor[a] / cfg.epsilon));
        apex[a] = vi[static_cast<std::size_t>(a)] * cfg.epsilon;
      }
      atoms[vi] += q;
      ConePiece cone{apex, s, c * omega_k, q};
      cone_mass += std::abs(q);
      result.cones.push_back(std::move(cone));
    }
    rep.mass_cones = cone_mass;

    GammaSolveOut gs;
    if (cfg.gamma_override) {
      gs.gamma = *cfg.gamma_override;
      gs.note = "gamma supplied by configuration";
    } else {
      gs = solve_gamma_grid(atoms, M, tn, cfg.epsilon, cfg.localized_gamma);
    }
    result.gamma = gs.gamma;
    rep.gamma_boundary_residual = gs.residual;
    rep.mass_Gamma = mass(result.gamma);
    rep.notes.push_back(gs.note);
    fold_elapsed(rep.timings, "grid-potential", mark);

    // ---- gate: W = d(Gamma + cones) ---------------------------------------
    auto add_cones = [&](CurrentSum& sum, double w,
                         std::vector<CurrentOp> ops) {
      for (const ConePiece& c : result.cones) sum.add(w, c, ops);
    };
    {
      CurrentSum eq(S);
      eq.add(1.0, W);
      if (!result.gamma.empty())
        eq.add(-1.0, DualCurrent(CurrentRep::from_chain(result.gamma), S)
                         .with_op(CurrentOp::D));
      add_cones(eq, -1.0, {CurrentOp::D});
      rep.eq_potential_residual = battery_sup(eq, bat);
      if (rep.eq_potential_residual > cfg.step_tol * (1.0 + scale)) {
        std::ostringstream os;
        os << "potential identity failed: |W - d(Gamma + cones)| = "
           << rep.eq_potential_residual;
        throw NotSolvableError(os.str());
      }
    }
    fold_elapsed(rep.timings, "potential-gate", mark);

    // ---- deformation -------------------------------------------------------
    GridSpec gspec;
    gspec.ambient_N = tn;
    gspec.epsilon = cfg.epsilon;
    gspec.periodic = true;
    gspec.periods = Eigen::VectorXd::Ones(tn);
    DeformResult dres;
    if (result.gamma.empty()) {
      dres.P = PolyChain(tn, p - 1);
      dres.R = PolyChain(tn, p);
      dres.S = PolyChain(tn, p - 1);
      rep.notes.push_back("Gamma = 0: deformation is vacuous");
    } else {
      dres = deform(result.gamma, gspec, cfg.seed);
      const CertificateReport cert =
          verify_certificate(result.gamma, gspec, dres, cfg.seed + 1,
                             cfg.step_tol);
      if (!cert.ok)
        throw NotSolvableError("deformation certificate failed to re-verify");
    }
    result.P = dres.P;
    result.R = dres.R;
    result.S = dres.S;
    rep.deform_certificate = dres.certificate;
    rep.mass_P = mass(dres.P);
    rep.mass_R = mass(dres.R);
    rep.mass_S = mass(dres.S);
    fold_elapsed(rep.timings, "deform", mark);

    // ---- gate: W = d(P + S + cones) ---------------------------------------
    auto add_chain = [&](CurrentSum& sum, const PolyChain& c, double w,
                         std::vector<CurrentOp> ops) {
      if (c.empty()) return;
      DualCurrent t(CurrentRep::from_chain(c), S);
      for (CurrentOp op : ops) t = t.with_op(op);
      sum.add(w, t);
    };
    {
      CurrentSum eq(S);
      eq.add(1.0, W);
      add_chain(eq, result.P, -1.0, {CurrentOp::D});
      add_chain(eq, result.S, -1.0, {CurrentOp::D});
      add_cones(eq, -1.0, {CurrentOp::D});
      rep.eq_deformed_residual = battery_sup(eq, bat);
      if (rep.eq_deformed_residual > cfg.step_tol * (1.0 + scale)) {
        std::ostringstream os;
        os << "deformed identity failed: |W - d(P + S + cones)| = "
           << rep.eq_deformed_residual;
        throw NotSolvableError(os.str());
      }
    }
    fold_elapsed(rep.timings, "deformed-gate", mark);

    // ---- B: invert the Lefschetz power on P + S + cones --------------------
    // A degree-(2n-1) current is L^{n-1} of a unique 1-current, and
    // Lambda^{n-1} L^{n-1} = ((n-1)!)^2 on 1-currents, so the inverse is the
    // explicit operator stack below; no solve is involved.
    double cnorm = 1.0;
    for (int i = 1; i < n; ++i) cnorm *= static_cast<double>(i);
    const double inv_c2 = 1.0 / (cnorm * cnorm);
    const std::vector<CurrentOp> lam_pow(static_cast<std::size_t>(n - 1),
                                         CurrentOp::Lambda);
    CurrentSum B(S);
    add_chain(B, result.P, inv_c2, lam_pow);
    add_chain(B, result.S, inv_c2, lam_pow);
    add_cones(B, inv_c2, lam_pow);

    {
      CurrentSum eq = B;
      for (int i = 0; i < k; ++i) eq = eq.with_op(CurrentOp::L);
      add_chain(eq, result.P, -1.0, {});
      add_chain(eq, result.S, -1.0, {});
      add_cones(eq, -1.0, {});
      rep.eq_inverse_residual = battery_sup(eq, bat);
      if (rep.eq_inverse_residual > cfg.step_tol * (1.0 + scale)) {
        std::ostringstream os;
        os << "inversion identity failed: |L^" << k << " B - (P+S+cones)| = "
           << rep.eq_inverse_residual;
        throw NotSolvableError(os.str());
      }
    }
    fold_elapsed(rep.timings, "inverse-gate", mark);

    // ---- fields: B, the nodewise cross-inversion, the smooth-route check ---
    result.B_field = B.mollify(grid, cfg.width);
    {
      CurrentSum X(S);
      add_chain(X, result.P, 1.0, {});
      add_chain(X, result.S, 1.0, {});
      add_cones(X, 1.0, {});
      const FieldForm X_field = X.mollify(grid, cfg.width);
      const FieldForm nodewise = lift_invert_L_power(S, k, X_field);
      rep.nodewise_inverse_agreement =
          (result.B_field - nodewise).max_abs();
      if (rep.nodewise_inverse_agreement > cfg.end_tol * (1.0 + scale))
        rep.notes.push_back(
            "warning: nodewise inversion of the smoothed sum disagrees with "
            "the operator-stack inverse");
    }
    result.W_field = wedge(mollify_chain(cfg.Q, grid, cfg.width),
                           FieldForm::constant(grid, omega_k));
    if (cfg.run_cross_check) {
      try {
        const FieldForm G = solve_d(result.W_field, cfg.step_tol);
        rep.cross_check_residual = (d(G) - result.W_field).max_abs();
      } catch (const std::exception& e) {
        rep.cross_check_residual = -1.0;
        rep.notes.push_back(std::string("cross-check solve failed: ") +
                            e.what());
      }
    }
    fold_elapsed(rep.timings, "mollify-B", mark);

    // ---- T = Q - dB ---------------------------------------------------------
    {
      CurrentSum dB = B.with_op(CurrentOp::D);
      for (const WeightedPiece& piece : dB.pieces()) {
        if (std::holds_alternative<DualCurrent>(piece.cur))
          T.add(-piece.weight, std::get<DualCurrent>(piece.cur));
        else {
          const ConeCurrent& cc = std::get<ConeCurrent>(piece.cur);
          T.add(-piece.weight, cc.piece, cc.ops);
        }
      }
    }
    result.final_field =
        mollify_chain(cfg.Q, grid, cfg.width) - d(result.B_field);
    fold_elapsed(rep.timings, "assemble-T", mark);
  }

  result.T = T;

  // ---- end-to-end verification --------------------------------------------
  {
    CurrentBattery endbat = bat;
    endbat.seed = cfg.seed + 101;
    rep.dT_residual = battery_sup(T.with_op(CurrentOp::D), endbat);
    CurrentSum LT = T;
    for (int i = 0; i < k; ++i) LT = LT.with_op(CurrentOp::L);
    rep.LT_residual = battery_sup(LT, endbat);

    // class preservation: T - Q = -dB pairs to zero with closed forms.
    // Q is always the first piece of T; the rest is the -dB tail.
    CurrentSum diff(S);
    for (std::size_t i = 1; i < T.pieces().size(); ++i) {
      const WeightedPiece& piece = T.pieces()[i];
      if (std::holds_alternative<DualCurrent>(piece.cur)) {
        diff.add(piece.weight, std::get<DualCurrent>(piece.cur));
      } else {
        const ConeCurrent& cc = std::get<ConeCurrent>(piece.cur);
        diff.add(piece.weight, cc.piece, cc.ops);
      }
    }
    rep.class_residual = 0.0;
    if (!diff.empty()) {
      for (const FieldForm& phi : closed_battery(endbat, T.dimension()))
        rep.class_residual =
            std::max(rep.class_residual, std::abs(diff.evaluate(phi, bat.quad)));
    }
    if (rep.dT_residual > cfg.end_tol * (1.0 + scale) ||
        rep.LT_residual > cfg.end_tol * (1.0 + scale) ||
        rep.class_residual > cfg.end_tol * (1.0 + scale)) {
      std::ostringstream os;
      os << "end-to-end verification failed: dT " << rep.dT_residual << ", L^"
         << k << " T " << rep.LT_residual << ", class " << rep.class_residual;
      throw NotSolvableError(os.str());
    }
    fold_elapsed(rep.timings, "end-batteries", mark);
  }

  rep.d_final_sup = d(result.final_field).max_abs();
  rep.dlambda_final_sup = dlambda(S, result.final_field).max_abs();
  rep.harmonic = is_harmonic(S, result.final_field, cfg.end_tol);
  rep.ball = empty_ball_witness(result.final_field, grid, cfg.ball_tol);
  rep.support_fraction =
      support_fraction_of(result.final_field, grid, cfg.ball_tol);
  fold_elapsed(rep.timings, "support-scan", mark);

  return result;
}

PipelineReport verify_pipeline(const PipelineResult& r) {
  PipelineReport rep = r.report;
  const SymplecticStructure& S = r.structure;
  const int k = r.cfg.n - r.cfg.p + 1;
  const PointwiseForm omega_k =
      S.L_power(k, PointwiseForm::scalar(r.cfg.n, 1.0));
  const double scale = rep.mass_Q * (1.0 + omega_k.max_abs());

  CurrentBattery bat;
  bat.grid = r.grid;
  bat.count = r.cfg.battery_count;
  bat.kmax = r.cfg.battery_kmax;
  bat.seed = r.cfg.seed + 7777;
  bat.quad.order = r.cfg.quad_order;

  rep.dT_residual = battery_sup(r.T.with_op(CurrentOp::D), bat);
  CurrentSum LT = r.T;
  for (int i = 0; i < k; ++i) LT = LT.with_op(CurrentOp::L);
  rep.LT_residual = battery_sup(LT, bat);
  if (rep.dT_residual > r.cfg.end_tol * (1.0 + scale))
    throw ConsistencyError("verify: dT residual no longer meets the budget");
  if (rep.LT_residual > r.cfg.end_tol * (1.0 + scale))
    throw ConsistencyError("verify: L^k T residual no longer meets the budget");

  const FieldForm F = r.T.mollify(r.grid, r.cfg.width);
  const double fdiff = (F - r.final_field).max_abs();
  if (fdiff > 1e-8 * (1.0 + F.max_abs()))
    throw ConsistencyError(
        "verify: the emitted field does not match the mollified current");

  rep.harmonic = is_harmonic(S, r.final_field, r.cfg.end_tol);
  if (rep.harmonic != r.report.harmonic)
    throw ConsistencyError("verify: harmonicity flag changed on recompute");

  rep.ball = empty_ball_witness(r.final_field, r.grid, r.cfg.ball_tol);
  if (r.report.ball.found &&
      (!rep.ball.found || rep.ball.radius_cells < 1))
    throw ConsistencyError("verify: the empty-ball witness did not reproduce");
  return rep;
}

// ---------------------------------------------------------------------------
// Lefschetz support tracking for B
// ---------------------------------------------------------------------------

LefschetzBReport lefschetz_support_check(const SymplecticStructure& S,
                                         const FieldForm& B,
                                         const std::vector<Simplex>& support,
                                         double width, double tol) {
  LefschetzBReport out;
  const int tn = 2 * S.n();
  const double bmax = B.is_empty() ? 0.0 : B.max_abs();
  if (bmax <= tol) {
    out.vacuous = true;
    return out;
  }

  const auto comps = lift_lefschetz_decompose(S, B);
  const int b = B.degree();
  const int r_min = std::max((b - S.n() + 1) / 2, 0);  // ceil((b-n)/2)

  // reconstruction with the r!-normalized Lefschetz powers
  FieldForm recon(B.grid(), b);
  for (const auto& [r, comp] : comps) {
    if (r < r_min) out.index_range_consistent = false;
    if (!lift_is_primitive(S, comp, 1e-7 * (1.0 + bmax)))
      out.index_range_consistent = false;
    double fact = 1.0;
    for (int i = 2; i <= r; ++i) fact *= i;
    FieldForm term = comp;
    for (int i = 0; i < r; ++i) term = lift_L(S, term);
    term *= 1.0 / fact;
    recon += term;
  }
  out.reconstruction_residual = (recon - B).max_abs();
  if (out.reconstruction_residual > 1e-8 * (1.0 + bmax)) out.ok = false;
  if (!out.index_range_consistent) out.ok = false;

  // nodal support inclusion against the mollified envelope: a node carrying
  // more than tol of any component must sit within the mollifier's reach of
  // the stated support
  for (const auto& [r, comp] : comps) {
    LefschetzComponentSupport cs;
    cs.r = r;
    cs.component = comp;
    if (!comp.is_empty()) {
      const TorusGrid& grid = comp.grid();
      const double h = grid.h();
      const double allow =
          width * std::sqrt(static_cast<double>(tn)) + 2.0 * h;
      for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const PointwiseForm v = comp.value_at(idx);
        const double c = v.is_zero() ? 0.0 : comass(v).heuristic;
        if (c <= tol * (1.0 + bmax)) continue;
        const std::vector<int> mi = grid.multi_index(idx);
        Eigen::VectorXd x(tn);
        for (int a = 0; a < tn; ++a)
          x[a] = mi[static_cast<std::size_t>(a)] * h;
        double dmin = std::numeric_limits<double>::infinity();
        for (const Simplex& s : support)
          dmin = std::min(dmin, torus_simplex_distance(s, x));
        const double excess = dmin - allow;
        if (excess > cs.max_excess) {
          cs.max_excess = excess;
          cs.witness_node = idx;
        }
      }
    }
    if (cs.max_excess > 0.0) out.ok = false;
    out.components.push_back(std::move(cs));
  }
  return out;
}

LefschetzBReport lefschetz_decompose_B(const PipelineResult& r, double tol) {
  const SymplecticStructure& S = r.structure;
  if (r.report.short_circuit || r.B_field.is_empty() ||
      r.B_field.max_abs() <= tol) {
    LefschetzBReport out;
    out.vacuous = true;
    return out;
  }
  std::vector<Simplex> support;
  for (const auto& [c, s] : r.P.terms()) support.push_back(s);
  for (const auto& [c, s] : r.S.terms()) support.push_back(s);
  for (const ConePiece& c : r.cones) {
    std::vector<Eigen::VectorXd> hull;
    hull.push_back(c.apex);
    for (const auto& v : c.base.v) hull.push_back(v);
    support.push_back(Simplex(std::move(hull)));
  }
  LefschetzBReport out =
      lefschetz_support_check(S, r.B_field, support, r.cfg.width, tol);

  // Exponent audit of the inversion: with B's components B_{p-2r-1}, the sum
  // of L^{n-p+1+r}/r! B_{p-2r-1} must reproduce the smoothed P + S + cones,
  // i.e. L^{n-p+1} B. The variant exponent n-p+r-1 is reported when it is
  // computable; negative powers make it meaningless and are flagged.
  const int shift_ok_from = r.cfg.p - r.cfg.n + 1;  // r with n-p+r-1 >= 0
  const int kk = r.cfg.n - r.cfg.p + 1;
  FieldForm X = r.B_field;
  for (int i = 0; i < kk; ++i) X = lift_L(S, X);
  const auto comps = lift_lefschetz_decompose(S, r.B_field);
  bool shift_computable = true;
  FieldForm shifted(r.grid, X.degree());
  for (const auto& [rr, comp] : comps) {
    if (kk + rr - 2 < 0) {  // exponent n-p+r-1 = kk + r - 2
      shift_computable = false;
      break;
    }
    double fact = 1.0;
    for (int i = 2; i <= rr; ++i) fact *= i;
    FieldForm term = comp;
    for (int i = 0; i < kk + rr - 2; ++i) term = lift_L(S, term);
    if (term.degree() != shifted.degree()) {
      shift_computable = false;
      break;
    }
    term *= 1.0 / fact;
    shifted += term;
  }
  (void)shift_ok_from;
  out.shifted_exponent_residual =
      shift_computable ? (shifted - X).max_abs() : -1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Thom branch classifier
// ---------------------------------------------------------------------------

ThomReport thom_checks(const CEModel& model, const std::vector<int>& axes) {
  const int n = model.n();
  const int tn = 2 * n;
  for (int i = 0; i < tn; ++i)
    if (!model.d_generator(i).is_zero())
      throw DomainError(
          "thom: product subtori are modeled on the abelian (torus) model");

  std::vector<int> sorted = axes;
  std::sort(sorted.begin(), sorted.end());
  if (std::unique(sorted.begin(), sorted.end()) != sorted.end())
    throw DomainError("thom: subtorus axes must be distinct");
  for (int a : sorted)
    if (a < 1 || a > tn)
      throw DomainError("thom: subtorus axes must lie in 1..2n");

  ThomReport out;
  out.axes = sorted;
  Mask mA = 0;
  for (int a : sorted) mA |= Mask{1} << (a - 1);
  const Mask full = (Mask{1} << tn) - 1;
  const Mask mC = full & ~mA;
  out.codim = tn - static_cast<int>(sorted.size());
  out.codim_odd = (out.codim % 2) != 0;

  out.isotropic = true;
  out.symplectic_subtorus = !sorted.empty();
  for (int i = 0; i < n; ++i) {
    const bool x_in = (mA >> (2 * i)) & 1;
    const bool y_in = (mA >> (2 * i + 1)) & 1;
    if (x_in && y_in) out.isotropic = false;
    if (x_in != y_in) out.symplectic_subtorus = false;
  }

  // dual class, normalized so that pairing e^{mA} ^ tau over the torus
  // reproduces the unit integral of e^{mA} over the subtorus
  out.tau =
      PointwiseForm::basis(n, mC, static_cast<double>(wedge_sign(mA, mC)));

  const Cohomology co = cohomology(model);
  const SymplecticStructure& S = model.symp();

  // Lemma-level check: isotropic subtorus forces [omega ^ tau] = 0
  {
    const PointwiseForm wt = wedge(model.omega(), out.tau);
    const int deg = out.codim + 2;
    double norm = 0.0;
    if (deg <= tn)
      norm = wt.is_zero() ? 0.0
                          : class_coordinates(co, deg, wt).norm();
    out.omega_wedge_tau_norm = norm;
    if (out.isotropic && norm > 1e-10)
      throw ConsistencyError(
          "thom: an isotropic subtorus produced a nonvanishing [omega ^ tau]");
  }

  if (out.codim_odd) {
    out.branch = ThomBranch::small_support;
    return out;
  }

  const int ph = out.codim / 2;
  PointwiseForm wpt = S.L_power(n - ph, out.tau);
  double norm = 0.0;
  const int deg = out.codim + 2 * (n - ph);
  if (!wpt.is_zero() && deg <= tn)
    norm = class_coordinates(co, deg, wpt).norm();
  out.omega_power_tau_norm = norm;

  // cross-check through the induced map on cohomology
  {
    const Eigen::VectorXd tc = class_coordinates(co, out.codim, out.tau);
    const Eigen::MatrixXd Lp = induced_L_power(model, co, out.codim, n - ph);
    const double via_matrix = (Lp * tc).norm();
    if (std::abs(via_matrix - norm) > 1e-8 * (1.0 + norm))
      throw ConsistencyError(
          "thom: the induced-map route disagrees with the direct wedge");
  }

  out.branch = norm <= 1e-10 ? ThomBranch::small_support
                             : ThomBranch::nowhere_vanishing;
  return out;
}

}  // namespace symph
