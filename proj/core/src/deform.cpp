#include "symphodge/deform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include "symphodge/errors.hpp"

namespace symph {

namespace {

constexpr double kClipTol = 1e-12;    // on-plane snap for clipping predicates
constexpr double kRayTol = 1e-7;      // minimum normalized ray parameter at a vertex
constexpr double kSkeletalTol = 1e-10;
constexpr int kBatterySize = 50;

// internal signal: near-degenerate incidence, resolved by reseeding the offset
struct DegenerateIncidence {};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double unit_from_hash(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;  // [0,1)
}

using Verts = std::vector<Eigen::VectorXd>;
using Pieces = std::vector<std::pair<double, Verts>>;

// Split an oriented simplex by the zero set of an affine functional, given its
// vertex values. Vertices within kClipTol of the plane count as on-plane. Both
// closed half-simplices are collected with the parent's orientation; their
// oriented sum reproduces the parent as a current. Each recursion zeroes one
// strictly signed vertex, so the process terminates.
void clip_rec(double coeff, const Verts& v, const std::vector<double>& vals,
              Pieces& neg, Pieces& pos) {
  bool all_ge = true, all_le = true;
  for (double t : vals) {
    if (t < -kClipTol) all_ge = false;
    if (t > kClipTol) all_le = false;
  }
  if (all_ge) {
    pos.emplace_back(coeff, v);
    return;
  }
  if (all_le) {
    neg.emplace_back(coeff, v);
    return;
  }
  int i = -1, j = -1;
  for (std::size_t k = 0; k < vals.size(); ++k) {
    if (i < 0 && vals[k] > kClipTol) i = static_cast<int>(k);
    if (j < 0 && vals[k] < -kClipTol) j = static_cast<int>(k);
  }
  double t = vals[static_cast<std::size_t>(i)] /
             (vals[static_cast<std::size_t>(i)] - vals[static_cast<std::size_t>(j)]);
  Eigen::VectorXd m = v[static_cast<std::size_t>(i)] +
                      t * (v[static_cast<std::size_t>(j)] - v[static_cast<std::size_t>(i)]);
  Verts a = v, b = v;
  a[static_cast<std::size_t>(i)] = m;
  b[static_cast<std::size_t>(j)] = std::move(m);
  std::vector<double> va = vals, vb = vals;
  va[static_cast<std::size_t>(i)] = 0.0;
  vb[static_cast<std::size_t>(j)] = 0.0;
  clip_rec(coeff, a, va, neg, pos);
  clip_rec(coeff, b, vb, neg, pos);
}

// split every piece by the affine functional phi, keeping both sides
void split_pieces(Pieces& pieces, const std::function<double(const Eigen::VectorXd&)>& phi) {
  Pieces out;
  for (auto& [c, v] : pieces) {
    std::vector<double> vals(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) vals[k] = phi(v[k]);
    clip_rec(c, v, vals, out, out);
  }
  pieces.swap(out);
}

struct GridFrame {
  int N = 0;
  double eps = 1.0;
  Eigen::VectorXd o;
  // periodic mode: faces per period along each axis; wrapped copies of a cell
  // fold to one identity so they draw the same jitter
  std::vector<long long> fold;
  double plane(int axis, long long k) const {
    return o[axis] + static_cast<double>(k) * eps;
  }
  long long nearest_plane_index(int axis, double x) const {
    return std::llround((x - o[axis]) / eps);
  }
};

// Per-axis face code: odd 2k+1 freezes the coordinate on plane k, even 2c
// selects the cell [o + c eps, o + (c+1) eps]. Face dimension = #even entries.
using FaceKey = std::vector<long long>;

struct Classified {
  FaceKey key;
  int face_dim = 0;
};

// Pull coordinates that sit within the clip tolerance of a grid plane exactly
// onto it. Junction vertices produced through different cells or exit walls
// then agree bitwise, so face cancellation in boundaries stays exact.
void snap_to_planes(Verts& verts, const GridFrame& f) {
  for (auto& vert : verts)
    for (int a = 0; a < f.N; ++a) {
      double pv = f.plane(a, f.nearest_plane_index(a, vert[a]));
      if (std::abs(vert[a] - pv) <= kClipTol) vert[a] = pv;
    }
}

Classified classify(const Simplex& s, const GridFrame& f) {
  Classified out;
  out.key.resize(static_cast<std::size_t>(f.N));
  Eigen::VectorXd bary = s.barycenter();
  for (int a = 0; a < f.N; ++a) {
    long long k = f.nearest_plane_index(a, s.v[0][a]);
    double pv = f.plane(a, k);
    bool frozen = true;
    for (const auto& vert : s.v) {
      if (std::abs(vert[a] - pv) > kClipTol) {
        frozen = false;
        break;
      }
    }
    if (frozen) {
      out.key[static_cast<std::size_t>(a)] = 2 * k + 1;
    } else {
      long long c = static_cast<long long>(std::floor((bary[a] - f.o[a]) / f.eps));
      out.key[static_cast<std::size_t>(a)] = 2 * c;
      ++out.face_dim;
    }
  }
  return out;
}

// split every simplex along each grid hyperplane crossing its extent
PolyChain pre_split(const PolyChain& c, const GridFrame& f) {
  if (c.empty()) return c;
  PolyChain out(c.ambient(), c.dim());
  for (const auto& [coeff, s] : c.terms()) {
    Pieces pieces{{coeff, s.v}};
    for (int a = 0; a < f.N; ++a) {
      double mn = s.v[0][a], mx = s.v[0][a];
      for (const auto& vert : s.v) {
        mn = std::min(mn, vert[a]);
        mx = std::max(mx, vert[a]);
      }
      long long k0 = static_cast<long long>(std::floor((mn - f.o[a]) / f.eps)) - 1;
      long long k1 = static_cast<long long>(std::ceil((mx - f.o[a]) / f.eps)) + 1;
      for (long long k = k0; k <= k1; ++k) {
        double pv = f.plane(a, k);
        if (pv <= mn + kClipTol || pv >= mx - kClipTol) continue;
        split_pieces(pieces, [a, pv](const Eigen::VectorXd& x) { return x[a] - pv; });
      }
    }
    for (auto& [cc, vv] : pieces) {
      snap_to_planes(vv, f);
      out.add_if_nondegenerate(cc, Simplex(std::move(vv)));
    }
  }
  out.canonicalize();
  return out;
}

// one q-face of the grid complex with its (jittered) projection center
struct Cell {
  Eigen::VectorXd z;
  std::vector<int> free_axes;
  std::vector<double> lo, hi;  // aligned with free_axes

  int nwalls() const { return 2 * static_cast<int>(free_axes.size()); }
  int wall_axis(int w) const { return free_axes[static_cast<std::size_t>(w / 2)]; }
  double wall_value(int w) const {
    std::size_t i = static_cast<std::size_t>(w / 2);
    return (w & 1) ? hi[i] : lo[i];
  }
  // normalized ray coordinate toward wall w: affine, 0 at the center, 1 on the
  // wall plane; the exit wall of the ray from z through x maximizes u
  double u(int w, const Eigen::VectorXd& x) const {
    std::size_t i = static_cast<std::size_t>(w / 2);
    int a = free_axes[i];
    if (w & 1) return (x[a] - z[a]) / (hi[i] - z[a]);
    return (z[a] - x[a]) / (z[a] - lo[i]);
  }
};

std::uint64_t key_seed(const FaceKey& key, const GridFrame& f, std::uint64_t run_seed) {
  std::uint64_t h = splitmix64(run_seed ^ 0x8000000080000001ull);
  for (std::size_t a = 0; a < key.size(); ++a) {
    long long v = key[a];
    if (!f.fold.empty()) {
      long long m = f.fold[a];
      long long idx = v >> 1;  // floor halving keeps the parity bit separate
      long long r = ((idx % m) + m) % m;
      v = 2 * r + (v & 1);
    }
    h = splitmix64(h ^ static_cast<std::uint64_t>(v));
  }
  return h;
}

Cell make_cell(const FaceKey& key, const GridFrame& f, std::uint64_t cell_seed) {
  Cell c;
  c.z.resize(f.N);
  for (int a = 0; a < f.N; ++a) {
    long long code = key[static_cast<std::size_t>(a)];
    if (code & 1) {
      c.z[a] = f.plane(a, (code - 1) / 2);
    } else {
      double lo = f.plane(a, code / 2);
      double hi = lo + f.eps;
      std::uint64_t h = splitmix64(cell_seed ^ (0x100000001b3ull * static_cast<std::uint64_t>(a + 1)));
      double jit = (unit_from_hash(h) - 0.5) * 0.6;  // keeps z well inside the cell
      c.free_axes.push_back(a);
      c.lo.push_back(lo);
      c.hi.push_back(hi);
      c.z[a] = 0.5 * (lo + hi) + jit * 0.5 * f.eps;
    }
  }
  return c;
}

Simplex join(const Eigen::VectorXd& apex, const Verts& base) {
  Verts v;
  v.reserve(base.size() + 1);
  v.push_back(apex);
  v.insert(v.end(), base.begin(), base.end());
  return Simplex(std::move(v));
}

struct LevelResult {
  PolyChain next;   // the chain after central projection at this level
  PolyChain cones;  // homotopy chains: apex * image - apex * preimage
};

// Project the q-face content of `cur` onto the (q-1)-skeleton, cell by cell.
// Simplices already inside lower-dimensional faces pass through untouched.
LevelResult process_level(const PolyChain& cur, int q, const GridFrame& f,
                          std::uint64_t run_seed) {
  LevelResult r{PolyChain(cur.ambient(), cur.dim()),
                PolyChain(cur.ambient(), cur.dim() + 1)};
  std::map<FaceKey, std::vector<std::pair<double, Simplex>>> buckets;
  for (const auto& [coeff, s] : cur.terms()) {
    Classified cl = classify(s, f);
    if (cl.face_dim < q) {
      r.next.add_if_nondegenerate(coeff, s);
      continue;
    }
    if (cl.face_dim > q)
      throw ConsistencyError("deformation cascade: simplex above the current skeleton level");
    buckets[std::move(cl.key)].emplace_back(coeff, s);
  }

  for (auto& [key, terms] : buckets) {
    Cell cell = make_cell(key, f, key_seed(key, f, run_seed));
    const int W = cell.nwalls();
    for (auto& [coeff, s] : terms) {
      Pieces pieces{{coeff, s.v}};
      // snap frozen coordinates exactly onto their planes so the radial map
      // cannot amplify sub-tolerance drift
      for (int a = 0; a < f.N; ++a) {
        long long code = key[static_cast<std::size_t>(a)];
        if (!(code & 1)) continue;
        double pv = f.plane(a, (code - 1) / 2);
        for (auto& vert : pieces[0].second) vert[a] = pv;
      }
      // partition into ray-exit sectors along every wall-pair tie plane
      for (int w1 = 0; w1 < W; ++w1)
        for (int w2 = w1 + 1; w2 < W; ++w2)
          split_pieces(pieces, [&cell, w1, w2](const Eigen::VectorXd& x) {
            return cell.u(w1, x) - cell.u(w2, x);
          });
      for (auto& [cc, vv] : pieces) {
        Eigen::VectorXd bary = Eigen::VectorXd::Zero(f.N);
        for (const auto& vert : vv) bary += vert;
        bary /= static_cast<double>(vv.size());
        int wbest = 0;
        double best = cell.u(0, bary);
        for (int w = 1; w < W; ++w) {
          double val = cell.u(w, bary);
          if (val > best) {
            best = val;
            wbest = w;
          }
        }
        Verts img(vv.size());
        bool bad = false;
        for (std::size_t k = 0; k < vv.size(); ++k) {
          double uv = cell.u(wbest, vv[k]);
          if (uv < kRayTol || uv > 1.0 + 1e-6) {
            bad = true;
            break;
          }
          if (uv >= 1.0 - kClipTol) {
            img[k] = vv[k];  // already on the exit wall: keep the vertex bitwise
          } else {
            img[k] = cell.z + (vv[k] - cell.z) / uv;
          }
          img[k][cell.wall_axis(wbest)] = cell.wall_value(wbest);
        }
        if (bad) throw DegenerateIncidence{};
        snap_to_planes(img, f);
        r.cones.add_if_nondegenerate(cc, join(cell.z, img));
        r.cones.add_if_nondegenerate(-cc, join(cell.z, vv));
        r.next.add_if_nondegenerate(cc, Simplex(std::move(img)));
      }
    }
  }
  r.next.canonicalize();
  r.cones.canonicalize();
  return r;
}

struct CascadeOut {
  PolyChain P, R, S;
};

// Level-by-level telescoping: with H the per-level cone operator,
//   T_{l+1} - T_l = d H(T_l) + H(dT_l),
// so after the last level T = P + dR + S with R = -sum H(T_l) and
// S = -sum H((dT)_l). The boundary chain rides the same cells and centers.
CascadeOut run_cascade(const PolyChain& T, const GridFrame& f, std::uint64_t run_seed) {
  const int N = f.N;
  const int p = T.dim();
  PolyChain Tc = pre_split(T, f);
  PolyChain Bc = pre_split(boundary(T), f);
  PolyChain R(N, p + 1), S(N, p);
  for (int q = N; q >= p + 1; --q) {
    LevelResult lt = process_level(Tc, q, f, run_seed);
    R += lt.cones;
    Tc = std::move(lt.next);
    if (!Bc.empty()) {
      LevelResult lb = process_level(Bc, q, f, run_seed);
      S += lb.cones;
      Bc = std::move(lb.next);
    }
  }
  R *= -1.0;
  S *= -1.0;
  Tc.canonicalize();
  R.canonicalize();
  S.canonicalize();
  return {std::move(Tc), std::move(R), std::move(S)};
}

std::vector<PointwiseForm> constant_battery(int N, int p, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto masks = masks_of_degree(N, p);
  std::vector<PointwiseForm> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    PointwiseForm phi((N + 1) / 2);
    for (Mask m : masks) phi.set_coeff(m, U(rng));
    out.push_back(std::move(phi));
  }
  return out;
}

// max |<T - P - dR - S, phi>| over a battery of constant forms, plus forms with
// affine coefficients whenever the ambient dimension is even (the affine case
// is still integrated exactly by the default quadrature order)
double identity_residual(const PolyChain& T, const PolyChain& P, const PolyChain& dR,
                         const PolyChain& S, std::uint64_t seed) {
  const int N = T.ambient();
  const int p = T.dim();
  auto residual_const = [&](const PointwiseForm& phi) {
    double r = integrate_over_chain(T, phi) - integrate_over_chain(P, phi) -
               integrate_over_chain(S, phi);
    if (!dR.empty()) r -= integrate_over_chain(dR, phi);
    return std::abs(r);
  };
  double worst = 0.0;
  for (const auto& phi : constant_battery(N, p, kBatterySize / 2, seed))
    worst = std::max(worst, residual_const(phi));
  if (N % 2 == 0) {
    const int n = N / 2;
    std::mt19937_64 rng(splitmix64(seed ^ 0xa11fe11ull));
    std::uniform_int_distribution<int> axis_pick(0, N - 1);
    auto bases = constant_battery(N, p, kBatterySize, splitmix64(seed ^ 0x5ca1ab1eull));
    for (int k = 0; k + 1 < static_cast<int>(bases.size()); k += 2) {
      PointwiseForm base = bases[static_cast<std::size_t>(k)];
      PointwiseForm lin = bases[static_cast<std::size_t>(k) + 1];
      int axis = axis_pick(rng);
      FormAtPoint phi = [base, lin, axis](const Eigen::VectorXd& x) {
        return base + x[axis] * lin;
      };
      double r = integrate_over_chain(T, phi, n) - integrate_over_chain(P, phi, n) -
                 integrate_over_chain(S, phi, n);
      if (!dR.empty()) r -= integrate_over_chain(dR, phi, n);
      worst = std::max(worst, std::abs(r));
    }
  } else {
    for (const auto& phi :
         constant_battery(N, p, kBatterySize - kBatterySize / 2, splitmix64(seed ^ 0x0ddba11ull)))
      worst = std::max(worst, residual_const(phi));
  }
  return worst;
}

// largest deviation of any P-simplex from being contained in one grid p-face:
// per axis take the spread around the nearest plane, then require the N-p
// smallest spreads to vanish
double skeletal_residual(const PolyChain& P, const GridFrame& f) {
  if (P.empty()) return 0.0;
  const int N = f.N;
  const int p = P.dim();
  double worst = 0.0;
  for (const auto& [c, s] : P.terms()) {
    std::vector<double> dev(static_cast<std::size_t>(N), 0.0);
    for (int a = 0; a < N; ++a) {
      double pv = f.plane(a, f.nearest_plane_index(a, s.v[0][a]));
      double d = 0.0;
      for (const auto& vert : s.v) d = std::max(d, std::abs(vert[a] - pv));
      dev[static_cast<std::size_t>(a)] = d;
    }
    std::sort(dev.begin(), dev.end());
    worst = std::max(worst, dev[static_cast<std::size_t>(N - p - 1)]);
  }
  return worst;
}

struct SupWitness {
  double d = 0.0;
  Eigen::VectorXd x;
};

SupWitness sampled_sup_distance(const PolyChain& from, const PolyChain& to,
                                const GridSpec& g, int per_simplex) {
  SupWitness w;
  if (from.empty()) return w;
  for (const auto& x : support_cloud(from, per_simplex)) {
    double d = grid_support_distance(to, x, g);
    if (d > w.d) {
      w.d = d;
      w.x = x;
    }
  }
  return w;
}

std::string fmt_point(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << ")";
  return os.str();
}

DeformCertificate make_certificate(const PolyChain& T, const GridSpec& g,
                                   const GridFrame& f, const DeformResult& res,
                                   int retries, std::uint64_t seed) {
  DeformCertificate c;
  c.bound = 2.0 * g.ambient_N * g.epsilon;
  c.offset_used = f.o;
  c.retries = retries;
  const int p = T.dim();
  PolyChain dR = boundary(res.R);
  PolyChain bT = boundary(T);
  SupWitness wp = sampled_sup_distance(res.P, T, g, p + 4);
  SupWitness wr = sampled_sup_distance(res.R, T, g, p + 5);
  c.sup_PR_to_T = std::max(wp.d, wr.d);
  c.sup_S_to_boundary = sampled_sup_distance(res.S, bT, g, p + 4).d;
  c.identity_residual = identity_residual(T, res.P, dR, res.S, splitmix64(seed ^ 0xce57ull));
  c.skeletal_residual = skeletal_residual(res.P, f);
  c.mass_T = mass(T);
  c.mass_P = mass(res.P);
  c.mass_R = mass(res.R);
  c.mass_S = mass(res.S);
  return c;
}

}  // namespace

void GridSpec::validate() const {
  if (ambient_N < 1) throw DomainError("grid: ambient dimension must be positive");
  if (!(epsilon > 0.0)) throw DomainError("grid: scale must be positive");
  if (offset.size() != 0 && offset.size() != ambient_N)
    throw DomainError("grid: offset size does not match the ambient dimension");
  for (int a = 0; a < offset.size(); ++a)
    if (!(offset[a] >= 0.0 && offset[a] < epsilon))
      throw DomainError("grid: offset components must lie in [0, epsilon)");
  if (periodic) {
    if (periods.size() != ambient_N)
      throw DomainError("grid: periodic mode needs one period per axis");
    for (int a = 0; a < ambient_N; ++a) {
      if (!(periods[a] > 0.0)) throw DomainError("grid: periods must be positive");
      double m = periods[a] / epsilon;
      if (std::abs(m - static_cast<double>(std::llround(m))) > 1e-9 * std::max(1.0, m))
        throw DomainError("grid: scale must divide every period");
    }
  }
}

Eigen::VectorXd GridSpec::offset_or_zero() const {
  if (offset.size() == ambient_N) return offset;
  return Eigen::VectorXd::Zero(ambient_N);
}

double grid_support_distance(const PolyChain& c, const Eigen::VectorXd& x,
                             const GridSpec& g) {
  if (!g.periodic) return support_distance(c, x);
  const int N = g.ambient_N;
  std::vector<int> sh(static_cast<std::size_t>(N), -1);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    Eigen::VectorXd y = x;
    for (int a = 0; a < N; ++a) y[a] += sh[static_cast<std::size_t>(a)] * g.periods[a];
    best = std::min(best, support_distance(c, y));
    int a = 0;
    while (a < N && ++sh[static_cast<std::size_t>(a)] > 1) {
      sh[static_cast<std::size_t>(a)] = -1;
      ++a;
    }
    if (a == N) break;
  }
  return best;
}

DeformResult deform(const PolyChain& T, const GridSpec& g, std::uint64_t seed,
                    int max_retries) {
  g.validate();
  if (T.ambient() != g.ambient_N)
    throw DomainError("deform: chain and grid ambient dimensions differ");
  const int N = g.ambient_N;
  const int p = T.dim();
  if (p < 0 || p >= N)
    throw DomainError("deform: chain dimension must satisfy 0 <= p < N");
  if (g.periodic) {
    for (const auto& [c, s] : T.terms())
      for (const auto& v : s.v)
        for (int a = 0; a < N; ++a)
          if (v[a] < -kClipTol || v[a] > g.periods[a] + kClipTol)
            throw DomainError("deform: periodic input must lie in the fundamental domain");
  }

  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    GridFrame f{N, g.epsilon, Eigen::VectorXd::Zero(N), {}};
    if (g.periodic)
      for (int a = 0; a < N; ++a)
        f.fold.push_back(std::llround(g.periods[a] / g.epsilon));
    if (attempt == 0) {
      f.o = g.offset_or_zero();
    } else {
      std::mt19937_64 rng(splitmix64(seed ^ (0x9e3779b9ull * static_cast<std::uint64_t>(attempt))));
      std::uniform_real_distribution<double> U(0.0, 1.0);
      for (int a = 0; a < N; ++a) f.o[a] = U(rng) * g.epsilon;
    }
    std::uint64_t run_seed = splitmix64(seed + 0x51ull * static_cast<std::uint64_t>(attempt) + 1);
    try {
      CascadeOut out = run_cascade(T, f, run_seed);
      DeformResult res{std::move(out.P), std::move(out.R), std::move(out.S), {}};
      res.certificate = make_certificate(T, g, f, res, attempt, seed);
      return res;
    } catch (const DegenerateIncidence&) {
      continue;
    }
  }
  throw DegeneracyError("deform: no generic grid offset found within the retry budget");
}

CertificateReport verify_certificate(const PolyChain& T, const GridSpec& g,
                                     const DeformResult& result, std::uint64_t seed,
                                     double identity_tol) {
  g.validate();
  const int N = g.ambient_N;
  const int p = T.dim();
  if (result.P.dim() != p || result.S.dim() != p || result.R.dim() != p + 1 ||
      result.P.ambient() != N || result.R.ambient() != N || result.S.ambient() != N)
    throw CertificationError("certificate: result chains have inconsistent dimensions");
  if (result.certificate.offset_used.size() != N)
    throw CertificationError("certificate: missing grid offset record");

  CertificateReport rep;
  rep.bound = 2.0 * N * g.epsilon;

  GridFrame f{N, g.epsilon, result.certificate.offset_used, {}};
  rep.skeletal_residual = skeletal_residual(result.P, f);
  if (rep.skeletal_residual > kSkeletalTol)
    throw CertificationError("certificate: a skeletal simplex strays from its grid face by " +
                             std::to_string(rep.skeletal_residual));

  SupWitness wp = sampled_sup_distance(result.P, T, g, p + 6);
  SupWitness wr = sampled_sup_distance(result.R, T, g, p + 6);
  SupWitness wpr = wp.d >= wr.d ? wp : wr;
  rep.sup_PR_to_T = wpr.d;
  if (wpr.d > rep.bound + 1e-9)
    throw CertificationError("certificate: support bound violated at " + fmt_point(wpr.x) +
                             " with distance " + std::to_string(wpr.d));

  PolyChain bT = boundary(T);
  if (bT.empty()) {
    if (!result.S.empty() && mass(result.S) > 1e-10 * (1.0 + mass(T)))
      throw CertificationError("certificate: boundary debris present for a cycle, near " +
                               fmt_point(result.S.terms().front().second.barycenter()));
    rep.sup_S_to_boundary = 0.0;
  } else {
    SupWitness ws = sampled_sup_distance(result.S, bT, g, p + 6);
    rep.sup_S_to_boundary = ws.d;
    if (ws.d > rep.bound + 1e-9)
      throw CertificationError("certificate: boundary-debris support bound violated at " +
                               fmt_point(ws.x) + " with distance " + std::to_string(ws.d));
  }

  PolyChain dR = boundary(result.R);
  rep.identity_residual =
      identity_residual(T, result.P, dR, result.S, splitmix64(seed ^ 0xf00dull));
  double scale = 1.0 + mass(T) + mass(result.P) + mass(dR) + mass(result.S);
  if (rep.identity_residual > identity_tol * scale)
    throw CertificationError("certificate: current identity residual " +
                             std::to_string(rep.identity_residual) + " exceeds tolerance " +
                             std::to_string(identity_tol * scale));
  rep.ok = true;
  return rep;
}

}  // namespace symph
