#include "symphodge/exterior.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <map>

namespace symph {

int wedge_sign(Mask a, Mask b) {
  // count pairs (i in a, j in b) with i > j
  int inv = 0;
  Mask bb = b;
  while (bb) {
    int j = std::countr_zero(bb);
    inv += std::popcount(a >> (j + 1));
    bb &= bb - 1;
  }
  return (inv & 1) ? -1 : 1;
}

int contract_sign(Mask m, int j) {
  int below = std::popcount(m & ((Mask(1) << j) - 1));
  return (below & 1) ? -1 : 1;
}

std::vector<Mask> masks_of_degree(int two_n, int degree) {
  std::vector<Mask> out;
  if (degree < 0 || degree > two_n) return out;
  for (Mask m = 0; m < (Mask(1) << two_n); ++m)
    if (std::popcount(m) == degree) out.push_back(m);
  return out;
}

int mask_rank(int two_n, Mask m) {
  int k = std::popcount(m);
  int r = 0;
  for (Mask x = 0; x < m; ++x)
    if (std::popcount(x) == k) ++r;
  (void)two_n;
  return r;
}

PointwiseForm::PointwiseForm(int n, std::vector<std::pair<Mask, double>> terms)
    : n_(n), terms_(std::move(terms)) {
  canonicalize();
}

void PointwiseForm::canonicalize() {
  std::sort(terms_.begin(), terms_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<Mask, double>> out;
  out.reserve(terms_.size());
  for (const auto& [m, c] : terms_) {
    if (m >= (Mask(1) << (2 * n_)))
      throw DomainError("PointwiseForm: index out of range for n=" + std::to_string(n_));
    if (!out.empty() && out.back().first == m)
      out.back().second += c;
    else
      out.emplace_back(m, c);
  }
  std::erase_if(out, [](const auto& t) { return std::abs(t.second) <= coeff_eps; });
  terms_ = std::move(out);
}

PointwiseForm PointwiseForm::scalar(int n, double c) {
  return PointwiseForm(n, {{Mask(0), c}});
}

PointwiseForm PointwiseForm::basis(int n, Mask m, double c) {
  return PointwiseForm(n, {{m, c}});
}

int PointwiseForm::degree() const {
  if (terms_.empty()) return 0;
  int k = std::popcount(terms_.front().first);
  for (const auto& [m, c] : terms_) {
    (void)c;
    if (std::popcount(m) != k)
      throw DomainError("PointwiseForm::degree: form is not homogeneous");
  }
  return k;
}

bool PointwiseForm::is_homogeneous() const {
  if (terms_.empty()) return true;
  int k = std::popcount(terms_.front().first);
  return std::all_of(terms_.begin(), terms_.end(),
                     [k](const auto& t) { return std::popcount(t.first) == k; });
}

double PointwiseForm::coeff(Mask m) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), m,
                             [](const auto& t, Mask x) { return t.first < x; });
  return (it != terms_.end() && it->first == m) ? it->second : 0.0;
}

void PointwiseForm::set_coeff(Mask m, double c) {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), m,
                             [](const auto& t, Mask x) { return t.first < x; });
  if (it != terms_.end() && it->first == m) {
    if (std::abs(c) <= coeff_eps)
      terms_.erase(it);
    else
      it->second = c;
  } else if (std::abs(c) > coeff_eps) {
    terms_.insert(it, {m, c});
  }
}

PointwiseForm& PointwiseForm::operator+=(const PointwiseForm& o) {
  if (n_ == 0 && terms_.empty()) n_ = o.n_;
  if (o.n_ != n_ && !o.terms_.empty())
    throw DomainError("PointwiseForm: mismatched n in addition");
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  canonicalize();
  return *this;
}

PointwiseForm& PointwiseForm::operator-=(const PointwiseForm& o) {
  PointwiseForm neg = o;
  neg *= -1.0;
  return *this += neg;
}

PointwiseForm& PointwiseForm::operator*=(double s) {
  for (auto& [m, c] : terms_) {
    (void)m;
    c *= s;
  }
  std::erase_if(terms_, [](const auto& t) { return std::abs(t.second) <= coeff_eps; });
  return *this;
}

double PointwiseForm::norm() const {
  double s = 0;
  for (const auto& [m, c] : terms_) {
    (void)m;
    s += c * c;
  }
  return std::sqrt(s);
}

double PointwiseForm::max_abs() const {
  double s = 0;
  for (const auto& [m, c] : terms_) {
    (void)m;
    s = std::max(s, std::abs(c));
  }
  return s;
}

Eigen::VectorXd PointwiseForm::dense(int k) const {
  auto ms = masks_of_degree(2 * n_, k);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<int>(ms.size()));
  for (int i = 0; i < static_cast<int>(ms.size()); ++i) v[i] = coeff(ms[i]);
  return v;
}

PointwiseForm PointwiseForm::from_dense(int n, int k, const Eigen::VectorXd& v) {
  auto ms = masks_of_degree(2 * n, k);
  if (v.size() != static_cast<int>(ms.size()))
    throw DomainError("from_dense: wrong vector size");
  std::vector<std::pair<Mask, double>> terms;
  for (int i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > coeff_eps) terms.emplace_back(ms[i], v[i]);
  return PointwiseForm(n, std::move(terms));
}

PointwiseForm wedge(const PointwiseForm& a, const PointwiseForm& b) {
  if (a.n() != b.n() && !a.is_zero() && !b.is_zero())
    throw DomainError("wedge: mismatched n");
  std::vector<std::pair<Mask, double>> terms;
  terms.reserve(a.terms().size() * b.terms().size());
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms()) {
      if (ma & mb) continue;
      terms.emplace_back(ma | mb, ca * cb * wedge_sign(ma, mb));
    }
  return PointwiseForm(std::max(a.n(), b.n()), std::move(terms));
}

PointwiseForm contract_bivector(const PolyVector& pi, const PointwiseForm& a) {
  std::vector<std::pair<Mask, double>> terms;
  for (const auto& [pm, pc] : pi.terms()) {
    if (std::popcount(pm) != 2)
      throw DomainError("contract_bivector: pi term is not a bivector");
    int i = std::countr_zero(pm);
    int j = std::countr_zero(pm & (pm - 1));
    // term pc * (e_i ^ e_j), i < j; the second factor e_j contracts first
    for (const auto& [m, c] : a.terms()) {
      if (!(m & (Mask(1) << j))) continue;
      Mask m1 = m & ~(Mask(1) << j);
      int s1 = contract_sign(m, j);
      if (!(m1 & (Mask(1) << i))) continue;
      Mask m2 = m1 & ~(Mask(1) << i);
      int s2 = contract_sign(m1, i);
      terms.emplace_back(m2, pc * c * s1 * s2);
    }
  }
  return PointwiseForm(a.n(), std::move(terms));
}

namespace {

// coefficient of e^full in omega^n / n!
double volume_coefficient(const PointwiseForm& omega, int n) {
  PointwiseForm p = PointwiseForm::scalar(n, 1.0);
  for (int i = 0; i < n; ++i) p = wedge(p, omega);
  double fact = 1;
  for (int i = 2; i <= n; ++i) fact *= i;
  Mask full = (Mask(1) << (2 * n)) - 1;
  return p.coeff(full) / fact;
}

}  // namespace

SymplecticStructure::SymplecticStructure(const PointwiseForm& omega)
    : n_(omega.n()), omega_(omega) {
  if (omega.is_zero() || omega.degree() != 2)
    throw DomainError("SymplecticStructure: omega must be a nonzero 2-form");
  int d = 2 * n_;
  W_ = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [m, c] : omega.terms()) {
    int i = std::countr_zero(m);
    int j = std::countr_zero(m & (m - 1));
    W_(i, j) = c;
    W_(j, i) = -c;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(W_);
  if (!lu.isInvertible())
    throw DomainError("SymplecticStructure: omega is degenerate");
  Eigen::MatrixXd P = lu.inverse();
  G_ = -P;  // pairing on covectors, (e^i, e^j)
  vol_ = volume_coefficient(omega_, n_);

  auto build_pi = [&](double sign) {
    std::vector<std::pair<Mask, double>> terms;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        if (std::abs(P(i, j)) > PointwiseForm::coeff_eps)
          terms.emplace_back((Mask(1) << i) | (Mask(1) << j), sign * P(i, j));
    return PolyVector(n_, std::move(terms));
  };
  pi_ = build_pi(1.0);
  try {
    check_sl2();
  } catch (const ConsistencyError&) {
    pi_ = build_pi(-1.0);  // normalize the bivector sign so [Lambda,L] = H
    check_sl2();
  }
}

void SymplecticStructure::check_sl2() const {
  const double tol = 1e-9;
  Mask top = Mask(1) << (2 * n_);
  for (Mask m = 0; m < top; ++m) {
    PointwiseForm b = PointwiseForm::basis(n_, m);
    PointwiseForm lhs = Lambda(L(b)) - L(Lambda(b));
    PointwiseForm c1 = lhs - H(b);
    PointwiseForm c2 = (H(Lambda(b)) - Lambda(H(b))) - 2.0 * Lambda(b);
    PointwiseForm c3 = (H(L(b)) - L(H(b))) + 2.0 * L(b);
    if (c1.norm() > tol || c2.norm() > tol || c3.norm() > tol)
      throw ConsistencyError("sl2 commutation relations failed on basis monomial");
  }
}

PointwiseForm SymplecticStructure::L(const PointwiseForm& a) const { return wedge(omega_, a); }

PointwiseForm SymplecticStructure::Lambda(const PointwiseForm& a) const {
  return contract_bivector(pi_, a);
}

PointwiseForm SymplecticStructure::H(const PointwiseForm& a) const {
  std::vector<std::pair<Mask, double>> terms;
  terms.reserve(a.terms().size());
  for (const auto& [m, c] : a.terms())
    terms.emplace_back(m, (n_ - std::popcount(m)) * c);
  return PointwiseForm(n_, std::move(terms));
}

PointwiseForm SymplecticStructure::L_power(int k, const PointwiseForm& a) const {
  PointwiseForm r = a;
  for (int i = 0; i < k; ++i) r = L(r);
  return r;
}

double SymplecticStructure::pairing(const PointwiseForm& a, const PointwiseForm& b) const {
  if (a.is_zero() || b.is_zero()) return 0.0;
  int k = a.degree();
  if (b.degree() != k) throw DomainError("pairing: degrees differ");
  if (k == 0) return a.coeff(0) * b.coeff(0);
  double acc = 0;
  std::vector<int> ia(k), ib(k);
  Eigen::MatrixXd M(k, k);
  for (const auto& [ma, ca] : a.terms()) {
    int t = 0;
    for (Mask x = ma; x; x &= x - 1) ia[t++] = std::countr_zero(x);
    for (const auto& [mb, cb] : b.terms()) {
      t = 0;
      for (Mask x = mb; x; x &= x - 1) ib[t++] = std::countr_zero(x);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) M(r, c) = G_(ia[r], ib[c]);
      acc += ca * cb * M.determinant();
    }
  }
  return acc;
}

PointwiseForm SymplecticStructure::star(const PointwiseForm& a) const {
  if (a.is_zero()) return PointwiseForm(n_);
  int k = a.degree();
  Mask full = (Mask(1) << (2 * n_)) - 1;
  std::vector<std::pair<Mask, double>> terms;
  for (Mask b : masks_of_degree(2 * n_, k)) {
    double p = pairing(a, PointwiseForm::basis(n_, b));
    if (std::abs(p) <= PointwiseForm::coeff_eps) continue;
    Mask m = full & ~b;
    terms.emplace_back(m, p * vol_ * wedge_sign(m, b));
  }
  return PointwiseForm(n_, std::move(terms));
}

bool SymplecticStructure::is_primitive(const PointwiseForm& a, double tol) const {
  double scale = 1.0 + a.norm();
  bool lam = Lambda(a).norm() <= tol * scale;
  if (a.is_zero()) return true;
  int k = a.degree();
  if (k > n_) return lam;  // no nonzero primitive forms above degree n
  bool wed = L_power(n_ - k + 1, a).norm() <= tol * scale;
  if (lam != wed)
    throw ConsistencyError("is_primitive: contraction and wedge criteria disagree");
  return lam;
}

Eigen::MatrixXd SymplecticStructure::matrix_of_L(int k) const {
  auto src = masks_of_degree(2 * n_, k);
  auto dst = masks_of_degree(2 * n_, k + 2);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<int>(dst.size()),
                                            static_cast<int>(src.size()));
  for (int j = 0; j < static_cast<int>(src.size()); ++j) {
    PointwiseForm im = L(PointwiseForm::basis(n_, src[j]));
    for (const auto& [m, c] : im.terms()) M(mask_rank(2 * n_, m), j) = c;
  }
  return M;
}

Eigen::MatrixXd SymplecticStructure::matrix_of_Lambda(int k) const {
  auto src = masks_of_degree(2 * n_, k);
  auto dst = masks_of_degree(2 * n_, k - 2);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<int>(dst.size()),
                                            static_cast<int>(src.size()));
  for (int j = 0; j < static_cast<int>(src.size()); ++j) {
    PointwiseForm im = Lambda(PointwiseForm::basis(n_, src[j]));
    for (const auto& [m, c] : im.terms()) M(mask_rank(2 * n_, m), j) = c;
  }
  return M;
}

Eigen::MatrixXd SymplecticStructure::matrix_of_star(int k) const {
  auto src = masks_of_degree(2 * n_, k);
  auto dst = masks_of_degree(2 * n_, 2 * n_ - k);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<int>(dst.size()),
                                            static_cast<int>(src.size()));
  for (int j = 0; j < static_cast<int>(src.size()); ++j) {
    PointwiseForm im = star(PointwiseForm::basis(n_, src[j]));
    for (const auto& [m, c] : im.terms()) M(mask_rank(2 * n_, m), j) = c;
  }
  return M;
}

Eigen::MatrixXd SymplecticStructure::primitive_basis(int k) const {
  int dim_k = static_cast<int>(masks_of_degree(2 * n_, k).size());
  if (k > n_) return Eigen::MatrixXd::Zero(dim_k, 0);
  if (k <= 1) return Eigen::MatrixXd::Identity(dim_k, dim_k);
  Eigen::MatrixXd M = matrix_of_Lambda(k);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double thresh = (sv.size() ? sv(0) : 0.0) * 1e-12;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++rank;
  return svd.matrixV().rightCols(dim_k - rank);
}

std::vector<SymplecticStructure::LefschetzComponent>
SymplecticStructure::lefschetz_decompose(const PointwiseForm& a) const {
  std::vector<LefschetzComponent> comps;
  if (a.is_zero()) return comps;
  int k = a.degree();
  int r_lo = std::max(k - n_, 0);
  int r_hi = k / 2;

  // columns: L^r/r! applied to a primitive basis of degree k-2r, all r
  std::vector<Eigen::MatrixXd> bases;
  std::vector<int> offsets;
  int cols = 0;
  int dim_k = static_cast<int>(masks_of_degree(2 * n_, k).size());
  for (int r = r_lo; r <= r_hi; ++r) {
    bases.push_back(primitive_basis(k - 2 * r));
    offsets.push_back(cols);
    cols += static_cast<int>(bases.back().cols());
  }
  Eigen::MatrixXd M(dim_k, cols);
  for (int r = r_lo; r <= r_hi; ++r) {
    const Eigen::MatrixXd& B = bases[r - r_lo];
    double rf = 1;
    for (int i = 2; i <= r; ++i) rf *= i;
    for (int c = 0; c < B.cols(); ++c) {
      PointwiseForm beta = PointwiseForm::from_dense(n_, k - 2 * r, B.col(c));
      PointwiseForm im = L_power(r, beta);
      M.col(offsets[r - r_lo] + c) = im.dense(k) / rf;
    }
  }
  Eigen::VectorXd rhs = a.dense(k);
  Eigen::VectorXd x = M.colPivHouseholderQr().solve(rhs);
  if ((M * x - rhs).norm() > 1e-10 * (1.0 + rhs.norm()))
    throw ConsistencyError("lefschetz_decompose: dense solve did not close");
  for (int r = r_lo; r <= r_hi; ++r) {
    const Eigen::MatrixXd& B = bases[r - r_lo];
    if (B.cols() == 0) continue;
    Eigen::VectorXd bc = B * x.segment(offsets[r - r_lo], B.cols());
    PointwiseForm beta = PointwiseForm::from_dense(n_, k - 2 * r, bc);
    comps.push_back({r, std::move(beta)});
  }
  return comps;
}

std::vector<SymplecticStructure::LefschetzComponent>
SymplecticStructure::lefschetz_decompose_recursive(const PointwiseForm& a) const {
  std::vector<LefschetzComponent> comps;
  if (a.is_zero()) return comps;
  int k = a.degree();
  int r_lo = std::max(k - n_, 0);
  int r_hi = k / 2;
  PointwiseForm rem = a;
  for (int r = r_hi; r >= r_lo; --r) {
    int j = k - 2 * r;
    // Lambda^r (L^r/r! beta_j) = [ (n-j)(n-j-1)...(n-j-r+1) ] beta_j
    double f = 1;
    for (int i = 1; i <= r; ++i) f *= (n_ - j - r + i);
    PointwiseForm g = rem;
    for (int i = 0; i < r; ++i) g = Lambda(g);
    PointwiseForm beta = (1.0 / f) * g;
    double rf = 1;
    for (int i = 2; i <= r; ++i) rf *= i;
    rem -= (1.0 / rf) * L_power(r, beta);
    comps.push_back({r, std::move(beta)});
  }
  if (rem.norm() > 1e-9 * (1.0 + a.norm()))
    throw ConsistencyError("lefschetz_decompose_recursive: residue did not vanish");
  std::reverse(comps.begin(), comps.end());
  std::erase_if(comps, [](const LefschetzComponent& c) { return c.beta.is_zero(); });
  return comps;
}

PointwiseForm SymplecticStructure::assemble_lefschetz(
    const std::vector<LefschetzComponent>& comps, int n_hint) const {
  PointwiseForm acc(n_hint >= 0 ? n_hint : n_);
  for (const auto& c : comps) {
    double rf = 1;
    for (int i = 2; i <= c.r; ++i) rf *= i;
    acc += (1.0 / rf) * L_power(c.r, c.beta);
  }
  return acc;
}

PointwiseForm SymplecticStructure::invert_L_power(int k, const PointwiseForm& b,
                                                  double tol) const {
  if (k < 0 || k > n_) throw DomainError("invert_L_power: need 0 <= k <= n");
  if (b.is_zero()) return PointwiseForm(n_);
  int deg_b = b.degree();
  int j = deg_b - 2 * k;
  if (j < 0) throw DomainError("invert_L_power: target degree below 0");
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(
      static_cast<int>(masks_of_degree(2 * n_, j).size()),
      static_cast<int>(masks_of_degree(2 * n_, j).size()));
  {
    // matrix of L^k : degree j -> j+2k
    Eigen::MatrixXd acc = M;
    for (int s = 0; s < k; ++s) {
      SymplecticStructure const& self = *this;
      Eigen::MatrixXd step = self.matrix_of_L(j + 2 * s);
      acc = (step * acc).eval();
    }
    M = acc;
  }
  Eigen::VectorXd rhs = b.dense(deg_b);
  Eigen::VectorXd x;
  if (deg_b == n_ + k && j == n_ - k) {
    x = M.partialPivLu().solve(rhs);  // Lefschetz isomorphism range: square, invertible
  } else {
    x = M.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
  }
  if ((M * x - rhs).norm() > tol * (1.0 + rhs.norm()))
    throw NotSolvableError("invert_L_power: right-hand side is not in the image of L^k");
  return PointwiseForm::from_dense(n_, j, x);
}

PointwiseForm standard_omega(int n) {
  std::vector<std::pair<Mask, double>> terms;
  for (int i = 0; i < n; ++i)
    terms.emplace_back((Mask(1) << (2 * i)) | (Mask(1) << (2 * i + 1)), 1.0);
  return PointwiseForm(n, std::move(terms));
}

SymplecticStructure make_standard_symplectic(int n) {
  return SymplecticStructure(standard_omega(n));
}

}  // namespace symph
