#include "symphodge/cemodel.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>

namespace symph {
namespace {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

Rational exact_rational(double v) {
  if (v == 0.0) return Rational(0);
  if (!std::isfinite(v)) throw DomainError("exact rank needs finite entries");
  int e = 0;
  double m = std::frexp(v, &e);              // v = m * 2^e, 0.5 <= |m| < 1
  auto im = static_cast<long long>(std::ldexp(m, 53));
  e -= 53;
  BigInt num(im);
  if (e >= 0) return Rational(num << e);
  return Rational(num, BigInt(1) << (-e));
}

// orthonormal basis of the kernel via full SVD
Eigen::MatrixXd kernel_basis(const Eigen::MatrixXd& M, double rel_tol = 1e-9) {
  if (M.rows() == 0) return Eigen::MatrixXd::Identity(M.cols(), M.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  double thresh = rel_tol * std::max(1.0, svd.singularValues().size() > 0
                                              ? svd.singularValues()(0)
                                              : 0.0);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thresh) ++r;
  return svd.matrixV().rightCols(M.cols() - r);
}

// orthonormal basis of the column span
Eigen::MatrixXd image_basis(const Eigen::MatrixXd& M, double rel_tol = 1e-9) {
  if (M.cols() == 0 || M.rows() == 0) return Eigen::MatrixXd::Zero(M.rows(), 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU);
  double thresh = rel_tol * std::max(1.0, svd.singularValues()(0));
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thresh) ++r;
  return svd.matrixU().leftCols(r);
}

int intersection_dim(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() == 0 || B.cols() == 0) return 0;
  Eigen::MatrixXd joint(A.rows(), A.cols() + B.cols());
  joint << A, B;
  return static_cast<int>(A.cols() + B.cols()) - rank_svd(joint);
}

}  // namespace

CEModel::CEModel(int n, const std::vector<StructureEntry>& structure, PointwiseForm omega)
    : n_(n), symp_(omega) {
  if (n < 1) throw DomainError("CEModel: n must be positive");
  const int N = 2 * n;
  c_.assign(N, Eigen::MatrixXd::Zero(N, N));
  for (const auto& [i1, j1, k1, c] : structure) {
    if (i1 < 1 || i1 > N || j1 < 1 || j1 > N || k1 < 1 || k1 > N)
      throw DomainError("CEModel: structure index out of range");
    if (i1 == j1) throw DomainError("CEModel: bracket of a generator with itself");
    c_[k1 - 1](i1 - 1, j1 - 1) += c;
    c_[k1 - 1](j1 - 1, i1 - 1) -= c;
  }

  if (jacobi_residual() > 1e-12)
    throw DomainError("CEModel: structure constants violate the Jacobi identity");

  dgen_.reserve(N);
  for (int k = 0; k < N; ++k) {
    PointwiseForm dk(n);
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j)
        if (c_[k](i, j) != 0.0)
          dk.set_coeff((Mask(1) << i) | (Mask(1) << j), -c_[k](i, j));
    dgen_.push_back(std::move(dk));
  }

  if (d(symp_.omega()).max_abs() > 1e-12)
    throw DomainError("CEModel: omega is not closed under the model differential");
}

CEModel CEModel::abelian(int n) { return CEModel(n, {}, standard_omega(n)); }

CEModel CEModel::kodaira_thurston() {
  // de^3 = e^1 ^ e^2  <=>  [X_1, X_2] = -X_3
  PointwiseForm omega(2, {{(Mask(1) << 0) | (Mask(1) << 3), 1.0},
                          {(Mask(1) << 1) | (Mask(1) << 2), 1.0}});
  return CEModel(2, {{1, 2, 3, -1.0}}, std::move(omega));
}

const PointwiseForm& CEModel::d_generator(int i) const {
  if (i < 0 || i >= dim()) throw DomainError("d_generator: index out of range");
  return dgen_[i];
}

double CEModel::jacobi_residual() const {
  const int N = dim();
  double worst = 0.0;
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j)
      for (int k = j + 1; k < N; ++k)
        for (int l = 0; l < N; ++l) {
          double s = 0.0;
          for (int m = 0; m < N; ++m)
            s += c_[m](i, j) * c_[l](m, k) + c_[m](j, k) * c_[l](m, i) +
                 c_[m](k, i) * c_[l](m, j);
          worst = std::max(worst, std::abs(s));
        }
  return worst;
}

PointwiseForm CEModel::d(const PointwiseForm& a) const {
  PointwiseForm out(n_);
  for (const auto& [m, coeff] : a.terms()) {
    for (int j = 0; j < dim(); ++j) {
      if (!(m & (Mask(1) << j))) continue;
      const PointwiseForm& dj = dgen_[j];
      if (dj.is_zero()) continue;
      double sign = contract_sign(m, j) * coeff;
      PointwiseForm rest = PointwiseForm::basis(n_, m & ~(Mask(1) << j));
      out += sign * wedge(dj, rest);
    }
  }
  return out;
}

PointwiseForm CEModel::dlambda(const PointwiseForm& a) const {
  return d(symp_.Lambda(a)) - symp_.Lambda(d(a));
}

Eigen::MatrixXd CEModel::d_matrix(int k) const {
  const auto src = masks_of_degree(dim(), k);
  const auto dst = masks_of_degree(dim(), k + 1);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<int>(dst.size()),
                                            static_cast<int>(src.size()));
  for (std::size_t c = 0; c < src.size(); ++c)
    M.col(static_cast<int>(c)) = d(PointwiseForm::basis(n_, src[c])).dense(k + 1);
  return M;
}

Eigen::MatrixXd CEModel::dlambda_matrix(int k) const {
  const auto src = masks_of_degree(dim(), k);
  const auto dst = masks_of_degree(dim(), k - 1);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<int>(dst.size()),
                                            static_cast<int>(src.size()));
  if (k <= 0) return M;
  for (std::size_t c = 0; c < src.size(); ++c)
    M.col(static_cast<int>(c)) = dlambda(PointwiseForm::basis(n_, src[c])).dense(k - 1);
  return M;
}

int rank_svd(const Eigen::MatrixXd& M, double rel_tol) {
  if (M.rows() == 0 || M.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  if (svd.singularValues().size() == 0) return 0;
  double thresh = rel_tol * std::max(1.0, svd.singularValues()(0));
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thresh) ++r;
  return r;
}

int rank_exact(const Eigen::MatrixXd& M) {
  const int rows = static_cast<int>(M.rows()), cols = static_cast<int>(M.cols());
  if (rows == 0 || cols == 0) return 0;
  std::vector<std::vector<Rational>> a(rows, std::vector<Rational>(cols));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a[i][j] = exact_rational(M(i, j));
  int rank = 0;
  for (int col = 0; col < cols && rank < rows; ++col) {
    int pivot = -1;
    for (int i = rank; i < rows; ++i)
      if (a[i][col] != 0) {
        pivot = i;
        break;
      }
    if (pivot < 0) continue;
    std::swap(a[rank], a[pivot]);
    for (int i = rank + 1; i < rows; ++i) {
      if (a[i][col] == 0) continue;
      Rational f = a[i][col] / a[rank][col];
      for (int j = col; j < cols; ++j) a[i][j] -= f * a[rank][j];
    }
    ++rank;
  }
  return rank;
}

int rank_certified(const Eigen::MatrixXd& M, double rel_tol) {
  int rs = rank_svd(M, rel_tol);
  int re = rank_exact(M);
  if (rs != re)
    throw CertificationError("rank mismatch: svd " + std::to_string(rs) + " vs exact " +
                             std::to_string(re));
  return re;
}

Cohomology cohomology(const CEModel& m) {
  Cohomology co;
  const int N = m.dim();
  co.deg.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    Eigen::MatrixXd dk = m.d_matrix(k);
    Eigen::MatrixXd dkm1 = m.d_matrix(k - 1);
    // harmonic representatives: ker d_k orthogonal to im d_{k-1}
    Eigen::MatrixXd stacked(dk.rows() + dkm1.cols(), dk.cols());
    stacked.topRows(dk.rows()) = dk;
    stacked.bottomRows(dkm1.cols()) = dkm1.transpose();
    Eigen::MatrixXd reps = kernel_basis(stacked);
    int betti_rank = static_cast<int>(dk.cols()) - rank_certified(dk) - rank_certified(dkm1);
    if (static_cast<int>(reps.cols()) != betti_rank)
      throw CertificationError("cohomology: harmonic dimension disagrees with certified rank");
    co.deg[k].betti = betti_rank;
    co.deg[k].reps = std::move(reps);
  }
  return co;
}

Eigen::VectorXd class_coordinates(const Cohomology& co, int k, const PointwiseForm& a) {
  return co.deg.at(k).reps.transpose() * a.dense(k);
}

Eigen::MatrixXd induced_L_power(const CEModel& m, const Cohomology& co, int k, int power) {
  const int kt = k + 2 * power;
  const int src = co.betti(k);
  const int dst = (kt >= 0 && kt <= m.dim()) ? co.betti(kt) : 0;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dst, src);
  if (dst == 0 || src == 0) return M;
  for (int j = 0; j < src; ++j) {
    PointwiseForm rep = PointwiseForm::from_dense(m.n(), k, co.deg[k].reps.col(j));
    PointwiseForm img = m.symp().L_power(power, rep);
    if (m.d(img).max_abs() > 1e-10)
      throw ConsistencyError("induced_L_power: image of a closed form is not closed");
    M.col(j) = co.deg[kt].reps.transpose() * img.dense(kt);
  }
  return M;
}

std::vector<bool> hard_lefschetz_test(const CEModel& m) {
  Cohomology co = cohomology(m);
  std::vector<bool> iso(m.n() + 1);
  for (int k = 0; k <= m.n(); ++k) {
    int src = co.betti(m.n() - k), dst = co.betti(m.n() + k);
    Eigen::MatrixXd M = induced_L_power(m, co, m.n() - k, k);
    iso[k] = (src == dst) && (rank_svd(M) == src);
  }
  return iso;
}

PrimitiveCohomology ph(const CEModel& m, int r) {
  if (r < 0 || r > m.n()) throw DomainError("ph: r must lie in [0, n]");
  Cohomology co = cohomology(m);
  Eigen::MatrixXd M = induced_L_power(m, co, r, m.n() - r + 1);
  PrimitiveCohomology out;
  if (co.betti(r) == 0) return out;
  Eigen::MatrixXd K = (M.rows() == 0) ? Eigen::MatrixXd::Identity(co.betti(r), co.betti(r))
                                      : kernel_basis(M);
  out.dim = static_cast<int>(K.cols());
  out.kernel_coords = K;
  for (int j = 0; j < out.dim; ++j) {
    Eigen::VectorXd v = co.deg[r].reps * K.col(j);
    out.reps.push_back(PointwiseForm::from_dense(m.n(), r, v));
  }
  return out;
}

namespace {

// orthonormal basis of P'^k: primitive, dlambda-closed degree-k forms
Eigen::MatrixXd pprime_basis(const CEModel& m, int k) {
  Eigen::MatrixXd lam = m.symp().matrix_of_Lambda(k);
  Eigen::MatrixXd dl = m.dlambda_matrix(k);
  Eigen::MatrixXd stacked(lam.rows() + dl.rows(), lam.cols());
  stacked.topRows(lam.rows()) = lam;
  stacked.bottomRows(dl.rows()) = dl;
  return kernel_basis(stacked);
}

}  // namespace

PrimitiveDCohomology ph_d(const CEModel& m, int r) {
  if (r < 1 || r > m.n()) throw DomainError("ph_d: r must lie in [1, n]");
  Eigen::MatrixXd P = pprime_basis(m, r);
  Eigen::MatrixXd dk = m.d_matrix(r);

  // closed part of P'^r
  Eigen::MatrixXd closed_coords = kernel_basis(dk * P);
  Eigen::MatrixXd Z = P * closed_coords;  // orthonormal: P and the kernel are

  // image d(P'^{r-1}) and the verification that it lands in the closed part
  Eigen::MatrixXd Pm1 = pprime_basis(m, r - 1);
  Eigen::MatrixXd D = m.d_matrix(r - 1) * Pm1;
  Eigen::MatrixXd U = image_basis(D);

  PrimitiveDCohomology out;
  out.d_maps_into_next = true;
  if (U.cols() > 0 && Z.cols() > 0)
    out.d_maps_into_next = ((U - Z * (Z.transpose() * U)).colwise().norm().maxCoeff() < 1e-9);
  else if (U.cols() > 0)
    out.d_maps_into_next = false;

  Eigen::MatrixXd G = U.transpose() * Z;  // quotient by the image inside Z
  Eigen::MatrixXd K = (U.cols() == 0) ? Eigen::MatrixXd::Identity(Z.cols(), Z.cols())
                                      : kernel_basis(G);
  Eigen::MatrixXd W = Z * K;
  out.dim = static_cast<int>(W.cols());
  for (int j = 0; j < out.dim; ++j)
    out.reps.push_back(PointwiseForm::from_dense(m.n(), r, W.col(j)));
  return out;
}

std::vector<TripleDims> ddlambda_subspaces(const CEModel& m) {
  const int N = m.dim();
  std::vector<TripleDims> out(N + 1);
  for (int k = 0; k <= N; ++k) {
    Eigen::MatrixXd ker_d = kernel_basis(m.d_matrix(k));
    Eigen::MatrixXd im_dl = image_basis(m.dlambda_matrix(k + 1));
    out[k].ker_d_cap_im_dlambda = intersection_dim(ker_d, im_dl);

    Eigen::MatrixXd im_d = image_basis(m.d_matrix(k - 1));
    Eigen::MatrixXd ker_dl = kernel_basis(m.dlambda_matrix(k));
    out[k].im_d_cap_ker_dlambda = intersection_dim(im_d, ker_dl);

    out[k].im_ddlambda = rank_svd(m.d_matrix(k - 1) * m.dlambda_matrix(k));
  }
  return out;
}

int natural_map_rank(const CEModel& m, int r) {
  PrimitiveDCohomology phd = ph_d(m, r);
  if (phd.dim == 0) return 0;
  Cohomology co = cohomology(m);
  Eigen::MatrixXd M(co.betti(r), phd.dim);
  for (int j = 0; j < phd.dim; ++j) M.col(j) = class_coordinates(co, r, phd.reps[j]);
  return rank_svd(M);
}

PointwiseForm primitive_ddlambda_refine(const CEModel& m, const PointwiseForm& alpha) {
  if (alpha.is_zero()) return PointwiseForm(m.n());
  const int k = alpha.degree();
  if (!m.symp().is_primitive(alpha))
    throw DomainError("primitive_ddlambda_refine: alpha must be primitive");
  Eigen::MatrixXd M = m.d_matrix(k - 1) * m.dlambda_matrix(k);
  Eigen::VectorXd rhs = alpha.dense(k);
  Eigen::VectorXd gamma = M.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
  if ((M * gamma - rhs).norm() > 1e-9 * (1.0 + rhs.norm()))
    throw DomainError("primitive_ddlambda_refine: alpha is not in the image of d dlambda");
  PointwiseForm g = PointwiseForm::from_dense(m.n(), k, gamma);
  PointwiseForm beta(m.n());
  for (const auto& comp : m.symp().lefschetz_decompose(g))
    if (comp.r == 0) beta = comp.beta;
  PointwiseForm check = m.d(m.dlambda(beta)) - alpha;
  if (check.max_abs() > 1e-8)
    throw ConsistencyError("primitive_ddlambda_refine: top component fails to reproduce alpha");
  return beta;
}

CohomologyReport full_report(const CEModel& m) {
  CohomologyReport rep;
  Cohomology co = cohomology(m);
  for (int k = 0; k <= m.dim(); ++k) rep.betti.push_back(co.betti(k));
  rep.hl_iso = hard_lefschetz_test(m);
  for (int r = 0; r <= m.n(); ++r) rep.ph_dims.push_back(ph(m, r).dim);
  rep.phd_dims.assign(m.n() + 1, 0);
  rep.natmap_rank.assign(m.n() + 1, 0);
  for (int r = 1; r <= m.n(); ++r) {
    rep.phd_dims[r] = ph_d(m, r).dim;
    rep.natmap_rank[r] = natural_map_rank(m, r);
  }
  rep.ddlambda_dims = ddlambda_subspaces(m);
  return rep;
}

}  // namespace symph
