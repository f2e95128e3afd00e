#include "symphodge/exterior.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <random>

namespace symph {

namespace {

// Hodge star for the Euclidean metric, acting on coefficient data:
// (*a)_{comp(m)} = a_m * sgn(e^m ^ e^{comp(m)} = e^{1..2n}).
PointwiseForm euclid_star(const PointwiseForm& a) {
  Mask full = (Mask(1) << (2 * a.n())) - 1;
  std::vector<std::pair<Mask, double>> terms;
  terms.reserve(a.terms().size());
  for (const auto& [m, c] : a.terms())
    terms.emplace_back(full & ~m, c * wedge_sign(m, full & ~m));
  return PointwiseForm(a.n(), std::move(terms));
}

// value of a on the simple k-vector spanned by the columns of V (2n x k)
double frame_value(const PointwiseForm& a, const Eigen::MatrixXd& V,
                   const std::vector<Mask>& masks, Eigen::MatrixXd& scratch) {
  int k = static_cast<int>(V.cols());
  double acc = 0;
  for (Mask m : masks) {
    double c = a.coeff(m);
    if (c == 0.0) continue;
    int r = 0;
    for (Mask x = m; x; x &= x - 1) scratch.row(r++) = V.row(std::countr_zero(x));
    double det;
    switch (k) {
      case 1: det = scratch(0, 0); break;
      case 2: det = scratch(0, 0) * scratch(1, 1) - scratch(0, 1) * scratch(1, 0); break;
      case 3:
        det = scratch(0, 0) * (scratch(1, 1) * scratch(2, 2) - scratch(1, 2) * scratch(2, 1)) -
              scratch(0, 1) * (scratch(1, 0) * scratch(2, 2) - scratch(1, 2) * scratch(2, 0)) +
              scratch(0, 2) * (scratch(1, 0) * scratch(2, 1) - scratch(1, 1) * scratch(2, 0));
        break;
      default: det = scratch.topRows(k).determinant(); break;
    }
    acc += c * det;
  }
  return acc;
}

// Euclidean gradient of V -> <a, col_1 ^ ... ^ col_k> via cofactor expansion
Eigen::MatrixXd frame_gradient(const PointwiseForm& a, const Eigen::MatrixXd& V,
                               const std::vector<Mask>& masks) {
  int d = static_cast<int>(V.rows());
  int k = static_cast<int>(V.cols());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, k);
  Eigen::MatrixXd sub(k, k);
  std::vector<int> rows(k);
  for (Mask m : masks) {
    double c = a.coeff(m);
    if (c == 0.0) continue;
    int r = 0;
    for (Mask x = m; x; x &= x - 1) rows[r++] = std::countr_zero(x);
    for (int rr = 0; rr < k; ++rr) sub.row(rr) = V.row(rows[rr]);
    // d det / d sub = det(sub) * inv(sub)^T, via adjugate when near singular
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    Eigen::MatrixXd adjT;
    if (lu.isInvertible()) {
      adjT = lu.determinant() * lu.inverse().transpose();
    } else {
      // fall back to explicit cofactors
      adjT.resize(k, k);
      Eigen::MatrixXd minor(k - 1, k - 1);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          int mr = 0;
          for (int r2 = 0; r2 < k; ++r2) {
            if (r2 == i) continue;
            int mc = 0;
            for (int c2 = 0; c2 < k; ++c2) {
              if (c2 == j) continue;
              minor(mr, mc++) = sub(r2, c2);
            }
            ++mr;
          }
          double mdet = (k == 1) ? 1.0 : minor.determinant();
          adjT(i, j) = (((i + j) & 1) ? -1.0 : 1.0) * mdet;
        }
    }
    for (int rr = 0; rr < k; ++rr) G.row(rows[rr]) += c * adjT.row(rr);
  }
  return G;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& V) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(V);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(V.rows(), V.cols());
  // fix column signs so the frame stays close to V
  for (int c = 0; c < V.cols(); ++c)
    if (Q.col(c).dot(V.col(c)) < 0) Q.col(c) = -Q.col(c);
  return Q;
}

double top_singular_value_of_two_form(const PointwiseForm& a) {
  int d = 2 * a.n();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [m, c] : a.terms()) {
    int i = std::countr_zero(m);
    int j = std::countr_zero(m & (m - 1));
    A(i, j) = c;
    A(j, i) = -c;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

}  // namespace

ComassResult comass(const PointwiseForm& a, const ComassOptions& opts) {
  if (a.is_zero()) return {0.0, 0.0, true};
  if (!a.is_homogeneous()) throw DomainError("comass: form must be homogeneous");
  int k = a.degree();
  int d = 2 * a.n();

  if (k == 0 || k == d) {
    double v = a.max_abs();
    return {v, v, true};
  }
  if (k == 1 || k == d - 1) {
    const PointwiseForm& w = (k == 1) ? a : euclid_star(a);
    double v = w.norm();
    return {v, v, true};
  }
  if (k == 2 || k == d - 2) {
    const PointwiseForm w = (k == 2) ? a : euclid_star(a);
    double v = top_singular_value_of_two_form(w);
    return {v, v, true};
  }

  // general degree: sampled lower bound plus projected-ascent refinement
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto masks = masks_of_degree(d, k);
  Eigen::MatrixXd scratch(k, k);

  double best = 0;
  std::vector<Eigen::MatrixXd> top_frames;
  std::vector<double> top_vals;
  for (int s = 0; s < opts.samples; ++s) {
    Eigen::MatrixXd V(d, k);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < k; ++j) V(i, j) = gauss(rng);
    V = orthonormalize(V);
    double v = std::abs(frame_value(a, V, masks, scratch));
    best = std::max(best, v);
    if (static_cast<int>(top_frames.size()) < opts.refine_starts) {
      top_frames.push_back(V);
      top_vals.push_back(v);
    } else if (!top_vals.empty()) {
      auto it = std::min_element(top_vals.begin(), top_vals.end());
      if (v > *it) {
        top_frames[it - top_vals.begin()] = V;
        *it = v;
      }
    }
  }

  double refined = best;
  for (auto& V0 : top_frames) {
    Eigen::MatrixXd V = V0;
    double f = frame_value(a, V, masks, scratch);
    double sgn = (f >= 0) ? 1.0 : -1.0;
    double step = 0.5;
    for (int it = 0; it < opts.refine_iters && step > 1e-14; ++it) {
      Eigen::MatrixXd G = sgn * frame_gradient(a, V, masks);
      Eigen::MatrixXd Vn = orthonormalize(V + step * G);
      double fn = frame_value(a, Vn, masks, scratch);
      if (sgn * fn > sgn * f) {
        V = Vn;
        f = fn;
        step *= 1.4;
      } else {
        step *= 0.5;
      }
    }
    refined = std::max(refined, std::abs(f));
  }

  return {refined, refined, false};
}

}  // namespace symph
