#include "longpeer/linalg.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace longpeer {

Matrix GsvdFactors::s_factor() const {
  Matrix S = Matrix::Zero(n, pt);
  for (int j = 0; j < ell; ++j) S(j, pt - n + j) = sigma[j];
  for (int j = ell; j < n; ++j) S(j, pt - n + j) = 1.0;
  return S;
}

Matrix GsvdFactors::m_factor() const {
  Matrix M = Matrix::Zero(m, pt);
  for (int j = 0; j < pt - n; ++j) M(j, j) = 1.0;
  for (int j = 0; j < ell; ++j) M(pt - n + j, pt - n + j) = mu[j];
  return M;
}

GsvdFactors gsvd_pair(const Matrix& A, const Matrix& B) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.rows());
  const int pt = static_cast<int>(A.cols());

  if (B.cols() != pt)
    fail(ErrorKind::ShapeAssumptionViolated, "A and B must have the same column count");
  if (!(n <= m && m <= pt && pt <= m + n))
    fail(ErrorKind::ShapeAssumptionViolated,
         "require n <= m <= pt <= m + n; got n=" + std::to_string(n) +
             " m=" + std::to_string(m) + " pt=" + std::to_string(pt));

  // QR of the stacked matrix.  Column pivoting exposes rank deficiency of
  // [A; B], which would make the generalized ridge estimate non-unique.
  Matrix stacked(n + m, pt);
  stacked.topRows(n) = A;
  stacked.bottomRows(m) = B;

  Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
  const Matrix R = qr.matrixR().topLeftCorner(pt, pt).triangularView<Eigen::Upper>();
  {
    const double rmax = R.diagonal().cwiseAbs().maxCoeff();
    const double tol = static_cast<double>(n + m) * Eigen::NumTraits<double>::epsilon() * rmax;
    if (rmax == 0.0 || R.diagonal().cwiseAbs().minCoeff() <= tol)
      fail(ErrorKind::StackedRankDeficient, "rank([A; B]) < number of columns");
  }
  Matrix Qfull = qr.householderQ() * Matrix::Identity(n + m, pt);
  const Matrix Q1 = Qfull.topRows(n);
  const Matrix Q2 = Qfull.bottomRows(m);

  // CS decomposition of [Q1; Q2].  The right factor Zhat comes from a full
  // SVD of Q1 with singular values rearranged ascending and the null-space
  // directions of Q1 put first, so that Q1 = U [0 diag(asc)] Zhat'.
  Eigen::JacobiSVD<Matrix> svd(Q1, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector sv = svd.singularValues();  // n values, descending
  const Matrix& Vfull = svd.matrixV();     // pt x pt

  Matrix U(n, n), Zhat(pt, pt);
  Vector sigma_all(n);
  Zhat.leftCols(pt - n) = Vfull.rightCols(pt - n);
  for (int j = 0; j < n; ++j) {
    const int src = n - 1 - j;  // reverse to ascending
    sigma_all[j] = std::min(1.0, std::max(0.0, sv[src]));
    Zhat.col(pt - n + j) = Vfull.col(src);
    U.col(j) = svd.matrixU().col(src);
  }

  // T = Q2 * Zhat has exactly orthogonal columns with norms
  // (1,...,1, mu_1..mu_ell, 0,...,0); Householder QR of the leading m
  // columns recovers Vmat with R_T diagonal up to roundoff.
  Matrix T = Q2 * Zhat;
  Eigen::HouseholderQR<Matrix> tqr(T.leftCols(m));
  Matrix Vmat = tqr.householderQ();
  const Matrix RT = tqr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  for (int j = 0; j < m; ++j)
    if (RT(j, j) < 0.0) Vmat.col(j) = -Vmat.col(j);

  GsvdFactors f;
  f.n = n;
  f.m = m;
  f.pt = pt;
  f.ell = n + m - pt;
  f.null_dim = pt - m;
  f.U = std::move(U);
  f.Vmat = std::move(Vmat);
  f.sigma.resize(f.ell);
  f.mu.resize(f.ell);
  for (int j = 0; j < f.ell; ++j) {
    double s = sigma_all[j];
    // mu from the column norm of T, which is accurate in absolute terms
    // even when s is close to 1; the pair is then renormalized so that
    // sigma^2 + mu^2 = 1 holds to machine precision.
    double u = T.col(pt - n + j).norm();
    const double r = std::sqrt(s * s + u * u);
    if (r > 0.0) {
      s /= r;
      u /= r;
    }
    f.sigma[j] = s;
    f.mu[j] = u;
  }

  // G^{-1} = Zhat' R P'; G applies the inverse permutation and triangular solve.
  const Matrix P = qr.colsPermutation();
  f.G_inv = Zhat.transpose() * R * P.transpose();
  f.G = P * R.triangularView<Eigen::Upper>().solve(Zhat);
  return f;
}

Matrix solve_spd(const Matrix& Amat, const Matrix& rhs) {
  if (Amat.rows() != Amat.cols())
    fail(ErrorKind::NotPositiveDefinite, "matrix is not square");
  const double scale = Amat.cwiseAbs().maxCoeff();
  if ((Amat - Amat.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1.0))
    fail(ErrorKind::NotPositiveDefinite, "matrix is not symmetric");
  Eigen::LLT<Matrix> llt(Amat);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::NotPositiveDefinite, "Cholesky pivot failure");
  return llt.solve(rhs);
}

Matrix pseudoinverse(const Matrix& Amat) {
  if (Amat.size() == 0) return Amat.transpose();
  Eigen::JacobiSVD<Matrix> svd(Amat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cutoff = std::max(Amat.rows(), Amat.cols()) *
                        Eigen::NumTraits<double>::epsilon() *
                        (sv.size() > 0 ? sv[0] : 0.0);
  Vector inv = Vector::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

int numerical_rank(const Matrix& Amat) {
  if (Amat.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(Amat);
  const Vector& sv = svd.singularValues();
  const double cutoff = std::max(Amat.rows(), Amat.cols()) *
                        Eigen::NumTraits<double>::epsilon() *
                        (sv.size() > 0 ? sv[0] : 0.0);
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) ++r;
  return r;
}

}  // namespace longpeer
