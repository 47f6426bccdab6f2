#include "longpeer/covariance.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace longpeer {

CovarianceModel CovarianceModel::structured(const DesignMatrices& dm,
                                            double sigma_eps_sq, const Matrix& Sigma_b) {
  if (!(sigma_eps_sq > 0.0))
    fail(ErrorKind::NotPositiveDefinite, "sigma_eps^2 must be positive");
  if (Sigma_b.rows() != dm.r || Sigma_b.cols() != dm.r)
    fail(ErrorKind::InvalidConfig, "Sigma_b has the wrong dimension");

  CovarianceModel m;
  m.structured_ = true;
  m.n_ = dm.n();
  m.sigma_eps_sq_ = sigma_eps_sq;
  m.Sigma_b_ = Sigma_b;
  m.Zrows_ = dm.Zrows;
  m.spans_ = dm.subject_spans;

  const int r = dm.r;
  const Matrix C = Sigma_b / sigma_eps_sq;
  m.logdet_ = m.n_ * std::log(sigma_eps_sq);
  m.D_i_.reserve(m.spans_.size());
  for (const auto& [b, e] : m.spans_) {
    const auto Zi = m.Zrows_.middleRows(b, e - b);
    const Matrix ZtZ = Zi.transpose() * Zi;
    const Matrix A = Matrix::Identity(r, r) + ZtZ * C;
    // V_i^{-1} = (I - Z_i D_i Z_i') / sigma_eps^2 with D_i = C (I + Z'Z C)^{-1}
    Eigen::PartialPivLU<Matrix> lu(A);
    m.D_i_.push_back(C * lu.inverse());
    const double det = lu.determinant();
    if (!(det > 0.0))
      fail(ErrorKind::NotPositiveDefinite, "subject covariance block is not PD");
    m.logdet_ += std::log(det);
  }
  return m;
}

CovarianceModel CovarianceModel::dense(Matrix V) {
  CovarianceModel m;
  m.structured_ = false;
  m.n_ = static_cast<int>(V.rows());
  if (V.rows() != V.cols())
    fail(ErrorKind::NotPositiveDefinite, "covariance must be square");
  if ((V - V.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, V.cwiseAbs().maxCoeff()))
    fail(ErrorKind::NotPositiveDefinite, "covariance must be symmetric");
  m.V_ = std::move(V);
  m.llt_.compute(m.V_);
  if (m.llt_.info() != Eigen::Success)
    fail(ErrorKind::NotPositiveDefinite, "covariance is not positive definite");
  return m;
}

Matrix CovarianceModel::apply(const Matrix& B) const {
  if (!structured_) return V_ * B;
  Matrix out = sigma_eps_sq_ * B;
  for (const auto& [b, e] : spans_) {
    const auto Zi = Zrows_.middleRows(b, e - b);
    out.middleRows(b, e - b) += Zi * (Sigma_b_ * (Zi.transpose() * B.middleRows(b, e - b)));
  }
  return out;
}

Matrix CovarianceModel::solve(const Matrix& B) const {
  if (!structured_) return llt_.solve(B);
  Matrix out = B;
  for (size_t s = 0; s < spans_.size(); ++s) {
    const auto [b, e] = spans_[s];
    const auto Zi = Zrows_.middleRows(b, e - b);
    out.middleRows(b, e - b).noalias() -=
        Zi * (D_i_[s] * (Zi.transpose() * B.middleRows(b, e - b)));
  }
  return out / sigma_eps_sq_;
}

double CovarianceModel::logdet() const {
  if (structured_) return logdet_;
  return 2.0 * Matrix(llt_.matrixL()).diagonal().array().log().sum();
}

Matrix CovarianceModel::inv_sqrt() const {
  auto block_inv_sqrt = [](const Matrix& A) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
    if (eig.eigenvalues().minCoeff() <= 0.0)
      fail(ErrorKind::NotPositiveDefinite, "covariance block is not PD");
    return Matrix(eig.eigenvectors() *
                  eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                  eig.eigenvectors().transpose());
  };
  if (!structured_) return block_inv_sqrt(V_);
  Matrix out = Matrix::Zero(n_, n_);
  for (const auto& [b, e] : spans_) {
    const int ni = e - b;
    const auto Zi = Zrows_.middleRows(b, ni);
    const Matrix Vi = sigma_eps_sq_ * Matrix::Identity(ni, ni) +
                      Zi * Sigma_b_ * Zi.transpose();
    out.block(b, b, ni, ni) = block_inv_sqrt(Vi);
  }
  return out;
}

Matrix CovarianceModel::dense_V() const {
  if (!structured_) return V_;
  Matrix V = sigma_eps_sq_ * Matrix::Identity(n_, n_);
  for (const auto& [b, e] : spans_) {
    const int ni = e - b;
    const auto Zi = Zrows_.middleRows(b, ni);
    V.block(b, b, ni, ni) += Zi * Sigma_b_ * Zi.transpose();
  }
  return V;
}

}  // namespace longpeer
