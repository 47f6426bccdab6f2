#include "longpeer/gsvd_oracle.hpp"

#include <cmath>

namespace longpeer {

namespace {

// (sigma, mu) for a G column, including the structural (0,1) and (1,0) pairs
// outside the stored ell block.
std::pair<double, double> pair_at(const GsvdFactors& gf, int col) {
  if (col < gf.pt - gf.n) return {0.0, 1.0};
  const int j = col - (gf.pt - gf.n);
  if (j < gf.ell) return {gf.sigma[j], gf.mu[j]};
  return {1.0, 0.0};
}

}  // namespace

ScaledProblem scale_problem(const DesignMatrices& dm, const BlockPenalty& bp,
                            const VarianceComponents& vc) {
  vc.validate(dm.D, dm.r);
  return scale_problem(dm, bp, vc.lambda,
                       CovarianceModel::structured(dm, vc.sigma_eps_sq, vc.Sigma_b));
}

ScaledProblem scale_problem(const DesignMatrices& dm, const BlockPenalty& bp,
                            const Vector& lambda, const CovarianceModel& V) {
  if (lambda.size() != bp.components())
    fail(ErrorKind::InvalidConfig, "lambda length must match the penalty blocks");
  ScaledProblem sp;
  sp.lambda0 = lambda[0];
  if (!(sp.lambda0 > 0.0)) fail(ErrorKind::InvalidConfig, "lambda_0 must be positive");

  const Matrix Vih = V.inv_sqrt();
  sp.W_tilde = Vih * dm.W;
  sp.y_tilde = Vih * dm.y;

  // L = lambda0 * blockdiag{L_0, (lambda_d/lambda0) L_d, ...}
  sp.L_scaled = Matrix::Zero(bp.rows(), bp.cols());
  int r0 = 0, c0 = 0;
  for (int d = 0; d < bp.components(); ++d) {
    const Matrix& L = bp.blocks[d].mat.L;
    sp.L_scaled.block(r0, c0, L.rows(), L.cols()) = (lambda[d] / sp.lambda0) * L;
    r0 += static_cast<int>(L.rows());
    c0 += static_cast<int>(L.cols());
  }
  return sp;
}

Vector peer_estimate(const ScaledProblem& sp, const GsvdFactors& gf) {
  const double l2 = sp.lambda0 * sp.lambda0;
  const Vector uty = gf.U.transpose() * sp.y_tilde;
  Vector gamma = Vector::Zero(gf.pt);
  for (int col = gf.pt - gf.n; col < gf.pt; ++col) {
    const auto [s, u] = pair_at(gf, col);
    const double w = s / (s * s + l2 * u * u);
    gamma += w * uty[col - (gf.pt - gf.n)] * gf.G.col(col);
  }
  return gamma;
}

Vector bias_gsvd(const ScaledProblem& sp, const GsvdFactors& gf,
                 const Vector& gamma_true) {
  const double l2 = sp.lambda0 * sp.lambda0;
  Vector bias = Vector::Zero(gf.pt);
  for (int col = 0; col < gf.pt; ++col) {
    const auto [s, u] = pair_at(gf, col);
    if (u == 0.0) continue;  // unpenalized directions carry no bias
    const double w = l2 * u * u / (s * s + l2 * u * u);
    // g_tilde_k' gamma with g_tilde_k the k-th column of G^{-T}
    bias += w * (gf.G_inv.row(col).dot(gamma_true)) * gf.G.col(col);
  }
  return bias;
}

Matrix variance_gsvd(const ScaledProblem& sp, const GsvdFactors& gf) {
  const double l2 = sp.lambda0 * sp.lambda0;
  Matrix var = Matrix::Zero(gf.pt, gf.pt);
  for (int col = gf.pt - gf.n; col < gf.pt; ++col) {
    const auto [s, u] = pair_at(gf, col);
    const double denom = s * s + l2 * u * u;
    const double w = s * s / (denom * denom);
    var.selfadjointView<Eigen::Lower>().rankUpdate(gf.G.col(col), w);
  }
  return var.selfadjointView<Eigen::Lower>();
}

Vector general_x_gamma(const DesignMatrices& dm, const BlockPenalty& bp,
                       const Vector& lambda, const CovarianceModel& V) {
  const Matrix Vi_W = V.solve(dm.W);
  const Matrix Vi_X = V.solve(dm.X);
  const Vector Vi_y = V.solve(dm.y);

  const Matrix WtViW = dm.W.transpose() * Vi_W;
  const Matrix WtViX = dm.W.transpose() * Vi_X;
  const Matrix XtViX = dm.X.transpose() * Vi_X;
  Eigen::LDLT<Matrix> xt(XtViX);

  const Matrix A2 = WtViW + bp.gram_with(lambda) -
                    WtViX * xt.solve(WtViX.transpose());
  Eigen::LDLT<Matrix> a2(A2);
  if (a2.info() != Eigen::Success)
    fail(ErrorKind::SingularSystem, "partialled Gram matrix is singular");

  const Vector XtViy = dm.X.transpose() * Vi_y;
  const Vector WtViy = dm.W.transpose() * Vi_y;
  // gamma = -A_1 X'V^{-1}y + A_2^{-1} W'V^{-1}y
  return a2.solve(WtViy) - a2.solve(WtViX * xt.solve(XtViy));
}

}  // namespace longpeer
