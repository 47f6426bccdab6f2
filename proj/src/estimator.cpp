#include "longpeer/estimator.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace longpeer {

void VarianceComponents::validate(int D, int r) const {
  if (lambda.size() != D + 1)
    fail(ErrorKind::InvalidConfig, "need D+1 lambda values");
  for (int d = 0; d <= D; ++d)
    if (!(lambda[d] > 0.0)) fail(ErrorKind::InvalidConfig, "lambda must be positive");
  if (!(sigma_eps_sq > 0.0))
    fail(ErrorKind::InvalidConfig, "sigma_eps^2 must be positive");
  if (Sigma_b.rows() != r || Sigma_b.cols() != r)
    fail(ErrorKind::InvalidConfig, "Sigma_b has the wrong dimension");
}

namespace {

// Shared pieces of every V1-based formula:
//   H = L'L + W'V^{-1}W (the generalized ridge normal matrix),
//   S = W'V^{-1}X, s = W'V^{-1}y, and the V^{-1}-applied design columns.
struct BlupSystem {
  Matrix Vi_W;   // V^{-1} W
  Matrix Vi_X;   // V^{-1} X
  Vector Vi_y;   // V^{-1} y
  Matrix S;      // W'V^{-1}X
  Vector s;      // W'V^{-1}y
  Eigen::LLT<Matrix> H_llt;
  Matrix XtV1iX;          // X'V1^{-1}X
  Eigen::LDLT<Matrix> XtV1iX_ldlt;

  // X'V1^{-1} as a K x n map
  Matrix XtV1i;

  Vector beta;
  Vector gamma;
};

BlupSystem build_blup_system(const DesignMatrices& dm, const Matrix& gram,
                             const CovarianceModel& V) {
  BlupSystem sys;
  sys.Vi_W = V.solve(dm.W);
  sys.Vi_X = V.solve(dm.X);
  sys.Vi_y = V.solve(dm.y);
  sys.S = sys.Vi_W.transpose() * dm.X;
  sys.s = sys.Vi_W.transpose() * dm.y;

  Matrix H = gram + dm.W.transpose() * sys.Vi_W;
  sys.H_llt.compute(H);
  if (sys.H_llt.info() != Eigen::Success)
    fail(ErrorKind::SingularSystem, "ridge normal matrix is not positive definite");

  const Matrix HiS = sys.H_llt.solve(sys.S);
  sys.XtV1iX = dm.X.transpose() * sys.Vi_X - sys.S.transpose() * HiS;
  sys.XtV1iX_ldlt.compute(sys.XtV1iX);
  if (sys.XtV1iX_ldlt.info() != Eigen::Success)
    fail(ErrorKind::SingularSystem, "X'V1^{-1}X is singular");

  // X'V1^{-1} = X'V^{-1} - S' H^{-1} W'V^{-1}
  sys.XtV1i = sys.Vi_X.transpose() - HiS.transpose() * sys.Vi_W.transpose();

  const Vector XtV1iy = sys.XtV1i * dm.y;
  sys.beta = sys.XtV1iX_ldlt.solve(XtV1iy);
  sys.gamma = sys.H_llt.solve(sys.s - sys.S * sys.beta);
  return sys;
}

CovarianceModel model_from_vc(const DesignMatrices& dm, const VarianceComponents& vc) {
  vc.validate(dm.D, dm.r);
  return CovarianceModel::structured(dm, vc.sigma_eps_sq, vc.Sigma_b);
}

}  // namespace

CovarianceStructures covariance_structures(const DesignMatrices& dm,
                                           const BlockPenalty& bp,
                                           const VarianceComponents& vc) {
  CovarianceStructures cs;
  cs.V = model_from_vc(dm, vc).dense_V();
  cs.V1 = cs.V + dm.W * bp.gram_inverse_with(vc.lambda) * dm.W.transpose();
  return cs;
}

RidgeEstimates ridge_solve(const DesignMatrices& dm, const BlockPenalty& bp,
                           const VarianceComponents& vc) {
  return ridge_solve(dm, bp, vc.lambda, model_from_vc(dm, vc));
}

RidgeEstimates ridge_solve(const DesignMatrices& dm, const BlockPenalty& bp,
                           const Vector& lambda, const CovarianceModel& V) {
  const int K = dm.K(), q = dm.wcols();
  Matrix C(dm.n(), K + q);
  C.leftCols(K) = dm.X;
  C.rightCols(q) = dm.W;

  const Matrix Vi_C = V.solve(C);
  Matrix M = C.transpose() * Vi_C;
  M.bottomRightCorner(q, q) += bp.gram_with(lambda);

  Eigen::LDLT<Matrix> ldlt(M);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    fail(ErrorKind::SingularSystem, "penalized normal equations are singular");
  const Vector sol = ldlt.solve(Vi_C.transpose() * dm.y);
  if (!sol.allFinite())
    fail(ErrorKind::SingularSystem, "penalized normal equations are singular");

  return {sol.head(K), sol.tail(q)};
}

BlupEstimates blup(const DesignMatrices& dm, const BlockPenalty& bp,
                   const VarianceComponents& vc) {
  return blup(dm, bp, vc.lambda, model_from_vc(dm, vc), vc.Sigma_b);
}

BlupEstimates blup(const DesignMatrices& dm, const BlockPenalty& bp,
                   const Vector& lambda, const CovarianceModel& V,
                   const Matrix& Sigma_b) {
  const auto sys = build_blup_system(dm, bp.gram_with(lambda), V);

  BlupEstimates out;
  out.beta = sys.beta;
  out.gamma = sys.gamma;

  // b = Sigma_b Z' V1^{-1} (y - X beta); V1^{-1} u = V^{-1}u - V^{-1}W H^{-1} W'V^{-1}u
  const Vector resid = dm.y - dm.X * sys.beta;
  const Vector Vi_r = V.solve(resid);
  const Vector V1i_r = Vi_r - sys.Vi_W * sys.H_llt.solve(dm.W.transpose() * Vi_r);
  out.b = Vector::Zero(dm.r * dm.N);
  for (int s = 0; s < dm.N; ++s) {
    const auto [b0, e0] = dm.subject_spans[s];
    const auto Zi = dm.Zrows.middleRows(b0, e0 - b0);
    out.b.segment(s * dm.r, dm.r) = Sigma_b * (Zi.transpose() * V1i_r.segment(b0, e0 - b0));
  }
  return out;
}

ConditionalCovariances conditional_covariances(const DesignMatrices& dm,
                                               const BlockPenalty& bp,
                                               const VarianceComponents& vc,
                                               bool unconditional) {
  return conditional_covariances(dm, bp, vc.lambda, model_from_vc(dm, vc), unconditional);
}

ConditionalCovariances conditional_covariances(const DesignMatrices& dm,
                                               const BlockPenalty& bp,
                                               const Vector& lambda,
                                               const CovarianceModel& V,
                                               bool unconditional) {
  const Matrix gram = bp.gram_with(lambda);
  const auto sys = build_blup_system(dm, gram, V);

  // A_gamma = H^{-1}W'V^{-1} [I - X (X'V1iX)^{-1} X'V1i]
  const Matrix B1 = sys.H_llt.solve(sys.Vi_W.transpose());
  const Matrix A_gamma =
      B1 - sys.H_llt.solve(sys.S) * sys.XtV1iX_ldlt.solve(sys.XtV1i);

  ConditionalCovariances out;
  if (unconditional) {
    // Cov_u(beta) = (X'V1^{-1}X)^{-1}; Cov_u(gamma) adds the W Sigma_w W' term.
    out.cov_beta = sys.XtV1iX_ldlt.solve(Matrix::Identity(dm.K(), dm.K()));
    const Matrix AV = V.apply(A_gamma.transpose()).transpose();
    const Matrix AW = A_gamma * dm.W;
    out.cov_gamma = AV * A_gamma.transpose() +
                    AW * bp.gram_inverse_with(lambda) * AW.transpose();
  } else {
    const Matrix VX = V.apply(sys.XtV1i.transpose());  // n x K
    const Matrix mid = sys.XtV1i * VX;
    const Matrix XtV1iXinv = sys.XtV1iX_ldlt.solve(Matrix::Identity(dm.K(), dm.K()));
    out.cov_beta = XtV1iXinv * mid * XtV1iXinv;
    const Matrix AV = V.apply(A_gamma.transpose()).transpose();  // q x n
    out.cov_gamma = AV * A_gamma.transpose();
  }
  // symmetrize against roundoff
  out.cov_beta = 0.5 * (out.cov_beta + out.cov_beta.transpose()).eval();
  out.cov_gamma = 0.5 * (out.cov_gamma + out.cov_gamma.transpose()).eval();
  return out;
}

double objective_value(const DesignMatrices& dm, const BlockPenalty& bp,
                       const VarianceComponents& vc, const Vector& beta,
                       const Vector& gamma) {
  const auto V = model_from_vc(dm, vc);
  const Vector resid = dm.y - dm.X * beta - dm.W * gamma;
  const Vector vi_resid = V.solve(resid);
  double value = resid.dot(vi_resid);
  const Matrix gram = bp.gram_with(vc.lambda);
  value += gamma.dot(gram * gamma);
  return value;
}

Prediction predict(const DesignMatrices& dm, const FitResult& fit,
                   bool with_covariance, bool unconditional) {
  Prediction out;
  out.y_hat = dm.X * fit.beta + dm.W * fit.gamma;
  for (int s = 0; s < dm.N; ++s) {
    const auto [b0, e0] = dm.subject_spans[s];
    out.y_hat.segment(b0, e0 - b0) +=
        dm.Zrows.middleRows(b0, e0 - b0) * fit.blup_b.segment(s * dm.r, dm.r);
  }
  if (!with_covariance) return out;

  // Compose the covariance from the explicit linear maps y -> (beta, gamma, b)
  // rather than a closed form for A_y.
  const int n = dm.n();
  const auto V = CovarianceModel::structured(dm, fit.vc.sigma_eps_sq, fit.vc.Sigma_b);
  const auto sys = build_blup_system(dm, fit.penalty.gram_with(fit.vc.lambda), V);

  const Matrix Bbeta = sys.XtV1iX_ldlt.solve(sys.XtV1i);  // K x n
  const Matrix B1 = sys.H_llt.solve(sys.Vi_W.transpose());
  const Matrix A_gamma = B1 - sys.H_llt.solve(sys.S) * Bbeta;

  // F = V1^{-1}(I - X Bbeta) drives the b map
  const Matrix IXB = Matrix::Identity(n, n) - dm.X * Bbeta;
  const Matrix Vi_IXB = V.solve(IXB);
  const Matrix F = Vi_IXB - sys.Vi_W * sys.H_llt.solve(dm.W.transpose() * Vi_IXB);

  Matrix A_y = dm.X * Bbeta + dm.W * A_gamma;
  for (int s = 0; s < dm.N; ++s) {
    const auto [b0, e0] = dm.subject_spans[s];
    const auto Zi = dm.Zrows.middleRows(b0, e0 - b0);
    const Matrix Mb_s = fit.vc.Sigma_b * (Zi.transpose() * F.middleRows(b0, e0 - b0));
    A_y.middleRows(b0, e0 - b0) += Zi * Mb_s;
  }

  Matrix VAyt = V.apply(A_y.transpose());  // n x n
  if (unconditional) {
    const Matrix WtAyt = dm.W.transpose() * A_y.transpose();
    VAyt += dm.W * (fit.penalty.gram_inverse_with(fit.vc.lambda) * WtAyt);
  }
  out.cov = A_y * VAyt;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

double band_multiplier(double level) {
  if (!(level > 0.0 && level < 1.0))
    fail(ErrorKind::InvalidConfig, "confidence level must be in (0, 1)");
  if (level == 0.95) return 1.96;  // the conventional rounded value

  // Acklam's rational approximation to the standard normal quantile,
  // refined with one Halley step.
  const double p = 0.5 * (1.0 + level);
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double qv = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * qv + c[1]) * qv + c[2]) * qv + c[3]) * qv + c[4]) * qv + c[5]) /
        ((((d[0] * qv + d[1]) * qv + d[2]) * qv + d[3]) * qv + 1.0);
  } else if (p <= 1.0 - plow) {
    const double qv = p - 0.5, rr = qv * qv;
    x = (((((a[0] * rr + a[1]) * rr + a[2]) * rr + a[3]) * rr + a[4]) * rr + a[5]) * qv /
        (((((b[0] * rr + b[1]) * rr + b[2]) * rr + b[3]) * rr + b[4]) * rr + 1.0);
  } else {
    const double qv = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * qv + c[1]) * qv + c[2]) * qv + c[3]) * qv + c[4]) * qv + c[5]) /
        ((((d[0] * qv + d[1]) * qv + d[2]) * qv + d[3]) * qv + 1.0);
  }
  // one Halley refinement using the complementary error function
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

namespace {

BandEstimate band_from_weights(const FitResult& fit, const Vector& f, double t,
                               double level) {
  const int p = fit.p;
  BandEstimate band;
  band.t = t;
  band.level = level;
  band.gamma_t = Vector::Zero(p);
  for (int d = 0; d <= fit.D; ++d) band.gamma_t += f[d] * fit.gamma_component(d);

  band.se = Vector::Zero(p);
  for (int j = 0; j < p; ++j) {
    double v = 0.0;
    for (int d = 0; d <= fit.D; ++d)
      for (int e = 0; e <= fit.D; ++e)
        v += f[d] * f[e] * fit.cov_gamma(d * p + j, e * p + j);
    band.se[j] = std::sqrt(std::max(0.0, v));
  }
  const double z = band_multiplier(level);
  band.lower = band.gamma_t - z * band.se;
  band.upper = band.gamma_t + z * band.se;
  return band;
}

}  // namespace

BandEstimate gamma_at_time(const FitResult& fit, const TimeStructure& ts, double t,
                           double level) {
  if (ts.dimension() != fit.D)
    fail(ErrorKind::InvalidConfig, "time structure does not match the fit");
  return band_from_weights(fit, ts.row(t), t, level);
}

BandEstimate component_band(const FitResult& fit, int d, double level) {
  Vector f = Vector::Zero(fit.D + 1);
  f[d] = 1.0;
  return band_from_weights(fit, f, 0.0, level);
}

}  // namespace longpeer
