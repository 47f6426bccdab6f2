#pragma once

#include "longpeer/estimator.hpp"

namespace longpeer {

// Whitened regression problem: W_tilde = V^{-1/2} W, y_tilde = V^{-1/2} y,
// and the penalty rescaled so that L = lambda0 * L_scaled with the (0,0)
// block of L_scaled equal to L_0.
struct ScaledProblem {
  Matrix W_tilde;
  Vector y_tilde;
  Matrix L_scaled;
  double lambda0 = 1.0;
};

ScaledProblem scale_problem(const DesignMatrices& dm, const BlockPenalty& bp,
                            const VarianceComponents& vc);
ScaledProblem scale_problem(const DesignMatrices& dm, const BlockPenalty& bp,
                            const Vector& lambda, const CovarianceModel& V);

// Filter-factor expansion of the generalized ridge estimate in generalized
// singular vectors; valid when X = 0 or X'V^{-1}W = 0 and the shape
// assumptions of gsvd_pair hold for (W_tilde, L_scaled).
Vector peer_estimate(const ScaledProblem& sp, const GsvdFactors& gf);

// gamma - E[gamma_hat], equal to (W'V^{-1}W + L'L)^{-1} L'L gamma; zero
// exactly when gamma lies in Null(L).
Vector bias_gsvd(const ScaledProblem& sp, const GsvdFactors& gf,
                 const Vector& gamma_true);

// Var[gamma_hat] with respect to the original noise covariance V.
Matrix variance_gsvd(const ScaledProblem& sp, const GsvdFactors& gf);

// Consistency route for general X: gamma_hat = -A_1 X'V^{-1}y + A_2^{-1} W'V^{-1}y
// with A_2 the partialled-out Gram matrix (its inverse is the estimator map)
// and A_1 = A_2^{-1} W'V^{-1}X (X'V^{-1}X)^{-1}.
Vector general_x_gamma(const DesignMatrices& dm, const BlockPenalty& bp,
                       const Vector& lambda, const CovarianceModel& V);

}  // namespace longpeer
