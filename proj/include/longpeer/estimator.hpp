#pragma once

#include <optional>

#include "longpeer/covariance.hpp"
#include "longpeer/dataset.hpp"
#include "longpeer/penalty.hpp"

namespace longpeer {

// Tuning values lambda_d, error variance and the per-subject random-effect
// covariance (all subjects share Sigma_b).
struct VarianceComponents {
  Vector lambda;               // D+1 positive values
  double sigma_eps_sq = 1.0;   // > 0
  Matrix Sigma_b;              // r x r positive semi-definite

  void validate(int D, int r) const;
};

// Dense V and V1 = V + W (L'L)^{-1} W'; intended for small problems and
// cross-checks, production paths never materialize these.
struct CovarianceStructures {
  Matrix V;
  Matrix V1;
};

CovarianceStructures covariance_structures(const DesignMatrices& dm,
                                           const BlockPenalty& bp,
                                           const VarianceComponents& vc);

struct RidgeEstimates {
  Vector beta;
  Vector gamma;
};

// Generalized ridge estimate (C'V^{-1}C + blockdiag{0, L'L})^{-1} C'V^{-1} y
// with C = [X W]; bp supplies the unit-lambda operators, vc.lambda the
// tuning values.
RidgeEstimates ridge_solve(const DesignMatrices& dm, const BlockPenalty& bp,
                           const VarianceComponents& vc);
RidgeEstimates ridge_solve(const DesignMatrices& dm, const BlockPenalty& bp,
                           const Vector& lambda, const CovarianceModel& V);

struct BlupEstimates {
  Vector beta;
  Vector gamma;
  Vector b;  // rN
};

// BLUP formulas through V1: beta = (X'V1i X)^{-1} X'V1i y,
// gamma = (L'L)^{-1} W'V1i (y - X beta), b = Sigma_b Z'V1i (y - X beta).
BlupEstimates blup(const DesignMatrices& dm, const BlockPenalty& bp,
                   const VarianceComponents& vc);
BlupEstimates blup(const DesignMatrices& dm, const BlockPenalty& bp,
                   const Vector& lambda, const CovarianceModel& V, const Matrix& Sigma_b);

struct ConditionalCovariances {
  Matrix cov_beta;   // K x K
  Matrix cov_gamma;  // (D+1)p x (D+1)p
};

// Conditional-on-gamma covariances; `unconditional` substitutes V1 for V.
ConditionalCovariances conditional_covariances(const DesignMatrices& dm,
                                               const BlockPenalty& bp,
                                               const VarianceComponents& vc,
                                               bool unconditional = false);
ConditionalCovariances conditional_covariances(const DesignMatrices& dm,
                                               const BlockPenalty& bp,
                                               const Vector& lambda,
                                               const CovarianceModel& V,
                                               bool unconditional = false);

// Value of the penalized objective at (beta, gamma); used by optimality and
// equivalence checks.
double objective_value(const DesignMatrices& dm, const BlockPenalty& bp,
                       const VarianceComponents& vc, const Vector& beta,
                       const Vector& gamma);

struct FitResult {
  Vector beta;
  Matrix cov_beta;
  Vector gamma;      // stacked (D+1)p
  Matrix cov_gamma;  // conditional (V-based)
  Vector blup_b;     // rN
  VarianceComponents vc;

  double reml_loglik = 0.0;
  double aic = 0.0;        // -2 loglik + 2 (variance params + K)
  double paper_aic = 0.0;  // -aic / 2, the maximized convention

  Vector fitted;  // X beta + W gamma + Z b

  bool converged = false;
  int iterations = 0;
  bool boundary = false;  // some variance ratio hit the optimizer box bound

  int D = 0, p = 0, r = 1, N = 0;

  // unit-lambda penalty operators, kept so that downstream formulas
  // (predict, bands on reloaded fits) can rebuild L'L
  BlockPenalty penalty;

  Vector gamma_component(int d) const { return gamma.segment(d * p, p); }
  Matrix cov_gamma_block(int d, int e) const {
    return cov_gamma.block(d * p, e * p, p, p);
  }
};

struct FitOptions {
  // false freezes the variance components at `initial` and only computes
  // BLUPs, covariances and the restricted log-likelihood there
  bool optimize = true;
  std::optional<VarianceComponents> initial;

  int max_iterations = 500;
  double rel_tol = 1e-8;
  int multistarts = 3;
  bool compute_covariances = true;
};

// REML fit of the mixed-model representation y = X beta + [W Z] gamma* + eps
// with gamma* ~ N(0, blockdiag{(L'L)^{-1}, Sigma_b}).  Non-convergence is
// reported through FitResult::converged, not an exception.
FitResult reml_fit(const DesignMatrices& dm, const std::vector<PenaltySpec>& specs,
                   const FitOptions& opts = {});

// Restricted log-likelihood at fixed variance components (the quantity the
// optimizer maximizes), exposed for oracle checks.
double reml_loglik(const DesignMatrices& dm, const std::vector<PenaltySpec>& specs,
                   const VarianceComponents& vc);

struct Prediction {
  Vector y_hat;
  Matrix cov;  // empty unless requested
};

Prediction predict(const DesignMatrices& dm, const FitResult& fit,
                   bool with_covariance = true, bool unconditional = false);

struct BandEstimate {
  double t = 0.0;
  Vector gamma_t;
  Vector se;
  Vector lower;
  Vector upper;
  double level = 0.95;
};

// Pointwise band for gamma(t, .) = [1 f_1(t) ... f_D(t)] (x) I_p applied to
// the stacked estimate; half-width is exactly 1.96 se at level 0.95.
BandEstimate gamma_at_time(const FitResult& fit, const TimeStructure& ts, double t,
                           double level = 0.95);

// Band for a single component gamma_d; used by band-nullity diagnostics.
BandEstimate component_band(const FitResult& fit, int d, double level = 0.95);

// Standard normal quantile; level 0.95 uses the conventional 1.96 exactly.
double band_multiplier(double level);

}  // namespace longpeer
