#pragma once

#include <vector>

#include "longpeer/linalg.hpp"

namespace longpeer {

// Per-component penalty operator: ridge (identity), second difference, or a
// decomposition penalty L_Q = phi_b P_Q + phi_a (I - P_Q) built from a basis
// Q whose columns span the preferred subspace.
struct PenaltySpec {
  enum class Kind { ridge, second_difference, decomposition };

  Kind kind = Kind::ridge;
  Matrix Q;            // p x J, decomposition only
  double phi_a = 1.0;  // weight off the preferred subspace
  double phi_b = 1.0;  // weight on the preferred subspace

  static PenaltySpec ridge() { return {}; }
  static PenaltySpec second_difference() {
    PenaltySpec s;
    s.kind = Kind::second_difference;
    return s;
  }
  static PenaltySpec decomposition(Matrix Q, double phi_a, double phi_b) {
    PenaltySpec s;
    s.kind = Kind::decomposition;
    s.Q = std::move(Q);
    s.phi_a = phi_a;
    s.phi_b = phi_b;
    return s;
  }
};

struct PenaltyMatrix {
  Matrix L;          // m x p
  int null_dim = 0;  // dim Null(L): 0 for ridge/decomposition, 2 for second difference
};

// Assembled block penalty blockdiag{lambda_d L_d}, d = 0..D.
struct BlockPenalty {
  struct Block {
    double lambda = 1.0;
    PenaltyMatrix mat;
  };
  std::vector<Block> blocks;

  int components() const { return static_cast<int>(blocks.size()); }
  int cols() const;  // (D+1) p
  int rows() const;

  bool invertible() const;  // every block has null_dim 0 and lambda > 0

  Matrix assembled() const;  // blockdiag{lambda_d L_d}
  Matrix gram() const;       // blockdiag{lambda_d^2 L_d'L_d}
  // gram with the stored lambdas replaced; used by the estimator, which
  // carries the tuning values in VarianceComponents.
  Matrix gram_with(const Vector& lambda) const;
  // (L'L)^{-1}; throws SingularBlockForMixedModel on a rank-deficient block.
  Matrix gram_inverse() const;
  Matrix gram_inverse_with(const Vector& lambda) const;

  // log det of blockdiag{lambda_d^2 L_d'L_d}; same invertibility contract.
  double gram_logdet_with(const Vector& lambda) const;
};

// Orthogonal projection P_Q = Q Q^+ onto Range(Q) through a rank-revealing
// pseudoinverse.  Throws ZeroBasis when every column is numerically zero.
Matrix projection_from_basis(const Matrix& Q);

// Decomposition penalty of Eq-style form phi_b P_Q + phi_a (I - P_Q).
PenaltyMatrix make_decomposition(const PenaltySpec& spec);

// (p-2) x p second-difference stencil [1 -2 1]; annihilates constants and
// linear trends exactly.
PenaltyMatrix make_second_difference(int p);

PenaltyMatrix make_ridge(int p);

PenaltyMatrix make_penalty(const PenaltySpec& spec, int p);

// blockdiag{lambda_d L_d} for specs of size D+1 and matching lambda.
BlockPenalty assemble_block(const std::vector<PenaltySpec>& specs,
                            const std::vector<double>& lambda, int p);

}  // namespace longpeer
