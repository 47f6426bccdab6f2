#pragma once

#include <Eigen/Dense>

#include "longpeer/error.hpp"

namespace longpeer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Generalized singular value decomposition of a pair (A, B) with A n x pt,
// B m x pt, under the shape assumptions n <= m <= pt <= m + n and
// rank([A; B]) = pt:
//
//   A = U * [0 S] * G^{-1}        S = diag(sigma_1..sigma_ell, 1, ..., 1)
//   B = Vmat * [M 0] * G^{-1}     M = diag(1, ..., 1, mu_1..mu_ell)
//
// with U (n x n) and Vmat (m x m) orthogonal, G (pt x pt) nonsingular,
// ell = n + m - pt paired values ordered 0 < sigma_1 <= ... <= sigma_ell < 1,
// 1 > mu_1 >= ... >= mu_ell > 0 and sigma_k^2 + mu_k^2 = 1.
//
// Column bookkeeping of G (0-based):
//   cols [0, pt-n)      pair (0, 1)   -- invisible to A
//   cols [pt-n, m)      pair (sigma_j, mu_j), j = col - (pt - n)
//   cols [m, pt)        pair (1, 0)   -- null directions of B
struct GsvdFactors {
  Matrix U;       // n x n orthogonal
  Matrix Vmat;    // m x m orthogonal
  Matrix G;       // pt x pt nonsingular
  Matrix G_inv;   // pt x pt, inverse of G
  Vector sigma;   // ell ascending values in (0, 1)
  Vector mu;      // ell descending values in (0, 1)
  int ell = 0;    // n + m - pt
  int null_dim = 0;  // c = pt - m, dimension of Null(B)

  int n = 0, m = 0, pt = 0;

  // Dense diagonal factors [0 S] (n x pt) and [M 0] (m x pt).
  Matrix s_factor() const;
  Matrix m_factor() const;
};

// GSVD of the pair (A, B) via QR of the stacked matrix followed by a CS
// decomposition of the partitioned orthonormal factor.  Throws
// ShapeAssumptionViolated if the shape assumptions fail and
// StackedRankDeficient if rank([A; B]) < pt.
GsvdFactors gsvd_pair(const Matrix& A, const Matrix& B);

// Solve Amat * x = rhs for symmetric positive-definite Amat.
// Throws NotPositiveDefinite on a pivot failure or if Amat is not
// symmetric to 1e-10 relative.
Matrix solve_spd(const Matrix& Amat, const Matrix& rhs);

// Moore-Penrose pseudoinverse via SVD with rank cutoff
// max(rows, cols) * eps * sigma_max.  Zero matrix maps to zero.
Matrix pseudoinverse(const Matrix& Amat);

// Rank by the same singular-value cutoff as pseudoinverse().
int numerical_rank(const Matrix& Amat);

}  // namespace longpeer
