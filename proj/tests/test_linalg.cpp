#include "longpeer/linalg.hpp"

#include <gtest/gtest.h>

#include <random>

#include "testutil.hpp"

using longpeer::Error;
using longpeer::ErrorKind;
using longpeer::GsvdFactors;
using longpeer::Matrix;
using longpeer::Vector;
using testutil::gauss_jordan_inverse;
using testutil::random_matrix;
using testutil::random_spd;
using testutil::random_vector;

namespace {

// (p-2) x p second-difference stencil, used as a rank-deficient B.
Matrix second_difference(int p) {
  Matrix L = Matrix::Zero(p - 2, p);
  for (int i = 0; i < p - 2; ++i) {
    L(i, i) = 1.0;
    L(i, i + 1) = -2.0;
    L(i, i + 2) = 1.0;
  }
  return L;
}

void check_reconstruction(const GsvdFactors& f, const Matrix& A, const Matrix& B) {
  const double scale = std::max(A.norm(), B.norm());
  EXPECT_LT((f.U * f.s_factor() * f.G_inv - A).norm(), 1e-10 * scale);
  EXPECT_LT((f.Vmat * f.m_factor() * f.G_inv - B).norm(), 1e-10 * scale);
  EXPECT_LT((f.U.transpose() * f.U - Matrix::Identity(f.n, f.n)).norm(), 1e-12);
  EXPECT_LT((f.Vmat.transpose() * f.Vmat - Matrix::Identity(f.m, f.m)).norm(), 1e-12);
  EXPECT_LT((f.G * f.G_inv - Matrix::Identity(f.pt, f.pt)).norm(), 1e-10);
  for (int k = 0; k < f.ell; ++k) {
    EXPECT_NEAR(f.sigma[k] * f.sigma[k] + f.mu[k] * f.mu[k], 1.0, 1e-12);
    EXPECT_GT(f.sigma[k], 0.0);
    EXPECT_LT(f.sigma[k], 1.0);
    if (k > 0) {
      EXPECT_GE(f.sigma[k], f.sigma[k - 1] - 1e-14);
      EXPECT_LE(f.mu[k], f.mu[k - 1] + 1e-14);
    }
  }
}

}  // namespace

TEST(Gsvd, IdentityPairSplitsEvenly) {
  const Matrix I2 = Matrix::Identity(2, 2);
  GsvdFactors f = longpeer::gsvd_pair(I2, I2);
  ASSERT_EQ(f.ell, 2);
  EXPECT_EQ(f.null_dim, 0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(f.sigma[k], inv_sqrt2, 1e-14);
    EXPECT_NEAR(f.mu[k], inv_sqrt2, 1e-14);
  }
  check_reconstruction(f, I2, I2);
}

TEST(Gsvd, QuotientSingularValuesWhenBInvertible) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const int pt = 7, n = 5;
    const Matrix A = random_matrix(rng, n, pt);
    Matrix B = random_matrix(rng, pt, pt);
    B += pt * Matrix::Identity(pt, pt);  // keep well away from singular
    GsvdFactors f = longpeer::gsvd_pair(A, B);
    ASSERT_EQ(f.ell, n);
    EXPECT_EQ(f.null_dim, 0);
    check_reconstruction(f, A, B);

    // Oracle: sigma_k / mu_k are the ordinary singular values of A B^{-1}.
    Eigen::JacobiSVD<Matrix> svd(A * gauss_jordan_inverse(B));
    Vector sv = svd.singularValues();  // descending
    for (int k = 0; k < n; ++k) {
      const double want = sv[n - 1 - k];  // ascending
      EXPECT_NEAR(f.sigma[k] / f.mu[k], want, 1e-9 * std::max(1.0, want));
    }
  }
}

TEST(Gsvd, SecondDifferenceNullSpaceSaturates) {
  std::mt19937_64 rng(7);
  const int pt = 5;
  const Matrix B = second_difference(pt);  // 3 x 5, full row rank, c = 2
  const Matrix A = random_matrix(rng, 3, pt);
  GsvdFactors f = longpeer::gsvd_pair(A, B);
  EXPECT_EQ(f.null_dim, 2);
  EXPECT_EQ(f.ell, 1);
  check_reconstruction(f, A, B);

  // The trailing c columns of G span Null(B).
  EXPECT_LT((B * f.G.rightCols(2)).norm(), 1e-10 * B.norm());

  // Brute-force filter oracle: for several ridge weights the GSVD expansion
  // of (A'A + t^2 B'B)^{-1} A' b must match a dense solve.
  const Vector b = random_vector(rng, 3);
  for (double t : {0.1, 1.0, 3.0}) {
    const Matrix lhs = A.transpose() * A + t * t * B.transpose() * B;
    const Vector want = gauss_jordan_inverse(lhs) * (A.transpose() * b);
    Vector got = Vector::Zero(pt);
    const Vector uty = f.U.transpose() * b;
    for (int col = pt - 3; col < pt; ++col) {
      const int j = col - (pt - 3);
      double s = 1.0, u = 0.0;
      if (j < f.ell) {
        s = f.sigma[j];
        u = f.mu[j];
      }
      got += s / (s * s + t * t * u * u) * uty[j] * f.G.col(col);
    }
    EXPECT_LT((got - want).norm(), 1e-9 * want.norm());
  }
}

TEST(Gsvd, IdentityPenaltyMatchesOrdinarySvdFilter) {
  std::mt19937_64 rng(99);
  const int pt = 6, n = 4;
  const Matrix A = random_matrix(rng, n, pt);
  GsvdFactors f = longpeer::gsvd_pair(A, Matrix::Identity(pt, pt));
  check_reconstruction(f, A, Matrix::Identity(pt, pt));
  Eigen::JacobiSVD<Matrix> svd(A);
  Vector sv = svd.singularValues();
  const double lambda = 0.7;
  for (int k = 0; k < f.ell; ++k) {
    const double s = sv[n - 1 - k];
    const double want = s * s / (s * s + lambda * lambda);
    const double got = f.sigma[k] * f.sigma[k] /
                       (f.sigma[k] * f.sigma[k] + lambda * lambda * f.mu[k] * f.mu[k]);
    EXPECT_NEAR(got, want, 1e-10);
  }
}

TEST(Gsvd, RandomInstancesReconstruct) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> dpt(3, 12);
    const int pt = dpt(rng);
    std::uniform_int_distribution<int> dm(std::max(1, pt - 2), pt);
    const int m = std::max(1, dm(rng));
    std::uniform_int_distribution<int> dn(std::max(1, pt - m), m);
    const int n = dn(rng);
    const Matrix A = random_matrix(rng, n, pt);
    const Matrix B = random_matrix(rng, m, pt);
    if (n > m || m > pt || pt > n + m) continue;
    GsvdFactors f = longpeer::gsvd_pair(A, B);
    check_reconstruction(f, A, B);
  }
}

TEST(Gsvd, RejectsBadShapesAndRankDeficiency) {
  std::mt19937_64 rng(5);
  // n > m violates the shape assumptions.
  EXPECT_THROW(longpeer::gsvd_pair(random_matrix(rng, 5, 6), random_matrix(rng, 3, 6)),
               Error);
  try {
    longpeer::gsvd_pair(random_matrix(rng, 5, 6), random_matrix(rng, 3, 6));
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeAssumptionViolated);
    EXPECT_EQ(e.exit_code(), 3);
  }

  // Stacked matrix with a zero column is rank deficient.
  Matrix A = random_matrix(rng, 3, 4);
  Matrix B = random_matrix(rng, 4, 4);
  A.col(2).setZero();
  B.col(2).setZero();
  try {
    longpeer::gsvd_pair(A, B);
    FAIL() << "expected StackedRankDeficient";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StackedRankDeficient);
  }
}

TEST(SolveSpd, MatchesExplicitInverseOracle) {
  const Matrix I = Matrix::Identity(4, 4);
  const Vector rhs = Vector::LinSpaced(4, 1.0, 4.0);
  EXPECT_LT((longpeer::solve_spd(I, rhs) - rhs).norm(), 1e-14);
  EXPECT_LT((longpeer::solve_spd(2.0 * I, rhs) - rhs / 2.0).norm(), 1e-14);

  std::mt19937_64 rng(11);
  const Matrix A = random_spd(rng, 8);
  const Matrix R = random_matrix(rng, 8, 3);
  const Matrix want = gauss_jordan_inverse(A) * R;
  EXPECT_LT(testutil::rel_err(longpeer::solve_spd(A, R), want), 1e-10);
}

TEST(SolveSpd, RejectsIndefiniteAndAsymmetric) {
  Matrix neg = -Matrix::Identity(3, 3);
  EXPECT_THROW(longpeer::solve_spd(neg, Matrix::Identity(3, 3)), Error);
  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 0.5;
  EXPECT_THROW(longpeer::solve_spd(asym, Matrix::Identity(3, 3)), Error);
}

TEST(Pseudoinverse, PenroseConditionsAndSpecialCases) {
  std::mt19937_64 rng(13);

  // Invertible square matrix: pseudoinverse equals the inverse.
  const Matrix A = random_spd(rng, 5);
  EXPECT_LT(testutil::rel_err(longpeer::pseudoinverse(A), gauss_jordan_inverse(A)), 1e-9);

  // Zero matrix maps to zero.
  EXPECT_EQ(longpeer::pseudoinverse(Matrix::Zero(3, 2)).norm(), 0.0);

  // Rank-1 outer product u v': pinv = v u' / (|u|^2 |v|^2).
  const Vector u = random_vector(rng, 6);
  const Vector v = random_vector(rng, 4);
  const Matrix outer = u * v.transpose();
  const Matrix want = v * u.transpose() / (u.squaredNorm() * v.squaredNorm());
  EXPECT_LT(testutil::rel_err(longpeer::pseudoinverse(outer), want), 1e-9);

  // Four Penrose conditions on a rank-deficient rectangular matrix.
  Matrix B = random_matrix(rng, 6, 4);
  B.col(3) = B.col(0) + B.col(1);
  const Matrix P = longpeer::pseudoinverse(B);
  const double s = B.norm();
  EXPECT_LT((B * P * B - B).norm(), 1e-9 * s);
  EXPECT_LT((P * B * P - P).norm(), 1e-9 * P.norm());
  EXPECT_LT(((B * P).transpose() - B * P).norm(), 1e-9);
  EXPECT_LT(((P * B).transpose() - P * B).norm(), 1e-9);
  EXPECT_EQ(longpeer::numerical_rank(B), 3);
}
