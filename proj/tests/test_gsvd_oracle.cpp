#include "longpeer/gsvd_oracle.hpp"

#include <gtest/gtest.h>

#include <random>

#include "testutil.hpp"

using longpeer::BlockPenalty;
using longpeer::CovarianceModel;
using longpeer::DesignMatrices;
using longpeer::DesignOptions;
using longpeer::GsvdFactors;
using longpeer::Matrix;
using longpeer::PenaltySpec;
using longpeer::ScaledProblem;
using longpeer::TimeStructure;
using longpeer::Vector;
using testutil::make_random_dataset;
using testutil::random_matrix;
using testutil::random_spd;
using testutil::random_vector;

namespace {

// X-free design: n observations of p-point curves, D = 0 or 1.
DesignMatrices xfree_design(std::mt19937_64& rng, int subjects, int p, int D) {
  auto ds = make_random_dataset(rng, subjects, p, 0, 2, 2);
  DesignOptions opts;
  opts.intercept = false;
  return longpeer::build_design(
      ds, D == 0 ? TimeStructure::constant() : TimeStructure::parse("t"), opts);
}

}  // namespace

TEST(ScaleProblem, IdentityAndScalarCovariance) {
  std::mt19937_64 rng(61);
  auto dm = xfree_design(rng, 3, 4, 0);
  const auto bp = longpeer::assemble_block({PenaltySpec::ridge()}, {1.0}, 4);
  const Vector lambda = Vector::Constant(1, 2.0);

  const auto sp_id = longpeer::scale_problem(
      dm, bp, lambda, CovarianceModel::dense(Matrix::Identity(dm.n(), dm.n())));
  EXPECT_LT((sp_id.W_tilde - dm.W).norm(), 1e-12);
  EXPECT_LT((sp_id.y_tilde - dm.y).norm(), 1e-12);
  EXPECT_EQ(sp_id.lambda0, 2.0);
  EXPECT_LT((sp_id.L_scaled - Matrix::Identity(4, 4)).norm(), 1e-14);

  const auto sp4 = longpeer::scale_problem(
      dm, bp, lambda, CovarianceModel::dense(4.0 * Matrix::Identity(dm.n(), dm.n())));
  EXPECT_LT((sp4.W_tilde - 0.5 * dm.W).norm(), 1e-12);
}

TEST(ScaleProblem, WhiteningMatchesExplicitSquareRoot) {
  std::mt19937_64 rng(62);
  auto dm = xfree_design(rng, 3, 4, 0);
  const auto bp = longpeer::assemble_block({PenaltySpec::ridge()}, {1.0}, 4);
  const Matrix Vd = random_spd(rng, dm.n());
  const auto sp = longpeer::scale_problem(dm, bp, Vector::Constant(1, 1.0),
                                          CovarianceModel::dense(Vd));

  // oracle: V^{-1/2} through an independent eigendecomposition
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Vd);
  const Matrix Vih = eig.eigenvectors() *
                     eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();
  EXPECT_LT(testutil::rel_err(sp.W_tilde, Vih * dm.W), 1e-10);

  // W~'W~ = W'V^{-1}W
  const Matrix want = dm.W.transpose() * testutil::gauss_jordan_inverse(Vd) * dm.W;
  EXPECT_LT(testutil::rel_err(sp.W_tilde.transpose() * sp.W_tilde, want), 1e-9);

  // the L_scaled (0,0) block is L_0 itself
  const auto bp2 = longpeer::assemble_block(
      {PenaltySpec::decomposition(random_matrix(rng, 4, 2), 3.0, 1.0),
       PenaltySpec::ridge()},
      {1.0, 1.0}, 4);
  Vector lam2(2);
  lam2 << 0.7, 2.1;
  DesignMatrices dm1 = xfree_design(rng, 3, 4, 1);
  const auto sp2 = longpeer::scale_problem(dm1, bp2, lam2,
                                           CovarianceModel::dense(random_spd(rng, dm1.n())));
  EXPECT_LT((sp2.L_scaled.topLeftCorner(4, 4) - bp2.blocks[0].mat.L).norm(), 1e-12);
  EXPECT_LT((sp2.L_scaled.bottomRightCorner(4, 4) - (2.1 / 0.7) * Matrix::Identity(4, 4))
                .norm(),
            1e-12);
}

TEST(PeerEstimate, MatchesRidgeSolveWithoutFixedEffects) {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 8; ++trial) {
    auto dm = xfree_design(rng, 5, 6, 1);  // n = 10, ptilde = 12
    const auto bp = longpeer::assemble_block(
        {PenaltySpec::decomposition(random_matrix(rng, 6, 2), 5.0, 1.0),
         PenaltySpec::ridge()},
        {1.0, 1.0}, 6);
    Vector lambda(2);
    lambda << 0.8 + 0.1 * trial, 1.7;

    const auto V = CovarianceModel::dense(random_spd(rng, dm.n()));
    const auto ridge = longpeer::ridge_solve(dm, bp, lambda, V);

    const auto sp = longpeer::scale_problem(dm, bp, lambda, V);
    const auto gf = longpeer::gsvd_pair(sp.W_tilde, sp.L_scaled);
    const Vector gamma = longpeer::peer_estimate(sp, gf);

    EXPECT_LT((gamma - ridge.gamma).norm(), 1e-8 * (1.0 + ridge.gamma.norm()));
  }
}

TEST(PeerEstimate, UnregularizedLimitInvertsTheDesign) {
  std::mt19937_64 rng(64);
  const int p = 4;
  // square invertible W~: 2 subjects x 2 visits, D = 0, V = I
  auto dm = xfree_design(rng, 2, p, 0);
  ASSERT_EQ(dm.n(), p);
  const auto bp = longpeer::assemble_block({PenaltySpec::ridge()}, {1.0}, p);
  const Vector lambda = Vector::Constant(1, 1e-8);
  const auto V = CovarianceModel::dense(Matrix::Identity(p, p));

  const auto sp = longpeer::scale_problem(dm, bp, lambda, V);
  const auto gf = longpeer::gsvd_pair(sp.W_tilde, sp.L_scaled);
  const Vector gamma = longpeer::peer_estimate(sp, gf);

  const Vector want = testutil::gauss_jordan_inverse(dm.W) * dm.y;
  EXPECT_LT((gamma - want).norm(), 1e-6 * want.norm());
}

TEST(PeerEstimate, SecondDifferenceNullDirectionsPassUnfiltered) {
  std::mt19937_64 rng(65);
  // p = 6 grid, D = 0, second difference: m = 4, c = 2, need n <= 4
  auto ds = make_random_dataset(rng, 2, 6, 0, 2, 2);
  DesignOptions opts;
  opts.intercept = false;
  auto dm = longpeer::build_design(ds, TimeStructure::constant(), opts);
  ASSERT_EQ(dm.n(), 4);

  const auto bp = longpeer::assemble_block({PenaltySpec::second_difference()}, {2.5}, 6);
  const Vector lambda = Vector::Constant(1, 2.5);
  const auto V = CovarianceModel::dense(Matrix::Identity(4, 4));

  const auto sp = longpeer::scale_problem(dm, bp, lambda, V);
  const auto gf = longpeer::gsvd_pair(sp.W_tilde, sp.L_scaled);
  EXPECT_EQ(gf.null_dim, 2);

  // ridge_solve handles the singular penalty through the Gram form
  const auto ridge = longpeer::ridge_solve(dm, bp, lambda, V);
  const Vector gamma = longpeer::peer_estimate(sp, gf);
  EXPECT_LT((gamma - ridge.gamma).norm(), 1e-8 * (1.0 + ridge.gamma.norm()));
}

TEST(BiasGsvd, MatchesClosedFormAndVanishesOnNullSpace) {
  std::mt19937_64 rng(66);
  auto ds = make_random_dataset(rng, 2, 6, 0, 2, 2);
  DesignOptions opts;
  opts.intercept = false;
  auto dm = longpeer::build_design(ds, TimeStructure::constant(), opts);

  const auto bp = longpeer::assemble_block({PenaltySpec::second_difference()}, {1.3}, 6);
  const Vector lambda = Vector::Constant(1, 1.3);
  const auto V = CovarianceModel::dense(random_spd(rng, 4));

  const auto sp = longpeer::scale_problem(dm, bp, lambda, V);
  const auto gf = longpeer::gsvd_pair(sp.W_tilde, sp.L_scaled);

  // closed form (W'V^{-1}W + L'L)^{-1} L'L gamma
  const Vector gamma_true = random_vector(rng, 6);
  const Matrix gram = bp.gram_with(lambda);
  const Matrix H = dm.W.transpose() * V.solve(dm.W) + gram;
  const Vector want = testutil::gauss_jordan_inverse(H) * (gram * gamma_true);
  const Vector got = longpeer::bias_gsvd(sp, gf, gamma_true);
  EXPECT_LT((got - want).norm(), 1e-8 * (1.0 + want.norm()));

  // linear gamma sits in the null space of the second difference
  const Vector s = Vector::LinSpaced(6, 0.0, 1.0);
  const Vector lin = 0.3 * Vector::Ones(6) + 1.1 * s;
  EXPECT_LT(longpeer::bias_gsvd(sp, gf, lin).norm(), 1e-10);
}

TEST(BiasGsvd, StrongPenaltyLimitKeepsOnlyUnpenalizedPart) {
  std::mt19937_64 rng(67);
  auto dm = xfree_design(rng, 3, 4, 0);  // n = 6 > p ... need n <= m; use ridge m = 4
  // ridge penalty: m = ptilde = 4, n must be <= 4; rebuild smaller
  auto ds = make_random_dataset(rng, 2, 4, 0, 2, 2);
  DesignOptions opts;
  opts.intercept = false;
  dm = longpeer::build_design(ds, TimeStructure::constant(), opts);

  const auto bp = longpeer::assemble_block({PenaltySpec::ridge()}, {1.0}, 4);
  const Vector lambda = Vector::Constant(1, 1e8);
  const auto V = CovarianceModel::dense(Matrix::Identity(4, 4));
  const auto sp = longpeer::scale_problem(dm, bp, lambda, V);
  const auto gf = longpeer::gsvd_pair(sp.W_tilde, sp.L_scaled);

  // filter -> 1 everywhere: bias -> gamma itself (everything is shrunk away)
  const Vector gamma_true = random_vector(rng, 4);
  const Vector bias = longpeer::bias_gsvd(sp, gf, gamma_true);
  EXPECT_LT((bias - gamma_true).norm(), 1e-6 * gamma_true.norm());
}

TEST(VarianceGsvd, AgreesWithConditionalCovariances) {
  std::mt19937_64 rng(68);
  auto dm = xfree_design(rng, 3, 4, 1);  // n = 6, ptilde = 8
  const auto bp = longpeer::assemble_block(
      {PenaltySpec::ridge(), PenaltySpec::decomposition(random_matrix(rng, 4, 2), 2.0, 1.0)},
      {1.0, 1.0}, 4);
  Vector lambda(2);
  lambda << 1.1, 0.4;
  const auto V = CovarianceModel::dense(random_spd(rng, dm.n()));

  const auto sp = longpeer::scale_problem(dm, bp, lambda, V);
  const auto gf = longpeer::gsvd_pair(sp.W_tilde, sp.L_scaled);
  const Matrix var = longpeer::variance_gsvd(sp, gf);

  const auto cc = longpeer::conditional_covariances(dm, bp, lambda, V);
  EXPECT_LT(testutil::rel_err(var, cc.cov_gamma), 1e-8);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(var);
  EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10);

  // filter weights are nondecreasing along the ordered pairs
  const double l2 = sp.lambda0 * sp.lambda0;
  for (int k = 1; k < gf.ell; ++k) {
    const auto w = [&](int j) {
      return gf.sigma[j] * gf.sigma[j] /
             (gf.sigma[j] * gf.sigma[j] + l2 * gf.mu[j] * gf.mu[j]);
    };
    EXPECT_GE(w(k), w(k - 1) - 1e-12);
  }
}

TEST(VarianceGsvd, OrthogonalDesignIdentityLimit) {
  std::mt19937_64 rng(69);
  const int p = 4;
  Matrix M = random_matrix(rng, p, p);
  Eigen::HouseholderQR<Matrix> qr(M);
  const Matrix Q = qr.householderQ();

  DesignMatrices dm;
  dm.D = 0;
  dm.p = p;
  dm.N = 2;
  dm.r = 1;
  dm.subject_spans = {{0, 2}, {2, 4}};
  dm.Zrows = Matrix::Ones(p, 1);
  dm.X = Matrix::Zero(p, 0);
  dm.W = Q;
  dm.y = random_vector(rng, p);
  dm.row_index.resize(p);

  const auto bp = longpeer::assemble_block({PenaltySpec::ridge()}, {1.0}, p);
  const Vector lambda = Vector::Constant(1, 1e-8);
  const auto sp = longpeer::scale_problem(dm, bp, lambda,
                                          CovarianceModel::dense(Matrix::Identity(p, p)));
  const auto gf = longpeer::gsvd_pair(sp.W_tilde, sp.L_scaled);
  const Matrix var = longpeer::variance_gsvd(sp, gf);
  EXPECT_LT((var - Matrix::Identity(p, p)).norm(), 1e-6);
}

TEST(GsvdOracle, MseDecompositionMatchesMonteCarlo) {
  std::mt19937_64 rng(70);
  auto ds = make_random_dataset(rng, 2, 4, 0, 2, 2);
  DesignOptions opts;
  opts.intercept = false;
  auto dm = longpeer::build_design(ds, TimeStructure::constant(), opts);
  const int n = dm.n();

  const auto bp = longpeer::assemble_block({PenaltySpec::ridge()}, {1.0}, 4);
  const Vector lambda = Vector::Constant(1, 1.2);
  const Matrix Vd = 0.04 * Matrix::Identity(n, n);
  const auto V = CovarianceModel::dense(Vd);

  const Vector gamma_true = random_vector(rng, 4);
  const auto sp0 = longpeer::scale_problem(dm, bp, lambda, V);
  const auto gf0 = longpeer::gsvd_pair(sp0.W_tilde, sp0.L_scaled);
  const double want_mse = longpeer::variance_gsvd(sp0, gf0).trace() +
                          longpeer::bias_gsvd(sp0, gf0, gamma_true).squaredNorm();

  const int R = 4000;
  std::normal_distribution<double> gauss(0.0, 1.0);
  double mse = 0.0;
  std::vector<double> mses(R);
  const Vector signal = dm.W * gamma_true;
  for (int rep = 0; rep < R; ++rep) {
    DesignMatrices dmr = dm;
    dmr.y = signal;
    for (int i = 0; i < n; ++i) dmr.y[i] += 0.2 * gauss(rng);
    const auto sp = longpeer::scale_problem(dmr, bp, lambda, V);
    const Vector gamma = longpeer::peer_estimate(sp, gf0);
    mses[rep] = (gamma - gamma_true).squaredNorm();
    mse += mses[rep];
  }
  mse /= R;
  double sd = 0.0;
  for (double v : mses) sd += (v - mse) * (v - mse);
  sd = std::sqrt(sd / (R - 1.0) / R);
  EXPECT_NEAR(mse, want_mse, 4.0 * sd);
}

TEST(GsvdOracle, GeneralXRouteAgreesWithRidge) {
  std::mt19937_64 rng(71);
  auto ds = make_random_dataset(rng, 4, 4, 1, 2, 3);
  auto dm = longpeer::build_design(ds, TimeStructure::constant(), DesignOptions{});
  const auto bp = longpeer::assemble_block({PenaltySpec::ridge()}, {1.0}, 4);
  const Vector lambda = Vector::Constant(1, 0.9);
  const auto V = CovarianceModel::dense(random_spd(rng, dm.n()));

  const Vector got = longpeer::general_x_gamma(dm, bp, lambda, V);
  const auto ridge = longpeer::ridge_solve(dm, bp, lambda, V);
  EXPECT_LT((got - ridge.gamma).norm(), 1e-9 * (1.0 + ridge.gamma.norm()));
}
