#include "longpeer/penalty.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace longpeer {

int BlockPenalty::cols() const {
  int c = 0;
  for (const auto& b : blocks) c += static_cast<int>(b.mat.L.cols());
  return c;
}

int BlockPenalty::rows() const {
  int r = 0;
  for (const auto& b : blocks) r += static_cast<int>(b.mat.L.rows());
  return r;
}

bool BlockPenalty::invertible() const {
  for (const auto& b : blocks)
    if (b.mat.null_dim != 0 || !(b.lambda > 0.0)) return false;
  return true;
}

Matrix BlockPenalty::assembled() const {
  Matrix L = Matrix::Zero(rows(), cols());
  int r = 0, c = 0;
  for (const auto& b : blocks) {
    L.block(r, c, b.mat.L.rows(), b.mat.L.cols()) = b.lambda * b.mat.L;
    r += static_cast<int>(b.mat.L.rows());
    c += static_cast<int>(b.mat.L.cols());
  }
  return L;
}

Matrix BlockPenalty::gram() const {
  Vector lam(blocks.size());
  for (size_t d = 0; d < blocks.size(); ++d) lam[d] = blocks[d].lambda;
  return gram_with(lam);
}

Matrix BlockPenalty::gram_with(const Vector& lambda) const {
  Matrix G = Matrix::Zero(cols(), cols());
  int c = 0;
  for (size_t d = 0; d < blocks.size(); ++d) {
    const Matrix& L = blocks[d].mat.L;
    const int p = static_cast<int>(L.cols());
    G.block(c, c, p, p) = (lambda[d] * lambda[d]) * (L.transpose() * L);
    c += p;
  }
  return G;
}

Matrix BlockPenalty::gram_inverse() const {
  Vector lam(blocks.size());
  for (size_t d = 0; d < blocks.size(); ++d) lam[d] = blocks[d].lambda;
  return gram_inverse_with(lam);
}

Matrix BlockPenalty::gram_inverse_with(const Vector& lambda) const {
  Matrix Ginv = Matrix::Zero(cols(), cols());
  int c = 0;
  for (size_t d = 0; d < blocks.size(); ++d) {
    const Matrix& L = blocks[d].mat.L;
    const int p = static_cast<int>(L.cols());
    if (blocks[d].mat.null_dim != 0 || !(lambda[d] > 0.0))
      fail(ErrorKind::SingularBlockForMixedModel,
           "penalty block " + std::to_string(d) + " is not invertible");
    Eigen::LLT<Matrix> llt(L.transpose() * L);
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::SingularBlockForMixedModel,
           "penalty block " + std::to_string(d) + " has a singular Gram matrix");
    Ginv.block(c, c, p, p) =
        llt.solve(Matrix::Identity(p, p)) / (lambda[d] * lambda[d]);
    c += p;
  }
  return Ginv;
}

double BlockPenalty::gram_logdet_with(const Vector& lambda) const {
  double ld = 0.0;
  for (size_t d = 0; d < blocks.size(); ++d) {
    const Matrix& L = blocks[d].mat.L;
    const int p = static_cast<int>(L.cols());
    if (blocks[d].mat.null_dim != 0 || !(lambda[d] > 0.0))
      fail(ErrorKind::SingularBlockForMixedModel,
           "penalty block " + std::to_string(d) + " is not invertible");
    Eigen::LLT<Matrix> llt(L.transpose() * L);
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::SingularBlockForMixedModel,
           "penalty block " + std::to_string(d) + " has a singular Gram matrix");
    ld += 2.0 * p * std::log(lambda[d]);
    ld += 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  }
  return ld;
}

Matrix projection_from_basis(const Matrix& Q) {
  if (Q.size() == 0 || Q.norm() == 0.0)
    fail(ErrorKind::ZeroBasis, "basis has no nonzero column");
  return Q * pseudoinverse(Q);
}

PenaltyMatrix make_decomposition(const PenaltySpec& spec) {
  if (!(spec.phi_a > 0.0) || !(spec.phi_b > 0.0))
    fail(ErrorKind::NonPositivePhi, "phi_a and phi_b must be positive");
  const int p = static_cast<int>(spec.Q.rows());
  const Matrix P = projection_from_basis(spec.Q);
  PenaltyMatrix out;
  out.L = spec.phi_b * P + spec.phi_a * (Matrix::Identity(p, p) - P);
  out.null_dim = 0;
  return out;
}

PenaltyMatrix make_second_difference(int p) {
  if (p < 3) fail(ErrorKind::GridTooSmall, "second difference needs p >= 3");
  PenaltyMatrix out;
  out.L = Matrix::Zero(p - 2, p);
  for (int i = 0; i < p - 2; ++i) {
    out.L(i, i) = 1.0;
    out.L(i, i + 1) = -2.0;
    out.L(i, i + 2) = 1.0;
  }
  out.null_dim = 2;
  return out;
}

PenaltyMatrix make_ridge(int p) {
  PenaltyMatrix out;
  out.L = Matrix::Identity(p, p);
  out.null_dim = 0;
  return out;
}

PenaltyMatrix make_penalty(const PenaltySpec& spec, int p) {
  switch (spec.kind) {
    case PenaltySpec::Kind::ridge:
      return make_ridge(p);
    case PenaltySpec::Kind::second_difference:
      return make_second_difference(p);
    case PenaltySpec::Kind::decomposition: {
      if (spec.Q.rows() != p)
        fail(ErrorKind::GridMismatch,
             "basis has " + std::to_string(spec.Q.rows()) + " rows, grid has " +
                 std::to_string(p));
      return make_decomposition(spec);
    }
  }
  fail(ErrorKind::InvalidConfig, "unknown penalty kind");
}

BlockPenalty assemble_block(const std::vector<PenaltySpec>& specs,
                            const std::vector<double>& lambda, int p) {
  if (specs.empty() || specs.size() != lambda.size())
    fail(ErrorKind::InvalidConfig, "need one lambda per penalty component");
  BlockPenalty bp;
  bp.blocks.reserve(specs.size());
  for (size_t d = 0; d < specs.size(); ++d) {
    if (!(lambda[d] > 0.0))
      fail(ErrorKind::InvalidConfig, "lambda must be positive");
    bp.blocks.push_back({lambda[d], make_penalty(specs[d], p)});
  }
  return bp;
}

}  // namespace longpeer
