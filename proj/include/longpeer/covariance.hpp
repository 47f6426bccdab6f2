#pragma once

#include <vector>

#include "longpeer/dataset.hpp"
#include "longpeer/linalg.hpp"

namespace longpeer {

// Marginal covariance V of the working errors Zb + eps.  Two backings share
// one interface: the subject-block form sigma_eps^2 I + Z Sigma_b Z' (solves
// and determinants through per-subject Woodbury identities, never forming an
// n x n matrix) and an explicit dense SPD matrix for small problems and
// oracle checks.
class CovarianceModel {
 public:
  static CovarianceModel structured(const DesignMatrices& dm, double sigma_eps_sq,
                                    const Matrix& Sigma_b);
  static CovarianceModel dense(Matrix V);

  int dim() const { return n_; }

  Matrix apply(const Matrix& B) const;  // V * B
  Matrix solve(const Matrix& B) const;  // V^{-1} * B
  double logdet() const;

  // V^{-1/2} through the symmetric eigen square root (per-subject blocks in
  // the structured case).
  Matrix inv_sqrt() const;

  Matrix dense_V() const;

 private:
  CovarianceModel() = default;

  bool structured_ = false;
  int n_ = 0;

  // dense backing
  Matrix V_;
  Eigen::LLT<Matrix> llt_;

  // structured backing
  double sigma_eps_sq_ = 1.0;
  Matrix Sigma_b_;
  Matrix Zrows_;
  std::vector<std::pair<int, int>> spans_;
  std::vector<Matrix> D_i_;  // per-subject r x r solve correction
  double logdet_ = 0.0;
};

}  // namespace longpeer
