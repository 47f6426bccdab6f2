#include <Eigen/Cholesky>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "longpeer/estimator.hpp"

namespace longpeer {

namespace {

constexpr double kLogLambdaMin = -18.420680743952367;  // ln 1e-8
constexpr double kLogLambdaMax = 18.420680743952367;   // ln 1e8

// Cross products cached once per dataset so that a restricted-likelihood
// evaluation never touches an n-sized object.  With a subject random
// intercept the per-subject rank-one corrections collapse into one
// precomputed q x q matrix per distinct visit count.
class RemlWorkspace {
 public:
  RemlWorkspace(const DesignMatrices& dm, const std::vector<PenaltyMatrix>& penalties)
      : dm_(dm), penalties_(penalties) {
    const int q = dm.wcols();
    const int K = dm.K();
    WtW_ = dm.W.transpose() * dm.W;
    XtW_ = dm.X.transpose() * dm.W;
    XtX_ = dm.X.transpose() * dm.X;
    Wty_ = dm.W.transpose() * dm.y;
    Xty_ = dm.X.transpose() * dm.y;
    yty_ = dm.y.squaredNorm();

    gram_blocks_.reserve(penalties.size());
    gram_logdets_.reserve(penalties.size());
    for (const auto& pm : penalties) {
      Matrix g = pm.L.transpose() * pm.L;
      Eigen::LLT<Matrix> llt(g);
      if (pm.null_dim != 0 || llt.info() != Eigen::Success)
        fail(ErrorKind::SingularBlockForMixedModel,
             "mixed-model representation needs invertible penalty blocks");
      gram_logdets_.push_back(2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum());
      gram_blocks_.push_back(std::move(g));
    }

    intercept_only_ = dm.r == 1 && (dm.Zrows.col(0).array() == 1.0).all();
    for (int s = 0; s < dm.N; ++s) {
      const auto [b, e] = dm.subject_spans[s];
      const int ni = e - b;
      const auto Zi = dm.Zrows.middleRows(b, ni);
      SubjectCache c;
      c.ni = ni;
      c.ZtZ = Zi.transpose() * Zi;
      c.WtZ = dm.W.middleRows(b, ni).transpose() * Zi;
      c.XtZ = dm.X.middleRows(b, ni).transpose() * Zi;
      c.ytZ = Zi.transpose() * dm.y.segment(b, ni);
      subjects_.push_back(std::move(c));
    }
    if (intercept_only_) {
      std::map<int, int> group_of;
      for (const auto& c : subjects_) {
        auto [it, inserted] = group_of.emplace(c.ni, static_cast<int>(groups_.size()));
        if (inserted) {
          groups_.push_back({c.ni, 0, Matrix::Zero(q, q), Matrix::Zero(q, K),
                             Vector::Zero(q), Matrix::Zero(K, K), Vector::Zero(K), 0.0});
        }
        Group& g = groups_[it->second];
        g.count += 1;
        const Vector wz = c.WtZ.col(0);
        const Vector xz = c.XtZ.col(0);
        const double yz = c.ytZ[0];
        g.Pww.selfadjointView<Eigen::Lower>().rankUpdate(wz);
        g.Pwx += wz * xz.transpose();
        g.Pwy += yz * wz;
        g.Pxx += xz * xz.transpose();
        g.Pxy += yz * xz;
        g.Pyy += yz * yz;
      }
      for (auto& g : groups_)
        g.Pww = g.Pww.selfadjointView<Eigen::Lower>();
    }
  }

  int theta_dim() const { return static_cast<int>(penalties_.size()) + 1 + dm_.r; }

  // Restricted log-likelihood of the augmented mixed model at the given
  // variance components; -inf when the configuration is numerically invalid.
  double loglik(const Vector& lambda, double sigma_eps_sq, const Matrix& Sigma_b) const {
    const int q = dm_.wcols();
    const int K = dm_.K();
    const int n = dm_.n();
    const double inv_se = 1.0 / sigma_eps_sq;

    Matrix G = WtW_;
    Matrix SX = XtW_.transpose();  // W'V^{-1}X, scaled at the end
    Vector sy = Wty_;
    Matrix XtVX = XtX_;
    Vector XtVy = Xty_;
    double ytVy = yty_;
    double logdetV = n * std::log(sigma_eps_sq);

    if (intercept_only_) {
      const double rho = Sigma_b(0, 0) * inv_se;
      for (const auto& g : groups_) {
        const double d = rho / (1.0 + g.ni * rho);
        G -= d * g.Pww;
        SX -= d * g.Pwx;
        sy -= d * g.Pwy;
        XtVX -= d * g.Pxx;
        XtVy -= d * g.Pxy;
        ytVy -= d * g.Pyy;
        logdetV += g.count * std::log1p(g.ni * rho);
      }
    } else {
      const Matrix C = Sigma_b * inv_se;
      const int r = dm_.r;
      for (const auto& c : subjects_) {
        const Matrix A = Matrix::Identity(r, r) + c.ZtZ * C;
        Eigen::PartialPivLU<Matrix> lu(A);
        const double det = lu.determinant();
        if (!(det > 0.0)) return -std::numeric_limits<double>::infinity();
        logdetV += std::log(det);
        const Matrix D = C * lu.inverse();
        const Matrix WD = c.WtZ * D;
        G.noalias() -= WD * c.WtZ.transpose();
        SX.noalias() -= WD * c.XtZ.transpose();
        sy.noalias() -= WD * c.ytZ;
        const Matrix XD = c.XtZ * D;
        XtVX.noalias() -= XD * c.XtZ.transpose();
        XtVy.noalias() -= XD * c.ytZ;
        ytVy -= c.ytZ.dot(D * c.ytZ);
      }
    }
    G *= inv_se;
    SX *= inv_se;
    sy *= inv_se;
    XtVX *= inv_se;
    XtVy *= inv_se;
    ytVy *= inv_se;

    // H = L'L + W'V^{-1}W
    Matrix H = G;
    double gram_logdet = 0.0;
    {
      int c0 = 0;
      for (size_t d = 0; d < gram_blocks_.size(); ++d) {
        const int pb = static_cast<int>(gram_blocks_[d].cols());
        H.block(c0, c0, pb, pb) += (lambda[d] * lambda[d]) * gram_blocks_[d];
        gram_logdet += 2.0 * pb * std::log(lambda[d]) + gram_logdets_[d];
        c0 += pb;
      }
    }
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const double logdetH =
        2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();

    // Push the low-rank W block through: X'V1^{-1}X etc.
    const Matrix RS = llt.matrixL().solve(SX);   // q x K
    const Vector rs = llt.matrixL().solve(sy);   // q
    const Matrix XtV1X = XtVX - RS.transpose() * RS;
    const Vector XtV1y = XtVy - RS.transpose() * rs;
    const double ytV1y = ytVy - rs.squaredNorm();

    Eigen::LLT<Matrix> lltX(XtV1X);
    if (lltX.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Vector beta = lltX.solve(XtV1y);
    const double quad = ytV1y - XtV1y.dot(beta);
    const double logdetXtV1X =
        2.0 * Matrix(lltX.matrixL()).diagonal().array().log().sum();

    const double logdetV1 = logdetV + logdetH - gram_logdet;
    const double ll = -0.5 * (logdetV1 + logdetXtV1X + quad) -
                      0.5 * (n - K) * std::log(2.0 * M_PI);
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
  }

  double trace_gram(int d) const { return gram_blocks_[d].trace(); }
  double trace_wtw_block(int d) const {
    const int pb = static_cast<int>(gram_blocks_[d].cols());
    int c0 = 0;
    for (int e = 0; e < d; ++e) c0 += static_cast<int>(gram_blocks_[e].cols());
    return WtW_.block(c0, c0, pb, pb).trace();
  }

 private:
  struct SubjectCache {
    int ni = 0;
    Matrix ZtZ, WtZ, XtZ;
    Vector ytZ;
  };
  struct Group {
    int ni = 0;
    int count = 0;
    Matrix Pww, Pwx;
    Vector Pwy;
    Matrix Pxx;
    Vector Pxy;
    double Pyy = 0.0;
  };

  const DesignMatrices& dm_;
  std::vector<PenaltyMatrix> penalties_;
  Matrix WtW_, XtW_, XtX_;
  Vector Wty_, Xty_;
  double yty_ = 0.0;
  std::vector<Matrix> gram_blocks_;
  std::vector<double> gram_logdets_;
  std::vector<SubjectCache> subjects_;
  std::vector<Group> groups_;
  bool intercept_only_ = false;
};

struct NmResult {
  Vector x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Standard Nelder-Mead with reflection/expansion/contraction/shrink and a
// relative function-value stopping rule.
NmResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                     double step, int max_iter, double rel_tol) {
  const int n = static_cast<int>(x0.size());
  std::vector<Vector> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int i = 0; i < n; ++i) xs[i + 1][i] += step;
  for (int i = 0; i <= n; ++i) fs[i] = f(xs[i]);

  auto order = [&] {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<Vector> xs2(n + 1);
    std::vector<double> fs2(n + 1);
    for (int i = 0; i <= n; ++i) {
      xs2[i] = xs[idx[i]];
      fs2[i] = fs[idx[i]];
    }
    xs.swap(xs2);
    fs.swap(fs2);
  };

  NmResult out;
  int it = 0;
  for (; it < max_iter; ++it) {
    order();
    const double spread =
        2.0 * std::abs(fs[n] - fs[0]) / (std::abs(fs[n]) + std::abs(fs[0]) + 1e-300);
    if (spread < rel_tol) {
      out.converged = true;
      break;
    }

    Vector centroid = Vector::Zero(n);
    for (int i = 0; i < n; ++i) centroid += xs[i];
    centroid /= n;

    const Vector xr = centroid + (centroid - xs[n]);
    const double fr = f(xr);
    if (fr < fs[0]) {
      const Vector xe = centroid + 2.0 * (centroid - xs[n]);
      const double fe = f(xe);
      if (fe < fr) {
        xs[n] = xe;
        fs[n] = fe;
      } else {
        xs[n] = xr;
        fs[n] = fr;
      }
    } else if (fr < fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else {
      const bool outside = fr < fs[n];
      const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid))
                                : Vector(centroid - 0.5 * (centroid - xs[n]));
      const double fc = f(xc);
      if (fc < std::min(fr, fs[n])) {
        xs[n] = xc;
        fs[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = f(xs[i]);
        }
      }
    }
  }
  order();
  out.x = xs[0];
  out.f = fs[0];
  out.iterations = it;
  return out;
}

std::vector<PenaltyMatrix> expand_penalties(const std::vector<PenaltySpec>& specs,
                                            int D, int p) {
  std::vector<PenaltySpec> full;
  if (static_cast<int>(specs.size()) == D + 1) {
    full = specs;
  } else if (specs.size() == 1) {
    full.assign(D + 1, specs[0]);
  } else {
    fail(ErrorKind::InvalidConfig, "need one penalty spec, or one per component");
  }
  std::vector<PenaltyMatrix> out;
  out.reserve(full.size());
  for (const auto& s : full) out.push_back(make_penalty(s, p));
  return out;
}

BlockPenalty unit_block(const std::vector<PenaltyMatrix>& penalties) {
  BlockPenalty bp;
  for (const auto& pm : penalties) bp.blocks.push_back({1.0, pm});
  return bp;
}

}  // namespace

double reml_loglik(const DesignMatrices& dm, const std::vector<PenaltySpec>& specs,
                   const VarianceComponents& vc) {
  vc.validate(dm.D, dm.r);
  const auto penalties = expand_penalties(specs, dm.D, dm.p);
  RemlWorkspace ws(dm, penalties);
  return ws.loglik(vc.lambda, vc.sigma_eps_sq, vc.Sigma_b);
}

FitResult reml_fit(const DesignMatrices& dm, const std::vector<PenaltySpec>& specs,
                   const FitOptions& opts) {
  const int D = dm.D, r = dm.r, K = dm.K();
  const auto penalties = expand_penalties(specs, D, dm.p);
  RemlWorkspace ws(dm, penalties);

  const double vy = std::max((dm.y.array() - dm.y.mean()).square().sum() /
                                 std::max(1, dm.n() - 1),
                             1e-300);

  const int nlam = D + 1;
  const int dim = nlam + 1 + r;
  const double lo_se = std::log(vy * 1e-12), hi_se = std::log(vy * 1e4);
  const double lo_sb = std::log(vy * 1e-10), hi_sb = std::log(vy * 1e4);

  auto clamp_eta = [&](Vector eta) {
    for (int d = 0; d < nlam; ++d)
      eta[d] = std::clamp(eta[d], kLogLambdaMin, kLogLambdaMax);
    eta[nlam] = std::clamp(eta[nlam], lo_se, hi_se);
    for (int j = 0; j < r; ++j)
      eta[nlam + 1 + j] = std::clamp(eta[nlam + 1 + j], lo_sb, hi_sb);
    return eta;
  };
  auto unpack = [&](const Vector& eta) {
    VarianceComponents vc;
    vc.lambda = eta.head(nlam).array().exp();
    vc.sigma_eps_sq = std::exp(eta[nlam]);
    vc.Sigma_b = Matrix::Zero(r, r);
    for (int j = 0; j < r; ++j) vc.Sigma_b(j, j) = std::exp(eta[nlam + 1 + j]);
    return vc;
  };

  FitResult fit;
  fit.D = D;
  fit.p = dm.p;
  fit.r = r;
  fit.N = dm.N;
  fit.penalty = unit_block(penalties);

  if (opts.optimize) {
    auto objective = [&](const Vector& eta_raw) {
      const VarianceComponents vc = unpack(clamp_eta(eta_raw));
      const double ll = ws.loglik(vc.lambda, vc.sigma_eps_sq, vc.Sigma_b);
      return std::isfinite(ll) ? -ll : 1e300;
    };

    // Deterministic multistart: a trace-matching center plus two spreads
    // that trade prior strength against the random-intercept variance.
    Vector center(dim);
    const double se0 = 0.5 * vy;
    for (int d = 0; d < nlam; ++d) {
      const double tw = std::max(ws.trace_wtw_block(d), 1e-300);
      const double tg = std::max(ws.trace_gram(d), 1e-300);
      center[d] = 0.5 * std::log(tw / (se0 * tg));
    }
    center[nlam] = std::log(se0);
    for (int j = 0; j < r; ++j) center[nlam + 1 + j] = std::log(0.25 * vy);

    std::vector<Vector> starts{center};
    {
      Vector up = center, down = center;
      const double shift = std::log(100.0);
      for (int d = 0; d < nlam; ++d) {
        up[d] += shift;
        down[d] -= shift;
      }
      for (int j = 0; j < r; ++j) {
        up[nlam + 1 + j] -= shift;
        down[nlam + 1 + j] += shift;
      }
      starts.push_back(clamp_eta(up));
      starts.push_back(clamp_eta(down));
    }
    while (static_cast<int>(starts.size()) > std::max(1, opts.multistarts))
      starts.pop_back();

    NmResult best;
    best.f = std::numeric_limits<double>::infinity();
    for (const auto& s0 : starts) {
      NmResult res = nelder_mead(objective, s0, 0.75, opts.max_iterations, opts.rel_tol);
      if (res.f < best.f) best = res;
    }
    if (!std::isfinite(best.f) || best.f >= 1e300)
      fail(ErrorKind::SingularSystem, "restricted likelihood could not be evaluated");

    const Vector eta = clamp_eta(best.x);
    fit.vc = unpack(eta);
    fit.converged = best.converged;
    fit.iterations = best.iterations;
    fit.reml_loglik = -best.f;

    const double edge = 1e-6;
    for (int d = 0; d < nlam; ++d)
      if (eta[d] < kLogLambdaMin + edge || eta[d] > kLogLambdaMax - edge)
        fit.boundary = true;
    if (eta[nlam] < lo_se + edge || eta[nlam] > hi_se - edge) fit.boundary = true;
    for (int j = 0; j < r; ++j)
      if (eta[nlam + 1 + j] < lo_sb + edge || eta[nlam + 1 + j] > hi_sb - edge)
        fit.boundary = true;
  } else {
    if (!opts.initial)
      fail(ErrorKind::InvalidConfig, "optimize=false needs initial variance components");
    fit.vc = *opts.initial;
    fit.vc.validate(D, r);
    fit.converged = true;
    fit.iterations = 0;
    fit.reml_loglik = ws.loglik(fit.vc.lambda, fit.vc.sigma_eps_sq, fit.vc.Sigma_b);
  }

  const int n_var_params = nlam + 1 + r;
  fit.aic = -2.0 * fit.reml_loglik + 2.0 * (n_var_params + K);
  fit.paper_aic = -0.5 * fit.aic;

  const auto est = blup(dm, fit.penalty, fit.vc);
  fit.beta = est.beta;
  fit.gamma = est.gamma;
  fit.blup_b = est.b;

  fit.fitted = dm.X * fit.beta + dm.W * fit.gamma;
  for (int s = 0; s < dm.N; ++s) {
    const auto [b0, e0] = dm.subject_spans[s];
    fit.fitted.segment(b0, e0 - b0) +=
        dm.Zrows.middleRows(b0, e0 - b0) * fit.blup_b.segment(s * r, r);
  }

  if (opts.compute_covariances) {
    const auto cc = conditional_covariances(dm, fit.penalty, fit.vc);
    fit.cov_beta = cc.cov_beta;
    fit.cov_gamma = cc.cov_gamma;
  }
  return fit;
}

}  // namespace longpeer
