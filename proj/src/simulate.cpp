#include "longpeer/simulate.hpp"

#include <cmath>
#include <mutex>

#include "json.hpp"
#include "longpeer/parallel.hpp"

namespace longpeer {

namespace {

double bump_value(const Bump& b, double u) {
  const double d = u - b.center / 100.0;
  return b.amplitude * std::exp(-b.width * d * d);
}

BumpTable table_from(std::initializer_list<Bump> entries) {
  BumpTable t;
  t.entries = entries;
  return t;
}

}  // namespace

Matrix QSpec::build(const SampleGrid& grid) const {
  const int p = grid.size();
  Matrix Q(p, static_cast<int>(bumps.size()));
  for (int j = 0; j < Q.cols(); ++j) {
    const Bump b{bumps[j].first, 1.0, bumps[j].second};
    for (int i = 0; i < p; ++i) Q(i, j) = bump_value(b, grid.points[i]);
  }
  return Q;
}

QSpec QSpec::full() {
  QSpec q;
  q.bumps = {{15, 2500}, {5, 2500}, {30, 1000}, {70, 1000},
             {80, 1000}, {90, 1000}, {50, 250}};
  return q;
}

QSpec QSpec::feature_matched() {
  QSpec q;
  q.bumps = {{15, 2500}, {5, 2500}, {30, 2500}, {70, 2500},
             {80, 2500}, {90, 2500}, {50, 1500}};
  return q;
}

QSpec QSpec::missing_center() {
  QSpec q = feature_matched();
  q.bumps.pop_back();  // drop the s = 0.5 column
  return q;
}

void SimulationScenario::validate() const {
  if (num_subjects < 1 || p < 2 || visit_times.empty())
    fail(ErrorKind::InvalidConfig, "scenario needs subjects, grid points and visits");
  if (sigma_eps.has_value() == target_r2.has_value())
    fail(ErrorKind::InvalidConfig, "set exactly one of sigma_eps / target_r2");
  if (gamma_tables.empty())
    fail(ErrorKind::InvalidConfig, "scenario needs at least gamma_0");
  if (static_cast<int>(gamma_tables.size()) != time_structure.dimension() + 1)
    fail(ErrorKind::InvalidConfig, "gamma tables must match the time structure");
  if (!(phi_a > 0.0) || !(phi_b > 0.0))
    fail(ErrorKind::NonPositivePhi, "phi_a and phi_b must be positive");
}

SimulationScenario SimulationScenario::time_invariant(int N) {
  SimulationScenario sc;
  sc.num_subjects = N;
  sc.sigma_eps = 0.02;
  sc.h1 = table_from({{15, 0.10, 2500}, {5, 0.10, 2500}});
  sc.h2 = table_from({{30, 0.60, 1000}, {70, 0.50, 1000}, {80, 0.50, 1000}, {90, 0.40, 1000}});
  sc.gamma_tables = {table_from({{15, 0.20, 2500}, {50, -0.15, 2500}, {80, 0.15, 2500}})};
  sc.time_structure = TimeStructure::constant();
  return sc;
}

SimulationScenario SimulationScenario::time_varying(int N, double r2) {
  SimulationScenario sc = time_invariant(N);
  sc.sigma_eps.reset();
  sc.target_r2 = r2;
  sc.gamma_tables.push_back(table_from({{30, 0.06, 2500}, {70, -0.06, 2500}}));
  sc.time_structure = TimeStructure::parse("t");
  // the time-varying studies display a different preferred basis: columns
  // shaped like the regression-function features, with the s = 0.5 column
  // deliberately wider than the true bump there
  sc.q_spec = QSpec::feature_matched();
  sc.predictor_noise_sd = 0.05;
  return sc;
}

Vector gen_gamma(const BumpTable& table, const SampleGrid& grid) {
  Vector g = Vector::Zero(grid.size());
  for (int i = 0; i < grid.size(); ++i)
    for (const auto& b : table.entries) g[i] += bump_value(b, grid.points[i]);
  return g;
}

Vector gen_predictor(const SimulationScenario& sc, RngStream& stream) {
  const SampleGrid grid = SampleGrid::equispaced(sc.p);
  Vector w = Vector::Zero(sc.p);
  for (const auto& b : sc.h1.entries) {
    const double xi = stream.uniform(0.0, 0.1);
    const Bump jb{b.center, b.amplitude + xi, b.width};
    for (int i = 0; i < sc.p; ++i) w[i] += bump_value(jb, grid.points[i]);
  }
  for (const auto& b : sc.h2.entries) {
    const double xi = stream.uniform(0.0, 0.1);
    const Bump jb{b.center, b.amplitude + xi, b.width};
    for (int i = 0; i < sc.p; ++i) w[i] += bump_value(jb, grid.points[i]);
  }
  {
    const double xi = stream.uniform(0.0, 0.1);
    const Bump jb{sc.center_bump.center, sc.center_bump.amplitude + xi,
                  sc.center_bump.width};
    for (int i = 0; i < sc.p; ++i) w[i] += bump_value(jb, grid.points[i]);
  }
  if (sc.predictor_noise_sd > 0.0)
    for (int i = 0; i < sc.p; ++i) w[i] += stream.normal(0.0, sc.predictor_noise_sd);
  return w;
}

Vector gen_outcomes(const SimulationScenario& sc, const std::vector<Vector>& curves,
                    const std::vector<double>& times, const std::vector<int>& subject_of,
                    const std::vector<Vector>& gammas, RngStream& subject_stream,
                    RngStream& noise_stream, double* sigma_eps_used,
                    double* realized_r2) {
  const int n = static_cast<int>(curves.size());
  const int N = sc.num_subjects;

  std::vector<double> b(N);
  for (int s = 0; s < N; ++s) b[s] = subject_stream.normal(0.0, sc.sigma_b);

  // noiseless signals y* = beta0 + w'gamma_(t) + b_i
  Vector ystar(n);
  for (int i = 0; i < n; ++i) {
    const Vector f = sc.time_structure.row(times[i]);
    double signal = sc.beta0;
    for (size_t d = 0; d < gammas.size(); ++d)
      signal += f[static_cast<int>(d)] * curves[i].dot(gammas[d]);
    ystar[i] = signal + b[subject_of[i]];
  }

  double se = sc.sigma_eps.value_or(0.0);
  double sy2 = 0.0;
  {
    // average within-visit sample variance of the noiseless signals
    const int T = static_cast<int>(sc.visit_times.size());
    for (int vt = 0; vt < T; ++vt) {
      double mean = 0.0;
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (times[i] == sc.visit_times[vt]) {
          mean += ystar[i];
          ++count;
        }
      mean /= count;
      double var = 0.0;
      for (int i = 0; i < n; ++i)
        if (times[i] == sc.visit_times[vt]) var += (ystar[i] - mean) * (ystar[i] - mean);
      sy2 += var / (count - 1);
    }
    sy2 /= T;
  }
  if (sc.target_r2) {
    const double r2 = *sc.target_r2;
    se = std::sqrt(sy2 * (1.0 - r2) / r2);
  }
  if (sigma_eps_used) *sigma_eps_used = se;
  if (realized_r2) *realized_r2 = sy2 / (sy2 + se * se);

  Vector y = ystar;
  for (int i = 0; i < n; ++i) y[i] += noise_stream.normal(0.0, se);
  return y;
}

GeneratedData gen_dataset(const SimulationScenario& sc, uint64_t replicate) {
  sc.validate();
  GeneratedData out;
  const SampleGrid grid = SampleGrid::equispaced(sc.p);

  out.gamma_true.reserve(sc.gamma_tables.size());
  for (const auto& tab : sc.gamma_tables) out.gamma_true.push_back(gen_gamma(tab, grid));

  auto predictor_stream = make_stream(sc.seed, replicate, StreamPurpose::predictors);
  auto subject_stream = make_stream(sc.seed, replicate, StreamPurpose::subject_effects);
  auto noise_stream = make_stream(sc.seed, replicate, StreamPurpose::outcome_noise);

  const int n = sc.num_subjects * static_cast<int>(sc.visit_times.size());
  std::vector<Vector> curves;
  curves.reserve(n);
  std::vector<double> times;
  std::vector<int> subject_of;
  for (int s = 0; s < sc.num_subjects; ++s)
    for (double t : sc.visit_times) {
      curves.push_back(gen_predictor(sc, predictor_stream));
      times.push_back(t);
      subject_of.push_back(s);
    }

  const Vector y = gen_outcomes(sc, curves, times, subject_of, out.gamma_true,
                                subject_stream, noise_stream, &out.sigma_eps,
                                &out.realized_r2);

  out.ds.grid = grid;
  out.ds.records.reserve(n);
  for (int i = 0; i < n; ++i) {
    FunctionalRecord rec;
    rec.subject_id = "s" + std::to_string(subject_of[i] + 1);
    rec.t = times[i];
    rec.y = y[i];
    rec.x = Vector(0);
    rec.w = curves[i];
    out.ds.records.push_back(std::move(rec));
  }
  out.ds.finalize();
  return out;
}

StudyMetrics run_study(const SimulationScenario& sc, int replicates,
                       const StudyOptions& opts) {
  sc.validate();
  if (replicates < 1) fail(ErrorKind::InvalidConfig, "need at least one replicate");

  const int D = sc.D();
  const int p = sc.p;
  const SampleGrid grid = SampleGrid::equispaced(p);
  const Matrix Q = sc.q_spec.build(grid);
  const std::vector<PenaltySpec> specs{PenaltySpec::decomposition(Q, sc.phi_a, sc.phi_b)};

  struct ReplicateResult {
    bool ok = false;
    Matrix gamma_hat;      // (D+1) x p
    Matrix covered;        // (D+1) x p indicator
    bool coverage_defined = true;
    double sspe = 0.0, sspe_noiseless = 0.0;
    double realized_r2 = 0.0, sigma_eps = 0.0;
  };
  std::vector<ReplicateResult> results(replicates);

  auto run_one = [&](int rep) {
    ReplicateResult& rr = results[rep];
    try {
      const auto gen = gen_dataset(sc, static_cast<uint64_t>(rep));
      const auto dm = build_design(gen.ds, sc.time_structure, DesignOptions{});

      FitResult fit = opts.fit_override ? opts.fit_override(dm, specs, opts.fit)
                                        : reml_fit(dm, specs, opts.fit);

      rr.gamma_hat.resize(D + 1, p);
      rr.covered = Matrix::Zero(D + 1, p);
      rr.coverage_defined = fit.cov_gamma.size() > 0;
      for (int d = 0; d <= D; ++d) {
        rr.gamma_hat.row(d) = fit.gamma.segment(d * p, p).transpose();
        if (rr.coverage_defined) {
          const double z = band_multiplier(0.95);
          for (int j = 0; j < p; ++j) {
            const double se = std::sqrt(std::max(0.0, fit.cov_gamma(d * p + j, d * p + j)));
            rr.covered(d, j) =
                std::abs(gen.gamma_true[d][j] - rr.gamma_hat(d, j)) <= z * se ? 1.0 : 0.0;
          }
        }
      }

      // population-level prediction x'beta + w'gamma against observed and
      // noise-stripped outcomes
      const Vector pred = dm.X * fit.beta + dm.W * fit.gamma;
      rr.sspe = (dm.y - pred).squaredNorm();
      {
        // regenerate the same noise draws to recover y - eps
        auto noise_stream =
            make_stream(sc.seed, static_cast<uint64_t>(rep), StreamPurpose::outcome_noise);
        Vector eps(dm.n());
        for (int i = 0; i < dm.n(); ++i) eps[i] = noise_stream.normal(0.0, gen.sigma_eps);
        rr.sspe_noiseless = (dm.y - eps - pred).squaredNorm();
      }
      rr.realized_r2 = gen.realized_r2;
      rr.sigma_eps = gen.sigma_eps;
      rr.ok = true;
    } catch (const std::exception&) {
      rr.ok = false;
    }
  };
  parallel_for(replicates, opts.threads, run_one);

  StudyMetrics m;
  m.replicates = replicates;
  m.seed = sc.seed;
  m.gamma_true.resize(D + 1, p);
  {
    const auto gammas = sc.gamma_tables;
    for (int d = 0; d <= D; ++d)
      m.gamma_true.row(d) = gen_gamma(gammas[d], grid).transpose();
  }

  int ok_count = 0;
  Matrix gamma_sum = Matrix::Zero(D + 1, p);
  Matrix covered_sum = Matrix::Zero(D + 1, p);
  std::vector<std::vector<double>> mses(D + 1);
  m.coverage_defined = true;
  for (const auto& rr : results) {
    if (!rr.ok) {
      ++m.failures;
      continue;
    }
    ++ok_count;
    gamma_sum += rr.gamma_hat;
    covered_sum += rr.covered;
    if (!rr.coverage_defined) m.coverage_defined = false;
    for (int d = 0; d <= D; ++d)
      mses[d].push_back((rr.gamma_hat.row(d) - m.gamma_true.row(d)).squaredNorm());
    m.sspe += rr.sspe;
    m.sspe_noiseless += rr.sspe_noiseless;
    m.mean_realized_r2 += rr.realized_r2;
    m.mean_sigma_eps += rr.sigma_eps;
  }
  if (ok_count == 0) fail(ErrorKind::AllCandidatesFailed, "every replicate failed");

  m.gamma_mean = gamma_sum / ok_count;
  m.coverage = covered_sum / ok_count;
  m.sspe /= ok_count;
  m.sspe_noiseless /= ok_count;
  m.sspe_per_subject = m.sspe / sc.num_subjects;
  m.mean_realized_r2 /= ok_count;
  m.mean_sigma_eps /= ok_count;

  m.mse_mean.resize(D + 1);
  m.mse_sd.resize(D + 1);
  m.trace_var.resize(D + 1);
  m.sq_bias_norm.resize(D + 1);
  m.avg_coverage.resize(D + 1);
  for (int d = 0; d <= D; ++d) {
    double mean = 0.0;
    for (double v : mses[d]) mean += v;
    mean /= ok_count;
    m.mse_mean[d] = mean;
    double var = 0.0;
    for (double v : mses[d]) var += (v - mean) * (v - mean);
    m.mse_sd[d] = ok_count > 1 ? std::sqrt(var / (ok_count - 1)) : 0.0;

    // exact split about the replicate mean
    m.sq_bias_norm[d] = (m.gamma_mean.row(d) - m.gamma_true.row(d)).squaredNorm();
    double tv = 0.0;
    for (const auto& rr : results)
      if (rr.ok) tv += (rr.gamma_hat.row(d) - m.gamma_mean.row(d)).squaredNorm();
    m.trace_var[d] = tv / ok_count;

    m.avg_coverage[d] = m.coverage.row(d).mean();
  }
  return m;
}

namespace {

nlohmann::json bump_table_json(const BumpTable& t) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : t.entries)
    arr.push_back({{"center", b.center}, {"amplitude", b.amplitude}, {"width", b.width}});
  return arr;
}

BumpTable bump_table_from(const nlohmann::json& arr) {
  BumpTable t;
  for (const auto& e : arr)
    t.entries.push_back({e.at("center").get<double>(), e.at("amplitude").get<double>(),
                         e.at("width").get<double>()});
  return t;
}

}  // namespace

std::string SimulationScenario::to_json() const {
  nlohmann::json j;
  j["num_subjects"] = num_subjects;
  j["visit_times"] = visit_times;
  j["p"] = p;
  j["beta0"] = beta0;
  j["sigma_b"] = sigma_b;
  if (sigma_eps) j["sigma_eps"] = *sigma_eps;
  if (target_r2) j["target_r2"] = *target_r2;
  j["predictor_noise_sd"] = predictor_noise_sd;
  j["seed"] = seed;
  j["h1"] = bump_table_json(h1);
  j["h2"] = bump_table_json(h2);
  j["center_bump"] = {{"center", center_bump.center},
                      {"amplitude", center_bump.amplitude},
                      {"width", center_bump.width}};
  j["gamma_tables"] = nlohmann::json::array();
  for (const auto& t : gamma_tables) j["gamma_tables"].push_back(bump_table_json(t));
  std::vector<std::string> basis;
  for (const auto& f : time_structure.basis) basis.push_back(f.label());
  j["time_basis"] = basis;
  j["q_bumps"] = nlohmann::json::array();
  for (const auto& [c, w] : q_spec.bumps) j["q_bumps"].push_back({{"center", c}, {"width", w}});
  j["phi_a"] = phi_a;
  j["phi_b"] = phi_b;
  return j.dump(2);
}

SimulationScenario SimulationScenario::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorKind::ParseError, std::string("scenario: ") + e.what());
  }
  SimulationScenario sc;
  try {
    sc.num_subjects = j.value("num_subjects", sc.num_subjects);
    if (j.contains("visit_times"))
      sc.visit_times = j["visit_times"].get<std::vector<double>>();
    sc.p = j.value("p", sc.p);
    sc.beta0 = j.value("beta0", sc.beta0);
    sc.sigma_b = j.value("sigma_b", sc.sigma_b);
    if (j.contains("sigma_eps")) sc.sigma_eps = j["sigma_eps"].get<double>();
    if (j.contains("target_r2")) sc.target_r2 = j["target_r2"].get<double>();
    sc.predictor_noise_sd = j.value("predictor_noise_sd", sc.predictor_noise_sd);
    sc.seed = j.value("seed", sc.seed);
    if (j.contains("h1")) sc.h1 = bump_table_from(j["h1"]);
    if (j.contains("h2")) sc.h2 = bump_table_from(j["h2"]);
    if (j.contains("center_bump")) {
      const auto& c = j["center_bump"];
      sc.center_bump = {c.at("center").get<double>(), c.at("amplitude").get<double>(),
                        c.at("width").get<double>()};
    }
    if (j.contains("gamma_tables")) {
      sc.gamma_tables.clear();
      for (const auto& t : j["gamma_tables"]) sc.gamma_tables.push_back(bump_table_from(t));
    }
    if (j.contains("time_basis")) {
      std::string joined;
      for (const auto& tok : j["time_basis"]) {
        if (!joined.empty()) joined += ",";
        joined += tok.get<std::string>();
      }
      sc.time_structure = TimeStructure::parse(joined);
    }
    if (j.contains("q_bumps")) {
      sc.q_spec.bumps.clear();
      for (const auto& b : j["q_bumps"])
        sc.q_spec.bumps.emplace_back(b.at("center").get<double>(),
                                     b.at("width").get<double>());
    }
    sc.phi_a = j.value("phi_a", sc.phi_a);
    sc.phi_b = j.value("phi_b", sc.phi_b);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::ParseError, std::string("scenario: ") + e.what());
  }
  sc.validate();
  return sc;
}

std::string StudyMetrics::to_json() const {
  nlohmann::json j;
  j["replicates"] = replicates;
  j["failures"] = failures;
  j["seed"] = seed;
  j["mse_mean"] = mse_mean;
  j["mse_sd"] = mse_sd;
  j["trace_var"] = trace_var;
  j["sq_bias_norm"] = sq_bias_norm;
  j["sspe"] = sspe;
  j["sspe_per_subject"] = sspe_per_subject;
  j["sspe_noiseless"] = sspe_noiseless;
  j["coverage_defined"] = coverage_defined;
  j["avg_coverage"] = avg_coverage;
  j["mean_realized_r2"] = mean_realized_r2;
  j["mean_sigma_eps"] = mean_sigma_eps;
  return j.dump(2);
}

}  // namespace longpeer
