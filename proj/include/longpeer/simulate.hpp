#pragma once

#include <functional>
#include <optional>

#include "longpeer/estimator.hpp"
#include "longpeer/rng.hpp"

namespace longpeer {

// One Gaussian bump a * exp[-width ((h - s)/100)^2] with the center h kept in
// index units 0..100 (so the bump sits at u = h/100 on the unit grid) and
// width one of the 2500 / 1000 / 250 exponent constants.
struct Bump {
  double center = 50.0;     // index units
  double amplitude = 0.0;
  double width = 2500.0;
};

struct BumpTable {
  std::vector<Bump> entries;
};

// Columns spanning the preferred subspace: unit-amplitude bumps mirroring
// the generator's bump locations and widths.
struct QSpec {
  std::vector<std::pair<double, double>> bumps;  // (center index, width)

  Matrix build(const SampleGrid& grid) const;

  // all seven generator features with widths mirroring the generator,
  // including the wide bump at s = 0.5
  static QSpec full();
  // columns shaped like the regression-function features; the s = 0.5
  // column stays wider than the true bump there
  static QSpec feature_matched();
  // partial information: the s = 0.5 feature is left out
  static QSpec missing_center();
};

struct SimulationScenario {
  int num_subjects = 100;
  std::vector<double> visit_times = {0.0, 1.0, 2.0, 3.0};
  int p = 100;

  double beta0 = 0.06;
  double sigma_b = 0.05;
  std::optional<double> sigma_eps;  // exactly one of sigma_eps / target_r2
  std::optional<double> target_r2;
  double predictor_noise_sd = 0.01;

  uint64_t seed = 1;

  BumpTable h1;        // width 2500 predictor bumps
  BumpTable h2;        // width 1000 predictor bumps
  Bump center_bump{50.0, 0.9, 250.0};  // amplitude gets +U(0, 0.1)

  std::vector<BumpTable> gamma_tables;  // truth components, d = 0..D
  TimeStructure time_structure;         // f_1..f_D shared by truth and fit

  QSpec q_spec = QSpec::full();
  double phi_a = 10.0;
  double phi_b = 1.0;

  void validate() const;
  int D() const { return static_cast<int>(gamma_tables.size()) - 1; }

  std::string to_json() const;
  static SimulationScenario from_json(const std::string& text);

  // the first simulation design: time-invariant truth, sigma_eps = 0.02
  static SimulationScenario time_invariant(int N = 100);
  // time-varying truth gamma_0 + t gamma_1 with a target R^2
  static SimulationScenario time_varying(int N, double r2);
};

Vector gen_gamma(const BumpTable& table, const SampleGrid& grid);

// One predictor curve: bump sums with per-curve uniform amplitude jitter
// plus pointwise white noise.
Vector gen_predictor(const SimulationScenario& sc, RngStream& stream);

// Outcomes for pre-generated curves; solves sigma_eps from the target R^2 on
// the realized noiseless signals when requested.
Vector gen_outcomes(const SimulationScenario& sc, const std::vector<Vector>& curves,
                    const std::vector<double>& times, const std::vector<int>& subject_of,
                    const std::vector<Vector>& gammas, RngStream& subject_stream,
                    RngStream& noise_stream, double* sigma_eps_used,
                    double* realized_r2);

struct GeneratedData {
  LongitudinalDataset ds;
  std::vector<Vector> gamma_true;  // D+1 grid vectors
  double sigma_eps = 0.0;
  double realized_r2 = 0.0;
};

GeneratedData gen_dataset(const SimulationScenario& sc, uint64_t replicate);

struct StudyOptions {
  FitOptions fit;
  int threads = 0;  // 0 = hardware concurrency
  // test hook; replaces reml_fit when set
  std::function<FitResult(const DesignMatrices&, const std::vector<PenaltySpec>&,
                          const FitOptions&)>
      fit_override;
};

struct StudyMetrics {
  int replicates = 0;
  int failures = 0;
  uint64_t seed = 0;

  // per component d = 0..D, averaged over successful replicates
  std::vector<double> mse_mean;
  std::vector<double> mse_sd;
  std::vector<double> trace_var;     // about the replicate mean; exact split
  std::vector<double> sq_bias_norm;  // mse_mean = trace_var + sq_bias_norm

  // population-level prediction: sum over observations of
  // (y - x'beta - w'gamma)^2; per_subject divides by N
  double sspe = 0.0;
  double sspe_per_subject = 0.0;
  // same with the realized noise removed from y
  double sspe_noiseless = 0.0;

  bool coverage_defined = true;
  Matrix coverage;                  // (D+1) x p pointwise coverage fractions
  std::vector<double> avg_coverage; // per component

  Matrix gamma_mean;  // (D+1) x p averaged estimates (plot data)
  Matrix gamma_true;  // (D+1) x p

  double mean_realized_r2 = 0.0;
  double mean_sigma_eps = 0.0;

  std::string to_json() const;
};

StudyMetrics run_study(const SimulationScenario& sc, int replicates,
                       const StudyOptions& opts = {});

}  // namespace longpeer
