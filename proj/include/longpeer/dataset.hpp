#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "longpeer/linalg.hpp"

namespace longpeer {

// Shared sampling grid s_1 < ... < s_p in [0, 1].
struct SampleGrid {
  std::vector<double> points;

  int size() const { return static_cast<int>(points.size()); }
  void validate() const;

  // points (j-1)/(p-1), j = 1..p
  static SampleGrid equispaced(int p);
};

// One prescribed time-basis function f with f(0) = 0.
struct TimeBasisFunction {
  enum class Kind { power, expm1, log1p, table };

  Kind kind = Kind::power;
  int exponent = 1;                               // power only, >= 1
  std::vector<std::pair<double, double>> table;   // table only, sorted by t

  double operator()(double t) const;
  std::string label() const;

  static TimeBasisFunction power(int k);
  static TimeBasisFunction expm1();   // e^t - 1
  static TimeBasisFunction log1p();   // log(t + 1)
};

// The time structure gamma(t, s) = gamma_0(s) + sum_d f_d(t) gamma_d(s).
struct TimeStructure {
  std::vector<TimeBasisFunction> basis;  // f_1..f_D; empty means D = 0

  int dimension() const { return static_cast<int>(basis.size()); }

  // [1 f_1(t) ... f_D(t)]
  Vector row(double t) const;
  Matrix evaluation_matrix(const std::vector<double>& times) const;

  // every f_d(0) must vanish to 1e-12
  void validate() const;

  std::string label() const;

  // comma-separated tokens: "t", "t2", "t3", ..., "expm1", "log1p";
  // empty string means D = 0
  static TimeStructure parse(const std::string& tokens);
  static TimeStructure constant() { return {}; }
};

struct FunctionalRecord {
  std::string subject_id;
  double t = 0.0;
  double y = 0.0;
  Vector x;  // K scalar covariates
  Vector w;  // p curve samples
};

// Which columns form z_it; a subset of {intercept} and the x columns.
struct RandomEffectSpec {
  bool intercept = true;
  std::vector<int> x_columns;

  int r() const { return (intercept ? 1 : 0) + static_cast<int>(x_columns.size()); }
};

struct LongitudinalDataset {
  SampleGrid grid;
  std::vector<FunctionalRecord> records;  // contiguous per subject
  std::vector<std::string> covariate_names;
  RandomEffectSpec random_effect;

  // derived by finalize()
  std::vector<std::string> subject_ids;
  std::vector<std::pair<int, int>> subject_spans;  // [begin, end) row ranges

  int num_subjects() const { return static_cast<int>(subject_ids.size()); }
  int num_obs() const { return static_cast<int>(records.size()); }
  int num_covariates() const { return static_cast<int>(covariate_names.size()); }

  // groups records by subject (first-appearance order) and validates fields
  void finalize();
};

enum class Quadrature { unit, riemann };

struct DesignOptions {
  Quadrature quadrature = Quadrature::unit;
  bool intercept = true;           // prepend a column of ones to X
  bool center_predictors = false;  // subtract the pointwise grand mean of w
};

struct RowInfo {
  int subject = 0;
  double t = 0.0;
};

struct DesignMatrices {
  Matrix X;      // n x K_eff
  Matrix W;      // n x (D+1) p, blocks [w', f_1(t) w', ..., f_D(t) w']
  Matrix Zrows;  // n x r random-effect covariates per row
  Vector y;

  std::vector<RowInfo> row_index;
  std::vector<std::pair<int, int>> subject_spans;
  double quadrature_weight = 1.0;
  bool has_intercept = true;

  int D = 0;  // time components beyond baseline
  int p = 0;  // grid size
  int r = 1;  // random effects per subject
  int N = 0;  // subjects

  int n() const { return static_cast<int>(y.size()); }
  int K() const { return static_cast<int>(X.cols()); }
  int wcols() const { return (D + 1) * p; }

  // n x rN block-diagonal-by-subject random-effect design
  Matrix dense_Z() const;
};

// Load and cross-validate the outcomes and curves CSV files.
// grid_spec_json: {"p": int, "points": [..]} or {"p": int, "equispaced": true}.
LongitudinalDataset load_dataset(const std::string& outcomes_path,
                                 const std::string& curves_path,
                                 const std::string& grid_spec_json);

DesignMatrices build_design(const LongitudinalDataset& ds, const TimeStructure& ts,
                            const DesignOptions& opts = {});

}  // namespace longpeer
