#include "longpeer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "json.hpp"
#include "longpeer/io.hpp"

namespace longpeer {

void SampleGrid::validate() const {
  if (size() < 2) fail(ErrorKind::InvalidConfig, "grid needs p >= 2 points");
  for (int j = 0; j < size(); ++j) {
    if (!std::isfinite(points[j]) || points[j] < 0.0 || points[j] > 1.0)
      fail(ErrorKind::InvalidConfig, "grid points must lie in [0, 1]");
    if (j > 0 && !(points[j] > points[j - 1]))
      fail(ErrorKind::InvalidConfig, "grid points must be strictly increasing");
  }
}

SampleGrid SampleGrid::equispaced(int p) {
  SampleGrid g;
  g.points.resize(p);
  for (int j = 0; j < p; ++j) g.points[j] = static_cast<double>(j) / (p - 1);
  g.validate();
  return g;
}

double TimeBasisFunction::operator()(double t) const {
  switch (kind) {
    case Kind::power: {
      double v = 1.0;
      for (int i = 0; i < exponent; ++i) v *= t;
      return v;
    }
    case Kind::expm1:
      return std::expm1(t);
    case Kind::log1p:
      return std::log1p(t);
    case Kind::table: {
      if (table.empty()) fail(ErrorKind::InvalidConfig, "empty time-basis table");
      if (table.size() == 1) return table.front().second;
      // linear interpolation, extended linearly past the end points
      size_t hi = 1;
      while (hi + 1 < table.size() && table[hi].first < t) ++hi;
      const auto& [t0, v0] = table[hi - 1];
      const auto& [t1, v1] = table[hi];
      return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
  }
  return 0.0;
}

std::string TimeBasisFunction::label() const {
  switch (kind) {
    case Kind::power:
      return exponent == 1 ? "t" : "t" + std::to_string(exponent);
    case Kind::expm1:
      return "expm1";
    case Kind::log1p:
      return "log1p";
    case Kind::table:
      return "table";
  }
  return "?";
}

TimeBasisFunction TimeBasisFunction::power(int k) {
  if (k < 1) fail(ErrorKind::InvalidConfig, "time power must be >= 1");
  TimeBasisFunction f;
  f.kind = Kind::power;
  f.exponent = k;
  return f;
}

TimeBasisFunction TimeBasisFunction::expm1() {
  TimeBasisFunction f;
  f.kind = Kind::expm1;
  return f;
}

TimeBasisFunction TimeBasisFunction::log1p() {
  TimeBasisFunction f;
  f.kind = Kind::log1p;
  return f;
}

Vector TimeStructure::row(double t) const {
  Vector v(dimension() + 1);
  v[0] = 1.0;
  for (int d = 0; d < dimension(); ++d) v[d + 1] = basis[d](t);
  return v;
}

Matrix TimeStructure::evaluation_matrix(const std::vector<double>& times) const {
  Matrix E(static_cast<int>(times.size()), dimension() + 1);
  for (size_t i = 0; i < times.size(); ++i) E.row(static_cast<int>(i)) = row(times[i]);
  return E;
}

void TimeStructure::validate() const {
  for (const auto& f : basis)
    if (std::abs(f(0.0)) > 1e-12)
      fail(ErrorKind::InvalidConfig, "time basis '" + f.label() + "' must vanish at t=0");
}

std::string TimeStructure::label() const {
  std::string s = "1";
  for (const auto& f : basis) s += "+" + f.label();
  return s;
}

TimeStructure TimeStructure::parse(const std::string& tokens) {
  TimeStructure ts;
  std::stringstream ss(tokens);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
    if (tok.empty()) continue;
    if (tok == "expm1") {
      ts.basis.push_back(TimeBasisFunction::expm1());
    } else if (tok == "log1p") {
      ts.basis.push_back(TimeBasisFunction::log1p());
    } else if (tok == "t") {
      ts.basis.push_back(TimeBasisFunction::power(1));
    } else if (tok.size() > 1 && tok[0] == 't') {
      int k = 0;
      try {
        k = std::stoi(tok.substr(1));
      } catch (const std::exception&) {
        fail(ErrorKind::InvalidConfig, "unknown time-basis token '" + tok + "'");
      }
      ts.basis.push_back(TimeBasisFunction::power(k));
    } else {
      fail(ErrorKind::InvalidConfig, "unknown time-basis token '" + tok + "'");
    }
  }
  ts.validate();
  return ts;
}

void LongitudinalDataset::finalize() {
  grid.validate();
  const int p = grid.size();
  const int K = num_covariates();

  subject_ids.clear();
  subject_spans.clear();

  std::map<std::string, int> seen;
  std::vector<std::vector<int>> rows_of;
  std::map<std::pair<std::string, double>, int> keys;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (!std::isfinite(rec.t) || !std::isfinite(rec.y))
      fail(ErrorKind::NonFiniteValue, "record for subject " + rec.subject_id);
    if (!rec.x.allFinite() || !rec.w.allFinite())
      fail(ErrorKind::NonFiniteValue, "record for subject " + rec.subject_id);
    if (rec.w.size() != p)
      fail(ErrorKind::GridMismatch,
           "curve for subject " + rec.subject_id + " has " +
               std::to_string(rec.w.size()) + " samples, grid has " + std::to_string(p));
    if (rec.x.size() != K)
      fail(ErrorKind::ParseError, "covariate count mismatch for subject " + rec.subject_id);
    if (!keys.emplace(std::make_pair(rec.subject_id, rec.t), 1).second)
      fail(ErrorKind::DuplicateObservation,
           "duplicate (subject, t) = (" + rec.subject_id + ", " + std::to_string(rec.t) + ")");
    auto [it, inserted] = seen.emplace(rec.subject_id, static_cast<int>(subject_ids.size()));
    if (inserted) {
      subject_ids.push_back(rec.subject_id);
      rows_of.emplace_back();
    }
    rows_of[it->second].push_back(static_cast<int>(i));
  }

  for (int c : random_effect.x_columns)
    if (c < 0 || c >= K)
      fail(ErrorKind::InvalidConfig, "random-effect column index out of range");
  if (random_effect.r() < 1)
    fail(ErrorKind::InvalidConfig, "random-effect specification selects no columns");

  // regroup records contiguously per subject, keeping file order within subject
  std::vector<FunctionalRecord> grouped;
  grouped.reserve(records.size());
  for (size_t s = 0; s < subject_ids.size(); ++s) {
    const int begin = static_cast<int>(grouped.size());
    for (int idx : rows_of[s]) grouped.push_back(std::move(records[idx]));
    subject_spans.emplace_back(begin, static_cast<int>(grouped.size()));
  }
  records = std::move(grouped);
}

Matrix DesignMatrices::dense_Z() const {
  Matrix Z = Matrix::Zero(n(), r * N);
  for (int s = 0; s < N; ++s)
    for (int i = subject_spans[s].first; i < subject_spans[s].second; ++i)
      Z.block(i, r * s, 1, r) = Zrows.row(i);
  return Z;
}

namespace {

SampleGrid parse_grid_spec(const std::string& grid_spec_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(grid_spec_json);
  } catch (const std::exception& e) {
    fail(ErrorKind::ParseError, std::string("grid spec: ") + e.what());
  }
  if (!j.contains("p")) fail(ErrorKind::InvalidConfig, "grid spec needs \"p\"");
  const int p = j["p"].get<int>();
  SampleGrid g;
  if (j.contains("points")) {
    g.points = j["points"].get<std::vector<double>>();
    if (static_cast<int>(g.points.size()) != p)
      fail(ErrorKind::InvalidConfig, "grid spec: points length differs from p");
  } else if (j.value("equispaced", false)) {
    g = SampleGrid::equispaced(p);
  } else {
    fail(ErrorKind::InvalidConfig, "grid spec needs \"points\" or \"equispaced\": true");
  }
  g.validate();
  return g;
}

}  // namespace

LongitudinalDataset load_dataset(const std::string& outcomes_path,
                                 const std::string& curves_path,
                                 const std::string& grid_spec_json) {
  LongitudinalDataset ds;
  ds.grid = parse_grid_spec(grid_spec_json);
  const int p = ds.grid.size();

  const auto outcome_rows = io::read_csv(outcomes_path);
  if (outcome_rows.size() < 2)
    fail(ErrorKind::ParseError, outcomes_path + ": no data rows");
  const auto& oh = outcome_rows[0];
  if (oh.size() < 3 || oh[0] != "subject" || oh[1] != "t" || oh[2] != "y")
    fail(ErrorKind::ParseError, outcomes_path + ": header must start subject,t,y");
  ds.covariate_names.assign(oh.begin() + 3, oh.end());
  const int K = ds.num_covariates();

  const auto curve_rows = io::read_csv(curves_path);
  if (curve_rows.size() < 2) fail(ErrorKind::ParseError, curves_path + ": no data rows");
  if (curve_rows[0].size() < 2 || curve_rows[0][0] != "subject" || curve_rows[0][1] != "t")
    fail(ErrorKind::ParseError, curves_path + ": header must start subject,t");

  std::map<std::pair<std::string, double>, Vector> curves;
  for (size_t i = 1; i < curve_rows.size(); ++i) {
    const auto& row = curve_rows[i];
    const std::string ctx = curves_path + " row " + std::to_string(i + 1);
    if (row.size() < 2) fail(ErrorKind::ParseError, ctx + ": too few fields");
    const double t = io::parse_double(row[1], ctx);
    if (static_cast<int>(row.size()) - 2 != p)
      fail(ErrorKind::GridMismatch,
           ctx + ": " + std::to_string(row.size() - 2) + " samples against p=" +
               std::to_string(p) + " grid");
    Vector w(p);
    for (int jk = 0; jk < p; ++jk) w[jk] = io::parse_double(row[2 + jk], ctx);
    if (!curves.emplace(std::make_pair(row[0], t), std::move(w)).second)
      fail(ErrorKind::DuplicateObservation, ctx + ": repeated (subject, t)");
  }

  std::map<std::pair<std::string, double>, int> used;
  for (size_t i = 1; i < outcome_rows.size(); ++i) {
    const auto& row = outcome_rows[i];
    const std::string ctx = outcomes_path + " row " + std::to_string(i + 1);
    if (static_cast<int>(row.size()) != 3 + K)
      fail(ErrorKind::ParseError, ctx + ": expected " + std::to_string(3 + K) + " fields");
    FunctionalRecord rec;
    rec.subject_id = row[0];
    rec.t = io::parse_double(row[1], ctx);
    rec.y = io::parse_double(row[2], ctx);
    rec.x.resize(K);
    for (int k = 0; k < K; ++k) rec.x[k] = io::parse_double(row[3 + k], ctx);
    const auto it = curves.find({rec.subject_id, rec.t});
    if (it == curves.end())
      fail(ErrorKind::MissingCurve,
           ctx + ": no curve row for (" + rec.subject_id + ", " + row[1] + ")");
    rec.w = it->second;
    used.emplace(std::make_pair(rec.subject_id, rec.t), 1);
    ds.records.push_back(std::move(rec));
  }
  for (const auto& [key, w] : curves)
    if (!used.count(key))
      fail(ErrorKind::MissingCurve, curves_path + ": curve for (" + key.first + ", " +
                                        io::format_double(key.second) +
                                        ") has no outcome row");

  ds.finalize();
  return ds;
}

DesignMatrices build_design(const LongitudinalDataset& ds, const TimeStructure& ts,
                            const DesignOptions& opts) {
  ts.validate();
  const int n = ds.num_obs();
  const int p = ds.grid.size();
  const int D = ts.dimension();
  const int K = ds.num_covariates();
  if (n == 0) fail(ErrorKind::InvalidConfig, "dataset has no records");

  std::vector<double> times(n);
  for (int i = 0; i < n; ++i) times[i] = ds.records[i].t;
  const Matrix E = ts.evaluation_matrix(times);
  if (!E.allFinite())
    fail(ErrorKind::NonFiniteValue, "time basis evaluates to a non-finite value");
  if (numerical_rank(E) < D + 1)
    fail(ErrorKind::RankDeficientTimeBasis,
         "time-basis evaluation matrix has rank below " + std::to_string(D + 1));

  DesignMatrices dm;
  dm.D = D;
  dm.p = p;
  dm.N = ds.num_subjects();
  dm.r = ds.random_effect.r();
  dm.has_intercept = opts.intercept;
  dm.subject_spans = ds.subject_spans;
  dm.quadrature_weight = opts.quadrature == Quadrature::unit ? 1.0 : 1.0 / p;

  Vector grand_mean = Vector::Zero(p);
  if (opts.center_predictors) {
    for (const auto& rec : ds.records) grand_mean += rec.w;
    grand_mean /= n;
  }

  const int Keff = K + (opts.intercept ? 1 : 0);
  dm.X.resize(n, Keff);
  dm.W.resize(n, (D + 1) * p);
  dm.Zrows.resize(n, dm.r);
  dm.y.resize(n);
  dm.row_index.resize(n);

  for (int s = 0; s < dm.N; ++s)
    for (int i = ds.subject_spans[s].first; i < ds.subject_spans[s].second; ++i) {
      const auto& rec = ds.records[i];
      dm.row_index[i] = {s, rec.t};
      dm.y[i] = rec.y;

      int c = 0;
      if (opts.intercept) dm.X(i, c++) = 1.0;
      for (int k = 0; k < K; ++k) dm.X(i, c++) = rec.x[k];

      Vector w = rec.w;
      if (opts.center_predictors) w -= grand_mean;
      if (dm.quadrature_weight != 1.0) w *= dm.quadrature_weight;
      for (int d = 0; d <= D; ++d) {
        const double f = E(i, d);
        for (int jk = 0; jk < p; ++jk) dm.W(i, d * p + jk) = f * w[jk];
      }

      c = 0;
      if (ds.random_effect.intercept) dm.Zrows(i, c++) = 1.0;
      for (int col : ds.random_effect.x_columns) dm.Zrows(i, c++) = rec.x[col];
    }

  return dm;
}

}  // namespace longpeer
