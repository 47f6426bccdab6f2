#pragma once

#include "longpeer/estimator.hpp"

namespace longpeer {

struct SelectionCandidate {
  std::string label;
  double phi_a = 0.0;  // 0 when the candidate varies the time structure
  TimeStructure time_structure;

  double aic = 0.0;
  double paper_aic = 0.0;  // -aic/2, the maximized convention
  bool converged = false;
  bool failed = false;
  std::string error;

  // per component d: fraction of grid points whose 95% band excludes zero;
  // a component whose band contains zero everywhere is a drop candidate
  std::vector<double> band_nullity;
  std::vector<bool> all_null;
};

struct SelectionReport {
  std::vector<SelectionCandidate> candidates;
  int chosen = -1;
  std::vector<int> drop_recommended;  // all-null components of the chosen fit

  std::string to_json() const;
  // Table-style CSV: label, scalar covariates, time structure, phi_a, aic
  std::string to_csv(const std::string& covariate_label) const;
};

struct SelectionOptions {
  FitOptions fit;
  DesignOptions design;
  double level = 0.95;
  int threads = 0;
};

// 10^k for k = 0, 0.25, ..., 3
std::vector<double> default_phi_grid();

// One REML fit per phi_a with phi_b fixed at 1; candidates ordered as given,
// chosen minimizes AIC among converged fits (ties to the smaller phi_a).
SelectionReport phi_grid_search(const LongitudinalDataset& ds, const TimeStructure& ts,
                                const Matrix& Q, const std::vector<double>& grid,
                                const SelectionOptions& opts = {});

// Fits every candidate time structure under one penalty; chosen minimizes
// AIC among converged fits (ties to the smaller D), with all-null components
// of the chosen fit listed for dropping.
SelectionReport compare_time_structures(const LongitudinalDataset& ds,
                                        const std::vector<TimeStructure>& candidates,
                                        const PenaltySpec& penalty,
                                        const SelectionOptions& opts = {});

}  // namespace longpeer
