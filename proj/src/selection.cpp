#include "longpeer/selection.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "longpeer/io.hpp"
#include "longpeer/parallel.hpp"

namespace longpeer {

namespace {

void fill_bands(SelectionCandidate& cand, const FitResult& fit, double level) {
  cand.band_nullity.assign(fit.D + 1, 0.0);
  cand.all_null.assign(fit.D + 1, false);
  if (fit.cov_gamma.size() == 0) return;
  for (int d = 0; d <= fit.D; ++d) {
    const auto band = component_band(fit, d, level);
    int excludes = 0;
    for (int j = 0; j < fit.p; ++j)
      if (band.lower[j] > 0.0 || band.upper[j] < 0.0) ++excludes;
    cand.band_nullity[d] = static_cast<double>(excludes) / fit.p;
    cand.all_null[d] = excludes == 0;
  }
}

// chosen = argmin AIC among converged candidates (all non-failed when none
// converged); near-ties resolved by the given preference order
int choose(const std::vector<SelectionCandidate>& cands,
           const std::function<bool(const SelectionCandidate&, const SelectionCandidate&)>&
               prefer) {
  int best = -1;
  for (int pass = 0; pass < 2 && best < 0; ++pass) {
    for (size_t i = 0; i < cands.size(); ++i) {
      const auto& c = cands[i];
      if (c.failed || (pass == 0 && !c.converged)) continue;
      if (best < 0) {
        best = static_cast<int>(i);
        continue;
      }
      const auto& b = cands[best];
      if (c.aic < b.aic - 1e-6 || (std::abs(c.aic - b.aic) <= 1e-6 && prefer(c, b)))
        best = static_cast<int>(i);
    }
  }
  return best;
}

void finalize_report(SelectionReport& report, int chosen) {
  report.chosen = chosen;
  report.drop_recommended.clear();
  if (chosen < 0) fail(ErrorKind::AllCandidatesFailed, "no candidate fit succeeded");
  const auto& c = report.candidates[chosen];
  for (size_t d = 0; d < c.all_null.size(); ++d)
    if (c.all_null[d]) report.drop_recommended.push_back(static_cast<int>(d));
}

}  // namespace

std::vector<double> default_phi_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 12; ++k) g.push_back(std::pow(10.0, 0.25 * k));
  return g;
}

SelectionReport phi_grid_search(const LongitudinalDataset& ds, const TimeStructure& ts,
                                const Matrix& Q, const std::vector<double>& grid,
                                const SelectionOptions& opts) {
  if (grid.empty()) fail(ErrorKind::InvalidConfig, "phi grid is empty");
  for (double phi : grid)
    if (!(phi > 0.0)) fail(ErrorKind::InvalidConfig, "phi grid values must be positive");

  const auto dm = build_design(ds, ts, opts.design);

  SelectionReport report;
  report.candidates.resize(grid.size());
  parallel_for(static_cast<int>(grid.size()), opts.threads, [&](int i) {
    SelectionCandidate& cand = report.candidates[i];
    cand.phi_a = grid[i];
    cand.time_structure = ts;
    std::ostringstream label;
    label << "phi_a=" << grid[i];
    cand.label = label.str();
    try {
      const std::vector<PenaltySpec> specs{PenaltySpec::decomposition(Q, grid[i], 1.0)};
      const FitResult fit = reml_fit(dm, specs, opts.fit);
      cand.aic = fit.aic;
      cand.paper_aic = fit.paper_aic;
      cand.converged = fit.converged;
      fill_bands(cand, fit, opts.level);
    } catch (const std::exception& e) {
      cand.failed = true;
      cand.error = e.what();
    }
  });

  finalize_report(report, choose(report.candidates, [](const auto& a, const auto& b) {
                    return a.phi_a < b.phi_a;
                  }));
  return report;
}

SelectionReport compare_time_structures(const LongitudinalDataset& ds,
                                        const std::vector<TimeStructure>& candidates,
                                        const PenaltySpec& penalty,
                                        const SelectionOptions& opts) {
  if (candidates.empty()) fail(ErrorKind::InvalidConfig, "no time-structure candidates");

  SelectionReport report;
  report.candidates.resize(candidates.size());
  parallel_for(static_cast<int>(candidates.size()), opts.threads, [&](int i) {
    SelectionCandidate& cand = report.candidates[i];
    cand.time_structure = candidates[i];
    cand.label = candidates[i].label();
    try {
      const auto dm = build_design(ds, candidates[i], opts.design);
      const FitResult fit = reml_fit(dm, {penalty}, opts.fit);
      cand.aic = fit.aic;
      cand.paper_aic = fit.paper_aic;
      cand.converged = fit.converged;
      fill_bands(cand, fit, opts.level);
    } catch (const std::exception& e) {
      cand.failed = true;
      cand.error = e.what();
    }
  });

  finalize_report(report, choose(report.candidates, [](const auto& a, const auto& b) {
                    return a.time_structure.dimension() < b.time_structure.dimension();
                  }));
  return report;
}

std::string SelectionReport::to_json() const {
  nlohmann::json j;
  j["chosen"] = chosen;
  j["drop_recommended"] = drop_recommended;
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : candidates) {
    nlohmann::json cj;
    cj["label"] = c.label;
    cj["phi_a"] = c.phi_a;
    cj["time_structure"] = c.time_structure.label();
    cj["aic"] = c.aic;
    cj["paper_aic"] = c.paper_aic;
    cj["converged"] = c.converged;
    cj["failed"] = c.failed;
    if (c.failed) cj["error"] = c.error;
    cj["band_nullity"] = c.band_nullity;
    cj["all_null"] = c.all_null;
    j["candidates"].push_back(std::move(cj));
  }
  return j.dump(2);
}

std::string SelectionReport::to_csv(const std::string& covariate_label) const {
  std::ostringstream out;
  out << "model,scalar_covariates,time_structure,phi_a,aic,paper_aic,converged,chosen\n";
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    out << (i + 1) << "," << covariate_label << "," << c.time_structure.label() << ","
        << io::format_double(c.phi_a) << ","
        << (c.failed ? "NA" : io::format_double(c.aic)) << ","
        << (c.failed ? "NA" : io::format_double(c.paper_aic)) << ","
        << (c.converged ? "yes" : "no") << ","
        << (static_cast<int>(i) == chosen ? "yes" : "no") << "\n";
  }
  return out.str();
}

}  // namespace longpeer
