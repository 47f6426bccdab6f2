#include "longpeer/selection.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "longpeer/simulate.hpp"
#include "testutil.hpp"

using longpeer::Matrix;
using longpeer::PenaltySpec;
using longpeer::SampleGrid;
using longpeer::SelectionOptions;
using longpeer::SimulationScenario;
using longpeer::TimeStructure;
using longpeer::Vector;

namespace {

longpeer::GeneratedData small_gen(int N, uint64_t rep, bool time_varying) {
  auto sc = time_varying ? SimulationScenario::time_varying(N, 0.9)
                         : SimulationScenario::time_invariant(N);
  sc.seed = 2024;
  return longpeer::gen_dataset(sc, rep);
}

}  // namespace

TEST(PhiGrid, DefaultGridShape) {
  const auto grid = longpeer::default_phi_grid();
  ASSERT_EQ(grid.size(), 13u);
  EXPECT_EQ(grid.front(), 1.0);
  EXPECT_NEAR(grid.back(), 1000.0, 1e-9);
  EXPECT_NEAR(grid[1], std::pow(10.0, 0.25), 1e-12);
}

TEST(PhiGrid, SingleElementIsChosen) {
  auto gen = small_gen(12, 0, false);
  const auto Q = longpeer::QSpec::full().build(gen.ds.grid);
  const auto report = longpeer::phi_grid_search(gen.ds, TimeStructure::constant(), Q,
                                                {10.0}, SelectionOptions{});
  ASSERT_EQ(report.candidates.size(), 1u);
  EXPECT_EQ(report.chosen, 0);
  EXPECT_EQ(report.candidates[0].phi_a, 10.0);
  EXPECT_FALSE(report.candidates[0].failed);
  EXPECT_EQ(report.candidates[0].paper_aic, -0.5 * report.candidates[0].aic);
}

TEST(PhiGrid, PermutationInvarianceOfTheChoice) {
  auto gen = small_gen(12, 1, false);
  const auto Q = longpeer::QSpec::full().build(gen.ds.grid);
  SelectionOptions opts;
  opts.threads = 2;

  const std::vector<double> grid{1.0, 10.0, 100.0};
  const auto r1 = longpeer::phi_grid_search(gen.ds, TimeStructure::constant(), Q, grid, opts);
  std::vector<double> permuted{100.0, 1.0, 10.0};
  const auto r2 =
      longpeer::phi_grid_search(gen.ds, TimeStructure::constant(), Q, permuted, opts);

  ASSERT_GE(r1.chosen, 0);
  ASSERT_GE(r2.chosen, 0);
  EXPECT_EQ(r1.candidates[r1.chosen].phi_a, r2.candidates[r2.chosen].phi_a);

  // the report rows follow the given order
  EXPECT_EQ(r2.candidates[0].phi_a, 100.0);
  for (const auto& c : r1.candidates) EXPECT_EQ(c.paper_aic, -0.5 * c.aic);
}

TEST(PhiGrid, RejectsBadGridsAndReportsTotalFailure) {
  auto gen = small_gen(6, 2, false);
  const auto Q = longpeer::QSpec::full().build(gen.ds.grid);
  EXPECT_THROW(longpeer::phi_grid_search(gen.ds, TimeStructure::constant(), Q, {},
                                         SelectionOptions{}),
               longpeer::Error);
  EXPECT_THROW(longpeer::phi_grid_search(gen.ds, TimeStructure::constant(), Q, {-1.0},
                                         SelectionOptions{}),
               longpeer::Error);

  // a basis with the wrong number of rows makes every candidate fail
  const Matrix bad = Matrix::Ones(7, 2);
  try {
    longpeer::phi_grid_search(gen.ds, TimeStructure::constant(), bad, {1.0, 10.0},
                              SelectionOptions{});
    FAIL() << "expected AllCandidatesFailed";
  } catch (const longpeer::Error& e) {
    EXPECT_EQ(e.kind(), longpeer::ErrorKind::AllCandidatesFailed);
  }
}

TEST(TimeStructures, TrivialSingleCandidate) {
  auto gen = small_gen(10, 3, false);
  const auto penalty =
      PenaltySpec::decomposition(longpeer::QSpec::full().build(gen.ds.grid), 10.0, 1.0);
  const auto report = longpeer::compare_time_structures(
      gen.ds, {TimeStructure::constant()}, penalty, SelectionOptions{});
  EXPECT_EQ(report.chosen, 0);
  EXPECT_EQ(report.candidates[0].time_structure.dimension(), 0);
}

TEST(TimeStructures, FlagsSpuriousTimeComponentAsAllNull) {
  // truth has gamma_0 only; fitting with D = 1 should usually leave the
  // gamma_1 band covering zero over the whole grid
  SelectionOptions opts;
  opts.threads = 2;
  int all_null_votes = 0;
  const int reps = 5;
  for (int rep = 0; rep < reps; ++rep) {
    auto gen = small_gen(50, rep, false);
    const auto penalty =
        PenaltySpec::decomposition(longpeer::QSpec::full().build(gen.ds.grid), 10.0, 1.0);
    const auto report = longpeer::compare_time_structures(
        gen.ds, {TimeStructure::parse("t")}, penalty, opts);
    ASSERT_EQ(report.chosen, 0);
    ASSERT_EQ(report.candidates[0].all_null.size(), 2u);
    if (report.candidates[0].all_null[1]) ++all_null_votes;
    EXPECT_FALSE(report.candidates[0].all_null[0]);  // gamma_0 is clearly nonzero
  }
  EXPECT_GT(all_null_votes, reps / 2);
}

TEST(TimeStructures, AicPrefersTheTrueTimeStructure) {
  // truth gamma_0 + t gamma_1 at N = 200, R^2 = 0.9: D = 1 beats D = 0
  SelectionOptions opts;
  opts.threads = 2;
  int d1_wins = 0;
  const int reps = 5;
  for (int rep = 0; rep < reps; ++rep) {
    auto gen = small_gen(200, rep, true);
    const auto penalty = PenaltySpec::decomposition(
        longpeer::QSpec::feature_matched().build(gen.ds.grid), 10.0, 1.0);
    const auto report = longpeer::compare_time_structures(
        gen.ds, {TimeStructure::constant(), TimeStructure::parse("t")}, penalty, opts);
    ASSERT_GE(report.chosen, 0);
    if (report.candidates[report.chosen].time_structure.dimension() == 1) ++d1_wins;
  }
  EXPECT_GT(d1_wins, reps / 2);
}

TEST(SelectionReport, SerializesToJsonAndCsv) {
  auto gen = small_gen(10, 4, false);
  const auto Q = longpeer::QSpec::full().build(gen.ds.grid);
  const auto report = longpeer::phi_grid_search(gen.ds, TimeStructure::constant(), Q,
                                                {1.0, 10.0}, SelectionOptions{});
  const auto js = report.to_json();
  EXPECT_NE(js.find("\"chosen\""), std::string::npos);
  EXPECT_NE(js.find("band_nullity"), std::string::npos);

  const auto csv = report.to_csv("intercept");
  EXPECT_NE(csv.find("model,scalar_covariates,time_structure,phi_a,aic"), std::string::npos);
  // one header plus one row per candidate
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
