#include <doctest.h>

#include <cmath>

#include "labelshift/io.hpp"
#include "labelshift/study.hpp"

using namespace labelshift;

namespace {

ScenarioSpec study_scenario() {
  std::vector<DiscreteDistribution> components{
      DiscreteDistribution({0, 1, 2, 3}, {0.55, 0.25, 0.15, 0.05}),
      DiscreteDistribution({0, 1, 2, 3}, {0.05, 0.15, 0.25, 0.55})};
  return ScenarioSpec{.k = 2,
                      .m = 4,
                      .components = components,
                      .beta_star = SimplexVector({0.7, 0.3}),
                      .alpha = SimplexVector({0.5, 0.5}),
                      .n = 400,
                      .seed = 77};
}

}  // namespace

TEST_CASE("theoretical envelope") {
  SUBCASE("frozen arithmetic") {
    // Independent evaluation of the same expression, assembled differently.
    double value = theoretical_envelope(3, 1000, 2.3, 0.125, 0.0);
    double expected =
        std::sqrt((3.0 * std::log(1000.0) + 2.3) / 1000.0 * (1.0 / 0.125));
    CHECK(value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(value - 0.43) <= 2e-3);
  }

  SUBCASE("monotone in xi") {
    double prev = 0.0;
    for (double xi = 1.0; xi < 1e6; xi *= 10.0) {
      double v = theoretical_envelope(3, 500, xi, 0.2, 0.0);
      CHECK(v > prev);
      prev = v;
    }
  }

  SUBCASE("doubling n shrinks the envelope") {
    std::size_t n = 3;
    for (int step = 0; step < 12; ++step) {
      CHECK(theoretical_envelope(3, 2 * n, 2.3, 0.2, 0.0) <
            theoretical_envelope(3, n, 2.3, 0.2, 0.0));
      n *= 2;
    }
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(theoretical_envelope(3, 100, 2.3, 0.0, 0.0), invalid_input_error);
    CHECK_THROWS_AS(theoretical_envelope(3, 100, 2.3, -1.0, 0.0), invalid_input_error);
  }
}

TEST_CASE("rate fit") {
  SUBCASE("exact power law") {
    std::vector<std::pair<double, double>> points;
    for (double n : {100.0, 316.0, 1000.0, 3162.0, 10000.0}) {
      points.emplace_back(n, 3.7 / std::sqrt(n));
    }
    auto fit = rate_fit(points);
    CHECK(std::abs(fit.slope + 0.5) <= 1e-12);
  }

  SUBCASE("constant errors") {
    std::vector<std::pair<double, double>> points{{10, 0.2}, {100, 0.2}, {1000, 0.2}};
    CHECK(std::abs(rate_fit(points).slope) <= 1e-12);
  }

  SUBCASE("log factor flattens the slope") {
    std::vector<std::pair<double, double>> points;
    for (double n : {100.0, 316.0, 1000.0, 3162.0, 10000.0}) {
      points.emplace_back(n, std::sqrt(std::log(n) / n));
    }
    auto fit = rate_fit(points);
    CHECK(fit.slope >= -0.45);
    CHECK(fit.slope <= -0.35);
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(rate_fit({{10, 0.1}, {20, 0.2}}), invalid_input_error);
    CHECK_THROWS_AS(rate_fit({{10, 0.1}, {20, 0.0}, {30, 0.2}}), invalid_input_error);
  }
}

TEST_CASE("deviation-bound envelope is enormous at desk scale") {
  double sq = deviation_envelope_sq(3, 1000, 2.3, 0.0);
  CHECK(sq > 4.0);  // vastly above any realizable squared l1 error
}

TEST_CASE("study runs deterministically") {
  StudySpec spec{.base_scenario = study_scenario()};
  spec.sweep_variable = SweepVariable::n;
  spec.sweep_values = {50, 100, 200};
  spec.replications = 8;
  spec.estimators = {EstimatorKind::mle, EstimatorKind::bbse, EstimatorKind::naive};

  auto first = run_study(spec);
  auto second = run_study(spec);
  CHECK(io::study_report_to_json(spec, first).dump() ==
        io::study_report_to_json(spec, second).dump());

  // Thread count must not change the report.
  auto threaded_spec = spec;
  threaded_spec.threads = 4;
  auto threaded = run_study(threaded_spec);
  CHECK(io::study_report_to_json(spec, first).dump() ==
        io::study_report_to_json(spec, threaded).dump());

  CHECK(first.cells.size() == 9);
  for (const auto& cell : first.cells) {
    CHECK(cell.errors.size() == 8);
    for (double err : cell.errors) {
      CHECK(err >= 0.0);
      CHECK(err <= 2.0);
    }
    CHECK(cell.envelope > 0.0);
  }
  CHECK(first.slope.count("mle") == 1);
}

TEST_CASE("study error accounting uses the pre-contamination weights") {
  // With full separation and no noise, the mle recovers beta* exactly even
  // though the contaminated mixture has different effective weights.
  std::vector<DiscreteDistribution> components{DiscreteDistribution({0}, {1.0}),
                                               DiscreteDistribution({1}, {1.0})};
  ScenarioSpec scenario{.k = 2,
                        .m = 3,
                        .components = components,
                        .beta_star = SimplexVector({0.5, 0.5}),
                        .alpha = SimplexVector({0.5, 0.5}),
                        .contamination_rate = 0.2,
                        .contaminant = DiscreteDistribution({0, 1}, {0.5, 0.5}),
                        .n = 4000,
                        .seed = 5};
  StudySpec spec{.base_scenario = scenario};
  spec.sweep_variable = SweepVariable::contamination_rate;
  spec.sweep_values = {0.0, 0.2};
  spec.replications = 4;
  spec.estimators = {EstimatorKind::mle};

  auto report = run_study(spec);
  // The symmetric contaminant keeps the mixture identical to the clean one,
  // so the error against beta* stays at sampling-noise scale at both levels.
  for (const auto& cell : report.cells) {
    CHECK(cell.median_l1 <= 0.05);
  }
}

TEST_CASE("deviation-bound envelope dominates the measured quantile") {
  StudySpec spec{.base_scenario = study_scenario()};
  spec.sweep_variable = SweepVariable::n;
  spec.sweep_values = {100, 400, 1600};
  spec.replications = 50;
  spec.estimators = {EstimatorKind::mle};

  auto report = run_study(spec);
  for (const auto& cell : report.cells) {
    double scaled = report.c_constant * cell.quantile_l1 * cell.quantile_l1;
    CHECK(scaled <= cell.deviation_envelope_sq);
  }
}

TEST_CASE("study configuration errors") {
  StudySpec spec{.base_scenario = study_scenario()};
  spec.sweep_values = {};
  CHECK_THROWS_AS(run_study(spec), configuration_error);

  spec = StudySpec{.base_scenario = study_scenario()};
  spec.sweep_values = {100, 100};
  CHECK_THROWS_AS(run_study(spec), configuration_error);

  spec = StudySpec{.base_scenario = study_scenario()};
  spec.sweep_values = {100};
  spec.replications = 0;
  CHECK_THROWS_AS(run_study(spec), configuration_error);

  spec = StudySpec{.base_scenario = study_scenario()};
  spec.sweep_variable = SweepVariable::contamination_rate;
  spec.sweep_values = {0.0, 0.1};  // base scenario has no contaminant
  spec.replications = 2;
  CHECK_THROWS_AS(run_study(spec), configuration_error);
}

TEST_CASE("worker failures surface as ordinary errors") {
  // A contaminant outside every component support produces zero-likelihood
  // samples; the failure must propagate out of the thread pool as a
  // validation error rather than killing the process.
  auto scenario = study_scenario();
  scenario.m = 5;
  scenario.contaminant = DiscreteDistribution({4}, {1.0});
  StudySpec spec{.base_scenario = scenario};
  spec.sweep_variable = SweepVariable::contamination_rate;
  spec.sweep_values = {0.0, 0.3};
  spec.replications = 6;
  spec.estimators = {EstimatorKind::mle};
  spec.threads = 4;
  CHECK_THROWS_AS(run_study(spec), validation_error);
}

TEST_CASE("grid oracle estimator joins the sweep for small k") {
  StudySpec spec{.base_scenario = study_scenario()};
  spec.base_scenario.n = 60;
  spec.sweep_variable = SweepVariable::n;
  spec.sweep_values = {40, 60, 90};
  spec.replications = 3;
  spec.estimators = {EstimatorKind::mle, EstimatorKind::grid_oracle};
  spec.grid_resolution = 1e-3;

  auto report = run_study(spec);
  for (std::size_t si = 0; si < 3; ++si) {
    const auto& mle_cell = report.cells[si * 2];
    const auto& grid_cell = report.cells[si * 2 + 1];
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(std::abs(mle_cell.errors[r] - grid_cell.errors[r]) <= 5e-3);
    }
  }
}
