#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labelshift/scenario.hpp"

namespace labelshift {

// Deviation-bound constants surfaced in reports as theoretical envelopes;
// they are never used inside estimation.
constexpr double kDeviationBoundC1 = 150.0;
constexpr double kDeviationBoundC2 = 2e6;
constexpr double kDeviationBoundC3 = 5014.0;

enum class SweepVariable { n, contamination_rate, outlier_fraction, perturbation_eps };
enum class EstimatorKind { mle, bbse, grid_oracle, naive };

std::string to_string(SweepVariable v);
std::string to_string(EstimatorKind e);
SweepVariable sweep_variable_from_string(const std::string& s);
EstimatorKind estimator_from_string(const std::string& s);

struct StudySpec {
  ScenarioSpec base_scenario;
  SweepVariable sweep_variable = SweepVariable::n;
  std::vector<double> sweep_values;  // strictly increasing
  std::int64_t replications = 1;
  std::vector<EstimatorKind> estimators{EstimatorKind::mle};
  double confidence = 0.9;  // quantile level; xi = -log(1 - confidence)
  double grid_resolution = 1e-3;
  std::size_t threads = 1;
};

struct StudyCell {
  double sweep_value = 0.0;
  EstimatorKind estimator = EstimatorKind::mle;
  double median_l1 = 0.0;
  double quantile_l1 = 0.0;
  double misspec_h2 = 0.0;
  double envelope = 0.0;           // l1 envelope sqrt((misspec + (k log n + xi)/n)/C)
  double deviation_envelope_sq = 0.0;  // squared-error bound with the named constants
  std::vector<double> errors;      // per replication, ordered by replication index
};

struct StudyReport {
  std::vector<StudyCell> cells;  // ordered by (sweep index, estimator index)
  std::map<std::string, double> slope;      // estimator -> fitted log-log slope
  std::map<std::string, double> intercept;  // n sweeps only
  double delta_star_value = 0.0;  // separation of the model components (base)
  double c_constant = 0.0;        // (delta_star / (2 sqrt 2))^2
  double xi = 0.0;
};

// Monte Carlo sweep: for every sweep value and replication, generate target
// data, run each estimator, and record the l1 error against the generating
// weights (the pre-contamination ones, never the contaminated mixture).
// Pure function of the spec, including its seed and thread count.
StudyReport run_study(const StudySpec& spec);

// l1-error envelope implied by the deviation bound with a user-supplied
// separation constant C.
double theoretical_envelope(std::size_t k, std::size_t n, double xi, double C,
                            double misspec);

// Squared-error bound with the named absolute constants; loose at desk scale
// by construction.
double deviation_envelope_sq(std::size_t k, std::size_t n, double xi, double misspec);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares of log(error) on log(n); needs >= 3 positive points.
RateFit rate_fit(const std::vector<std::pair<double, double>>& points);

}  // namespace labelshift
