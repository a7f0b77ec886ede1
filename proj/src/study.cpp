#include "labelshift/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "labelshift/distances.hpp"
#include "labelshift/likelihood.hpp"

namespace labelshift {

namespace {

double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sorted_quantile(std::vector<double> v, double level) {
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  auto rank = static_cast<std::size_t>(std::ceil(level * n));
  if (rank == 0) rank = 1;
  if (rank > v.size()) rank = v.size();
  return v[rank - 1];
}

ScenarioSpec scenario_for(const StudySpec& spec, std::size_t sweep_index) {
  ScenarioSpec s = spec.base_scenario;
  const double v = spec.sweep_values[sweep_index];
  switch (spec.sweep_variable) {
    case SweepVariable::n:
      s.n = static_cast<std::size_t>(std::llround(v));
      break;
    case SweepVariable::contamination_rate:
      s.contamination_rate = v;
      if (v > 0.0 && !s.contaminant) {
        throw configuration_error(
            "run_study: contamination sweep requires a contaminant");
      }
      break;
    case SweepVariable::outlier_fraction: {
      if (v > 0.0 && !s.outlier_distribution) {
        throw configuration_error(
            "run_study: outlier sweep requires an outlier distribution");
      }
      auto count = static_cast<std::size_t>(std::floor(v * static_cast<double>(s.n)));
      s.outlier_indices.resize(count);
      std::iota(s.outlier_indices.begin(), s.outlier_indices.end(), 0);
      break;
    }
    case SweepVariable::perturbation_eps:
      s.component_perturbation = v;
      break;
  }
  return s;
}

}  // namespace

std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::n: return "n";
    case SweepVariable::contamination_rate: return "contamination_rate";
    case SweepVariable::outlier_fraction: return "outlier_fraction";
    case SweepVariable::perturbation_eps: return "perturbation_eps";
  }
  return "?";
}

std::string to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::mle: return "mle";
    case EstimatorKind::bbse: return "bbse";
    case EstimatorKind::grid_oracle: return "grid_oracle";
    case EstimatorKind::naive: return "naive";
  }
  return "?";
}

SweepVariable sweep_variable_from_string(const std::string& s) {
  if (s == "n") return SweepVariable::n;
  if (s == "contamination_rate") return SweepVariable::contamination_rate;
  if (s == "outlier_fraction") return SweepVariable::outlier_fraction;
  if (s == "perturbation_eps") return SweepVariable::perturbation_eps;
  throw configuration_error("unknown sweep variable: " + s);
}

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "mle") return EstimatorKind::mle;
  if (s == "bbse") return EstimatorKind::bbse;
  if (s == "grid_oracle") return EstimatorKind::grid_oracle;
  if (s == "naive") return EstimatorKind::naive;
  throw configuration_error("unknown estimator: " + s);
}

double theoretical_envelope(std::size_t k, std::size_t n, double xi, double C,
                            double misspec) {
  if (C <= 0.0) throw invalid_input_error("theoretical_envelope: C must be positive");
  if (k == 0 || n == 0 || !(xi > 0.0) || misspec < 0.0) {
    throw invalid_input_error("theoretical_envelope: inputs must be positive");
  }
  const double nn = static_cast<double>(n);
  return std::sqrt((misspec + (static_cast<double>(k) * std::log(nn) + xi) / nn) / C);
}

double deviation_envelope_sq(std::size_t k, std::size_t n, double xi, double misspec) {
  if (k == 0 || n == 0 || !(xi > 0.0) || misspec < 0.0) {
    throw invalid_input_error("deviation_envelope_sq: inputs must be positive");
  }
  const double nn = static_cast<double>(n);
  return 2.0 * (1.0 + kDeviationBoundC1) * misspec +
         (2.0 * kDeviationBoundC2 * static_cast<double>(k) * std::log(nn) + 2.0 * kDeviationBoundC3 * xi) /
             nn;
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) {
    throw invalid_input_error("rate_fit: need at least 3 points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, err] : points) {
    if (!(n > 0.0) || !(err > 0.0)) {
      throw invalid_input_error("rate_fit: points must be positive");
    }
    double x = std::log(n), y = std::log(err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const auto count = static_cast<double>(points.size());
  double denom = count * sxx - sx * sx;
  if (denom == 0.0) throw invalid_input_error("rate_fit: degenerate abscissae");
  RateFit fit;
  fit.slope = (count * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / count;
  return fit;
}

StudyReport run_study(const StudySpec& spec) {
  if (spec.replications < 1) {
    throw configuration_error("run_study: replications must be >= 1");
  }
  if (spec.sweep_values.empty()) {
    throw configuration_error("run_study: sweep_values must be nonempty");
  }
  for (std::size_t i = 1; i < spec.sweep_values.size(); ++i) {
    if (!(spec.sweep_values[i] > spec.sweep_values[i - 1])) {
      throw configuration_error("run_study: sweep_values must be strictly increasing");
    }
  }
  if (spec.estimators.empty()) {
    throw configuration_error("run_study: no estimators requested");
  }
  const bool wants_grid =
      std::find(spec.estimators.begin(), spec.estimators.end(),
                EstimatorKind::grid_oracle) != spec.estimators.end();
  if (wants_grid && spec.base_scenario.k > 4) {
    throw configuration_error("run_study: grid_oracle requires k <= 4");
  }
  const bool wants_predictor =
      std::find(spec.estimators.begin(), spec.estimators.end(), EstimatorKind::bbse) !=
          spec.estimators.end() ||
      std::find(spec.estimators.begin(), spec.estimators.end(), EstimatorKind::naive) !=
          spec.estimators.end();
  validate_scenario(spec.base_scenario);

  const std::size_t values = spec.sweep_values.size();
  const std::size_t kinds = spec.estimators.size();
  const auto reps = static_cast<std::size_t>(spec.replications);

  StudyReport report;
  report.xi = -std::log(1.0 - spec.confidence);
  report.cells.reserve(values * kinds);

  for (std::size_t si = 0; si < values; ++si) {
    ScenarioSpec scenario = scenario_for(spec, si);
    validate_scenario(scenario);
    auto model = model_components(scenario);
    const double misspec = realized_misspecification(scenario);

    SeparationResult sep = delta_star(model, DeltaStarMethod::exact);
    const double c_const = std::pow(sep.delta_star / (2.0 * std::sqrt(2.0)), 2);
    if (si == 0) {
      report.delta_star_value = sep.delta_star;
      report.c_constant = c_const;
    }

    std::optional<PredictorTable> predictor;
    std::optional<std::vector<std::vector<double>>> confusion;
    if (wants_predictor) {
      std::vector<std::int64_t> universe(scenario.m);
      std::iota(universe.begin(), universe.end(), 0);
      predictor = bayes_predictor(model, scenario.alpha, universe);
      // Population confusion of the predictor against the true conditionals.
      confusion = confusion_matrix(*predictor, scenario.components).values();
    }

    // errors[estimator][replication]
    std::vector<std::vector<double>> errors(kinds, std::vector<double>(reps, 0.0));

    auto run_replication = [&](std::size_t r) {
      ScenarioSpec rep_scenario = scenario;
      rep_scenario.seed =
          Rng::derive(spec.base_scenario.seed, {si, r}).next_u64();
      auto samples = sample_target(rep_scenario);
      WeightedEvals evals = weighted_evals_at(model, samples);

      std::optional<std::vector<std::vector<double>>> rows;
      auto predictor_rows = [&]() -> const std::vector<std::vector<double>>& {
        if (!rows) {
          try {
            rows = predictor_rows_at(*predictor, samples);
          } catch (const invalid_input_error& e) {
            throw configuration_error(
                std::string("run_study: predictor-based estimator is "
                            "incompatible with the scenario: ") +
                e.what());
          }
        }
        return *rows;
      };
      for (std::size_t e = 0; e < kinds; ++e) {
        SimplexVector beta = SimplexVector::uniform(scenario.k);
        switch (spec.estimators[e]) {
          case EstimatorKind::mle: {
            beta = estimate_mle_weighted(evals.L, evals.weights, EmConfig{}).beta_hat;
            break;
          }
          case EstimatorKind::grid_oracle: {
            beta = estimate_grid_oracle(evals.L, spec.grid_resolution, evals.weights)
                       .beta_hat;
            break;
          }
          case EstimatorKind::bbse: {
            beta = estimate_bbse(predictor_rows(), *confusion).beta;
            break;
          }
          case EstimatorKind::naive: {
            const auto& F = predictor_rows();
            std::vector<double> mean(scenario.k, 0.0);
            for (const auto& row : F) {
              for (std::size_t j = 0; j < scenario.k; ++j) mean[j] += row[j];
            }
            for (double& x : mean) x /= static_cast<double>(F.size());
            beta = simplex_project(mean);
            break;
          }
        }
        errors[e][r] = l1_distance(beta, scenario.beta_star);
      }
    };

    if (spec.threads <= 1 || reps == 1) {
      for (std::size_t r = 0; r < reps; ++r) run_replication(r);
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr failure;
      std::mutex failure_mutex;
      auto worker = [&] {
        for (;;) {
          std::size_t r = next.fetch_add(1);
          if (r >= reps) return;
          try {
            run_replication(r);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next.store(reps);
            return;
          }
        }
      };
      std::vector<std::thread> pool;
      const std::size_t count = std::min(spec.threads, reps);
      pool.reserve(count);
      for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
      if (failure) std::rethrow_exception(failure);
    }

    for (std::size_t e = 0; e < kinds; ++e) {
      StudyCell cell;
      cell.sweep_value = spec.sweep_values[si];
      cell.estimator = spec.estimators[e];
      cell.errors = errors[e];
      cell.median_l1 = sorted_median(errors[e]);
      cell.quantile_l1 = sorted_quantile(errors[e], spec.confidence);
      cell.misspec_h2 = misspec;
      cell.envelope = theoretical_envelope(scenario.k, scenario.n, report.xi,
                                           c_const, misspec);
      cell.deviation_envelope_sq =
          deviation_envelope_sq(scenario.k, scenario.n, report.xi, misspec);
      report.cells.push_back(std::move(cell));
    }
  }

  if (spec.sweep_variable == SweepVariable::n && values >= 3) {
    for (std::size_t e = 0; e < kinds; ++e) {
      std::vector<std::pair<double, double>> points;
      for (std::size_t si = 0; si < values; ++si) {
        const StudyCell& cell = report.cells[si * kinds + e];
        if (cell.median_l1 > 0.0) {
          points.emplace_back(spec.sweep_values[si], cell.median_l1);
        }
      }
      if (points.size() >= 3) {
        RateFit fit = rate_fit(points);
        report.slope[to_string(spec.estimators[e])] = fit.slope;
        report.intercept[to_string(spec.estimators[e])] = fit.intercept;
      }
    }
  }
  return report;
}

}  // namespace labelshift
