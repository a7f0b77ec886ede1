#include "labelshift/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "labelshift/distances.hpp"
#include "labelshift/likelihood.hpp"

namespace labelshift {

namespace {

constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kOutlierStream = 2;
constexpr std::uint64_t kPerturbStream = 3;

constexpr double kCalibrationGapTolerance = 1e-9;

void check_atoms_in_space(const DiscreteDistribution& dist, std::size_t m,
                          const char* what) {
  for (std::int64_t a : dist.atoms()) {
    if (a < 0 || static_cast<std::size_t>(a) >= m) {
      throw invalid_input_error(std::string(what) + ": atom " + std::to_string(a) +
                                " outside the covariate space");
    }
  }
}

std::vector<double> mixture_on_universe(std::span<const DiscreteDistribution> components,
                                        std::span<const double> weights,
                                        std::span<const std::int64_t> universe) {
  std::vector<double> mix(universe.size(), 0.0);
  for (std::size_t j = 0; j < components.size(); ++j) {
    auto probs = probs_on_universe(components[j], universe);
    for (std::size_t a = 0; a < universe.size(); ++a) mix[a] += weights[j] * probs[a];
  }
  return mix;
}

}  // namespace

void validate_scenario(const ScenarioSpec& spec) {
  if (spec.k < 2) throw invalid_input_error("ScenarioSpec: k must be >= 2");
  if (spec.m < 1) throw invalid_input_error("ScenarioSpec: m must be >= 1");
  if (spec.n < 1) throw invalid_input_error("ScenarioSpec: n must be >= 1");
  if (spec.components.size() != spec.k) {
    throw invalid_input_error("ScenarioSpec: expected k components");
  }
  if (spec.beta_star.size() != spec.k || spec.alpha.size() != spec.k) {
    throw invalid_input_error("ScenarioSpec: weight dimension mismatch");
  }
  for (std::size_t j = 0; j < spec.k; ++j) {
    if (spec.alpha[j] <= 0.0) {
      throw invalid_input_error("ScenarioSpec: alpha must be strictly positive");
    }
  }
  for (const auto& c : spec.components) check_atoms_in_space(c, spec.m, "component");
  if (spec.contamination_rate < 0.0 || spec.contamination_rate >= 1.0) {
    throw invalid_input_error("ScenarioSpec: contamination_rate must be in [0, 1)");
  }
  if (!spec.contaminant && spec.contamination_rate != 0.0) {
    throw invalid_input_error(
        "ScenarioSpec: contamination_rate must be 0 without a contaminant");
  }
  if (spec.contaminant) check_atoms_in_space(*spec.contaminant, spec.m, "contaminant");
  if (!spec.outlier_distribution && !spec.outlier_indices.empty()) {
    throw invalid_input_error(
        "ScenarioSpec: outlier indices require an outlier distribution");
  }
  if (spec.outlier_distribution) {
    check_atoms_in_space(*spec.outlier_distribution, spec.m, "outlier distribution");
  }
  std::set<std::size_t> seen;
  for (std::size_t idx : spec.outlier_indices) {
    if (idx >= spec.n) {
      throw invalid_input_error("ScenarioSpec: outlier index out of range");
    }
    if (!seen.insert(idx).second) {
      throw invalid_input_error("ScenarioSpec: duplicate outlier index");
    }
  }
  if (spec.component_perturbation < 0.0) {
    throw invalid_input_error("ScenarioSpec: perturbation must be >= 0");
  }
  if (spec.well_posed && !linearly_independent(spec.components)) {
    throw invalid_input_error(
        "ScenarioSpec: components are linearly dependent but the scenario is "
        "tagged well-posed");
  }
}

std::vector<std::int64_t> sample_target(const ScenarioSpec& spec) {
  validate_scenario(spec);

  std::vector<std::int64_t> universe(spec.m);
  std::iota(universe.begin(), universe.end(), 0);

  // Collapse (1 - rate) * sum beta_j Q_j + rate * contaminant into a single
  // categorical over the covariate space.
  std::vector<double> p =
      mixture_on_universe(spec.components, spec.beta_star.span(), universe);
  for (double& x : p) x *= 1.0 - spec.contamination_rate;
  if (spec.contaminant) {
    auto cont = probs_on_universe(*spec.contaminant, universe);
    for (std::size_t a = 0; a < p.size(); ++a) {
      p[a] += spec.contamination_rate * cont[a];
    }
  }

  Rng rng = Rng::derive(spec.seed, {kSampleStream});
  std::vector<std::int64_t> samples(spec.n);
  for (auto& s : samples) {
    s = static_cast<std::int64_t>(rng.categorical(p));
  }

  if (spec.outlier_distribution && !spec.outlier_indices.empty()) {
    Rng outlier_rng = Rng::derive(spec.seed, {kOutlierStream});
    std::vector<std::size_t> sorted(spec.outlier_indices);
    std::sort(sorted.begin(), sorted.end());
    auto probs = probs_on_universe(*spec.outlier_distribution, universe);
    for (std::size_t idx : sorted) {
      samples[idx] = static_cast<std::int64_t>(outlier_rng.categorical(probs));
    }
  }
  return samples;
}

std::vector<DiscreteDistribution> model_components(const ScenarioSpec& spec) {
  validate_scenario(spec);
  if (spec.component_perturbation == 0.0) return spec.components;

  const double eps = spec.component_perturbation;
  std::vector<std::int64_t> universe(spec.m);
  std::iota(universe.begin(), universe.end(), 0);

  std::vector<DiscreteDistribution> out;
  out.reserve(spec.k);
  for (std::size_t i = 0; i < spec.k; ++i) {
    Rng rng = Rng::derive(spec.seed, {kPerturbStream, i});
    auto direction = rng.dirichlet(spec.m);
    auto base = probs_on_universe(spec.components[i], universe);
    std::vector<double> mixed(spec.m);
    for (std::size_t a = 0; a < spec.m; ++a) {
      mixed[a] = (1.0 - eps) * base[a] + eps * direction[a];
    }
    out.emplace_back(universe, std::move(mixed));
  }
  return out;
}

double realized_misspecification(const ScenarioSpec& spec) {
  auto model = model_components(spec);
  double worst = 0.0;
  for (std::size_t i = 0; i < spec.k; ++i) {
    double h = hellinger(model[i], spec.components[i]);
    worst = std::max(worst, h * h);
  }
  return worst;
}

const std::vector<double>& PredictorTable::row_for(std::int64_t atom) const {
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i] == atom) {
      if (!defined[i]) {
        throw invalid_input_error("PredictorTable: row for atom " +
                                  std::to_string(atom) + " is undefined");
      }
      return rows[i];
    }
  }
  throw invalid_input_error("PredictorTable: atom " + std::to_string(atom) +
                            " not in universe");
}

bool PredictorTable::defined_for(std::int64_t atom) const {
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i] == atom) return defined[i];
  }
  return false;
}

PredictorTable bayes_predictor(std::span<const DiscreteDistribution> components,
                               const SimplexVector& alpha) {
  return bayes_predictor(components, alpha, atom_union(components));
}

PredictorTable bayes_predictor(std::span<const DiscreteDistribution> components,
                               const SimplexVector& alpha,
                               std::vector<std::int64_t> universe) {
  const std::size_t k = components.size();
  if (alpha.size() != k) {
    throw invalid_input_error("bayes_predictor: alpha dimension mismatch");
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (alpha[j] <= 0.0) {
      throw invalid_input_error("bayes_predictor: alpha must be strictly positive");
    }
  }

  PredictorTable table;
  table.label_count = k;
  table.atoms = std::move(universe);
  table.rows.assign(table.atoms.size(), std::vector<double>(k, 0.0));
  table.defined.assign(table.atoms.size(), false);

  std::vector<std::vector<double>> density(k);
  for (std::size_t j = 0; j < k; ++j) {
    density[j] = probs_on_universe(components[j], table.atoms);
  }
  for (std::size_t a = 0; a < table.atoms.size(); ++a) {
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += alpha[j] * density[j][a];
    if (denom <= 0.0) continue;  // outside the support: left undefined
    table.defined[a] = true;
    for (std::size_t j = 0; j < k; ++j) {
      table.rows[a][j] = alpha[j] * density[j][a] / denom;
    }
  }
  return table;
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::vector<double>> values)
    : values_(std::move(values)) {
  const std::size_t k = values_.size();
  if (k == 0) throw invalid_input_error("ConfusionMatrix: empty");
  for (const auto& row : values_) {
    if (row.size() != k) throw invalid_input_error("ConfusionMatrix: not square");
    for (double x : row) {
      if (!std::isfinite(x) || x < -1e-12 || x > 1.0 + 1e-12) {
        throw invalid_input_error("ConfusionMatrix: entry outside [0, 1]");
      }
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < k; ++i) col += values_[i][j];
    if (std::abs(col - 1.0) > kSimplexTolerance) {
      throw invalid_input_error("ConfusionMatrix: column " + std::to_string(j) +
                                " sums to " + std::to_string(col));
    }
  }
}

ConfusionMatrix confusion_matrix(const PredictorTable& predictor,
                                 std::span<const DiscreteDistribution> components) {
  const std::size_t k = components.size();
  if (predictor.label_count != k) {
    throw invalid_input_error("confusion_matrix: label count mismatch");
  }
  std::vector<std::vector<double>> density(k);
  for (std::size_t j = 0; j < k; ++j) {
    density[j] = probs_on_universe(components[j], predictor.atoms);
    // Catch charged atoms outside the predictor universe as well.
    double covered = 0.0;
    for (double x : density[j]) covered += x;
    if (std::abs(covered - 1.0) > kSimplexTolerance) {
      throw invalid_input_error(
          "confusion_matrix: component charges atoms outside the predictor table");
    }
  }
  for (std::size_t a = 0; a < predictor.atoms.size(); ++a) {
    if (predictor.defined[a]) continue;
    for (std::size_t j = 0; j < k; ++j) {
      if (density[j][a] > 0.0) {
        throw invalid_input_error(
            "confusion_matrix: predictor undefined on a charged atom");
      }
    }
  }

  std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t a = 0; a < predictor.atoms.size(); ++a) {
        s += predictor.rows[a][i] * density[j][a];
      }
      m[i][j] = s;
    }
  }
  return ConfusionMatrix(std::move(m));
}

CalibrationReport check_calibration(const PredictorTable& predictor,
                                    std::span<const DiscreteDistribution> components,
                                    const SimplexVector& alpha, CalibrationMode mode) {
  const std::size_t k = components.size();
  if (predictor.label_count != k || alpha.size() != k) {
    throw invalid_input_error("check_calibration: dimension mismatch");
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (alpha[j] <= 0.0) {
      throw invalid_input_error("check_calibration: alpha must be strictly positive");
    }
  }

  // Joint source mass pi(a, i) = alpha_i Q_i(a) on the predictor universe.
  std::vector<std::vector<double>> joint(predictor.atoms.size(),
                                         std::vector<double>(k, 0.0));
  for (std::size_t j = 0; j < k; ++j) {
    auto density = probs_on_universe(components[j], predictor.atoms);
    for (std::size_t a = 0; a < predictor.atoms.size(); ++a) {
      joint[a][j] = alpha[j] * density[a];
    }
  }

  CalibrationReport report;
  if (mode == CalibrationMode::canonical) {
    // Group atoms with identical prediction rows.
    std::map<std::vector<double>, std::vector<std::size_t>> groups;
    for (std::size_t a = 0; a < predictor.atoms.size(); ++a) {
      double mass = std::accumulate(joint[a].begin(), joint[a].end(), 0.0);
      if (mass <= 0.0) continue;
      groups[predictor.rows[a]].push_back(a);
    }
    report.groups = groups.size();
    for (const auto& [row, members] : groups) {
      double mass = 0.0;
      std::vector<double> label_mass(k, 0.0);
      for (std::size_t a : members) {
        for (std::size_t i = 0; i < k; ++i) {
          label_mass[i] += joint[a][i];
          mass += joint[a][i];
        }
      }
      for (std::size_t i = 0; i < k; ++i) {
        report.max_gap = std::max(report.max_gap, std::abs(row[i] - label_mass[i] / mass));
      }
    }
  } else {
    // Group by a single predictor coordinate, one label at a time.
    std::size_t group_count = 0;
    for (std::size_t i = 0; i < k; ++i) {
      std::map<double, std::pair<double, double>> groups;  // value -> (label mass, mass)
      for (std::size_t a = 0; a < predictor.atoms.size(); ++a) {
        double mass = std::accumulate(joint[a].begin(), joint[a].end(), 0.0);
        if (mass <= 0.0) continue;
        auto& acc = groups[predictor.rows[a][i]];
        acc.first += joint[a][i];
        acc.second += mass;
      }
      group_count += groups.size();
      for (const auto& [value, acc] : groups) {
        report.max_gap = std::max(report.max_gap, std::abs(value - acc.first / acc.second));
      }
    }
    report.groups = group_count;
  }
  report.calibrated = report.max_gap <= kCalibrationGapTolerance;
  return report;
}

PopulationArgmaxResult population_mlls_argmax(
    const PredictorTable& predictor, std::span<const DiscreteDistribution> components,
    const SimplexVector& alpha, const SimplexVector& beta_star) {
  const std::size_t k = components.size();
  if (predictor.label_count != k || alpha.size() != k || beta_star.size() != k) {
    throw invalid_input_error("population_mlls_argmax: dimension mismatch");
  }

  auto calibration =
      check_calibration(predictor, components, alpha, CalibrationMode::canonical);
  if (!calibration.calibrated) {
    throw precondition_error(
        "population_mlls_argmax: predictor is not canonically calibrated "
        "(check_calibration gap " +
        std::to_string(calibration.max_gap) + ")");
  }

  // Identifiability: the measures f_i * P_alpha must be linearly independent.
  std::vector<double> p_alpha =
      mixture_on_universe(components, alpha.span(), predictor.atoms);
  std::vector<std::vector<double>> cols(k,
                                        std::vector<double>(predictor.atoms.size(), 0.0));
  for (std::size_t a = 0; a < predictor.atoms.size(); ++a) {
    for (std::size_t j = 0; j < k; ++j) {
      cols[j][a] = predictor.rows[a][j] * p_alpha[a];
    }
  }
  const bool identifiable = matrix_rank(cols, 1e-8) == k;

  // Exact population objective: atoms weighted by the target mixture mass.
  std::vector<double> target =
      mixture_on_universe(components, beta_star.span(), predictor.atoms);
  std::vector<double> flat;
  std::vector<double> weights;
  std::size_t rows = 0;
  for (std::size_t a = 0; a < predictor.atoms.size(); ++a) {
    if (target[a] <= 0.0) continue;
    for (std::size_t j = 0; j < k; ++j) {
      flat.push_back(predictor.rows[a][j] / alpha[j]);
    }
    weights.push_back(target[a]);
    ++rows;
  }
  EvalMatrix L(std::move(flat), rows, k);

  EmConfig cfg;
  cfg.max_iterations = 500000;
  cfg.param_tolerance = 1e-14;
  EstimationResult em = estimate_mle_weighted(L, weights, cfg);

  return PopulationArgmaxResult{.beta = em.beta_hat,
                                .identifiable = identifiable,
                                .iterations = em.iterations,
                                .objective = em.log_likelihood};
}

GammaMismatch gamma_mismatch(const PredictorTable& predictor,
                             std::span<const DiscreteDistribution> components,
                             const SimplexVector& alpha) {
  ConfusionMatrix m = confusion_matrix(predictor, components);
  const std::size_t k = m.size();
  if (alpha.size() != k) {
    throw invalid_input_error("gamma_mismatch: alpha dimension mismatch");
  }

  GammaMismatch out;
  // Solve M gamma = alpha by elimination; reuse the BBSE solver shape.
  std::vector<std::vector<double>> a = m.values();
  std::vector<double> b = alpha.values();
  const double scale = 1.0;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    for (std::size_t i = col + 1; i < k; ++i) {
      if (std::abs(a[i][col]) > std::abs(a[pivot][col])) pivot = i;
    }
    if (std::abs(a[pivot][col]) < 1e-12 * scale) return out;  // singular
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t i = col + 1; i < k; ++i) {
      double f = a[i][col] / a[col][col];
      for (std::size_t j = col; j < k; ++j) a[i][j] -= f * a[col][j];
      b[i] -= f * b[col];
    }
  }
  std::vector<double> gamma(k, 0.0);
  for (std::size_t i = k; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < k; ++j) s -= a[i][j] * gamma[j];
    gamma[i] = s / a[i][i];
  }
  for (double g : gamma) {
    if (g <= 0.0) return out;  // leaves the positive cone: flagged infeasible
  }
  out.feasible = true;
  out.gamma = gamma;
  for (std::size_t i = 0; i < k; ++i) out.l1_mismatch += std::abs(alpha[i] - gamma[i]);
  return out;
}

EvalMatrix evals_at(std::span<const DiscreteDistribution> components,
                    std::span<const std::int64_t> samples) {
  const std::size_t k = components.size();
  if (samples.empty()) throw invalid_input_error("evals_at: no samples");
  std::vector<double> flat;
  flat.reserve(samples.size() * k);
  for (std::int64_t x : samples) {
    for (std::size_t j = 0; j < k; ++j) flat.push_back(components[j].prob_of(x));
  }
  return EvalMatrix(std::move(flat), samples.size(), k);
}

WeightedEvals weighted_evals_at(std::span<const DiscreteDistribution> components,
                                std::span<const std::int64_t> samples) {
  const std::size_t k = components.size();
  if (samples.empty()) throw invalid_input_error("weighted_evals_at: no samples");
  std::map<std::int64_t, double> counts;
  for (std::int64_t x : samples) counts[x] += 1.0;

  std::vector<double> flat;
  std::vector<double> weights;
  flat.reserve(counts.size() * k);
  for (const auto& [atom, count] : counts) {
    for (std::size_t j = 0; j < k; ++j) flat.push_back(components[j].prob_of(atom));
    weights.push_back(count);
  }
  return WeightedEvals{EvalMatrix(std::move(flat), counts.size(), k),
                       std::move(weights)};
}

std::vector<std::vector<double>> predictor_rows_at(
    const PredictorTable& predictor, std::span<const std::int64_t> samples) {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (std::int64_t x : samples) out.push_back(predictor.row_for(x));
  return out;
}

DiscreteDistribution random_distribution(Rng& rng,
                                         std::span<const std::int64_t> atoms) {
  if (atoms.empty()) throw invalid_input_error("random_distribution: no atoms");
  return DiscreteDistribution({atoms.begin(), atoms.end()}, rng.dirichlet(atoms.size()));
}

}  // namespace labelshift
