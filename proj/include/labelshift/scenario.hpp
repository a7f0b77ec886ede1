#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "labelshift/core.hpp"
#include "labelshift/rng.hpp"

namespace labelshift {

// Generative description of an experiment on the finite covariate space
// {0, ..., m-1}: true components and weights, optional contamination and
// outliers, optional component misspecification, and the RNG seed.
struct ScenarioSpec {
  std::size_t k = 0;
  std::size_t m = 0;
  std::vector<DiscreteDistribution> components;  // true class-conditionals
  SimplexVector beta_star;
  SimplexVector alpha;  // source prior, strictly positive
  double contamination_rate = 0.0;
  std::optional<DiscreteDistribution> contaminant;
  std::vector<std::size_t> outlier_indices;
  std::optional<DiscreteDistribution> outlier_distribution;
  double component_perturbation = 0.0;  // mixing rate toward a seeded random direction
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool well_posed = true;  // enforce linear independence of the components
};

void validate_scenario(const ScenarioSpec& spec);

// n i.i.d. atoms from (1 - rate) * mixture + rate * contaminant, after which
// the positions in outlier_indices are overwritten with outlier draws.
// Deterministic given the seed.
std::vector<std::int64_t> sample_target(const ScenarioSpec& spec);

// Components used for estimation: the true ones mixed toward seeded random
// distributions at rate component_perturbation. Samples always come from the
// true components, so the realized misspecification is measurable.
std::vector<DiscreteDistribution> model_components(const ScenarioSpec& spec);

// max_i h^2(model component i, true component i).
double realized_misspecification(const ScenarioSpec& spec);

// Predictor values on an atom universe; rows outside the support of the
// class-conditional mixture are undefined rather than filled arbitrarily.
struct PredictorTable {
  std::vector<std::int64_t> atoms;
  std::vector<std::vector<double>> rows;  // one row of k values per atom
  std::vector<bool> defined;
  std::size_t label_count = 0;

  const std::vector<double>& row_for(std::int64_t atom) const;
  bool defined_for(std::int64_t atom) const;
};

// Posterior table f_i(x) = alpha_i q_i(x) / sum_j alpha_j q_j(x) on the given
// universe (defaults to the union of component supports).
PredictorTable bayes_predictor(std::span<const DiscreteDistribution> components,
                               const SimplexVector& alpha);
PredictorTable bayes_predictor(std::span<const DiscreteDistribution> components,
                               const SimplexVector& alpha,
                               std::vector<std::int64_t> universe);

// Column-stochastic matrix M[i][j] = sum_x f_i(x) Q_j(x).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::vector<double>> values);
  const std::vector<std::vector<double>>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<std::vector<double>> values_;
};

ConfusionMatrix confusion_matrix(const PredictorTable& predictor,
                                 std::span<const DiscreteDistribution> components);

enum class CalibrationMode { canonical, marginal };

struct CalibrationReport {
  double max_gap = 0.0;
  bool calibrated = false;  // max_gap <= 1e-9
  std::size_t groups = 0;
};

// Exact calibration audit under the source joint (label i with prior
// alpha_i, covariate from component i). Canonical mode conditions on the full
// prediction row, marginal mode on a single coordinate.
CalibrationReport check_calibration(const PredictorTable& predictor,
                                    std::span<const DiscreteDistribution> components,
                                    const SimplexVector& alpha, CalibrationMode mode);

struct PopulationArgmaxResult {
  SimplexVector beta;
  bool identifiable = true;
  std::int64_t iterations = 0;
  double objective = 0.0;
};

// Exact population maximizer of beta -> E[log sum_j beta_j f_j(X) / alpha_j]
// under the target mixture, computed as a weighted finite sum and maximized
// by the EM fixed point with atom weights. Requires a canonically calibrated
// predictor.
PopulationArgmaxResult population_mlls_argmax(
    const PredictorTable& predictor, std::span<const DiscreteDistribution> components,
    const SimplexVector& alpha, const SimplexVector& beta_star);

struct GammaMismatch {
  bool feasible = false;
  double l1_mismatch = 0.0;
  std::vector<double> gamma;
};

// Solves M(f) gamma = alpha and reports ||alpha - gamma||_1; infeasible when
// the confusion matrix is singular or the solution leaves the positive cone.
GammaMismatch gamma_mismatch(const PredictorTable& predictor,
                             std::span<const DiscreteDistribution> components,
                             const SimplexVector& alpha);

// Evaluation matrix L[i][j] = q_j(x_i) for the given samples.
EvalMatrix evals_at(std::span<const DiscreteDistribution> components,
                    std::span<const std::int64_t> samples);

// Same information with repeated atoms collapsed into weighted rows; the
// weighted log-likelihood is identical and estimation cost drops from O(n)
// to O(distinct atoms) per sweep.
struct WeightedEvals {
  EvalMatrix L;
  std::vector<double> weights;
};
WeightedEvals weighted_evals_at(std::span<const DiscreteDistribution> components,
                                std::span<const std::int64_t> samples);

// Predictor output rows at the given samples; every sample must hit a
// defined row.
std::vector<std::vector<double>> predictor_rows_at(
    const PredictorTable& predictor, std::span<const std::int64_t> samples);

// Flat-Dirichlet distribution on the given atoms.
DiscreteDistribution random_distribution(Rng& rng, std::span<const std::int64_t> atoms);

}  // namespace labelshift
