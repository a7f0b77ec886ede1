#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "labelshift/core.hpp"

namespace labelshift {

struct EmConfig {
  std::int64_t max_iterations = 10000;
  double tolerance = 1e-10;  // absolute log-likelihood improvement per step
  // When positive, termination switches to the sup-norm of the weight update
  // instead of the likelihood improvement; the update keeps contracting after
  // log-likelihood improvements drop below double resolution, so this reaches
  // much tighter weight accuracy.
  double param_tolerance = 0.0;
  std::optional<SimplexVector> init;  // defaults to uniform
  bool record_trace = false;
};

// Mixture-weight MLE by the EM fixed point
//   beta_j <- (1/n) sum_i beta_j L[i][j] / (sum_l beta_l L[i][l]).
// The log-likelihood is nondecreasing along the iteration; stops when the
// absolute improvement drops below cfg.tolerance or at the iteration cap.
// Output weights below 1e-12 are floored at zero and the vector renormalized.
EstimationResult estimate_mle(const EvalMatrix& L, const EmConfig& cfg);

// Same fixed point with a nonnegative weight per row; the unweighted call is
// the all-ones special case. Exposed because exact population objectives and
// collapsed repeated samples are weighted instances of the same problem.
EstimationResult estimate_mle_weighted(const EvalMatrix& L,
                                       std::span<const double> weights,
                                       const EmConfig& cfg);

// Per-iteration log-likelihood values when cfg.record_trace is set.
struct TracedEstimationResult {
  EstimationResult result;
  std::vector<double> ll_trace;
};
TracedEstimationResult estimate_mle_traced(const EvalMatrix& L,
                                           std::span<const double> weights,
                                           const EmConfig& cfg);

// Predictor-based estimation: rows of F must lie on the simplex (within 1e-6)
// and alpha must be strictly positive. Reduces to estimate_mle on
// L[i][j] = F[i][j] / alpha[j].
EstimationResult estimate_mle_predictor(const std::vector<std::vector<double>>& F,
                                        const SimplexVector& alpha,
                                        const EmConfig& cfg);

// Exhaustive log-likelihood scan over the simplex lattice with the given
// step; ties broken lexicographically. Only for k <= 4. Serves as the
// independent verification oracle for the EM path.
EstimationResult estimate_grid_oracle(const EvalMatrix& L, double resolution,
                                      std::span<const double> weights = {});

struct BbseResult {
  SimplexVector beta;
  double condition_number = 0.0;
};

// Confusion-matrix baseline: solve M beta = column means of F, then project
// onto the simplex.
BbseResult estimate_bbse(const std::vector<std::vector<double>>& F,
                         const std::vector<std::vector<double>>& M);

}  // namespace labelshift
