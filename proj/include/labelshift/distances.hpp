#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "labelshift/core.hpp"

namespace labelshift {

// Hellinger distance between index-aligned probability vectors.
double hellinger(std::span<const double> p, std::span<const double> q);

// Hellinger distance between finitely supported distributions; both are
// zero-filled onto the union of their supports first, which is a valid
// dominating choice for the defining integral.
double hellinger(const DiscreteDistribution& p, const DiscreteDistribution& q);

double total_variation(std::span<const double> p, std::span<const double> q);
double total_variation(const DiscreteDistribution& p, const DiscreteDistribution& q);

// Hellinger distance between weight vectors treated as distributions on [k].
double hellinger_weights(const SimplexVector& w, const SimplexVector& w2);

enum class DeltaStarMethod { exact, qp_lower_bound };

// Minimal total-variation separation between convex hulls of complementary
// component subsets. Positive exactly when the components are linearly
// independent; enters the l1 lower bound as delta_star / (2*sqrt(2)).
struct SeparationResult {
  double delta_star = 0.0;
  std::vector<std::size_t> argmin_subset;  // component indices in I
  std::vector<double> argmin_gamma;        // weights over I
  std::vector<double> argmin_lambda;       // weights over the complement
  double lower_bound_l2 = 0.0;             // raw minimum of the QP relaxation
  // Local grid refinement improved on subgradient descent by more than 1e-3;
  // the reported value is the better of the two.
  bool descent_grid_disagreement = false;
};

SeparationResult delta_star(std::span<const DiscreteDistribution> components,
                            DeltaStarMethod method);

struct SandwichReport {
  double hellinger_value = 0.0;
  double lower_bound = 0.0;  // delta_star / (2*sqrt(2)) * ||beta - beta2||_1
  double upper_bound = 0.0;  // Hellinger distance between the weight vectors
  double delta_star_value = 0.0;
  bool holds = false;
};

// Evaluates both mixture inequalities on a concrete instance: the weight
// Hellinger upper bound and the separation lower bound around the mixture
// Hellinger distance.
SandwichReport check_mixture_sandwich(std::span<const DiscreteDistribution> components,
                                      const SimplexVector& beta,
                                      const SimplexVector& beta2);

// Rank of an m x k column-major matrix, pivots below tol * max|entry| treated
// as zero.
std::size_t matrix_rank(const std::vector<std::vector<double>>& columns, double tol);

bool linearly_independent(std::span<const DiscreteDistribution> components,
                          double tol = 1e-8);

}  // namespace labelshift
