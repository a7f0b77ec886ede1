#include "labelshift/distances.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "labelshift/rng.hpp"

namespace labelshift {

namespace {

constexpr double kRefinementDisagreement = 1e-3;

void check_same_size(std::span<const double> p, std::span<const double> q,
                     const char* op) {
  if (p.size() != q.size()) {
    throw invalid_input_error(std::string(op) + ": mismatched atom universes (" +
                              std::to_string(p.size()) + " vs " +
                              std::to_string(q.size()) + ")");
  }
  if (p.empty()) throw invalid_input_error(std::string(op) + ": empty input");
}

// Columns of component densities on the shared universe, one column per
// component.
std::vector<std::vector<double>> density_columns(
    std::span<const DiscreteDistribution> components,
    const std::vector<std::int64_t>& universe) {
  std::vector<std::vector<double>> cols;
  cols.reserve(components.size());
  for (const auto& c : components) cols.push_back(probs_on_universe(c, universe));
  return cols;
}

struct SplitProblem {
  // Densities for the two sides of the split, m x |I| and m x |Ic|.
  std::vector<const std::vector<double>*> left;
  std::vector<const std::vector<double>*> right;
  std::size_t atoms = 0;

  void mix_difference(std::span<const double> gamma, std::span<const double> lambda,
                      std::vector<double>& diff) const {
    diff.assign(atoms, 0.0);
    for (std::size_t j = 0; j < left.size(); ++j) {
      const auto& col = *left[j];
      for (std::size_t a = 0; a < atoms; ++a) diff[a] += gamma[j] * col[a];
    }
    for (std::size_t j = 0; j < right.size(); ++j) {
      const auto& col = *right[j];
      for (std::size_t a = 0; a < atoms; ++a) diff[a] -= lambda[j] * col[a];
    }
  }

  double tv_objective(std::span<const double> gamma,
                      std::span<const double> lambda) const {
    std::vector<double> diff;
    mix_difference(gamma, lambda, diff);
    double s = 0.0;
    for (double d : diff) s += std::abs(d);
    return 0.5 * s;
  }

  double l2sq_objective(std::span<const double> gamma,
                        std::span<const double> lambda) const {
    std::vector<double> diff;
    mix_difference(gamma, lambda, diff);
    double s = 0.0;
    for (double d : diff) s += d * d;
    return s;
  }
};

struct InnerSolution {
  double value = 0.0;
  std::vector<double> gamma;
  std::vector<double> lambda;
  bool refinement_disagreed = false;
};

// Greedy pairwise mass transfer at shrinking step sizes; serves as the grid
// refinement fallback around the descent solution at resolution 1e-3.
template <typename Objective>
void pattern_refine(const Objective& f, std::vector<double>& gamma,
                    std::vector<double>& lambda, double& best) {
  const double steps[] = {0.1, 0.03, 0.01, 0.003, 1e-3, 3e-4, 1e-4};
  for (double step : steps) {
    bool improved = true;
    while (improved) {
      improved = false;
      auto try_block = [&](std::vector<double>& block) {
        for (std::size_t from = 0; from < block.size(); ++from) {
          if (block[from] <= 0.0) continue;
          // Either a full step or a snap of the remaining mass to zero.
          double delta = std::min(step, block[from]);
          for (std::size_t to = 0; to < block.size(); ++to) {
            if (to == from) continue;
            block[from] -= delta;
            block[to] += delta;
            double v = f(gamma, lambda);
            if (v < best - 1e-15) {
              best = v;
              improved = true;
            } else {
              block[from] += delta;
              block[to] -= delta;
            }
          }
        }
      };
      try_block(gamma);
      try_block(lambda);
    }
  }
}

std::vector<double> project_block(const std::vector<double>& v) {
  return simplex_project(v).values();
}

// Joint minimization over (gamma, lambda) on a product of simplices.
// tv=true minimizes total variation by projected subgradient descent with
// diminishing steps; tv=false minimizes the smooth squared L2 distance by
// projected gradient descent at a 1/L step.
InnerSolution minimize_split(const SplitProblem& prob, bool tv, Rng& rng) {
  const std::size_t p = prob.left.size();
  const std::size_t q = prob.right.size();

  auto objective = [&](const std::vector<double>& g, const std::vector<double>& l) {
    return tv ? prob.tv_objective(g, l) : prob.l2sq_objective(g, l);
  };

  InnerSolution best;
  best.gamma.assign(p, 1.0 / static_cast<double>(p));
  best.lambda.assign(q, 1.0 / static_cast<double>(q));
  best.value = objective(best.gamma, best.lambda);

  // Degenerate dimensions have nothing to optimize.
  if (p > 1 || q > 1) {
    // Gradient Lipschitz bound for the quadratic: 2 ||A||_F^2 dominates
    // twice the largest squared singular value of the stacked columns.
    double frob_sq = 0.0;
    for (const auto* col : prob.left) {
      for (double x : *col) frob_sq += x * x;
    }
    for (const auto* col : prob.right) {
      for (double x : *col) frob_sq += x * x;
    }
    const double smooth_step = frob_sq > 0.0 ? 1.0 / (2.0 * frob_sq) : 1.0;

    const int restarts = 20;
    const int iters = 300;
    std::vector<double> diff;
    for (int r = 0; r < restarts; ++r) {
      std::vector<double> gamma = r == 0 ? std::vector<double>(p, 1.0 / p)
                                         : rng.dirichlet(p);
      std::vector<double> lambda = r == 0 ? std::vector<double>(q, 1.0 / q)
                                          : rng.dirichlet(q);
      for (int t = 0; t < iters; ++t) {
        prob.mix_difference(gamma, lambda, diff);
        std::vector<double> ggrad(p, 0.0), lgrad(q, 0.0);
        if (tv) {
          for (std::size_t a = 0; a < prob.atoms; ++a) {
            double s = diff[a] > 0 ? 0.5 : (diff[a] < 0 ? -0.5 : 0.0);
            if (s == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) ggrad[j] += s * (*prob.left[j])[a];
            for (std::size_t j = 0; j < q; ++j) lgrad[j] -= s * (*prob.right[j])[a];
          }
        } else {
          for (std::size_t a = 0; a < prob.atoms; ++a) {
            double s = 2.0 * diff[a];
            for (std::size_t j = 0; j < p; ++j) ggrad[j] += s * (*prob.left[j])[a];
            for (std::size_t j = 0; j < q; ++j) lgrad[j] -= s * (*prob.right[j])[a];
          }
        }
        double step = tv ? 0.3 / std::sqrt(static_cast<double>(t + 1)) : smooth_step;
        for (std::size_t j = 0; j < p; ++j) gamma[j] -= step * ggrad[j];
        for (std::size_t j = 0; j < q; ++j) lambda[j] -= step * lgrad[j];
        gamma = project_block(gamma);
        lambda = project_block(lambda);
        double v = objective(gamma, lambda);
        if (v < best.value) {
          best.value = v;
          best.gamma = gamma;
          best.lambda = lambda;
        }
      }
    }
  }

  double before = best.value;
  pattern_refine(objective, best.gamma, best.lambda, best.value);
  best.refinement_disagreed = before - best.value > kRefinementDisagreement;
  return best;
}

}  // namespace

double hellinger(std::span<const double> p, std::span<const double> q) {
  check_same_size(p, q, "hellinger");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    s += d * d;
  }
  return std::min(1.0, std::sqrt(0.5 * s));
}

double hellinger(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  const DiscreteDistribution pair[] = {p, q};
  auto universe = atom_union(pair);
  return hellinger(probs_on_universe(p, universe), probs_on_universe(q, universe));
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  check_same_size(p, q, "total_variation");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * s);
}

double total_variation(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  const DiscreteDistribution pair[] = {p, q};
  auto universe = atom_union(pair);
  return total_variation(probs_on_universe(p, universe), probs_on_universe(q, universe));
}

double hellinger_weights(const SimplexVector& w, const SimplexVector& w2) {
  if (w.size() != w2.size()) {
    throw invalid_input_error("hellinger_weights: dimension mismatch");
  }
  return hellinger(w.span(), w2.span());
}

std::size_t matrix_rank(const std::vector<std::vector<double>>& columns, double tol) {
  if (columns.empty()) return 0;
  const std::size_t m = columns.front().size();
  const std::size_t k = columns.size();
  std::vector<std::vector<double>> a = columns;  // work on a copy, column major
  double scale = 0.0;
  for (const auto& col : a) {
    for (double x : col) scale = std::max(scale, std::abs(x));
  }
  if (scale == 0.0) return 0;
  const double threshold = tol * scale;

  std::size_t rank = 0;
  std::size_t row = 0;
  for (std::size_t j = 0; j < k && row < m; ++j) {
    std::size_t pivot = row;
    for (std::size_t i = row + 1; i < m; ++i) {
      if (std::abs(a[j][i]) > std::abs(a[j][pivot])) pivot = i;
    }
    if (std::abs(a[j][pivot]) <= threshold) continue;
    for (std::size_t jj = j; jj < k; ++jj) std::swap(a[jj][row], a[jj][pivot]);
    for (std::size_t i = row + 1; i < m; ++i) {
      double f = a[j][i] / a[j][row];
      for (std::size_t jj = j; jj < k; ++jj) a[jj][i] -= f * a[jj][row];
    }
    ++rank;
    ++row;
  }
  return rank;
}

bool linearly_independent(std::span<const DiscreteDistribution> components,
                          double tol) {
  auto universe = atom_union(components);
  auto cols = density_columns(components, universe);
  return matrix_rank(cols, tol) == components.size();
}

SeparationResult delta_star(std::span<const DiscreteDistribution> components,
                            DeltaStarMethod method) {
  const std::size_t k = components.size();
  if (k < 2 || k > 12) {
    throw unsupported_size_error("delta_star: k must be in [2, 12], got " +
                                 std::to_string(k));
  }
  auto universe = atom_union(components);
  auto cols = density_columns(components, universe);

  double max_density = 0.0;
  for (const auto& col : cols) {
    for (double x : col) max_density = std::max(max_density, x);
  }

  const bool tv_mode = method == DeltaStarMethod::exact;
  Rng rng(0x5eedu + static_cast<std::uint64_t>(k));

  SeparationResult result;
  bool have = false;
  double best_raw = 0.0;
  double best_qp = 0.0;
  bool have_qp = false;

  const std::uint64_t full = (std::uint64_t{1} << k) - 1;
  for (std::uint64_t mask = 1; mask < full; ++mask) {
    SplitProblem prob;
    prob.atoms = universe.size();
    std::vector<std::size_t> subset;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask & (std::uint64_t{1} << j)) {
        prob.left.push_back(&cols[j]);
        subset.push_back(j);
      } else {
        prob.right.push_back(&cols[j]);
      }
    }
    InnerSolution sol = minimize_split(prob, tv_mode, rng);
    if (!have || sol.value < best_raw) {
      have = true;
      best_raw = sol.value;
      result.argmin_subset = subset;
      result.argmin_gamma = sol.gamma;
      result.argmin_lambda = sol.lambda;
      result.descent_grid_disagreement = sol.refinement_disagreed;
    }
    if (tv_mode) {
      // Track the relaxation value alongside the exact search.
      InnerSolution qp = minimize_split(prob, false, rng);
      if (!have_qp || qp.value < best_qp) {
        have_qp = true;
        best_qp = qp.value;
      }
    }
  }

  if (tv_mode) {
    result.delta_star = best_raw;
    result.lower_bound_l2 = best_qp;
  } else {
    result.lower_bound_l2 = best_raw;
    result.delta_star = max_density > 0.0 ? best_raw / (2.0 * max_density) : 0.0;
  }

  // Linearly dependent components give zero separation exactly; snap the
  // descent noise away so the sign of the answer is informative.
  if (!linearly_independent(components, 1e-8)) {
    result.delta_star = 0.0;
  }
  result.delta_star = std::clamp(result.delta_star, 0.0, 1.0);
  return result;
}

SandwichReport check_mixture_sandwich(std::span<const DiscreteDistribution> components,
                                      const SimplexVector& beta,
                                      const SimplexVector& beta2) {
  const std::size_t k = components.size();
  if (beta.size() != k || beta2.size() != k) {
    throw invalid_input_error("check_mixture_sandwich: weight dimension mismatch");
  }
  auto universe = atom_union(components);
  auto cols = density_columns(components, universe);

  std::vector<double> mix1(universe.size(), 0.0), mix2(universe.size(), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t a = 0; a < universe.size(); ++a) {
      mix1[a] += beta[j] * cols[j][a];
      mix2[a] += beta2[j] * cols[j][a];
    }
  }

  SandwichReport report;
  report.hellinger_value = hellinger(mix1, mix2);
  report.upper_bound = hellinger_weights(beta, beta2);
  report.delta_star_value = delta_star(components, DeltaStarMethod::exact).delta_star;
  report.lower_bound =
      report.delta_star_value / (2.0 * std::sqrt(2.0)) * l1_distance(beta, beta2);
  report.holds = report.lower_bound <= report.hellinger_value + 1e-9 &&
                 report.hellinger_value <= report.upper_bound + 1e-9;
  return report;
}

}  // namespace labelshift
