#include "labelshift/likelihood.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <string>

namespace labelshift {

namespace {

constexpr double kWeightFloor = 1e-12;

void check_config(const EvalMatrix& L, const EmConfig& cfg) {
  if (cfg.max_iterations < 1) {
    throw invalid_input_error("EmConfig: max_iterations must be >= 1");
  }
  if (!(cfg.tolerance > 0.0)) {
    throw invalid_input_error("EmConfig: tolerance must be positive");
  }
  if (cfg.init && cfg.init->size() != L.cols()) {
    throw invalid_input_error("EmConfig: init dimension mismatch");
  }
}

double weighted_log_likelihood(const EvalMatrix& L, std::span<const double> w,
                               std::span<const double> beta) {
  double ll = 0.0;
  for (std::size_t i = 0; i < L.rows(); ++i) {
    if (w[i] == 0.0) continue;
    auto row = L.row(i);
    double mix = 0.0;
    for (std::size_t j = 0; j < L.cols(); ++j) mix += beta[j] * row[j];
    if (mix <= 0.0) return -std::numeric_limits<double>::infinity();
    ll += w[i] * std::log(mix);
  }
  return ll;
}

EstimationResult em_core(const EvalMatrix& L, std::span<const double> weights,
                         const EmConfig& cfg, std::vector<double>* trace) {
  check_config(L, cfg);
  const std::size_t n = L.rows();
  const std::size_t k = L.cols();
  if (weights.size() != n) {
    throw invalid_input_error("estimate_mle_weighted: weight length mismatch");
  }
  double total_weight = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw invalid_input_error("estimate_mle_weighted: weights must be >= 0");
    }
    total_weight += w;
  }
  if (total_weight <= 0.0) {
    throw invalid_input_error("estimate_mle_weighted: total weight is zero");
  }

  std::vector<double> beta =
      cfg.init ? cfg.init->values() : SimplexVector::uniform(k).values();

  double ll = weighted_log_likelihood(L, weights, beta);
  if (!std::isfinite(ll)) {
    throw invalid_input_error(
        "estimate_mle: initial weights give zero likelihood on some sample");
  }
  if (trace) trace->push_back(ll);

  EstimationResult result{.beta_hat = SimplexVector::uniform(k)};
  std::vector<double> next(k);
  std::int64_t iter = 0;
  bool converged = false;
  while (iter < cfg.max_iterations) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i] == 0.0) continue;
      auto row = L.row(i);
      double mix = 0.0;
      for (std::size_t j = 0; j < k; ++j) mix += beta[j] * row[j];
      double scale = weights[i] / mix;
      for (std::size_t j = 0; j < k; ++j) next[j] += scale * beta[j] * row[j];
    }
    for (std::size_t j = 0; j < k; ++j) next[j] /= total_weight;

    double next_ll = weighted_log_likelihood(L, weights, next);
    ++iter;
    if (trace) trace->push_back(next_ll);
    double improvement = next_ll - ll;
    // The fixed point never decreases the objective beyond rounding noise.
    assert(improvement >= -1e-10 * (1.0 + std::abs(ll)));
    double step = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      step = std::max(step, std::abs(next[j] - beta[j]));
    }
    beta = next;
    ll = next_ll;
    bool stop = cfg.param_tolerance > 0.0 ? step < cfg.param_tolerance
                                          : improvement < cfg.tolerance;
    if (stop) {
      converged = true;
      break;
    }
  }

  // Floor vanishing weights at zero so boundary solutions are exact.
  bool floored = false;
  {
    std::vector<double> cleaned = beta;
    double s = 0.0;
    for (double& b : cleaned) {
      if (b < kWeightFloor) {
        if (b != 0.0) floored = true;
        b = 0.0;
      }
      s += b;
    }
    if (floored && s > 0.0) {
      for (double& b : cleaned) b /= s;
      double cleaned_ll = weighted_log_likelihood(L, weights, cleaned);
      if (std::isfinite(cleaned_ll)) {
        beta = std::move(cleaned);
        ll = cleaned_ll;
      } else {
        floored = false;  // a trimmed component was load-bearing; keep as is
      }
    }
  }

  result.beta_hat = SimplexVector(std::move(beta));
  result.log_likelihood = ll;
  result.iterations = iter;
  result.converged = converged;
  result.floored = floored;
  return result;
}

// Dense k x k solve with partial pivoting; returns false when a pivot falls
// below the singularity threshold.
bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double>& out) {
  const std::size_t k = b.size();
  double scale = 0.0;
  for (const auto& row : a) {
    for (double x : row) scale = std::max(scale, std::abs(x));
  }
  if (scale == 0.0) return false;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    for (std::size_t i = col + 1; i < k; ++i) {
      if (std::abs(a[i][col]) > std::abs(a[pivot][col])) pivot = i;
    }
    if (std::abs(a[pivot][col]) < 1e-12 * scale) return false;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t i = col + 1; i < k; ++i) {
      double f = a[i][col] / a[col][col];
      for (std::size_t j = col; j < k; ++j) a[i][j] -= f * a[col][j];
      b[i] -= f * b[col];
    }
  }
  out.assign(k, 0.0);
  for (std::size_t i = k; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < k; ++j) s -= a[i][j] * out[j];
    out[i] = s / a[i][i];
  }
  return true;
}

void check_predictor_rows(const std::vector<std::vector<double>>& F, std::size_t k) {
  for (std::size_t i = 0; i < F.size(); ++i) {
    if (F[i].size() != k) {
      throw invalid_input_error("predictor rows: ragged row " + std::to_string(i));
    }
    double s = 0.0;
    for (double x : F[i]) {
      if (!std::isfinite(x) || x < -1e-6) {
        throw invalid_input_error("predictor rows: invalid entry in row " +
                                  std::to_string(i));
      }
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw invalid_input_error("predictor rows: row " + std::to_string(i) +
                                " is off the simplex (sum " + std::to_string(s) + ")");
    }
  }
}

}  // namespace

EstimationResult estimate_mle(const EvalMatrix& L, const EmConfig& cfg) {
  std::vector<double> unit(L.rows(), 1.0);
  return em_core(L, unit, cfg, nullptr);
}

EstimationResult estimate_mle_weighted(const EvalMatrix& L,
                                       std::span<const double> weights,
                                       const EmConfig& cfg) {
  return em_core(L, weights, cfg, nullptr);
}

TracedEstimationResult estimate_mle_traced(const EvalMatrix& L,
                                           std::span<const double> weights,
                                           const EmConfig& cfg) {
  TracedEstimationResult out{.result = EstimationResult{.beta_hat = SimplexVector::uniform(L.cols())}};
  out.result = em_core(L, weights, cfg, &out.ll_trace);
  return out;
}

EstimationResult estimate_mle_predictor(const std::vector<std::vector<double>>& F,
                                        const SimplexVector& alpha,
                                        const EmConfig& cfg) {
  if (F.empty()) throw invalid_input_error("estimate_mle_predictor: no rows");
  const std::size_t k = alpha.size();
  check_predictor_rows(F, k);
  for (std::size_t j = 0; j < k; ++j) {
    if (alpha[j] <= 0.0) {
      throw invalid_input_error(
          "estimate_mle_predictor: alpha must be strictly positive");
    }
  }
  std::vector<double> flat;
  flat.reserve(F.size() * k);
  for (const auto& row : F) {
    for (std::size_t j = 0; j < k; ++j) flat.push_back(std::max(row[j], 0.0) / alpha[j]);
  }
  EvalMatrix L(std::move(flat), F.size(), k);
  return estimate_mle(L, cfg);
}

EstimationResult estimate_grid_oracle(const EvalMatrix& L, double resolution,
                                      std::span<const double> weights) {
  const std::size_t k = L.cols();
  if (k > 4) {
    throw unsupported_size_error("estimate_grid_oracle: k must be <= 4, got " +
                                 std::to_string(k));
  }
  if (!(resolution > 0.0) || resolution > 1.0) {
    throw invalid_input_error("estimate_grid_oracle: resolution must be in (0, 1]");
  }
  std::vector<double> unit;
  if (weights.empty()) {
    unit.assign(L.rows(), 1.0);
    weights = unit;
  } else if (weights.size() != L.rows()) {
    throw invalid_input_error("estimate_grid_oracle: weight length mismatch");
  }

  const std::size_t n = L.rows();
  const auto steps = static_cast<std::int64_t>(std::llround(1.0 / resolution));
  const double inv = 1.0 / static_cast<double>(steps);

  double best_ll = -std::numeric_limits<double>::infinity();
  double worst_ll = std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> best_c;
  std::int64_t points = 0;

  // Enumerate compositions of `steps` into k parts in ascending lexicographic
  // order; the two innermost coordinates use an incremental mixture update.
  std::vector<std::int64_t> c(k, 0);
  std::vector<double> base(n), mix(n);

  auto scan_tail = [&](std::int64_t remaining) {
    // Coordinates [0, k-2) of c are fixed; sweep c[k-2] from 0 to remaining.
    for (std::size_t a = 0; a < n; ++a) {
      auto row = L.row(a);
      double b = 0.0;
      for (std::size_t j = 0; j + 2 < k; ++j) {
        b += static_cast<double>(c[j]) * inv * row[j];
      }
      base[a] = b;
      mix[a] = b + static_cast<double>(remaining) * inv * row[k - 1];
    }
    for (std::int64_t t = 0; t <= remaining; ++t) {
      double ll = 0.0;
      bool dead = false;
      for (std::size_t a = 0; a < n; ++a) {
        if (weights[a] == 0.0) continue;
        if (mix[a] <= 0.0) {
          dead = true;
          break;
        }
        ll += weights[a] * std::log(mix[a]);
      }
      if (dead) ll = -std::numeric_limits<double>::infinity();
      ++points;
      if (ll > best_ll) {
        best_ll = ll;
        c[k - 2] = t;
        c[k - 1] = remaining - t;
        best_c = c;
      }
      if (ll < worst_ll) worst_ll = ll;
      if (t < remaining) {
        for (std::size_t a = 0; a < n; ++a) {
          mix[a] += inv * (L.at(a, k - 2) - L.at(a, k - 1));
        }
      }
    }
  };

  if (k == 1) {
    best_c = {steps};
    best_ll = weighted_log_likelihood(L, weights, std::vector<double>{1.0});
    worst_ll = best_ll;
    points = 1;
  } else {
    // Recurse over the first k-2 coordinates.
    auto recurse = [&](auto&& self, std::size_t depth, std::int64_t remaining) -> void {
      if (depth + 2 == k) {
        scan_tail(remaining);
        return;
      }
      for (std::int64_t v = 0; v <= remaining; ++v) {
        c[depth] = v;
        self(self, depth + 1, remaining - v);
      }
      c[depth] = 0;
    };
    recurse(recurse, 0, steps);
  }

  std::vector<double> beta(k);
  for (std::size_t j = 0; j < k; ++j) {
    beta[j] = static_cast<double>(best_c[j]) * inv;
  }
  // Lattice coordinates sum to `steps` exactly; fix residual division noise.
  double s = 0.0;
  for (double b : beta) s += b;
  for (double& b : beta) b /= s;

  EstimationResult result{.beta_hat = SimplexVector(std::move(beta))};
  result.log_likelihood = best_ll;
  result.iterations = points;
  result.converged = true;
  result.flat = std::isfinite(best_ll) && std::isfinite(worst_ll) &&
                best_ll - worst_ll <= 1e-12 * (1.0 + std::abs(best_ll));
  return result;
}

BbseResult estimate_bbse(const std::vector<std::vector<double>>& F,
                         const std::vector<std::vector<double>>& M) {
  if (F.empty()) throw invalid_input_error("estimate_bbse: no predictor rows");
  const std::size_t k = M.size();
  if (k == 0) throw invalid_input_error("estimate_bbse: empty confusion matrix");
  for (const auto& row : M) {
    if (row.size() != k) {
      throw invalid_input_error("estimate_bbse: confusion matrix must be square");
    }
  }
  check_predictor_rows(F, k);

  std::vector<double> mu(k, 0.0);
  for (const auto& row : F) {
    for (std::size_t j = 0; j < k; ++j) mu[j] += row[j];
  }
  for (double& m : mu) m /= static_cast<double>(F.size());

  std::vector<double> raw;
  if (!solve_linear(M, mu, raw)) {
    throw singular_matrix_error("estimate_bbse: confusion matrix is singular");
  }

  // 1-norm condition estimate from the explicit inverse (k is small).
  double norm_m = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < k; ++i) col += std::abs(M[i][j]);
    norm_m = std::max(norm_m, col);
  }
  double norm_inv = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> e(k, 0.0), col;
    e[j] = 1.0;
    if (!solve_linear(M, e, col)) {
      throw singular_matrix_error("estimate_bbse: confusion matrix is singular");
    }
    double sum = 0.0;
    for (double x : col) sum += std::abs(x);
    norm_inv = std::max(norm_inv, sum);
  }

  return BbseResult{.beta = simplex_project(raw),
                    .condition_number = norm_m * norm_inv};
}

}  // namespace labelshift
