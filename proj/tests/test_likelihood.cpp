#include <doctest.h>

#include <cmath>

#include "labelshift/distances.hpp"
#include "labelshift/likelihood.hpp"
#include "labelshift/rho_certificate.hpp"
#include "labelshift/rng.hpp"
#include "labelshift/scenario.hpp"
#include "oracles.hpp"

using namespace labelshift;

namespace {

EvalMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return EvalMatrix(std::move(flat), rows.size(), rows.front().size());
}

// Binomial(m-1, p) pmf over the atoms 0..m-1.
DiscreteDistribution binomial_shape(std::size_t m, double p) {
  std::vector<std::int64_t> atoms(m);
  std::vector<double> probs(m);
  const auto trials = static_cast<double>(m - 1);
  for (std::size_t a = 0; a < m; ++a) {
    atoms[a] = static_cast<std::int64_t>(a);
    double log_choose = std::lgamma(trials + 1.0) - std::lgamma(a + 1.0) -
                        std::lgamma(trials - a + 1.0);
    probs[a] = std::exp(log_choose + a * std::log(p) + (trials - a) * std::log(1.0 - p));
  }
  double total = 0.0;
  for (double x : probs) total += x;
  for (double& x : probs) x /= total;
  return DiscreteDistribution(atoms, probs);
}

}  // namespace

TEST_CASE("em on unambiguous data") {
  auto L = to_matrix({{1, 0}, {1, 0}, {1, 0}});
  auto result = estimate_mle(L, EmConfig{});
  CHECK(result.beta_hat[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(result.beta_hat[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(result.converged);
}

TEST_CASE("em keeps the uniform start on a flat objective") {
  auto L = to_matrix({{0.4, 0.4}, {0.7, 0.7}, {0.1, 0.1}});
  auto result = estimate_mle(L, EmConfig{});
  CHECK(result.beta_hat[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(result.beta_hat[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(result.converged);
}

TEST_CASE("em matches the lattice argmax on sampled data") {
  std::vector<DiscreteDistribution> components{binomial_shape(8, 0.25),
                                               binomial_shape(8, 0.75)};
  ScenarioSpec spec{.k = 2,
                    .m = 8,
                    .components = components,
                    .beta_star = SimplexVector({0.3, 0.7}),
                    .alpha = SimplexVector::uniform(2),
                    .n = 20,
                    .seed = 11};
  auto samples = sample_target(spec);
  auto evals = weighted_evals_at(components, samples);

  EmConfig cfg;
  cfg.tolerance = 1e-13;
  cfg.max_iterations = 200000;
  auto em = estimate_mle_weighted(evals.L, evals.weights, cfg);

  std::vector<std::vector<double>> rows(evals.L.rows());
  for (std::size_t i = 0; i < evals.L.rows(); ++i) {
    auto r = evals.L.row(i);
    rows[i].assign(r.begin(), r.end());
  }
  auto grid = oracles::mle_grid(rows, evals.weights, 10000);
  double err = 0.0;
  for (std::size_t j = 0; j < 2; ++j) err += std::abs(em.beta_hat[j] - grid[j]);
  CHECK(err <= 1e-3);
}

TEST_CASE("em log-likelihood is monotone") {
  Rng rng(404);
  for (int trial = 0; trial < 25; ++trial) {
    auto rows = oracles::random_matrix(rng, 30, 3);
    auto L = to_matrix(rows);
    std::vector<double> weights(L.rows(), 1.0);
    EmConfig cfg;
    cfg.record_trace = true;
    auto traced = estimate_mle_traced(L, weights, cfg);
    for (std::size_t i = 1; i < traced.ll_trace.size(); ++i) {
      CHECK(traced.ll_trace[i] >= traced.ll_trace[i - 1] - 1e-10);
    }
  }
}

TEST_CASE("em is invariant to scaling the whole matrix") {
  Rng rng(606);
  auto rows = oracles::random_matrix(rng, 40, 3);
  auto scaled = rows;
  for (auto& r : scaled) {
    for (auto& x : r) x *= 37.5;
  }
  auto a = estimate_mle(to_matrix(rows), EmConfig{});
  auto b = estimate_mle(to_matrix(scaled), EmConfig{});
  CHECK(l1_distance(a.beta_hat, b.beta_hat) <= 1e-9);
}

TEST_CASE("em tolerates an all-zero column") {
  auto L = to_matrix({{0.5, 0.0}, {0.2, 0.0}});
  auto result = estimate_mle(L, EmConfig{});
  CHECK(result.beta_hat[0] == doctest::Approx(1.0));
  CHECK(result.converged);
}

TEST_CASE("em config validation") {
  auto L = to_matrix({{1.0, 0.5}});
  EmConfig bad;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(estimate_mle(L, bad), invalid_input_error);
  bad = EmConfig{};
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(estimate_mle(L, bad), invalid_input_error);
  bad = EmConfig{};
  bad.init = SimplexVector({1.0});
  CHECK_THROWS_AS(estimate_mle(L, bad), invalid_input_error);
}

TEST_CASE("predictor estimation reduces to the reweighted matrix") {
  SUBCASE("constant predictor is uninformative") {
    std::vector<std::vector<double>> F(6, {0.3, 0.7});
    auto result = estimate_mle_predictor(F, SimplexVector({0.3, 0.7}), EmConfig{});
    CHECK(result.beta_hat[0] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("one-hot rows recover the count proportions") {
    std::vector<std::vector<double>> F;
    for (int i = 0; i < 7; ++i) F.push_back({1.0, 0.0});
    for (int i = 0; i < 3; ++i) F.push_back({0.0, 1.0});
    auto result = estimate_mle_predictor(F, SimplexVector::uniform(2), EmConfig{});
    CHECK(result.beta_hat[0] == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(result.beta_hat[1] == doctest::Approx(0.3).epsilon(1e-9));
  }

  SUBCASE("validation") {
    std::vector<std::vector<double>> F{{0.5, 0.5}};
    CHECK_THROWS_AS(estimate_mle_predictor(F, SimplexVector({1.0, 0.0}), EmConfig{}),
                    invalid_input_error);
    std::vector<std::vector<double>> off{{0.6, 0.6}};
    CHECK_THROWS_AS(estimate_mle_predictor(off, SimplexVector::uniform(2), EmConfig{}),
                    invalid_input_error);
  }

  SUBCASE("bit-for-bit agreement with the explicit matrix") {
    Rng rng(9);
    std::vector<std::vector<double>> F;
    for (int i = 0; i < 25; ++i) {
      auto row = rng.dirichlet(3);
      F.push_back(row);
    }
    SimplexVector alpha({0.2, 0.3, 0.5});
    auto via_predictor = estimate_mle_predictor(F, alpha, EmConfig{});

    std::vector<std::vector<double>> L(F.size(), std::vector<double>(3));
    for (std::size_t i = 0; i < F.size(); ++i) {
      for (std::size_t j = 0; j < 3; ++j) L[i][j] = F[i][j] / alpha[j];
    }
    auto direct = estimate_mle(to_matrix(L), EmConfig{});
    CHECK(via_predictor.beta_hat.values() == direct.beta_hat.values());
    CHECK(via_predictor.log_likelihood == direct.log_likelihood);
    CHECK(via_predictor.iterations == direct.iterations);
  }
}

TEST_CASE("predictor estimation tracks the grid oracle on scenario data") {
  Rng rng(3);
  std::vector<std::int64_t> atoms{0, 1, 2, 3, 4, 5};
  std::vector<DiscreteDistribution> components{random_distribution(rng, atoms),
                                               random_distribution(rng, atoms)};
  SimplexVector alpha({0.35, 0.65});
  ScenarioSpec spec{.k = 2,
                    .m = atoms.size(),
                    .components = components,
                    .beta_star = SimplexVector({0.75, 0.25}),
                    .alpha = alpha,
                    .n = 500,
                    .seed = 3};
  auto samples = sample_target(spec);
  auto predictor = bayes_predictor(components, alpha);
  auto F = predictor_rows_at(predictor, samples);

  auto mlls = estimate_mle_predictor(F, alpha, EmConfig{});
  auto evals = weighted_evals_at(components, samples);
  auto grid = estimate_grid_oracle(evals.L, 1e-4, evals.weights);

  double mlls_error = l1_distance(mlls.beta_hat, spec.beta_star);
  double grid_error = l1_distance(grid.beta_hat, spec.beta_star);
  CHECK(mlls_error <= grid_error + 1e-3);
}

TEST_CASE("grid oracle basics") {
  SUBCASE("single informative row") {
    EvalMatrix L({1.0, 0.0}, 1, 2);
    auto result = estimate_grid_oracle(L, 0.25);
    CHECK(result.beta_hat[0] == doctest::Approx(1.0));
    CHECK_FALSE(result.flat);
  }

  SUBCASE("identical columns flag a flat objective") {
    auto L = to_matrix({{0.4, 0.4}, {0.6, 0.6}});
    auto result = estimate_grid_oracle(L, 0.25);
    CHECK(result.flat);
    // Lexicographically first lattice point of the scan order.
    CHECK(result.beta_hat[0] == doctest::Approx(0.0));
    CHECK(result.beta_hat[1] == doctest::Approx(1.0));
  }

  SUBCASE("size guard") {
    auto L = to_matrix({{1, 1, 1, 1, 1}});
    CHECK_THROWS_AS(estimate_grid_oracle(L, 0.5), unsupported_size_error);
  }
}

TEST_CASE("em agrees with the grid oracle across random instances") {
  Rng rng(2718);
  std::vector<std::int64_t> atoms{0, 1, 2, 3, 4, 5};
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t k = 2 + trial % 2;
    std::vector<DiscreteDistribution> components;
    for (std::size_t j = 0; j < k; ++j) {
      components.push_back(random_distribution(rng, atoms));
    }
    if (!linearly_independent(components)) continue;
    ScenarioSpec spec{.k = k,
                      .m = atoms.size(),
                      .components = components,
                      .beta_star = SimplexVector(rng.dirichlet(k)),
                      .alpha = SimplexVector::uniform(k),
                      .n = 150,
                      .seed = 7000 + static_cast<std::uint64_t>(trial)};
    auto samples = sample_target(spec);
    auto evals = weighted_evals_at(components, samples);

    EmConfig cfg;
    cfg.tolerance = 1e-13;
    cfg.max_iterations = 200000;
    auto em = estimate_mle_weighted(evals.L, evals.weights, cfg);
    double res = k == 2 ? 1e-4 : 1e-3;
    auto grid = estimate_grid_oracle(evals.L, res, evals.weights);
    CHECK(l1_distance(em.beta_hat, grid.beta_hat) <= res * static_cast<double>(k) + 1e-6);
  }
}

TEST_CASE("bbse baseline") {
  SUBCASE("identity confusion returns the projected mean") {
    std::vector<std::vector<double>> F{{0.3, 0.7}, {0.3, 0.7}};
    std::vector<std::vector<double>> M{{1.0, 0.0}, {0.0, 1.0}};
    auto result = estimate_bbse(F, M);
    CHECK(result.beta[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(result.condition_number == doctest::Approx(1.0));
  }

  SUBCASE("separated one-hot sample") {
    std::vector<std::vector<double>> F;
    for (int i = 0; i < 5; ++i) F.push_back({1.0, 0.0});
    for (int i = 0; i < 5; ++i) F.push_back({0.0, 1.0});
    std::vector<std::vector<double>> M{{1.0, 0.0}, {0.0, 1.0}};
    auto result = estimate_bbse(F, M);
    CHECK(result.beta[0] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("singular confusion matrix") {
    std::vector<std::vector<double>> F{{0.5, 0.5}};
    std::vector<std::vector<double>> M{{0.5, 0.5}, {0.5, 0.5}};
    CHECK_THROWS_AS(estimate_bbse(F, M), singular_matrix_error);
  }
}

TEST_CASE("em solution is certified across random well-specified instances") {
  Rng rng(161803);
  std::vector<std::int64_t> atoms{0, 1, 2, 3, 4};
  int certified = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    std::size_t k = 2 + trial % 2;
    std::vector<DiscreteDistribution> components;
    for (std::size_t j = 0; j < k; ++j) {
      components.push_back(random_distribution(rng, atoms));
    }
    if (!linearly_independent(components)) {
      ++certified;  // skip the measure-zero degenerate draw
      continue;
    }
    ScenarioSpec spec{.k = k,
                      .m = atoms.size(),
                      .components = components,
                      .beta_star = SimplexVector(rng.dirichlet(k)),
                      .alpha = SimplexVector::uniform(k),
                      .n = 120,
                      .seed = 31000 + static_cast<std::uint64_t>(trial)};
    auto samples = sample_target(spec);
    auto evals = weighted_evals_at(components, samples);
    auto em = estimate_mle_weighted(evals.L, evals.weights, EmConfig{});
    if (certify_weighted(evals.L, evals.weights, em.beta_hat).is_certified) {
      ++certified;
    }
  }
  CHECK(certified == trials);
}
