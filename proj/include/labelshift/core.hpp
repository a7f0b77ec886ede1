#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "labelshift/errors.hpp"

namespace labelshift {

constexpr double kSimplexTolerance = 1e-9;

// Probability vector over k labels. Immutable after construction; entries are
// nonnegative and sum to one within kSimplexTolerance.
class SimplexVector {
 public:
  explicit SimplexVector(std::vector<double> values);

  static SimplexVector uniform(std::size_t k);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> span() const { return values_; }

  bool operator==(const SimplexVector& other) const = default;

 private:
  std::vector<double> values_;
};

double l1_distance(const SimplexVector& a, const SimplexVector& b);

// Finitely supported distribution on a set of distinct integer atoms.
class DiscreteDistribution {
 public:
  DiscreteDistribution(std::vector<std::int64_t> atoms, std::vector<double> probs);

  std::size_t support_size() const { return atoms_.size(); }
  const std::vector<std::int64_t>& atoms() const { return atoms_; }
  const std::vector<double>& probs() const { return probs_.values(); }
  double prob_of(std::int64_t atom) const;

 private:
  std::vector<std::int64_t> atoms_;
  SimplexVector probs_;
};

// Sorted union of the supports of several distributions.
std::vector<std::int64_t> atom_union(std::span<const DiscreteDistribution> dists);

// Probabilities of `dist` on an explicit universe, zero-filled off support.
std::vector<double> probs_on_universe(const DiscreteDistribution& dist,
                                      std::span<const std::int64_t> universe);

// n x k matrix of nonnegative evaluations q_j(x_i); the sufficient statistic
// for both the mixture MLE and the certificate. Rows of all zeros are
// rejected: such a sample has zero likelihood under every candidate mixture
// and would silently poison the fit.
class EvalMatrix {
 public:
  EvalMatrix(std::vector<double> row_major, std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  const std::vector<double>& data() const { return data_; }

 private:
  std::vector<double> data_;
  std::size_t rows_;
  std::size_t cols_;
};

struct EstimationResult {
  SimplexVector beta_hat;
  double log_likelihood = 0.0;
  std::int64_t iterations = 0;
  bool converged = false;
  std::optional<double> certificate;
  // Metadata: the objective was flat across candidates / weights were floored
  // at zero on output.
  bool flat = false;
  bool floored = false;
};

// Euclidean projection onto the simplex. Inputs already on the simplex are
// returned unchanged, which makes the projection exactly idempotent.
SimplexVector simplex_project(std::span<const double> v);

// Full validation gate for externally supplied matrices: nonnegative, finite,
// no zero rows, k >= 2, n >= 1.
EvalMatrix validate_eval_matrix(const std::vector<std::vector<double>>& raw);

}  // namespace labelshift
