#include "labelshift/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace labelshift {

namespace {

double sum_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

SimplexVector::SimplexVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw invalid_input_error("SimplexVector: need at least one entry");
  }
  double s = 0.0;
  for (double x : values_) {
    if (!std::isfinite(x)) throw invalid_input_error("SimplexVector: non-finite entry");
    if (x < 0.0) {
      throw invalid_input_error("SimplexVector: negative entry " + std::to_string(x));
    }
    s += x;
  }
  if (std::abs(s - 1.0) > kSimplexTolerance) {
    throw invalid_input_error("SimplexVector: entries sum to " + std::to_string(s) +
                              ", expected 1");
  }
}

SimplexVector SimplexVector::uniform(std::size_t k) {
  if (k == 0) throw invalid_input_error("SimplexVector::uniform: k must be >= 1");
  return SimplexVector(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

double l1_distance(const SimplexVector& a, const SimplexVector& b) {
  if (a.size() != b.size()) {
    throw invalid_input_error("l1_distance: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

DiscreteDistribution::DiscreteDistribution(std::vector<std::int64_t> atoms,
                                           std::vector<double> probs)
    : atoms_(std::move(atoms)), probs_(std::move(probs)) {
  if (atoms_.size() != probs_.size()) {
    throw invalid_input_error("DiscreteDistribution: atoms/probs length mismatch");
  }
  std::set<std::int64_t> seen(atoms_.begin(), atoms_.end());
  if (seen.size() != atoms_.size()) {
    throw invalid_input_error("DiscreteDistribution: duplicate atom identifier");
  }
}

double DiscreteDistribution::prob_of(std::int64_t atom) const {
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (atoms_[i] == atom) return probs_.values()[i];
  }
  return 0.0;
}

std::vector<std::int64_t> atom_union(std::span<const DiscreteDistribution> dists) {
  std::set<std::int64_t> atoms;
  for (const auto& d : dists) atoms.insert(d.atoms().begin(), d.atoms().end());
  return {atoms.begin(), atoms.end()};
}

std::vector<double> probs_on_universe(const DiscreteDistribution& dist,
                                      std::span<const std::int64_t> universe) {
  std::vector<double> out(universe.size(), 0.0);
  for (std::size_t i = 0; i < universe.size(); ++i) out[i] = dist.prob_of(universe[i]);
  return out;
}

EvalMatrix::EvalMatrix(std::vector<double> row_major, std::size_t rows, std::size_t cols)
    : data_(std::move(row_major)), rows_(rows), cols_(cols) {
  if (rows_ == 0 || cols_ == 0 || data_.size() != rows_ * cols_) {
    throw invalid_input_error("EvalMatrix: bad shape");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    bool nonzero = false;
    for (std::size_t j = 0; j < cols_; ++j) {
      double x = data_[i * cols_ + j];
      if (!std::isfinite(x)) throw invalid_input_error("EvalMatrix: non-finite entry");
      if (x < 0.0) throw invalid_input_error("EvalMatrix: negative entry");
      nonzero = nonzero || x > 0.0;
    }
    if (!nonzero) {
      throw degenerate_sample_error(
          "EvalMatrix: row " + std::to_string(i) +
              " is entirely zero (sample has zero likelihood under every mixture)",
          i);
    }
  }
}

SimplexVector simplex_project(std::span<const double> v) {
  if (v.empty()) throw invalid_input_error("simplex_project: empty input");
  for (double x : v) {
    if (!std::isfinite(x)) throw invalid_input_error("simplex_project: non-finite entry");
  }

  const std::size_t k = v.size();

  // Fast path: already a valid point of the simplex up to strict rounding
  // noise. Returning the input unchanged makes re-projection exact.
  {
    double s = sum_of(v);
    bool nonneg = std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
    if (nonneg && std::abs(s - 1.0) <= 64.0 * std::numeric_limits<double>::epsilon() *
                                           static_cast<double>(k)) {
      return SimplexVector(std::vector<double>(v.begin(), v.end()));
    }
  }

  // Sort-based projection: find the largest support whose shifted entries
  // stay positive.
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    cumulative += u[j];
    double candidate = (1.0 - cumulative) / static_cast<double>(j + 1);
    if (u[j] + candidate > 0.0) theta = candidate;
  }

  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = std::max(v[i] + theta, 0.0);

  // Guard against accumulated rounding: renormalize so construction passes.
  double s = sum_of(out);
  if (s <= 0.0) throw numerical_error("simplex_project: degenerate projection");
  for (auto& x : out) x /= s;
  return SimplexVector(std::move(out));
}

EvalMatrix validate_eval_matrix(const std::vector<std::vector<double>>& raw) {
  if (raw.empty()) throw invalid_input_error("validate_eval_matrix: no rows");
  const std::size_t k = raw.front().size();
  if (k < 2) {
    throw invalid_input_error("validate_eval_matrix: need at least 2 columns, got " +
                              std::to_string(k));
  }
  std::vector<double> flat;
  flat.reserve(raw.size() * k);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].size() != k) {
      throw invalid_input_error("validate_eval_matrix: ragged row " + std::to_string(i));
    }
    flat.insert(flat.end(), raw[i].begin(), raw[i].end());
  }
  return EvalMatrix(std::move(flat), raw.size(), k);
}

}  // namespace labelshift
