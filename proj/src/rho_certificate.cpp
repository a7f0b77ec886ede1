#include "labelshift/rho_certificate.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace labelshift {

namespace {

constexpr std::int64_t kMaxAscentIterations = 10000;
constexpr double kAscentTolerance = 1e-10;

// Mixture density of each row under the given weights.
std::vector<double> row_mixtures(const EvalMatrix& L, std::span<const double> w) {
  std::vector<double> out(L.rows(), 0.0);
  for (std::size_t i = 0; i < L.rows(); ++i) {
    auto row = L.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < L.cols(); ++j) s += w[j] * row[j];
    out[i] = s;
  }
  return out;
}

double psi_of_ratio(double num, double den) {
  if (den > 0.0) {
    if (num == 0.0) return -1.0;
    double r = std::sqrt(num), d = std::sqrt(den);
    return (r - d) / (r + d);
  }
  // den == 0: a/0 = +inf for a > 0, 0/0 = 1.
  return num > 0.0 ? 1.0 : 0.0;
}

// Objective over the smooth rows only (den > 0), as a function of the
// competitor weights.
struct SmoothPart {
  const EvalMatrix& L;
  const std::vector<double>& den;
  const std::vector<std::size_t>& rows;
  std::span<const double> row_weights;

  double value(std::span<const double> w) const {
    double s = 0.0;
    for (std::size_t i : rows) {
      auto row = L.row(i);
      double num = 0.0;
      for (std::size_t j = 0; j < L.cols(); ++j) num += w[j] * row[j];
      s += row_weights[i] * psi_of_ratio(num, den[i]);
    }
    return s;
  }

  std::vector<double> gradient(std::span<const double> w) const {
    std::vector<double> g(L.cols(), 0.0);
    for (std::size_t i : rows) {
      auto row = L.row(i);
      double num = 0.0;
      for (std::size_t j = 0; j < L.cols(); ++j) num += w[j] * row[j];
      double d = std::sqrt(den[i]);
      // d(psi)/d(num) = sqrt(den) / (sqrt(num) (sqrt(num)+sqrt(den))^2);
      // the slope blows up as num -> 0, cap it so steps stay finite
      // (the line search works on exact objective values).
      double r = std::sqrt(std::max(num, 1e-12 * std::max(den[i], 1.0)));
      double slope = row_weights[i] * d / (r * (r + d) * (r + d));
      for (std::size_t j = 0; j < L.cols(); ++j) g[j] += slope * row[j];
    }
    return g;
  }
};

// Pairwise-transfer polish around the ascent solution; escapes boundary
// kinks that stall the projected gradient.
void transfer_refine(const SmoothPart& f, std::vector<double>& w, double& best) {
  const double steps[] = {0.1, 0.03, 0.01, 0.003, 1e-3, 3e-4, 1e-4};
  for (double step : steps) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t from = 0; from < w.size(); ++from) {
        if (w[from] <= 0.0) continue;
        double delta = std::min(step, w[from]);
        for (std::size_t to = 0; to < w.size(); ++to) {
          if (to == from) continue;
          w[from] -= delta;
          w[to] += delta;
          double v = f.value(w);
          if (v > best + 1e-15) {
            best = v;
            improved = true;
          } else {
            w[from] += delta;
            w[to] -= delta;
          }
        }
      }
    }
  }
}

}  // namespace

double psi(double x) {
  if (std::isnan(x) || x < 0.0) {
    throw invalid_input_error("psi: argument must be nonnegative or +inf");
  }
  if (std::isinf(x)) return 1.0;
  return (x - 1.0) / (x + 1.0);
}

double t_statistic(const EvalMatrix& L, const SimplexVector& beta,
                   const SimplexVector& beta2) {
  if (beta.size() != L.cols() || beta2.size() != L.cols()) {
    throw invalid_input_error("t_statistic: weight dimension mismatch");
  }
  auto den = row_mixtures(L, beta.span());
  auto num = row_mixtures(L, beta2.span());
  double t = 0.0;
  for (std::size_t i = 0; i < L.rows(); ++i) t += psi_of_ratio(num[i], den[i]);
  return t;
}

CertificateReport upsilon_weighted(const EvalMatrix& L,
                                   std::span<const double> weights,
                                   const SimplexVector& beta) {
  if (beta.size() != L.cols()) {
    throw invalid_input_error("upsilon: weight dimension mismatch");
  }
  if (weights.size() != L.rows()) {
    throw invalid_input_error("upsilon: row weight length mismatch");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw invalid_input_error("upsilon: row weights must be >= 0");
    }
  }
  const std::size_t k = L.cols();

  CertificateReport report{.upsilon = 0.0,
                           .maximizer_beta = SimplexVector::uniform(k),
                           .is_certified = false,
                           .iterations = 0,
                           .converged = true};

  if (k == 1) {
    // The competitor set is a single point; T(q, q) = 0.
    report.maximizer_beta = beta;
    report.is_certified = report.upsilon < report.threshold;
    return report;
  }

  auto den = row_mixtures(L, beta.span());
  std::vector<std::size_t> smooth_rows;
  double zero_den_mass = 0.0;
  for (std::size_t i = 0; i < L.rows(); ++i) {
    if (weights[i] == 0.0) continue;
    if (den[i] > 0.0) {
      smooth_rows.push_back(i);
    } else {
      // Every row has a positive entry, so a competitor arbitrarily close to
      // the interior picks up psi(+inf) = 1 from this row.
      zero_den_mass += weights[i];
    }
  }

  double best = 0.0;
  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  if (!smooth_rows.empty()) {
    SmoothPart f{L, den, smooth_rows, weights};
    best = f.value(w);
    std::int64_t iter = 0;
    for (; iter < kMaxAscentIterations; ++iter) {
      auto grad = f.gradient(w);
      double gnorm = 0.0;
      for (double g : grad) gnorm = std::max(gnorm, std::abs(g));
      if (gnorm > 1e6) {
        for (double& g : grad) g *= 1e6 / gnorm;
      }
      double step = 1.0;
      double improved = -1.0;
      std::vector<double> candidate;
      for (int shrink = 0; shrink < 50; ++shrink) {
        std::vector<double> trial(k);
        for (std::size_t j = 0; j < k; ++j) trial[j] = w[j] + step * grad[j];
        trial = simplex_project(trial).values();
        double v = f.value(trial);
        if (v > best) {
          improved = v - best;
          best = v;
          candidate = std::move(trial);
          break;
        }
        step *= 0.5;
      }
      if (improved < 0.0) break;  // no ascent direction left at any step size
      w = std::move(candidate);
      if (improved < kAscentTolerance) {
        ++iter;
        break;
      }
    }
    report.iterations = iter;
    report.converged = iter < kMaxAscentIterations;
    transfer_refine(f, w, best);
  }

  // The supremum includes the candidate itself, so it is never negative.
  report.upsilon = zero_den_mass + std::max(best, 0.0);
  report.maximizer_beta = SimplexVector(std::move(w));
  report.is_certified = report.upsilon < report.threshold;
  return report;
}

CertificateReport upsilon(const EvalMatrix& L, const SimplexVector& beta) {
  std::vector<double> unit(L.rows(), 1.0);
  return upsilon_weighted(L, unit, beta);
}

CertificateReport certify_weighted(const EvalMatrix& L, std::span<const double> weights,
                                   const SimplexVector& beta, double threshold) {
  if (!(threshold > 0.0)) {
    throw invalid_input_error("certify: threshold must be positive");
  }
  CertificateReport report = upsilon_weighted(L, weights, beta);
  report.threshold = threshold;
  report.is_certified = report.upsilon < threshold;
  return report;
}

CertificateReport certify(const EvalMatrix& L, const SimplexVector& beta,
                          double threshold) {
  std::vector<double> unit(L.rows(), 1.0);
  return certify_weighted(L, unit, beta, threshold);
}

}  // namespace labelshift
