#pragma once

#include <cstdint>
#include <limits>

#include "labelshift/core.hpp"

namespace labelshift {

// Certificate threshold; any smaller positive constant remains valid, so the
// CLI exposes an override with this default.
constexpr double kCertificateThreshold = 11.36;

struct CertificateReport {
  double upsilon = 0.0;
  SimplexVector maximizer_beta;
  bool is_certified = false;  // upsilon < threshold
  std::int64_t iterations = 0;
  bool converged = true;
  double threshold = kCertificateThreshold;
};

// psi(x) = (x - 1) / (x + 1) on [0, +inf], with psi(+inf) = 1.
double psi(double x);

// Sum over samples of psi(sqrt(num_i / den_i)) where num/den are the mixture
// densities under beta2/beta. The ratio conventions 0/0 = 1 and a/0 = +inf
// are implemented by explicit branching.
double t_statistic(const EvalMatrix& L, const SimplexVector& beta,
                   const SimplexVector& beta2);

// Supremum of the test statistic over the competitor simplex. Rows with zero
// density under beta contribute a constant 1 each (they are handled by case
// analysis); the remaining concave part is maximized by projected gradient
// ascent from the uniform vector with backtracking line search plus a local
// pairwise-transfer refinement.
CertificateReport upsilon(const EvalMatrix& L, const SimplexVector& beta);

// Same with a repetition count per row, so collapsed sample matrices give the
// statistic of the full sample.
CertificateReport upsilon_weighted(const EvalMatrix& L,
                                   std::span<const double> weights,
                                   const SimplexVector& beta);

// Certificate check: validates the candidate when upsilon < threshold. A
// value at or above the threshold is inconclusive, never a rejection.
CertificateReport certify(const EvalMatrix& L, const SimplexVector& beta,
                          double threshold = kCertificateThreshold);

CertificateReport certify_weighted(const EvalMatrix& L, std::span<const double> weights,
                                   const SimplexVector& beta,
                                   double threshold = kCertificateThreshold);

}  // namespace labelshift
