#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace labelshift {

// Deterministic, splittable random source. Streams are derived from a base
// seed and an integer path, so concurrent replications can own disjoint
// generators that do not depend on scheduling order. All draws go through
// hand-rolled transforms (never std::*_distribution) because those are
// implementation-defined and would break byte-identical reports across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix(seed ^ kStreamSalt)) {}

  // Derive an independent stream identified by (seed, path...). Equal inputs
  // give equal streams; any difference in the path decorrelates them.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = seed;
    for (std::uint64_t p : path) h = mix(h ^ mix(p + kPathSalt));
    return Rng(h);
  }

  // Uniform on [0, 1), 53 usable bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Index i with probability probs[i]; probs must be nonnegative with a
  // positive sum (an exact simplex is not required, the CDF scan normalizes).
  std::size_t categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    const double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }

  double exponential() {
    // 1 - u lies in (0, 1], so the log is finite.
    double u = uniform01();
    return -std::log(1.0 - u);
  }

  // Flat Dirichlet draw: normalized i.i.d. exponentials.
  std::vector<double> dirichlet(std::size_t k) {
    std::vector<double> v(k);
    double total = 0.0;
    for (auto& x : v) {
      x = exponential();
      total += x;
    }
    for (auto& x : v) x /= total;
    return v;
  }

  std::uint64_t next_u64() { return gen_(); }

 private:
  static constexpr std::uint64_t kStreamSalt = 0x6c616265736866ULL;
  static constexpr std::uint64_t kPathSalt = 0x9e3779b97f4a7c15ULL;

  // SplitMix64 finalizer; full-period bijective mixing.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 gen_;
};

}  // namespace labelshift
