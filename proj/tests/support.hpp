#pragma once

// Shared helpers for the test suites: a platform-stable uniform generator
// (raw mt19937_64 bits scaled by hand so results never depend on the
// standard library's distribution implementations) plus small matrix
// constructors used across oracle tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "maslov/lagrangian.hpp"
#include "maslov/numkernel.hpp"

namespace testsupport {

/// Uniform in [0, 1), bit-exact across platforms.
inline double rand01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform in [-1, 1).
inline double rand_sym(std::mt19937_64& rng) { return 2.0 * rand01(rng) - 1.0; }

/// Uniform in [lo, hi).
inline double rand_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * rand01(rng);
}

inline maslov::RealMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                                        double scale = 1.0) {
  maslov::RealMatrix m(r, c);
  for (double& x : m.data) x = scale * rand_sym(rng);
  return m;
}

inline maslov::RealMatrix random_symmetric(std::mt19937_64& rng, std::size_t n,
                                           double scale = 1.0) {
  maslov::RealMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = scale * rand_sym(rng);
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = scale * rand_sym(rng);
  }
  return m;
}

/// Random Lagrangian frame with intersection dimension exactly
/// dim(ker S_1) for an engineered S in a random chart.
inline maslov::LagrangianFrame random_lagrangian(std::mt19937_64& rng, std::size_t n) {
  maslov::RealMatrix s = random_symmetric(rng, n, 1.5);
  // random chart index set
  std::vector<std::size_t> K;
  for (std::size_t i = 0; i < n; ++i)
    if (rand01(rng) < 0.5) K.push_back(i);
  return maslov::from_chart(K, s);
}

inline double max_abs_diff(const maslov::RealMatrix& a, const maslov::RealMatrix& b) {
  return maslov::max_abs(a - b);
}

}  // namespace testsupport
