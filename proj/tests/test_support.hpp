#pragma once

#include "scenfilter/filter_model.hpp"

#include <random>

namespace scenfilter::testing {

/// Weekly-like returns: mean 0.3%, volatility 4%, with a common factor.
inline ReturnScenarioMatrix random_returns(Eigen::Index n, Eigen::Index T, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix r(n, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double market = normal(rng);
    for (Eigen::Index j = 0; j < n; ++j) r(j, t) = 0.003 + 0.02 * market + 0.03 * normal(rng);
  }
  return ReturnScenarioMatrix(r);
}

/// Floor equal to the equally weighted portfolio's mean over all scenarios.
inline double market_floor(const ReturnScenarioMatrix& r) { return r.returns.mean(); }

inline FilterInstance random_instance(Eigen::Index n, Eigen::Index T, int K, unsigned seed) {
  ReturnScenarioMatrix r = random_returns(n, T, seed);
  const double mu0 = market_floor(r);
  return FilterInstance(std::move(r), K, mu0);
}

inline double relative_difference(double a, double b) { return std::abs(a - b) / std::max(1e-12, std::abs(b)); }

}  // namespace scenfilter::testing
