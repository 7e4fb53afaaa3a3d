#pragma once

#include "scenfilter/market_data.hpp"

#include <cstdint>
#include <string>

namespace scenfilter {

/// One-factor weekly market with occasional crash/rally weeks.
struct SyntheticMarket {
  Eigen::Index assets = 10;
  /// Number of weekly returns; the series has one more price date.
  Eigen::Index weeks = 120;
  std::uint64_t seed = 1;
  std::string first_date = "2015-01-02";
  double factor_mean = 0.0015;
  double factor_vol = 0.02;
  /// Probability that a week carries a market-wide shock.
  double shock_probability = 0.03;
  double shock_scale = 0.08;
};

/// Deterministic for a given spec. Dates are ISO-8601, seven days apart.
PriceSeries generate_prices(const SyntheticMarket& spec);

/// n x T returns drawn independently and uniformly from [low, high].
ReturnScenarioMatrix uniform_returns(Eigen::Index n, Eigen::Index T, std::uint64_t seed, double low = -0.1,
                                     double high = 0.1);

}  // namespace scenfilter
