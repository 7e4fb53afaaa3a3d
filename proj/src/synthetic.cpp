#include "scenfilter/synthetic.hpp"

#include <chrono>
#include <cstdio>
#include <random>

namespace scenfilter {

namespace {

std::string iso_date(std::int64_t days_since_epoch) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days_since_epoch}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

PriceSeries generate_prices(const SyntheticMarket& spec) {
  if (spec.assets < 1) throw InputError("need at least one asset");
  if (spec.weeks < 1) throw InputError("need at least one week");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::Index n = spec.assets;

  Vector beta(n), alpha(n), idio(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    beta(j) = 0.4 + 1.2 * uniform(rng);
    alpha(j) = -0.001 + 0.003 * uniform(rng);
    idio(j) = 0.01 + 0.025 * uniform(rng);
  }

  PriceSeries series;
  for (Eigen::Index j = 0; j < n; ++j) series.asset_names.push_back("A" + std::to_string(j + 1));
  series.prices.resize(n, spec.weeks + 1);
  series.prices.col(0).setConstant(100.0);

  const std::int64_t start = date_ordinal(spec.first_date);
  series.dates.push_back(iso_date(start));
  for (Eigen::Index t = 0; t < spec.weeks; ++t) {
    double factor = spec.factor_mean + spec.factor_vol * normal(rng);
    if (uniform(rng) < spec.shock_probability) factor += spec.shock_scale * normal(rng);
    for (Eigen::Index j = 0; j < n; ++j) {
      // Keep every weekly return above -90 % so prices stay positive.
      const double r = std::max(-0.9, alpha(j) + beta(j) * factor + idio(j) * normal(rng));
      series.prices(j, t + 1) = series.prices(j, t) * (1.0 + r);
    }
    series.dates.push_back(iso_date(start + 7 * (t + 1)));
  }
  series.validate();
  return series;
}

ReturnScenarioMatrix uniform_returns(Eigen::Index n, Eigen::Index T, std::uint64_t seed, double low, double high) {
  if (n < 1 || T < 1) throw InputError("need at least one asset and one scenario");
  if (!(low < high)) throw InputError("empty return range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(low, high);
  Matrix r(n, T);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index j = 0; j < n; ++j) r(j, t) = uniform(rng);
  return ReturnScenarioMatrix(std::move(r));
}

}  // namespace scenfilter
