#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenfilter {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for malformed or invalid input data (files, dimensions, parameters).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weekly price panel, assets by time. Column t holds the prices at date t.
struct PriceSeries {
  std::vector<std::string> asset_names;
  std::vector<std::string> dates;
  Matrix prices;  // n x (T+1), strictly positive

  Eigen::Index num_assets() const { return prices.rows(); }
  Eigen::Index num_dates() const { return prices.cols(); }

  /// Throws InputError when an invariant does not hold.
  void validate() const;
};

/// n x T simple rates of return; every scenario (column) has probability 1/T.
struct ReturnScenarioMatrix {
  Matrix returns;

  ReturnScenarioMatrix() = default;
  explicit ReturnScenarioMatrix(Matrix r);

  Eigen::Index num_assets() const { return returns.rows(); }
  Eigen::Index num_scenarios() const { return returns.cols(); }
  double scenario_probability() const { return 1.0 / static_cast<double>(returns.cols()); }

  /// Columns [begin, end) as a new scenario matrix.
  ReturnScenarioMatrix window(Eigen::Index begin, Eigen::Index end) const;
};

/// Sample statistics with the population (1/T) normalization.
struct AssetStats {
  Vector mu;
  Matrix cov;
  Vector vol;
  Matrix corr;
};

PriceSeries load_prices(const std::filesystem::path& path);
PriceSeries parse_prices(const std::string& csv_text);
/// Price CSV text that parse_prices reads back exactly.
std::string format_prices(const PriceSeries& prices);

ReturnScenarioMatrix compute_returns(const PriceSeries& prices);

AssetStats compute_stats(const ReturnScenarioMatrix& r);

/// Mean over scenarios of the equally weighted portfolio return.
double market_portfolio_return(const ReturnScenarioMatrix& r);

/// Sortable key for a date label: days since epoch for ISO-8601 dates, the
/// value itself for integer ordinals. Throws InputError on anything else.
std::int64_t date_ordinal(const std::string& label);

}  // namespace scenfilter
