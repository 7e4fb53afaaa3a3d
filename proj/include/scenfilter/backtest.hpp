#pragma once

#include "scenfilter/filter_model.hpp"
#include "scenfilter/market_data.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scenfilter {

/// Rolling estimation/holding windows, in weeks.
struct WindowScheme {
  Eigen::Index in_sample_len = 52;
  Eigen::Index out_sample_len = 12;
  Eigen::Index step = 12;

  void validate() const;
};

/// Half-open range [begin, end) of 0-based scenario indices.
struct ScenarioRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;

  Eigen::Index size() const { return end - begin; }
  bool operator==(const ScenarioRange&) const = default;
};

struct Window {
  int index = 0;
  ScenarioRange in_sample;
  ScenarioRange out_sample;
};

/// Windows start every `step` scenarios; the last holding period may be
/// truncated and windows with no holding period are dropped.
std::vector<Window> roll_windows(Eigen::Index total_returns, const WindowScheme& scheme);

enum class MethodKind { Market, Markowitz, Rmt, PowerMapping, FilterExact, HeuristicV1, HeuristicV2 };

struct MethodSpec {
  MethodKind kind = MethodKind::Market;
  /// Scenarios to filter; only used by filter-exact and the heuristics.
  int K = 0;

  bool uses_K() const;
  /// e.g. "markowitz", "filter-exact:2".
  std::string label() const;
  bool operator==(const MethodSpec&) const = default;
};

/// Parses one method token. "filter-exact", "heuristic-v1" and "heuristic-v2"
/// without ":K" expand to K = 1..k_max; "all" expands to every method.
std::vector<MethodSpec> parse_methods(const std::string& token, int k_max);
std::vector<MethodSpec> parse_method_list(const std::vector<std::string>& tokens, int k_max);

struct BacktestParams {
  int rmt_p = 5;
  double power_q = 1.25;
  FloorMode floor = FloorMode::Inequality;
  double time_limit = 7200.0;
  bool use_cuts = false;
  /// Concurrent (window, method) evaluations; 0 = machine parallelism.
  unsigned workers = 1;
  QpOptions qp;
};

struct WindowResult {
  int window = 0;
  ScenarioRange in_sample;
  ScenarioRange out_sample;
  MethodSpec method;
  double mu0 = 0.0;
  /// Set when the method found no portfolio for this window.
  bool skipped = false;
  std::string status;
  std::string message;
  Vector weights;
  std::vector<Eigen::Index> removed;  // in-sample scenario indices, relative to the window
  /// In-sample objective: variance for the Markowitz family, filtered variance otherwise.
  double objective = 0.0;
  double wall_time = 0.0;
  std::optional<double> gap_percent;
  double repair_shift = 0.0;
  Vector out_returns;
};

struct PerformanceMetrics {
  double av_return = 0.0;
  double v_out = 0.0;
  /// NaN when the out-of-sample returns have zero spread.
  double sharpe = 0.0;
  double mean_assets = 0.0;
  double mean_time = 0.0;
  std::optional<double> mean_gap;
  std::optional<double> mre;
  int windows = 0;
};

/// Metrics over the non-skipped windows. With `exact_ref`, mre averages
/// 100 (objective - exact) / |exact| over windows both runs solved.
PerformanceMetrics compute_metrics(const std::vector<WindowResult>& results,
                                   const std::vector<WindowResult>* exact_ref = nullptr);

/// Wealth path starting at 1 over the concatenated holding periods.
std::vector<double> portfolio_value_series(const std::vector<WindowResult>& results);

struct MethodReport {
  MethodSpec method;
  std::vector<WindowResult> windows;
  std::optional<PerformanceMetrics> metrics;  // empty when every window was skipped
  std::vector<double> value_series;
};

struct BacktestReport {
  WindowScheme scheme;
  BacktestParams params;
  std::vector<std::string> asset_names;
  std::vector<Window> windows;
  std::vector<MethodReport> methods;
  double wall_time = 0.0;

  const MethodReport* find(const MethodSpec& spec) const;
};

/// Runs every method on every window. mu0 is the in-sample mean of the
/// equally weighted portfolio. Infeasible windows are skipped per method.
BacktestReport run_backtest(const ReturnScenarioMatrix& r, const std::vector<MethodSpec>& methods,
                            const WindowScheme& scheme = {}, const BacktestParams& params = {});

}  // namespace scenfilter
