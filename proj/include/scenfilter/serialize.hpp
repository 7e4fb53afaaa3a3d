#pragma once

#include "scenfilter/backtest.hpp"
#include "scenfilter/baselines.hpp"
#include "scenfilter/heuristic.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace scenfilter {

using Json = nlohmann::ordered_json;

/// Non-finite values become null.
Json json_number(double value);

Json to_json(const QuadraticProgram& qp);
Json to_json(const QpSolution& sol);
Json to_json(const FilterSolution& sol);
Json to_json(const MipSolution& sol);
Json to_json(const HeuristicTrace& trace);
Json to_json(const FilteredCorrelation& fc);
Json to_json(const PerformanceMetrics& metrics);
Json to_json(const WindowResult& result);
Json to_json(const BacktestReport& report);

/// One row per method: method, AvReturn, V-Out, Sharpe, MeanAssets, MeanTime, MeanGap, MRE.
/// Missing values are left empty.
std::string metrics_csv(const BacktestReport& report);

/// Tidy (week, method, value) rows; week 0 is the starting value 1.
std::string value_series_csv(const BacktestReport& report);

struct ReportFiles {
  std::filesystem::path report_json;
  std::filesystem::path metrics_csv;
  std::filesystem::path values_csv;
};

/// Writes report.json, metrics.csv and values.csv, creating the directory.
ReportFiles write_report_files(const BacktestReport& report, const std::filesystem::path& out_dir);

}  // namespace scenfilter
