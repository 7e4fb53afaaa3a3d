#include "scenfilter/serialize.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace scenfilter {
namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

TEST(Serialize, NonFiniteBecomesNull) {
  EXPECT_TRUE(json_number(kInf).is_null());
  EXPECT_TRUE(json_number(std::nan("")).is_null());
  EXPECT_EQ(json_number(0.5).get<double>(), 0.5);
}

TEST(Serialize, QuadraticProgramDump) {
  QuadraticProgram qp = QuadraticProgram::with_variables(2);
  qp.Q << 2.0, 1.0, 1.0, 3.0;
  qp.lower.setZero();
  const Json j = to_json(qp);
  EXPECT_EQ(j["num_variables"], 2);
  EXPECT_EQ(j["Q"][0][1].get<double>(), 1.0);
  EXPECT_EQ(j["Q"][1][1].get<double>(), 3.0);
  EXPECT_EQ(j["lower"][0].get<double>(), 0.0);
  EXPECT_TRUE(j["upper"][0].is_null());
  EXPECT_EQ(j["num_equalities"], 0);
}

TEST(Serialize, MipSolutionFields) {
  const FilterInstance inst = testing::random_instance(3, 8, 2, 1);
  const MipSolution sol = solve_branch_and_bound(inst);
  const Json j = Json::parse(to_json(sol).dump());
  for (const char* key : {"weights", "removed", "objective", "bound", "gap_percent", "nodes", "wall_time", "status"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["status"], "Optimal");
  EXPECT_EQ(j["removed"].size(), 2u);
  EXPECT_EQ(j["weights"].size(), 3u);
  EXPECT_DOUBLE_EQ(j["objective"].get<double>(), sol.objective);
}

TEST(Serialize, HeuristicTraceAndCorrelation) {
  const FilterInstance inst = testing::random_instance(3, 8, 2, 1);
  const Json trace = to_json(heuristic_v2(inst));
  EXPECT_EQ(trace["version"], "v2");
  EXPECT_EQ(trace["steps"].size(), 2u);
  EXPECT_EQ(trace["solution"]["removed"].size(), 2u);

  const AssetStats stats = compute_stats(inst.r);
  const Json fc = to_json(psd_repair(power_map(stats, 1.25)));
  EXPECT_EQ(fc["method"], "power-mapping");
  EXPECT_EQ(fc["parameter"].get<double>(), 1.25);
  EXPECT_TRUE(fc.contains("repair_shift"));
}

TEST(Serialize, ReportFiles) {
  const ReturnScenarioMatrix r = testing::random_returns(3, 70, 2);
  BacktestParams params;
  params.rmt_p = 2;
  BacktestReport report = run_backtest(r, parse_method_list({"market", "rmt", "filter-exact:1", "heuristic-v2:1"}, 1),
                                       {}, params);
  report.asset_names = {"A", "B", "C"};

  const auto dir = std::filesystem::temp_directory_path() / "scenfilter_serialize_test";
  std::filesystem::remove_all(dir);
  const ReportFiles files = write_report_files(report, dir);

  std::ifstream json_file(files.report_json);
  const Json j = Json::parse(json_file);
  EXPECT_EQ(j["methods"].size(), 4u);
  EXPECT_EQ(j["num_windows"], 2);
  EXPECT_EQ(j["assets"][1], "B");
  EXPECT_EQ(j["methods"][2]["method"], "filter-exact:1");
  EXPECT_TRUE(j["methods"][1]["windows"][0].contains("repair_shift"));
  EXPECT_NEAR(j["methods"][3]["metrics"]["MRE"].get<double>(), 0.0, 1e-8);

  std::ifstream metrics_file(files.metrics_csv);
  std::stringstream metrics;
  metrics << metrics_file.rdbuf();
  const auto rows = lines_of(metrics.str());
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "method,AvReturn,V-Out,Sharpe,MeanAssets,MeanTime,MeanGap,MRE");
  EXPECT_EQ(rows[1].rfind("market,", 0), 0u);
  EXPECT_EQ(rows[1].substr(rows[1].size() - 2), ",,");  // no gap or MRE for the benchmark
  EXPECT_EQ(std::count(rows[3].begin(), rows[3].end(), ','), 7);

  std::ifstream values_file(files.values_csv);
  std::stringstream values;
  values << values_file.rdbuf();
  const auto value_rows = lines_of(values.str());
  EXPECT_EQ(value_rows[0], "week,method,value");
  EXPECT_EQ(value_rows[1], "0,market,1");
  // 18 holding weeks plus the start, for each of 4 methods.
  EXPECT_EQ(value_rows.size(), 1u + 4u * 19u);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace scenfilter
