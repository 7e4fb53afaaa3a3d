#include "scenfilter/serialize.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace scenfilter {

using Index = Eigen::Index;

Json json_number(double value) { return std::isfinite(value) ? Json(value) : Json(nullptr); }

namespace {

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(json_number(v(i)));
  return out;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

Json optional_number(const std::optional<double>& value) { return value ? json_number(*value) : Json(nullptr); }

std::string csv_number(double value) {
  if (!std::isfinite(value)) return "";
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

std::string csv_number(const std::optional<double>& value) { return value ? csv_number(*value) : ""; }

}  // namespace

Json to_json(const QuadraticProgram& qp) {
  return Json{{"num_variables", qp.num_variables()},
              {"num_equalities", qp.Aeq.rows()},
              {"num_inequalities", qp.Ain.rows()},
              {"Q", matrix_json(qp.Q)},
              {"c", vector_json(qp.c)},
              {"Aeq", matrix_json(qp.Aeq)},
              {"beq", vector_json(qp.beq)},
              {"Ain", matrix_json(qp.Ain)},
              {"bin", vector_json(qp.bin)},
              {"lower", vector_json(qp.lower)},
              {"upper", vector_json(qp.upper)}};
}

Json to_json(const QpSolution& sol) {
  Json out{{"status", to_string(sol.status)},
           {"objective", json_number(sol.objective)},
           {"weights", vector_json(sol.v)},
           {"iterations", sol.iterations}};
  if (!sol.message.empty()) out["message"] = sol.message;
  return out;
}

Json to_json(const FilterSolution& sol) {
  return Json{{"weights", vector_json(sol.x)},
              {"removed", sol.removed()},
              {"filtered_mean", json_number(sol.filtered_mean)},
              {"filtered_variance", json_number(sol.filtered_variance)}};
}

Json to_json(const MipSolution& sol) {
  Json out{{"status", to_string(sol.status)}};
  out["weights"] = sol.has_incumbent ? vector_json(sol.best.x) : Json::array();
  out["removed"] = sol.has_incumbent ? Json(sol.best.removed()) : Json::array();
  out["objective"] = json_number(sol.objective);
  out["bound"] = json_number(sol.dual_bound);
  out["gap_percent"] = json_number(sol.gap_percent);
  out["root_bound"] = json_number(sol.root_bound);
  out["nodes"] = sol.nodes;
  out["qp_solves"] = sol.qp_solves;
  out["wall_time"] = sol.wall_time;
  if (!sol.message.empty()) out["message"] = sol.message;
  return out;
}

Json to_json(const HeuristicTrace& trace) {
  Json steps = Json::array();
  for (const HeuristicStep& s : trace.steps)
    steps.push_back(Json{{"k", s.k},
                         {"scenario", s.scenario},
                         {"objective", json_number(s.objective)},
                         {"wall_time", s.wall_time}});
  Json out{{"version", to_string(trace.version)},
           {"feasible", trace.feasible},
           {"objective", json_number(trace.objective())},
           {"steps", std::move(steps)}};
  if (trace.feasible) out["solution"] = to_json(trace.final);
  if (trace.failed_step > 0) out["failed_step"] = trace.failed_step;
  if (!trace.message.empty()) out["message"] = trace.message;
  out["qp_solves"] = trace.qp_solves;
  out["wall_time"] = trace.wall_time;
  return out;
}

Json to_json(const FilteredCorrelation& fc) {
  return Json{{"method", to_string(fc.method)},
              {"parameter", json_number(fc.parameter)},
              {"repair_shift", json_number(fc.repair_shift)},
              {"matrix", matrix_json(fc.matrix)}};
}

Json to_json(const PerformanceMetrics& m) {
  return Json{{"AvReturn", json_number(m.av_return)},   {"V-Out", json_number(m.v_out)},
              {"Sharpe", json_number(m.sharpe)},        {"MeanAssets", json_number(m.mean_assets)},
              {"MeanTime", json_number(m.mean_time)},   {"MeanGap", optional_number(m.mean_gap)},
              {"MRE", optional_number(m.mre)},          {"windows", m.windows}};
}

Json to_json(const WindowResult& w) {
  Json out{{"window", w.window},
           {"in_sample", {w.in_sample.begin, w.in_sample.end}},
           {"out_sample", {w.out_sample.begin, w.out_sample.end}},
           {"method", w.method.label()},
           {"mu0", json_number(w.mu0)},
           {"skipped", w.skipped},
           {"status", w.status}};
  if (!w.message.empty()) out["message"] = w.message;
  out["weights"] = vector_json(w.weights);
  out["removed"] = w.removed;
  out["objective"] = json_number(w.objective);
  out["wall_time"] = w.wall_time;
  out["gap_percent"] = optional_number(w.gap_percent);
  if (w.method.kind == MethodKind::Rmt || w.method.kind == MethodKind::PowerMapping)
    out["repair_shift"] = json_number(w.repair_shift);
  out["out_returns"] = vector_json(w.out_returns);
  return out;
}

Json to_json(const BacktestReport& report) {
  const BacktestParams& p = report.params;
  Json methods = Json::array();
  for (const MethodReport& m : report.methods) {
    Json windows = Json::array();
    for (const WindowResult& w : m.windows) windows.push_back(to_json(w));
    Json values = Json::array();
    for (double v : m.value_series) values.push_back(json_number(v));
    methods.push_back(Json{{"method", m.method.label()},
                           {"metrics", m.metrics ? to_json(*m.metrics) : Json(nullptr)},
                           {"skipped_windows", std::count_if(m.windows.begin(), m.windows.end(),
                                                             [](const WindowResult& w) { return w.skipped; })},
                           {"windows", std::move(windows)},
                           {"value_series", std::move(values)}});
  }
  return Json{{"scheme",
               {{"in_sample_len", report.scheme.in_sample_len},
                {"out_sample_len", report.scheme.out_sample_len},
                {"step", report.scheme.step}}},
              {"params",
               {{"rmt_p", p.rmt_p},
                {"power_q", p.power_q},
                {"floor_mode", to_string(p.floor)},
                {"time_limit", p.time_limit},
                {"use_cuts", p.use_cuts},
                {"workers", p.workers}}},
              {"assets", report.asset_names},
              {"num_windows", report.windows.size()},
              {"wall_time", report.wall_time},
              {"methods", std::move(methods)}};
}

std::string metrics_csv(const BacktestReport& report) {
  std::ostringstream out;
  out << "method,AvReturn,V-Out,Sharpe,MeanAssets,MeanTime,MeanGap,MRE\n";
  for (const MethodReport& m : report.methods) {
    out << m.method.label();
    if (m.metrics) {
      const PerformanceMetrics& x = *m.metrics;
      out << ',' << csv_number(x.av_return) << ',' << csv_number(x.v_out) << ',' << csv_number(x.sharpe) << ','
          << csv_number(x.mean_assets) << ',' << csv_number(x.mean_time) << ',' << csv_number(x.mean_gap) << ','
          << csv_number(x.mre);
    } else {
      out << ",,,,,,,";
    }
    out << '\n';
  }
  return out.str();
}

std::string value_series_csv(const BacktestReport& report) {
  std::ostringstream out;
  out << "week,method,value\n";
  for (const MethodReport& m : report.methods)
    for (std::size_t week = 0; week < m.value_series.size(); ++week)
      out << week << ',' << m.method.label() << ',' << csv_number(m.value_series[week]) << '\n';
  return out.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  file << text;
  if (!file) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

ReportFiles write_report_files(const BacktestReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ReportFiles files{out_dir / "report.json", out_dir / "metrics.csv", out_dir / "values.csv"};
  write_text(files.report_json, to_json(report).dump(2) + "\n");
  write_text(files.metrics_csv, metrics_csv(report));
  write_text(files.values_csv, value_series_csv(report));
  return files;
}

}  // namespace scenfilter
