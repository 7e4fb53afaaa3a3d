#include "scenfilter/backtest.hpp"

#include "scenfilter/baselines.hpp"
#include "scenfilter/heuristic.hpp"
#include "scenfilter/parallel.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>

namespace scenfilter {

using Index = Eigen::Index;

void WindowScheme::validate() const {
  if (in_sample_len < 2) throw InputError("in_sample_len must be at least 2");
  if (out_sample_len < 1) throw InputError("out_sample_len must be at least 1");
  if (step < 1) throw InputError("step must be at least 1");
}

std::vector<Window> roll_windows(Index total_returns, const WindowScheme& scheme) {
  scheme.validate();
  if (total_returns < scheme.in_sample_len + 1) {
    throw InputError("need at least " + std::to_string(scheme.in_sample_len + 1) + " weekly returns, got " +
                     std::to_string(total_returns));
  }
  std::vector<Window> out;
  for (Index s = 0; s + scheme.in_sample_len < total_returns; s += scheme.step) {
    Window w;
    w.index = static_cast<int>(out.size());
    w.in_sample = {s, s + scheme.in_sample_len};
    w.out_sample = {s + scheme.in_sample_len, std::min(s + scheme.in_sample_len + scheme.out_sample_len, total_returns)};
    out.push_back(w);
  }
  return out;
}

namespace {

struct MethodName {
  const char* name;
  MethodKind kind;
  bool uses_K;
};

constexpr MethodName kMethodNames[] = {
    {"market", MethodKind::Market, false},
    {"markowitz", MethodKind::Markowitz, false},
    {"rmt", MethodKind::Rmt, false},
    {"power-mapping", MethodKind::PowerMapping, false},
    {"filter-exact", MethodKind::FilterExact, true},
    {"heuristic-v1", MethodKind::HeuristicV1, true},
    {"heuristic-v2", MethodKind::HeuristicV2, true},
};

const MethodName& name_of(MethodKind kind) {
  for (const MethodName& m : kMethodNames)
    if (m.kind == kind) return m;
  throw std::logic_error("unknown method kind");
}

}  // namespace

bool MethodSpec::uses_K() const { return name_of(kind).uses_K; }

std::string MethodSpec::label() const {
  std::string out = name_of(kind).name;
  if (uses_K()) out += ":" + std::to_string(K);
  return out;
}

std::vector<MethodSpec> parse_methods(const std::string& token, int k_max) {
  if (token == "all") {
    std::vector<MethodSpec> out;
    for (const MethodName& m : kMethodNames) {
      const auto expanded = parse_methods(m.name, k_max);
      out.insert(out.end(), expanded.begin(), expanded.end());
    }
    return out;
  }
  const auto colon = token.find(':');
  const std::string name = token.substr(0, colon);
  for (const MethodName& m : kMethodNames) {
    if (name != m.name) continue;
    if (!m.uses_K) {
      if (colon != std::string::npos) throw InputError("method '" + name + "' takes no K");
      return {MethodSpec{m.kind, 0}};
    }
    if (colon == std::string::npos) {
      std::vector<MethodSpec> out;
      for (int k = 1; k <= k_max; ++k) out.push_back(MethodSpec{m.kind, k});
      return out;
    }
    const std::string digits = token.substr(colon + 1);
    int k = -1;
    try {
      std::size_t used = 0;
      k = std::stoi(digits, &used);
      if (used != digits.size()) k = -1;
    } catch (const std::exception&) {
      k = -1;
    }
    if (k < 0) throw InputError("invalid K in method '" + token + "'");
    if (k == 0 && m.kind != MethodKind::FilterExact) throw InputError("heuristics need K >= 1 in '" + token + "'");
    return {MethodSpec{m.kind, k}};
  }
  throw InputError("unknown method '" + token + "'");
}

std::vector<MethodSpec> parse_method_list(const std::vector<std::string>& tokens, int k_max) {
  std::vector<MethodSpec> out;
  for (const std::string& token : tokens) {
    for (const MethodSpec& spec : parse_methods(token, k_max)) {
      if (std::find(out.begin(), out.end(), spec) == out.end()) out.push_back(spec);
    }
  }
  if (out.empty()) throw InputError("no methods requested");
  return out;
}

PerformanceMetrics compute_metrics(const std::vector<WindowResult>& results, const std::vector<WindowResult>* exact_ref) {
  PerformanceMetrics m;
  std::vector<double> weekly;
  double assets = 0.0, time = 0.0, gap = 0.0;
  int gaps = 0;
  for (const WindowResult& w : results) {
    if (w.skipped) continue;
    ++m.windows;
    for (Index t = 0; t < w.out_returns.size(); ++t) weekly.push_back(w.out_returns(t));
    assets += static_cast<double>((w.weights.array() >= 0.01).count());
    time += w.wall_time;
    if (w.gap_percent) {
      gap += *w.gap_percent;
      ++gaps;
    }
  }
  if (m.windows == 0 || weekly.empty()) throw InputError("no solved windows to evaluate");

  const Eigen::Map<const Vector> y(weekly.data(), static_cast<Index>(weekly.size()));
  m.av_return = y.mean();
  m.v_out = (y.array() - m.av_return).square().mean();
  const double sd = std::sqrt(m.v_out);
  m.sharpe = sd > 0.0 ? m.av_return / sd : std::numeric_limits<double>::quiet_NaN();
  m.mean_assets = assets / m.windows;
  m.mean_time = time / m.windows;
  if (gaps > 0) m.mean_gap = gap / gaps;

  if (exact_ref) {
    double total = 0.0;
    int count = 0;
    for (const WindowResult& h : results) {
      if (h.skipped) continue;
      for (const WindowResult& e : *exact_ref) {
        if (e.window != h.window || e.skipped) continue;
        total += 100.0 * (h.objective - e.objective) / std::max(std::abs(e.objective), 1e-12);
        ++count;
      }
    }
    if (count > 0) m.mre = total / count;
  }
  return m;
}

std::vector<double> portfolio_value_series(const std::vector<WindowResult>& results) {
  std::vector<double> values{1.0};
  for (const WindowResult& w : results) {
    if (w.skipped) continue;
    for (Index t = 0; t < w.out_returns.size(); ++t) values.push_back(values.back() * (1.0 + w.out_returns(t)));
  }
  return values;
}

const MethodReport* BacktestReport::find(const MethodSpec& spec) const {
  for (const MethodReport& m : methods)
    if (m.method == spec) return &m;
  return nullptr;
}

namespace {

using Clock = std::chrono::steady_clock;

void record_qp(WindowResult& res, const QpSolution& sol) {
  res.status = to_string(sol.status);
  res.message = sol.message;
  if (!sol.optimal()) {
    res.skipped = true;
    return;
  }
  res.weights = sol.v;
  res.objective = sol.objective;
}

WindowResult solve_window(const ReturnScenarioMatrix& r, const Window& window, const MethodSpec& method,
                          const BacktestParams& params) {
  WindowResult res;
  res.window = window.index;
  res.in_sample = window.in_sample;
  res.out_sample = window.out_sample;
  res.method = method;
  const ReturnScenarioMatrix in = r.window(window.in_sample.begin, window.in_sample.end);
  res.mu0 = market_portfolio_return(in);
  const Index n = r.num_assets();

  const auto start = Clock::now();
  switch (method.kind) {
    case MethodKind::Market: {
      res.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
      res.status = "Optimal";
      const AssetStats stats = compute_stats(in);
      res.objective = res.weights.dot(stats.cov * res.weights);
      break;
    }
    case MethodKind::Markowitz:
      record_qp(res, solve_markowitz(compute_stats(in), res.mu0, params.floor, params.qp));
      break;
    case MethodKind::Rmt:
    case MethodKind::PowerMapping: {
      const AssetStats stats = compute_stats(in);
      const FilteredCorrelation fc = psd_repair(method.kind == MethodKind::Rmt ? rmt_filter(stats, params.rmt_p)
                                                                                : power_map(stats, params.power_q));
      res.repair_shift = fc.repair_shift;
      record_qp(res, solve_filtered_markowitz(stats, fc, res.mu0, params.floor, params.qp));
      break;
    }
    case MethodKind::FilterExact: {
      const FilterInstance inst(in, method.K, res.mu0, params.floor);
      BranchAndBoundOptions options;
      options.time_limit = params.time_limit;
      options.use_cuts = params.use_cuts;
      options.qp = params.qp;
      const MipSolution sol = solve_branch_and_bound(inst, options);
      res.status = to_string(sol.status);
      res.message = sol.message;
      if (!sol.has_incumbent) {
        res.skipped = true;
        break;
      }
      res.weights = sol.best.x;
      res.removed = sol.best.removed();
      res.objective = sol.objective;
      res.gap_percent = sol.gap_percent;
      break;
    }
    case MethodKind::HeuristicV1:
    case MethodKind::HeuristicV2: {
      const FilterInstance inst(in, method.K, res.mu0, params.floor);
      HeuristicOptions options;
      options.time_limit = params.time_limit;
      options.qp = params.qp;
      const HeuristicTrace trace =
          method.kind == MethodKind::HeuristicV1 ? heuristic_v1(inst, options) : heuristic_v2(inst, options);
      res.status = trace.feasible ? "Optimal" : "Infeasible";
      res.message = trace.message;
      if (!trace.feasible) {
        res.skipped = true;
        break;
      }
      res.weights = trace.final.x;
      res.removed = trace.final.removed();
      res.objective = trace.objective();
      break;
    }
  }
  res.wall_time = method.kind == MethodKind::Market ? 0.0 : std::chrono::duration<double>(Clock::now() - start).count();
  if (!res.skipped) {
    const ReturnScenarioMatrix out = r.window(window.out_sample.begin, window.out_sample.end);
    res.out_returns = out.returns.transpose() * res.weights;
  }
  return res;
}

}  // namespace

BacktestReport run_backtest(const ReturnScenarioMatrix& r, const std::vector<MethodSpec>& methods,
                            const WindowScheme& scheme, const BacktestParams& params) {
  if (methods.empty()) throw InputError("no methods requested");
  const auto start = Clock::now();
  for (const MethodSpec& m : methods) {
    if (m.kind == MethodKind::Rmt && (params.rmt_p < 1 || params.rmt_p > r.num_assets()))
      throw InputError("p must lie in [1, " + std::to_string(r.num_assets()) + "]");
    if (m.kind == MethodKind::PowerMapping && !(params.power_q > 0.0)) throw InputError("q must be positive");
    if (m.uses_K() && m.K >= scheme.in_sample_len - 1)
      throw InputError("K = " + std::to_string(m.K) + " leaves fewer than two in-sample scenarios");
  }

  BacktestReport report;
  report.scheme = scheme;
  report.params = params;
  report.windows = roll_windows(r.num_scenarios(), scheme);

  const std::size_t W = report.windows.size();
  std::vector<WindowResult> results(W * methods.size());
  parallel_for(results.size(), params.workers, [&](std::size_t i) {
    results[i] = solve_window(r, report.windows[i % W], methods[i / W], params);
  });

  for (std::size_t k = 0; k < methods.size(); ++k) {
    MethodReport mr;
    mr.method = methods[k];
    mr.windows.assign(results.begin() + static_cast<std::ptrdiff_t>(k * W),
                      results.begin() + static_cast<std::ptrdiff_t>((k + 1) * W));
    mr.value_series = portfolio_value_series(mr.windows);
    report.methods.push_back(std::move(mr));
  }
  // MRE compares each heuristic with the exact run of the same K when both were requested.
  for (MethodReport& mr : report.methods) {
    const bool any = std::any_of(mr.windows.begin(), mr.windows.end(), [](const WindowResult& w) { return !w.skipped; });
    if (!any) continue;
    const std::vector<WindowResult>* ref = nullptr;
    if (mr.method.kind == MethodKind::HeuristicV1 || mr.method.kind == MethodKind::HeuristicV2) {
      if (const MethodReport* exact = report.find(MethodSpec{MethodKind::FilterExact, mr.method.K}))
        ref = &exact->windows;
    }
    mr.metrics = compute_metrics(mr.windows, ref);
  }
  report.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

}  // namespace scenfilter
