#include "scenfilter/heuristic.hpp"
#include "scenfilter/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace scenfilter {

using Index = Eigen::Index;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_filtering(const FilterInstance& inst) {
  if (inst.K < 1) throw InputError("the nested heuristic needs K >= 1");
  if (inst.num_scenarios() - inst.K < 2) throw InputError("at least two scenarios must remain after filtering");
}

HeuristicTrace fail(HeuristicTrace trace, int step, const std::string& why, Clock::time_point start) {
  trace.feasible = false;
  trace.failed_step = step;
  trace.message = "step " + std::to_string(step) + ": " + why;
  trace.wall_time = seconds_since(start);
  return trace;
}

}  // namespace

std::string to_string(HeuristicVersion version) { return version == HeuristicVersion::V1 ? "v1" : "v2"; }

HeuristicTrace heuristic_v1(const FilterInstance& inst, const HeuristicOptions& options) {
  require_filtering(inst);
  const auto start = Clock::now();
  HeuristicTrace trace;
  trace.version = HeuristicVersion::V1;
  std::vector<Index> removed;
  for (int k = 1; k <= inst.K; ++k) {
    const auto step_start = Clock::now();
    const FilterInstance step_instance(inst.r, k, inst.mu0, inst.floor);
    BranchAndBoundOptions bb;
    bb.time_limit = options.time_limit;
    bb.fixed_removed = removed;
    bb.qp = options.qp;
    const MipSolution sol = solve_branch_and_bound(step_instance, bb);
    trace.qp_solves += sol.qp_solves;
    if (!sol.has_incumbent) return fail(std::move(trace), k, sol.message, start);
    if (sol.status == MipStatus::TimeLimit) trace.message = "step " + std::to_string(k) + " stopped at the time limit";

    Index chosen = -1;
    for (Index t : sol.best.removed())
      if (std::find(removed.begin(), removed.end(), t) == removed.end()) chosen = t;
    removed.push_back(chosen);
    trace.steps.push_back(HeuristicStep{k, chosen, sol.objective, seconds_since(step_start)});
    trace.final = sol.best;
  }
  trace.feasible = true;
  trace.wall_time = seconds_since(start);
  return trace;
}

HeuristicTrace heuristic_v2(const FilterInstance& inst, const HeuristicOptions& options) {
  require_filtering(inst);
  const auto start = Clock::now();
  const Index T = inst.num_scenarios();
  HeuristicTrace trace;
  trace.version = HeuristicVersion::V2;
  std::vector<char> removed(static_cast<std::size_t>(T), 0);
  for (int k = 1; k <= inst.K; ++k) {
    const auto step_start = Clock::now();
    std::vector<Index> candidates;
    for (Index t = 0; t < T; ++t)
      if (!removed[static_cast<std::size_t>(t)]) candidates.push_back(t);

    std::vector<RMvoResult> results(candidates.size());
    parallel_for(candidates.size(), options.workers, [&](std::size_t i) {
      std::vector<Index> kept;
      for (Index t : candidates)
        if (t != candidates[i]) kept.push_back(t);
      results[i] = solve_r_mvo(inst.r, kept, inst.mu0, inst.floor, options.qp);
    });
    trace.qp_solves += static_cast<std::int64_t>(candidates.size());

    // Candidates are in increasing index order, so the first within tolerance wins ties.
    double best_value = kInf;
    for (const RMvoResult& res : results)
      if (res.optimal()) best_value = std::min(best_value, res.objective);
    if (!std::isfinite(best_value)) return fail(std::move(trace), k, "no removal keeps the return floor attainable", start);
    std::size_t best = 0;
    while (!results[best].optimal() || results[best].objective > best_value + 1e-10) ++best;

    removed[static_cast<std::size_t>(candidates[best])] = 1;
    trace.steps.push_back(HeuristicStep{k, candidates[best], results[best].objective, seconds_since(step_start)});
    if (k == inst.K) trace.final = make_filter_solution(results[best].view.x, {removed.begin(), removed.end()}, inst);
  }
  trace.feasible = true;
  trace.wall_time = seconds_since(start);
  return trace;
}

HeuristicVersion auto_select_version(Index num_assets) {
  return num_assets <= 50 ? HeuristicVersion::V1 : HeuristicVersion::V2;
}

HeuristicTrace run_heuristic(const FilterInstance& inst, const HeuristicOptions& options) {
  return auto_select_version(inst.num_assets()) == HeuristicVersion::V1 ? heuristic_v1(inst, options)
                                                                         : heuristic_v2(inst, options);
}

}  // namespace scenfilter
