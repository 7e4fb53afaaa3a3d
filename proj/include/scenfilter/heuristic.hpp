#pragma once

#include "scenfilter/filter_model.hpp"

#include <string>
#include <vector>

namespace scenfilter {

/// Mean-variance QP restricted to the kept scenarios, each with probability 1/|kept|.
struct RMvoResult {
  QpSolution qp;
  FilterSolution view;
  double objective = kInf;

  bool optimal() const { return qp.optimal(); }
};

/// Builds the restricted QP: variables x (n) followed by one deviation d_t per
/// kept scenario.
QuadraticProgram build_r_mvo(const ReturnScenarioMatrix& r, const std::vector<Eigen::Index>& kept, double mu0,
                             FloorMode floor = FloorMode::Inequality);

/// Equivalent n-variable form: minimize x' cov_R x with the same floor and simplex,
/// where cov_R is the population covariance over the kept scenarios.
QuadraticProgram build_r_mvo_covariance(const ReturnScenarioMatrix& r, const std::vector<Eigen::Index>& kept,
                                        double mu0, FloorMode floor = FloorMode::Inequality);

/// Solves the covariance form; qp holds that program's solution.
RMvoResult solve_r_mvo(const ReturnScenarioMatrix& r, const std::vector<Eigen::Index>& kept, double mu0,
                       FloorMode floor = FloorMode::Inequality, const QpOptions& qp_options = {});

enum class HeuristicVersion { V1, V2 };

std::string to_string(HeuristicVersion version);

struct HeuristicStep {
  int k = 0;
  Eigen::Index scenario = 0;
  double objective = 0.0;
  double wall_time = 0.0;
};

struct HeuristicTrace {
  HeuristicVersion version = HeuristicVersion::V1;
  std::vector<HeuristicStep> steps;
  FilterSolution final;
  bool feasible = false;
  /// Step at which the floor became unattainable, 0 when feasible.
  int failed_step = 0;
  std::string message;
  double wall_time = 0.0;
  std::int64_t qp_solves = 0;

  double objective() const { return steps.empty() ? kInf : steps.back().objective; }
};

struct HeuristicOptions {
  /// Per-step time limit for the exact K=1 subproblems of version 1.
  double time_limit = 7200.0;
  unsigned workers = 1;
  QpOptions qp;
};

HeuristicTrace heuristic_v1(const FilterInstance& inst, const HeuristicOptions& options = {});
HeuristicTrace heuristic_v2(const FilterInstance& inst, const HeuristicOptions& options = {});

/// Version 1 for up to 50 assets, version 2 beyond.
HeuristicVersion auto_select_version(Eigen::Index num_assets);
HeuristicTrace run_heuristic(const FilterInstance& inst, const HeuristicOptions& options = {});

}  // namespace scenfilter
