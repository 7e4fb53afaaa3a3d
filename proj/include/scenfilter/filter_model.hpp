#pragma once

#include "scenfilter/market_data.hpp"
#include "scenfilter/qp.hpp"

#include <cstdint>
#include <vector>

namespace scenfilter {

enum class FloorMode { Inequality, Equality };

std::string to_string(FloorMode mode);
FloorMode parse_floor_mode(const std::string& text);

/// Remove exactly K of the T scenarios while choosing a long-only portfolio
/// whose filtered mean is at least (or exactly) mu0.
struct FilterInstance {
  ReturnScenarioMatrix r;
  int K = 0;
  double mu0 = 0.0;
  FloorMode floor = FloorMode::Inequality;

  FilterInstance(ReturnScenarioMatrix returns, int k, double floor_return, FloorMode mode = FloorMode::Inequality);

  Eigen::Index num_assets() const { return r.num_assets(); }
  Eigen::Index num_scenarios() const { return r.num_scenarios(); }
  /// Probability of each kept scenario, 1/(T-K).
  double kept_probability() const { return 1.0 / static_cast<double>(r.num_scenarios() - K); }
};

struct FilteredMoments {
  double mean = 0.0;
  double variance = 0.0;
};

struct FilterSolution {
  Vector x;
  std::vector<int> z;  // 1 = scenario filtered out
  double filtered_mean = 0.0;
  double filtered_variance = 0.0;

  std::vector<Eigen::Index> removed() const;
};

/// Filtered mean and variance of portfolio x over the scenarios with z_t = 0.
FilteredMoments evaluate_filtered_moments(const Vector& x, const std::vector<int>& z, const FilterInstance& inst);

FilterSolution make_filter_solution(const Vector& x, std::vector<int> z, const FilterInstance& inst);

/// Big-M constants of the deviation rows, equal to the exact maximum of
/// +-(y_t(x) - mean) over the simplex and over all filterings removing t.
struct BigMBounds {
  Vector m_plus;
  Vector m_minus;
  /// b_plus(j, t): the sum of the T-K largest values of {-q r_js : s != t}.
  Matrix b_plus;
  /// b_minus(j, t): the sum of the T-K largest values of {q r_js : s != t}.
  Matrix b_minus;
};

BigMBounds compute_big_m(const FilterInstance& inst);

/// Cover-style cut: sum over t in scenarios of xtilde(asset, t) <= rhs.
struct CriticalCut {
  std::vector<Eigen::Index> scenarios;
  Eigen::Index asset = 0;
  double rhs = 0.0;
};

/// True when no (T-K)-subset of `scenarios` can meet the return floor.
bool is_critical(const FilterInstance& inst, const std::vector<Eigen::Index>& scenarios);

std::vector<CriticalCut> separate_critical_cuts(const FilterInstance& inst);

/// Column positions of the model variables.
struct MiqpLayout {
  Eigen::Index n = 0;
  Eigen::Index T = 0;
  bool lifted = false;
  Eigen::Index num_cuts = 0;

  Eigen::Index x(Eigen::Index j) const { return j; }
  Eigen::Index xt(Eigen::Index j, Eigen::Index t) const { return n + t * n + j; }
  Eigen::Index z(Eigen::Index t) const { return n + n * T + t; }
  Eigen::Index d(Eigen::Index t) const { return n + n * T + T + t; }
  /// Lifted form only: the filtered mean as an explicit variable.
  Eigen::Index mean() const { return n + n * T + 2 * T; }
  /// Lifted form only: left-hand side of cut k as an explicit variable.
  Eigen::Index cut_value(Eigen::Index k) const { return n + n * T + 2 * T + 1 + k; }
  Eigen::Index num_variables() const { return n + n * T + 2 * T + (lifted ? 1 + num_cuts : 0); }
};

/// Mixed-integer model: the continuous relaxation plus the binary columns.
struct MiqpModel {
  MiqpLayout layout;
  QuadraticProgram relaxation;
  std::vector<Eigen::Index> binaries;

  Eigen::Index num_variables() const { return relaxation.num_variables(); }
  Eigen::Index num_constraints() const { return relaxation.Aeq.rows() + relaxation.Ain.rows(); }
};

/// Builds the scenario filtering MIQP. The exact form states the filtered mean
/// inline in every row that uses it. The lifted form adds the mean (and each
/// cut's left-hand side) as a variable tied by an equality, which keeps rows
/// sparse for the node solver while describing the same feasible set.
MiqpModel build_miqp(const FilterInstance& inst, const BigMBounds& bigm, const std::vector<CriticalCut>& cuts,
                     bool lifted = false);

enum class MipStatus { Optimal, TimeLimit, Infeasible };

std::string to_string(MipStatus status);

struct MipSolution {
  MipStatus status = MipStatus::Infeasible;
  bool has_incumbent = false;
  FilterSolution best;
  Vector d;
  Matrix x_tilde;  // n x T
  double objective = kInf;
  double dual_bound = -kInf;
  double gap_percent = 0.0;
  double root_bound = -kInf;
  std::int64_t nodes = 0;
  std::int64_t qp_solves = 0;
  double wall_time = 0.0;
  std::vector<double> incumbent_history;
  std::string message;
};

struct BranchAndBoundOptions {
  double time_limit = 7200.0;
  bool use_cuts = false;
  /// Nodes whose bound is within this of the incumbent are fathomed.
  double gap_tol = 1e-9;
  double integrality_tol = 1e-6;
  /// Multiplies every big-M constant; values above 1 loosen the model.
  double bigm_scale = 1.0;
  /// Below the root, a node with at most this many completions is finished by
  /// solving each completion directly instead of relaxing and branching further.
  std::uint64_t enumeration_limit = 2000;
  /// Scenarios whose z is fixed to 1 before the search.
  std::vector<Eigen::Index> fixed_removed;
  QpOptions qp;
};

MipSolution solve_branch_and_bound(const FilterInstance& inst, const BranchAndBoundOptions& options = {});

struct OracleOptions {
  std::uint64_t max_subsets = 1'000'000;
  unsigned workers = 1;
};

/// Exhaustive search over every K-subset of removed scenarios.
MipSolution brute_force_oracle(const FilterInstance& inst, const OracleOptions& options = {});

/// Fills d, x_tilde and objective of a solution from its portfolio and filtering.
void complete_mip_solution(MipSolution& sol, const FilterInstance& inst);

/// Number of K-subsets of T, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t T, std::uint64_t K);

}  // namespace scenfilter
