#include "scenfilter/baselines.hpp"
#include "scenfilter/filter_model.hpp"
#include "scenfilter/heuristic.hpp"
#include "scenfilter/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <queue>
#include <set>

namespace scenfilter {

using Index = Eigen::Index;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_two_kept(const FilterInstance& inst) {
  if (inst.num_scenarios() - inst.K < 2) throw InputError("at least two scenarios must remain after filtering");
}

double gap_percent(double incumbent, double bound) {
  if (!std::isfinite(incumbent)) return kInf;
  const double gap = std::max(0.0, incumbent - bound);
  return 100.0 * gap / std::max(std::abs(incumbent), 1e-12);
}

/// Fixing of each binary: -1 free, 0 kept, 1 removed.
using Fixing = std::vector<signed char>;

struct Node {
  double bound = -kInf;
  std::int64_t id = 0;
  Fixing fix;
  /// Relaxation values of z; empty when the node QP failed.
  std::vector<double> z_values;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

enum class NodeOutcome { Branch, Fathomed, Infeasible };

class BranchAndBound {
 public:
  BranchAndBound(const FilterInstance& inst, const BranchAndBoundOptions& options)
      : inst_(inst), opt_(options), start_(Clock::now()) {
    BigMBounds bigm = compute_big_m(inst_);
    bigm.m_plus *= opt_.bigm_scale;
    bigm.m_minus *= opt_.bigm_scale;
    const std::vector<CriticalCut> cuts = opt_.use_cuts ? separate_critical_cuts(inst_) : std::vector<CriticalCut>{};
    model_ = build_miqp(inst_, bigm, cuts, /*lifted=*/true);
  }

  MipSolution run() {
    const Index T = inst_.num_scenarios();
    Fixing root(static_cast<std::size_t>(T), -1);
    for (Index t : opt_.fixed_removed) root[static_cast<std::size_t>(t)] = 1;

    Node root_node;
    root_node.fix = root;
    root_node.id = next_id_++;
    const NodeOutcome root_outcome = evaluate(root_node, -kInf, /*is_root=*/true);
    sol_.root_bound = root_node.bound;
    if (root_outcome == NodeOutcome::Infeasible) {
      sol_.status = MipStatus::Infeasible;
      sol_.message = "relaxation infeasible: the return floor cannot be met";
      return finish(-kInf);
    }

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    if (root_outcome == NodeOutcome::Branch) open.push(std::move(root_node));

    bool timed_out = false;
    while (!open.empty()) {
      if (seconds_since(start_) >= opt_.time_limit) {
        timed_out = true;
        break;
      }
      if (open.top().bound >= incumbent_ - opt_.gap_tol) break;
      Node parent = open.top();
      open.pop();

      const Index var = branching_scenario(parent);
      for (signed char value : {1, 0}) {
        Node child;
        child.fix = parent.fix;
        child.fix[static_cast<std::size_t>(var)] = value;
        child.id = next_id_++;
        if (evaluate(child, parent.bound) == NodeOutcome::Branch) {
          child.bound = std::max(child.bound, parent.bound);
          if (child.bound < incumbent_ - opt_.gap_tol) open.push(std::move(child));
        }
      }
    }

    if (timed_out) {
      sol_.status = MipStatus::TimeLimit;
      const double bound = open.empty() ? incumbent_ : std::min(open.top().bound, incumbent_);
      sol_.message = "time limit reached";
      return finish(bound);
    }
    if (!sol_.has_incumbent) {
      sol_.status = MipStatus::Infeasible;
      sol_.message = "no filtering meets the return floor";
      return finish(-kInf);
    }
    sol_.status = MipStatus::Optimal;
    return finish(incumbent_);
  }

 private:
  MipSolution finish(double bound) {
    sol_.objective = incumbent_;
    // The objective is recomputed from x and z so that it matches the reported portfolio.
    if (sol_.has_incumbent) complete_mip_solution(sol_, inst_);
    sol_.dual_bound = std::min(bound, sol_.objective);
    sol_.gap_percent = sol_.status == MipStatus::Optimal ? 0.0 : gap_percent(sol_.objective, sol_.dual_bound);
    sol_.wall_time = seconds_since(start_);
    return std::move(sol_);
  }

  /// Most fractional free z, ties to the smallest index.
  Index branching_scenario(const Node& node) const {
    Index best = -1;
    double best_frac = -1.0;
    for (std::size_t t = 0; t < node.fix.size(); ++t) {
      if (node.fix[t] != -1) continue;
      const double frac = node.z_values.empty() ? 0.0 : std::min(node.z_values[t], 1.0 - node.z_values[t]);
      if (frac > best_frac) {
        best_frac = frac;
        best = static_cast<Index>(t);
      }
    }
    return best;
  }

  /// Forces the remaining binaries when the cardinality leaves no choice.
  bool propagate(Fixing& fix) const {
    int ones = 0, free = 0;
    for (signed char f : fix) {
      ones += f == 1;
      free += f == -1;
    }
    if (ones > inst_.K || ones + free < inst_.K) return false;
    if (ones == inst_.K) {
      for (signed char& f : fix)
        if (f == -1) f = 0;
    } else if (ones + free == inst_.K) {
      for (signed char& f : fix)
        if (f == -1) f = 1;
    }
    return true;
  }

  /// Solves the restricted problem with the removed set given by `fix`.
  double try_leaf(const Fixing& fix) {
    std::vector<Index> removed;
    for (std::size_t t = 0; t < fix.size(); ++t)
      if (fix[t] == 1) removed.push_back(static_cast<Index>(t));
    if (!tried_.insert(removed).second) return kInf;
    std::vector<Index> kept;
    for (std::size_t t = 0; t < fix.size(); ++t)
      if (fix[t] != 1) kept.push_back(static_cast<Index>(t));
    ++sol_.qp_solves;
    const RMvoResult leaf = solve_r_mvo(inst_.r, kept, inst_.mu0, inst_.floor, opt_.qp);
    if (!leaf.optimal()) return kInf;
    if (leaf.objective < incumbent_) {
      incumbent_ = leaf.objective;
      sol_.has_incumbent = true;
      sol_.best.x = leaf.view.x;
      sol_.best.z.assign(fix.begin(), fix.end());
      sol_.incumbent_history.push_back(incumbent_);
    }
    return leaf.objective;
  }

  /// Solves every completion of a node directly.
  void enumerate_subtree(const Fixing& fix) {
    std::vector<Index> free;
    int ones = 0;
    for (std::size_t t = 0; t < fix.size(); ++t) {
      if (fix[t] == -1) free.push_back(static_cast<Index>(t));
      ones += fix[t] == 1;
    }
    const int need = inst_.K - ones;
    std::vector<int> pick(static_cast<std::size_t>(need));
    std::iota(pick.begin(), pick.end(), 0);
    const int f = static_cast<int>(free.size());
    while (true) {
      Fixing leaf = fix;
      for (Index t : free) leaf[static_cast<std::size_t>(t)] = 0;
      for (int i : pick) leaf[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])] = 1;
      ++sol_.nodes;
      try_leaf(leaf);
      int i = need - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == f - need + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < need; ++k) pick[static_cast<std::size_t>(k)] = pick[static_cast<std::size_t>(k - 1)] + 1;
    }
  }

  NodeOutcome evaluate(Node& node, double parent_bound, bool is_root = false) {
    ++sol_.nodes;
    if (!propagate(node.fix)) return NodeOutcome::Infeasible;
    int free = 0, ones = 0;
    for (signed char f : node.fix) {
      free += f == -1;
      ones += f == 1;
    }
    if (free == 0) {
      // A completely fixed node is settled by its restricted problem.
      node.bound = try_leaf(node.fix);
      return std::isfinite(node.bound) ? NodeOutcome::Fathomed : NodeOutcome::Infeasible;
    }
    const bool small = binomial(static_cast<std::uint64_t>(free), static_cast<std::uint64_t>(inst_.K - ones)) <=
                       opt_.enumeration_limit;
    if (small && !is_root) {
      node.bound = parent_bound;
      enumerate_subtree(node.fix);
      return NodeOutcome::Fathomed;
    }

    QuadraticProgram& qp = model_.relaxation;
    for (std::size_t t = 0; t < node.fix.size(); ++t) {
      const Index col = model_.layout.z(static_cast<Index>(t));
      qp.lower(col) = node.fix[t] == 1 ? 1.0 : 0.0;
      qp.upper(col) = node.fix[t] == 0 ? 0.0 : 1.0;
    }
    ++sol_.qp_solves;
    const QpSolution relax = solve_qp(qp, opt_.qp);
    if (relax.status == QpStatus::Infeasible) return NodeOutcome::Infeasible;
    if (!relax.optimal()) {
      // Fall back to the parent's bound and keep branching.
      node.bound = parent_bound;
      node.z_values.clear();
      return NodeOutcome::Branch;
    }
    node.bound = relax.objective;
    node.z_values.resize(node.fix.size());
    bool integral = true;
    for (std::size_t t = 0; t < node.fix.size(); ++t) {
      node.z_values[t] = std::clamp(relax.v(model_.layout.z(static_cast<Index>(t))), 0.0, 1.0);
      if (node.fix[t] == -1 && std::min(node.z_values[t], 1.0 - node.z_values[t]) > opt_.integrality_tol)
        integral = false;
    }

    // Rounding: keep the fixed ones and take the largest free z values.
    std::vector<Index> candidates;
    for (std::size_t t = 0; t < node.fix.size(); ++t)
      if (node.fix[t] == -1) candidates.push_back(static_cast<Index>(t));
    std::stable_sort(candidates.begin(), candidates.end(), [&](Index a, Index b) {
      return node.z_values[static_cast<std::size_t>(a)] > node.z_values[static_cast<std::size_t>(b)];
    });
    Fixing rounded = node.fix;
    for (std::size_t k = 0; k < candidates.size(); ++k)
      rounded[static_cast<std::size_t>(candidates[k])] = static_cast<int>(k) < inst_.K - ones ? 1 : 0;
    try_leaf(rounded);

    if (integral || node.bound >= incumbent_ - opt_.gap_tol) return NodeOutcome::Fathomed;
    if (small) {
      enumerate_subtree(node.fix);
      return NodeOutcome::Fathomed;
    }
    return NodeOutcome::Branch;
  }

  const FilterInstance& inst_;
  const BranchAndBoundOptions& opt_;
  Clock::time_point start_;
  MiqpModel model_;
  MipSolution sol_;
  double incumbent_ = kInf;
  std::int64_t next_id_ = 0;
  std::set<std::vector<Index>> tried_;
};

MipSolution markowitz_collapse(const FilterInstance& inst, const QpOptions& qp_options) {
  const auto start = Clock::now();
  MipSolution sol;
  const QpSolution qp = solve_markowitz(compute_stats(inst.r), inst.mu0, inst.floor, qp_options);
  sol.qp_solves = 1;
  sol.nodes = 1;
  if (!qp.optimal()) {
    sol.status = MipStatus::Infeasible;
    sol.message = "Markowitz problem " + to_string(qp.status);
  } else {
    sol.status = MipStatus::Optimal;
    sol.has_incumbent = true;
    sol.best.x = qp.v;
    sol.best.z.assign(static_cast<std::size_t>(inst.num_scenarios()), 0);
    complete_mip_solution(sol, inst);
    sol.dual_bound = sol.root_bound = sol.objective;
    sol.incumbent_history.push_back(sol.objective);
  }
  sol.wall_time = seconds_since(start);
  return sol;
}

}  // namespace

MipSolution solve_branch_and_bound(const FilterInstance& inst, const BranchAndBoundOptions& options) {
  require_two_kept(inst);
  std::vector<Index> fixed = options.fixed_removed;
  std::sort(fixed.begin(), fixed.end());
  if (std::adjacent_find(fixed.begin(), fixed.end()) != fixed.end())
    throw InputError("fixed scenarios must be distinct");
  for (Index t : fixed)
    if (t < 0 || t >= inst.num_scenarios()) throw InputError("fixed scenario index out of range");
  if (static_cast<Index>(fixed.size()) > inst.K) throw InputError("more fixed scenarios than K");
  if (!(options.bigm_scale >= 1.0)) throw InputError("bigm_scale must be at least 1");
  if (options.time_limit < 0.0) throw InputError("time limit must be nonnegative");

  if (inst.K == 0) return markowitz_collapse(inst, options.qp);
  return BranchAndBound(inst, options).run();
}

MipSolution brute_force_oracle(const FilterInstance& inst, const OracleOptions& options) {
  require_two_kept(inst);
  const auto start = Clock::now();
  const Index T = inst.num_scenarios();
  const std::uint64_t count = binomial(static_cast<std::uint64_t>(T), static_cast<std::uint64_t>(inst.K));
  if (count > options.max_subsets) {
    throw InputError("C(T,K) = " + std::to_string(count) + " exceeds the oracle limit of " +
                     std::to_string(options.max_subsets));
  }

  // All K-subsets in lexicographic order.
  std::vector<std::vector<Index>> subsets;
  subsets.reserve(count);
  std::vector<Index> current(static_cast<std::size_t>(inst.K));
  std::iota(current.begin(), current.end(), Index{0});
  while (true) {
    subsets.push_back(current);
    int i = inst.K - 1;
    while (i >= 0 && current[static_cast<std::size_t>(i)] == T - inst.K + i) --i;
    if (i < 0) break;
    ++current[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < inst.K; ++k) current[static_cast<std::size_t>(k)] = current[static_cast<std::size_t>(k - 1)] + 1;
  }

  std::mutex best_mutex;
  double best_value = kInf;
  std::size_t best_index = subsets.size();
  Vector best_x;
  parallel_for(subsets.size(), options.workers, [&](std::size_t i) {
    std::vector<char> removed(static_cast<std::size_t>(T), 0);
    for (Index t : subsets[i]) removed[static_cast<std::size_t>(t)] = 1;
    std::vector<Index> kept;
    for (Index t = 0; t < T; ++t)
      if (!removed[static_cast<std::size_t>(t)]) kept.push_back(t);
    const RMvoResult res = solve_r_mvo(inst.r, kept, inst.mu0, inst.floor);
    if (!res.optimal()) return;
    std::lock_guard<std::mutex> lock(best_mutex);
    if (res.objective < best_value || (res.objective == best_value && i < best_index)) {
      best_value = res.objective;
      best_index = i;
      best_x = res.view.x;
    }
  });

  MipSolution sol;
  sol.nodes = static_cast<std::int64_t>(subsets.size());
  sol.qp_solves = sol.nodes;
  if (best_index == subsets.size()) {
    sol.status = MipStatus::Infeasible;
    sol.message = "no filtering meets the return floor";
  } else {
    sol.status = MipStatus::Optimal;
    sol.has_incumbent = true;
    sol.best.x = best_x;
    sol.best.z.assign(static_cast<std::size_t>(T), 0);
    for (Index t : subsets[best_index]) sol.best.z[static_cast<std::size_t>(t)] = 1;
    complete_mip_solution(sol, inst);
    sol.dual_bound = sol.root_bound = sol.objective;
    sol.incumbent_history.push_back(sol.objective);
  }
  sol.wall_time = seconds_since(start);
  return sol;
}

}  // namespace scenfilter
