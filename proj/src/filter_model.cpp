#include "scenfilter/filter_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scenfilter {

using Index = Eigen::Index;

std::string to_string(FloorMode mode) { return mode == FloorMode::Equality ? "equality" : "inequality"; }

FloorMode parse_floor_mode(const std::string& text) {
  if (text == "inequality") return FloorMode::Inequality;
  if (text == "equality") return FloorMode::Equality;
  throw InputError("unknown floor mode '" + text + "' (expected inequality or equality)");
}

std::string to_string(MipStatus status) {
  switch (status) {
    case MipStatus::Optimal: return "Optimal";
    case MipStatus::TimeLimit: return "TimeLimit";
    case MipStatus::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

FilterInstance::FilterInstance(ReturnScenarioMatrix returns, int k, double floor_return, FloorMode mode)
    : r(std::move(returns)), K(k), mu0(floor_return), floor(mode) {
  if (K < 0) throw InputError("K must be nonnegative");
  if (K >= r.num_scenarios()) {
    throw InputError("K = " + std::to_string(K) + " must be smaller than T = " + std::to_string(r.num_scenarios()));
  }
  if (!std::isfinite(mu0)) throw InputError("mu0 must be finite");
}

std::vector<Index> FilterSolution::removed() const {
  std::vector<Index> out;
  for (std::size_t t = 0; t < z.size(); ++t)
    if (z[t]) out.push_back(static_cast<Index>(t));
  return out;
}

FilteredMoments evaluate_filtered_moments(const Vector& x, const std::vector<int>& z, const FilterInstance& inst) {
  const Index T = inst.num_scenarios();
  if (x.size() != inst.num_assets()) throw InputError("weight vector length differs from asset count");
  if (static_cast<Index>(z.size()) != T) throw InputError("filtering vector length differs from T");
  int count = 0;
  for (int zt : z) {
    if (zt != 0 && zt != 1) throw InputError("filtering vector must be binary");
    count += zt;
  }
  if (count != inst.K) {
    throw InputError("filtering vector removes " + std::to_string(count) + " scenarios, expected K = " +
                     std::to_string(inst.K));
  }
  const double q = inst.kept_probability();
  const Vector y = inst.r.returns.transpose() * x;
  FilteredMoments m;
  for (Index t = 0; t < T; ++t)
    if (!z[t]) m.mean += q * y(t);
  for (Index t = 0; t < T; ++t)
    if (!z[t]) m.variance += q * (y(t) - m.mean) * (y(t) - m.mean);
  return m;
}

FilterSolution make_filter_solution(const Vector& x, std::vector<int> z, const FilterInstance& inst) {
  FilterSolution s;
  const FilteredMoments m = evaluate_filtered_moments(x, z, inst);
  s.x = x;
  s.z = std::move(z);
  s.filtered_mean = m.mean;
  s.filtered_variance = m.variance;
  return s;
}

namespace {

// A tight cut can imply an equality (for example z_t = 0) that leaves the
// relaxation without a strict interior. Loosening the row by a tiny margin
// keeps it a valid relaxation and the interior point solver well posed.
constexpr double kCutSlack = 1e-6;

// For each t', the sum of the `count` largest values of row excluding entry t'.
Vector top_sums_excluding(const Vector& values, Index count) {
  const Index T = values.size();
  std::vector<Index> order(T);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values(a) > values(b); });
  std::vector<Index> rank(T);
  for (Index k = 0; k < T; ++k) rank[order[k]] = k;
  double top = 0.0;
  for (Index k = 0; k < count; ++k) top += values(order[k]);
  Vector out(T);
  for (Index t = 0; t < T; ++t) {
    out(t) = rank[t] < count ? top - values(t) + values(order[count]) : top;
  }
  return out;
}

}  // namespace

BigMBounds compute_big_m(const FilterInstance& inst) {
  if (inst.K < 1) throw InputError("big-M constants are only defined for K >= 1");
  const Index n = inst.num_assets(), T = inst.num_scenarios();
  const Index kept = T - inst.K;
  const double q = inst.kept_probability();
  BigMBounds b;
  b.b_plus.resize(n, T);
  b.b_minus.resize(n, T);
  for (Index j = 0; j < n; ++j) {
    const Vector scaled = q * inst.r.returns.row(j).transpose();
    b.b_plus.row(j) = top_sums_excluding(-scaled, kept).transpose();
    b.b_minus.row(j) = top_sums_excluding(scaled, kept).transpose();
  }
  b.m_plus = (inst.r.returns + b.b_plus).colwise().maxCoeff().transpose().cwiseMax(0.0);
  b.m_minus = (b.b_minus - inst.r.returns).colwise().maxCoeff().transpose().cwiseMax(0.0);
  return b;
}

namespace {

struct FloorCoefficients {
  double alpha = 0.0;
  double beta = 0.0;
  Vector column_totals;  // A_t = sum_j q (r_jt + alpha)
};

FloorCoefficients floor_coefficients(const FilterInstance& inst) {
  FloorCoefficients f;
  f.alpha = 1.0 + std::max({0.0, -inst.r.returns.minCoeff(), -inst.mu0});
  f.beta = inst.mu0 + f.alpha;
  const double q = inst.kept_probability();
  f.column_totals = q * (inst.r.returns.array() + f.alpha).colwise().sum().transpose();
  return f;
}

}  // namespace

bool is_critical(const FilterInstance& inst, const std::vector<Index>& scenarios) {
  const Index kept = inst.num_scenarios() - inst.K;
  if (static_cast<Index>(scenarios.size()) < kept) return false;
  const FloorCoefficients f = floor_coefficients(inst);
  std::vector<double> totals;
  for (Index t : scenarios) totals.push_back(f.column_totals(t));
  std::sort(totals.begin(), totals.end(), std::greater<>());
  const double best = std::accumulate(totals.begin(), totals.begin() + kept, 0.0);
  return best < f.beta;
}

std::vector<CriticalCut> separate_critical_cuts(const FilterInstance& inst) {
  if (inst.K < 1) throw InputError("cut separation requires K >= 1");
  const Index T = inst.num_scenarios(), kept = T - inst.K;
  const FloorCoefficients f = floor_coefficients(inst);
  std::vector<Index> order(T);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return f.column_totals(a) < f.column_totals(b); });

  // The kept largest totals of a prefix are its last `kept` entries.
  for (Index size = T; size >= kept; --size) {
    double top = 0.0;
    for (Index k = size - kept; k < size; ++k) top += f.column_totals(order[k]);
    if (top < f.beta) {
      std::vector<Index> S(order.begin(), order.begin() + size);
      std::sort(S.begin(), S.end());
      std::vector<CriticalCut> cuts;
      for (Index j = 0; j < inst.num_assets(); ++j) {
        cuts.push_back(CriticalCut{S, j, static_cast<double>(kept - 1)});
      }
      return cuts;
    }
  }
  return {};
}

MiqpModel build_miqp(const FilterInstance& inst, const BigMBounds& bigm, const std::vector<CriticalCut>& cuts,
                     bool lifted) {
  const Index n = inst.num_assets(), T = inst.num_scenarios();
  const double q = inst.kept_probability();
  if (inst.K > 0 && (bigm.m_plus.size() != T || bigm.m_minus.size() != T)) {
    throw InputError("big-M bounds do not match the instance");
  }
  for (const CriticalCut& cut : cuts) {
    if (cut.asset < 0 || cut.asset >= n) throw InputError("cut asset index out of range");
    for (Index t : cut.scenarios)
      if (t < 0 || t >= T) throw InputError("cut scenario index out of range");
  }

  MiqpModel model;
  MiqpLayout& L = model.layout;
  L.n = n;
  L.T = T;
  L.lifted = lifted;
  L.num_cuts = static_cast<Index>(cuts.size());
  const Index m = L.num_variables();

  QuadraticProgram& qp = model.relaxation;
  qp = QuadraticProgram::with_variables(m);
  for (Index j = 0; j < n; ++j) qp.lower(L.x(j)) = 0.0;
  for (Index t = 0; t < T; ++t) {
    for (Index j = 0; j < n; ++j) qp.lower(L.xt(j, t)) = 0.0;
    qp.lower(L.z(t)) = 0.0;
    qp.upper(L.z(t)) = inst.K > 0 ? 1.0 : 0.0;
    qp.lower(L.d(t)) = 0.0;
    qp.Q(L.d(t), L.d(t)) = 2.0 * q;
    model.binaries.push_back(L.z(t));
  }

  // Coefficients of the filtered mean in terms of xtilde.
  auto add_mean = [&](Matrix& A, Index row, double sign) {
    if (lifted) {
      A(row, L.mean()) += sign;
    } else {
      for (Index t = 0; t < T; ++t)
        for (Index j = 0; j < n; ++j) A(row, L.xt(j, t)) += sign * q * inst.r.returns(j, t);
    }
  };

  const bool floor_eq = inst.floor == FloorMode::Equality;
  const Index num_in = 2 * T + n * T + (!lifted && !floor_eq ? 1 : 0) + (lifted ? 0 : L.num_cuts);
  const Index num_eq = T + 2 + (!lifted && floor_eq ? 1 : 0) + (lifted ? 1 + L.num_cuts : 0);
  qp.Ain = Matrix::Zero(num_in, m);
  qp.bin = Vector::Zero(num_in);
  qp.Aeq = Matrix::Zero(num_eq, m);
  qp.beq = Vector::Zero(num_eq);

  Index row = 0;
  for (Index tp = 0; tp < T; ++tp) {
    const double mp = inst.K > 0 ? bigm.m_plus(tp) : 0.0;
    const double mm = inst.K > 0 ? bigm.m_minus(tp) : 0.0;
    // d_t' >= y_t'(x) - mean - M+ z_t'
    qp.Ain(row, L.d(tp)) = 1.0;
    for (Index j = 0; j < n; ++j) qp.Ain(row, L.x(j)) = -inst.r.returns(j, tp);
    add_mean(qp.Ain, row, 1.0);
    qp.Ain(row, L.z(tp)) = mp;
    ++row;
    // d_t' >= -(y_t'(x) - mean) - M- z_t'
    qp.Ain(row, L.d(tp)) = 1.0;
    for (Index j = 0; j < n; ++j) qp.Ain(row, L.x(j)) = inst.r.returns(j, tp);
    add_mean(qp.Ain, row, -1.0);
    qp.Ain(row, L.z(tp)) = mm;
    ++row;
  }
  for (Index t = 0; t < T; ++t) {
    for (Index j = 0; j < n; ++j) {
      qp.Ain(row, L.x(j)) = 1.0;
      qp.Ain(row, L.xt(j, t)) = -1.0;
      ++row;
    }
  }
  if (!lifted && !floor_eq) {
    add_mean(qp.Ain, row, 1.0);
    qp.bin(row) = inst.mu0;
    ++row;
  }
  if (!lifted) {
    for (const CriticalCut& cut : cuts) {
      for (Index t : cut.scenarios) qp.Ain(row, L.xt(cut.asset, t)) = -1.0;
      qp.bin(row) = -(cut.rhs + kCutSlack);
      ++row;
    }
  }

  Index er = 0;
  for (Index t = 0; t < T; ++t) {
    for (Index j = 0; j < n; ++j) qp.Aeq(er, L.xt(j, t)) = 1.0;
    qp.Aeq(er, L.z(t)) = 1.0;
    qp.beq(er) = 1.0;
    ++er;
  }
  for (Index j = 0; j < n; ++j) qp.Aeq(er, L.x(j)) = 1.0;
  qp.beq(er++) = 1.0;
  for (Index t = 0; t < T; ++t) qp.Aeq(er, L.z(t)) = 1.0;
  qp.beq(er++) = inst.K;
  if (!lifted && floor_eq) {
    add_mean(qp.Aeq, er, 1.0);
    qp.beq(er++) = inst.mu0;
  }
  if (lifted) {
    // mean - sum_t sum_j q r_jt xtilde_jt = 0
    qp.Aeq(er, L.mean()) = 1.0;
    for (Index t = 0; t < T; ++t)
      for (Index j = 0; j < n; ++j) qp.Aeq(er, L.xt(j, t)) = -q * inst.r.returns(j, t);
    ++er;
    qp.lower(L.mean()) = inst.mu0;
    if (floor_eq) qp.upper(L.mean()) = inst.mu0;
    for (Index k = 0; k < L.num_cuts; ++k) {
      const CriticalCut& cut = cuts[static_cast<std::size_t>(k)];
      qp.Aeq(er, L.cut_value(k)) = 1.0;
      for (Index t : cut.scenarios) qp.Aeq(er, L.xt(cut.asset, t)) = -1.0;
      qp.upper(L.cut_value(k)) = cut.rhs + kCutSlack;
      ++er;
    }
  }
  return model;
}

void complete_mip_solution(MipSolution& sol, const FilterInstance& inst) {
  const Index n = inst.num_assets(), T = inst.num_scenarios();
  const double q = inst.kept_probability();
  sol.best = make_filter_solution(sol.best.x, sol.best.z, inst);
  const Vector y = inst.r.returns.transpose() * sol.best.x;
  sol.d = Vector::Zero(T);
  sol.x_tilde = Matrix::Zero(n, T);
  double obj = 0.0;
  for (Index t = 0; t < T; ++t) {
    if (sol.best.z[static_cast<std::size_t>(t)]) continue;
    sol.x_tilde.col(t) = sol.best.x;
    sol.d(t) = std::abs(y(t) - sol.best.filtered_mean);
    obj += q * sol.d(t) * sol.d(t);
  }
  sol.objective = obj;
}

std::uint64_t binomial(std::uint64_t T, std::uint64_t K) {
  if (K > T) return 0;
  K = std::min(K, T - K);
  unsigned __int128 c = 1;
  for (std::uint64_t i = 1; i <= K; ++i) {
    c = c * (T - K + i) / i;
    if (c > UINT64_MAX) return UINT64_MAX;
  }
  return static_cast<std::uint64_t>(c);
}

}  // namespace scenfilter
