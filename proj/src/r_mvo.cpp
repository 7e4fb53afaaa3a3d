#include "scenfilter/heuristic.hpp"

#include <algorithm>

namespace scenfilter {

using Index = Eigen::Index;

namespace {

void build_r_mvo_checks(const ReturnScenarioMatrix& r, const std::vector<Index>& kept) {
  const Index T = r.num_scenarios();
  if (kept.size() < 2u) throw InputError("at least two kept scenarios are required");
  std::vector<char> seen(static_cast<std::size_t>(T), 0);
  for (Index t : kept) {
    if (t < 0 || t >= T) throw InputError("kept scenario index out of range");
    if (seen[static_cast<std::size_t>(t)]++) throw InputError("kept scenarios must be distinct");
  }
}

}  // namespace

QuadraticProgram build_r_mvo(const ReturnScenarioMatrix& r, const std::vector<Index>& kept, double mu0,
                             FloorMode floor) {
  build_r_mvo_checks(r, kept);
  const Index n = r.num_assets();
  const Index R = static_cast<Index>(kept.size());

  const double p = 1.0 / static_cast<double>(R);
  Vector mean = Vector::Zero(n);
  for (Index t : kept) mean += p * r.returns.col(t);

  QuadraticProgram qp = QuadraticProgram::with_variables(n + R);
  qp.lower.setZero();
  for (Index k = 0; k < R; ++k) qp.Q(n + k, n + k) = 2.0 * p;

  const bool floor_eq = floor == FloorMode::Equality;
  qp.Ain = Matrix::Zero(2 * R + (floor_eq ? 0 : 1), n + R);
  qp.bin = Vector::Zero(qp.Ain.rows());
  for (Index k = 0; k < R; ++k) {
    const Vector centered = r.returns.col(kept[static_cast<std::size_t>(k)]) - mean;
    qp.Ain(2 * k, n + k) = 1.0;
    qp.Ain.row(2 * k).head(n) = -centered.transpose();
    qp.Ain(2 * k + 1, n + k) = 1.0;
    qp.Ain.row(2 * k + 1).head(n) = centered.transpose();
  }
  qp.Aeq = Matrix::Zero(floor_eq ? 2 : 1, n + R);
  qp.beq = Vector::Ones(qp.Aeq.rows());
  qp.Aeq.row(0).head(n).setOnes();
  if (floor_eq) {
    qp.Aeq.row(1).head(n) = mean.transpose();
    qp.beq(1) = mu0;
  } else {
    qp.Ain.row(2 * R).head(n) = mean.transpose();
    qp.bin(2 * R) = mu0;
  }
  return qp;
}

QuadraticProgram build_r_mvo_covariance(const ReturnScenarioMatrix& r, const std::vector<Index>& kept, double mu0,
                                        FloorMode floor) {
  build_r_mvo_checks(r, kept);
  const Index n = r.num_assets(), R = static_cast<Index>(kept.size());
  Matrix sub(n, R);
  for (Index k = 0; k < R; ++k) sub.col(k) = r.returns.col(kept[static_cast<std::size_t>(k)]);
  const Vector mean = sub.rowwise().mean();
  sub.colwise() -= mean;
  Matrix cov = (sub * sub.transpose()) / static_cast<double>(R);
  cov = 0.5 * (cov + cov.transpose());

  QuadraticProgram qp = QuadraticProgram::with_variables(n);
  qp.Q = 2.0 * cov;
  qp.lower.setZero();
  if (floor == FloorMode::Equality) {
    qp.Aeq = Matrix::Ones(2, n);
    qp.Aeq.row(1) = mean.transpose();
    qp.beq = Vector(2);
    qp.beq << 1.0, mu0;
  } else {
    qp.Aeq = Matrix::Ones(1, n);
    qp.beq = Vector::Ones(1);
    qp.Ain = mean.transpose();
    qp.bin = Vector::Constant(1, mu0);
  }
  return qp;
}

RMvoResult solve_r_mvo(const ReturnScenarioMatrix& r, const std::vector<Index>& kept, double mu0, FloorMode floor,
                       const QpOptions& qp_options) {
  RMvoResult out;
  // At the optimum every deviation variable equals |y_t - mean|, so the deviation
  // form and the n-variable covariance form share their optimal x and value.
  const QuadraticProgram qp = build_r_mvo_covariance(r, kept, mu0, floor);
  out.qp = solve_qp(qp, qp_options);
  if (!out.qp.optimal()) return out;

  const Index n = r.num_assets(), T = r.num_scenarios();
  std::vector<int> z(static_cast<std::size_t>(T), 1);
  for (Index t : kept) z[static_cast<std::size_t>(t)] = 0;
  const FilterInstance view_instance(r, static_cast<int>(T - static_cast<Index>(kept.size())), mu0, floor);
  out.view = make_filter_solution(out.qp.v.head(n), std::move(z), view_instance);
  out.objective = out.qp.objective;
  return out;
}

}  // namespace scenfilter
