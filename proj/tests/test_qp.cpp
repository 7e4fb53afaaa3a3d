#include "scenfilter/qp.hpp"

#include <gtest/gtest.h>

#include <random>

namespace scenfilter {
namespace {

QuadraticProgram scalar_qp(double q, double c, double lo, double hi) {
  QuadraticProgram qp = QuadraticProgram::with_variables(1);
  qp.Q(0, 0) = q;
  qp.c(0) = c;
  qp.lower(0) = lo;
  qp.upper(0) = hi;
  return qp;
}

QuadraticProgram two_asset_markowitz() {
  QuadraticProgram qp = QuadraticProgram::with_variables(2);
  qp.Q = 2.0 * Vector(Eigen::Vector2d(0.04, 0.01)).asDiagonal();
  qp.Aeq = Matrix::Ones(1, 2);
  qp.beq = Vector::Ones(1);
  qp.lower.setZero();
  return qp;
}

TEST(SolveQp, ActiveLowerBound) {
  const QuadraticProgram qp = scalar_qp(1.0, 0.0, 1.0, kInf);
  const QpSolution sol = solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  EXPECT_NEAR(sol.v(0), 1.0, 1e-9);
  EXPECT_NEAR(sol.objective, 0.5, 1e-9);
  EXPECT_LE(check_kkt(qp, sol).max(), 1e-7);
}

TEST(SolveQp, ClippedUnconstrainedOptimum) {
  // (v - 2)^2 = v^2 - 4v + 4
  const QuadraticProgram qp = scalar_qp(2.0, -4.0, 0.0, 1.0);
  const QpSolution sol = solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  EXPECT_NEAR(sol.v(0), 1.0, 1e-9);
  EXPECT_LE(check_kkt(qp, sol).max(), 1e-7);
}

TEST(SolveQp, TwoAssetMinimumVariance) {
  const QuadraticProgram qp = two_asset_markowitz();
  const QpSolution sol = solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  // sigma2^2 / (sigma1^2 + sigma2^2) = 0.01 / 0.05
  EXPECT_NEAR(sol.v(0), 0.2, 1e-9);
  EXPECT_NEAR(sol.v(1), 0.8, 1e-9);
  EXPECT_NEAR(sol.objective, 0.008, 1e-12);
  EXPECT_LE(check_kkt(qp, sol).max(), 1e-7);
}

TEST(SolveQp, FixedVariablesAreSubstituted) {
  QuadraticProgram qp = two_asset_markowitz();
  qp.lower(0) = qp.upper(0) = 0.3;
  const QpSolution sol = solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  EXPECT_DOUBLE_EQ(sol.v(0), 0.3);
  EXPECT_NEAR(sol.v(1), 0.7, 1e-9);
  EXPECT_LE(check_kkt(qp, sol).max(), 1e-7);
}

TEST(SolveQp, InfeasibleInequalityIsClassified) {
  QuadraticProgram qp = scalar_qp(1.0, 0.0, 1.0, kInf);
  qp.Ain = Matrix::Constant(1, 1, -1.0);  // -v >= 0
  qp.bin = Vector::Zero(1);
  const QpSolution sol = solve_qp(qp);
  EXPECT_EQ(sol.status, QpStatus::Infeasible);
  EXPECT_EQ(sol.infeasible_class, ConstraintClass::Inequality);
  EXPECT_NEAR(sol.phase_one_violation, 1.0, 1e-6);
}

TEST(SolveQp, InfeasibleEqualityIsClassified) {
  QuadraticProgram qp = two_asset_markowitz();
  qp.upper.setOnes();
  qp.beq(0) = 3.0;
  const QpSolution sol = solve_qp(qp);
  EXPECT_EQ(sol.status, QpStatus::Infeasible);
  EXPECT_EQ(sol.infeasible_class, ConstraintClass::Equality);
}

TEST(SolveQp, EmptyRowViolatedByFixedVariables) {
  QuadraticProgram qp = two_asset_markowitz();
  qp.lower.setConstant(0.4);
  qp.upper.setConstant(0.4);
  const QpSolution sol = solve_qp(qp);
  EXPECT_EQ(sol.status, QpStatus::Infeasible);
  EXPECT_EQ(sol.infeasible_class, ConstraintClass::Equality);
}

TEST(SolveQp, RejectsIndefiniteQ) {
  QuadraticProgram qp = QuadraticProgram::with_variables(2);
  qp.Q << 1.0, 1.2, 1.2, 1.0;
  qp.lower.setZero();
  qp.upper.setOnes();
  const QpSolution sol = solve_qp(qp);
  EXPECT_EQ(sol.status, QpStatus::NumericalFailure);
  EXPECT_NEAR(sol.min_eigenvalue, -0.2, 1e-12);
}

TEST(SolveQp, ClipsTinyNegativeEigenvalues) {
  QuadraticProgram qp = two_asset_markowitz();
  qp.Q << 1.0, 1.0, 1.0, 1.0 - 2e-9;  // smallest eigenvalue about -1e-9
  const QpSolution sol = solve_qp(qp);
  EXPECT_EQ(sol.status, QpStatus::Optimal);
}

TEST(SolveQp, RejectsInconsistentDimensions) {
  QuadraticProgram qp = two_asset_markowitz();
  qp.beq = Vector::Ones(2);
  EXPECT_THROW(solve_qp(qp), InputError);
  qp = two_asset_markowitz();
  qp.Q(0, 1) = 1e-3;
  EXPECT_THROW(solve_qp(qp), InputError);
}

TEST(CheckKkt, PerturbedSolutionHasStationarityResidual) {
  const QuadraticProgram qp = scalar_qp(1.0, 0.0, 1.0, kInf);
  QpSolution sol = solve_qp(qp);
  ASSERT_TRUE(sol.optimal());
  sol.v(0) += 0.01;
  EXPECT_GT(check_kkt(qp, sol).stationarity, 1e-4);
}

TEST(CheckKkt, PrimalResidualEqualsBoundViolation) {
  const QuadraticProgram qp = scalar_qp(1.0, 0.0, 1.0, kInf);
  QpSolution sol;
  sol.v = Vector::Constant(1, 0.75);
  sol.y_eq = Vector::Zero(0);
  sol.y_in = Vector::Zero(0);
  sol.z_lower = Vector::Zero(1);
  sol.z_upper = Vector::Zero(1);
  EXPECT_DOUBLE_EQ(check_kkt(qp, sol).primal, 0.25);
}

// Independent oracle: enumerate every active set of the inequality and bound
// constraints, solve the equality-constrained KKT system, keep the feasible
// candidate with the lowest objective.
double active_set_oracle(const QuadraticProgram& qp) {
  const Eigen::Index m = qp.num_variables();
  std::vector<std::pair<Vector, double>> rows;  // a'v >= b
  for (Eigen::Index r = 0; r < qp.Ain.rows(); ++r) rows.emplace_back(qp.Ain.row(r).transpose(), qp.bin(r));
  for (Eigen::Index j = 0; j < m; ++j) {
    if (std::isfinite(qp.lower(j))) rows.emplace_back(Vector::Unit(m, j), qp.lower(j));
    if (std::isfinite(qp.upper(j))) rows.emplace_back(-Vector::Unit(m, j), -qp.upper(j));
  }
  const std::size_t k = rows.size();
  double best = kInf;
  for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < k; ++i)
      if (mask & (std::size_t{1} << i)) act.push_back(i);
    const Eigen::Index ne = qp.Aeq.rows() + static_cast<Eigen::Index>(act.size());
    if (ne > m) continue;
    Matrix A(ne, m);
    Vector b(ne);
    A.topRows(qp.Aeq.rows()) = qp.Aeq;
    b.head(qp.Aeq.rows()) = qp.beq;
    for (std::size_t i = 0; i < act.size(); ++i) {
      A.row(qp.Aeq.rows() + static_cast<Eigen::Index>(i)) = rows[act[i]].first.transpose();
      b(qp.Aeq.rows() + static_cast<Eigen::Index>(i)) = rows[act[i]].second;
    }
    Matrix K = Matrix::Zero(m + ne, m + ne);
    K.topLeftCorner(m, m) = qp.Q;
    K.topRightCorner(m, ne) = A.transpose();
    K.bottomLeftCorner(ne, m) = A;
    Vector rhs(m + ne);
    rhs << -qp.c, b;
    Eigen::FullPivLU<Matrix> lu(K);
    if (lu.rank() < m + ne) continue;
    const Vector v = lu.solve(rhs).head(m);
    bool feasible = (qp.Aeq * v - qp.beq).cwiseAbs().maxCoeff() < 1e-9 || qp.Aeq.rows() == 0;
    for (const auto& [a, bb] : rows) feasible = feasible && a.dot(v) >= bb - 1e-9;
    if (feasible) best = std::min(best, qp.objective(v));
  }
  return best;
}

QuadraticProgram random_qp(std::mt19937_64& rng, Eigen::Index m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  QuadraticProgram qp = QuadraticProgram::with_variables(m);
  Matrix B(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) B(i, j) = u(rng);
  qp.Q = B * B.transpose() + 0.1 * Matrix::Identity(m, m);
  for (Eigen::Index j = 0; j < m; ++j) qp.c(j) = 2.0 * u(rng);
  // A feasible point by construction.
  Vector v0(m);
  for (Eigen::Index j = 0; j < m; ++j) v0(j) = 0.5 * u(rng);
  qp.Aeq = Matrix(1, m);
  for (Eigen::Index j = 0; j < m; ++j) qp.Aeq(0, j) = u(rng);
  qp.beq = qp.Aeq * v0;
  qp.Ain = Matrix(3, m);
  for (Eigen::Index r = 0; r < 3; ++r)
    for (Eigen::Index j = 0; j < m; ++j) qp.Ain(r, j) = u(rng);
  qp.bin = qp.Ain * v0 - Vector::Constant(3, 0.05);
  qp.lower.setConstant(-1.0);
  qp.upper.setConstant(1.0);
  return qp;
}

TEST(SolveQpProperty, RandomStrictlyConvexMatchesActiveSetOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const QuadraticProgram qp = random_qp(rng, 3);
    const QpSolution sol = solve_qp(qp);
    ASSERT_EQ(sol.status, QpStatus::Optimal) << "trial " << trial;
    const KktReport kkt = check_kkt(qp, sol);
    EXPECT_LE(kkt.max(), 1e-7) << "trial " << trial;
    EXPECT_NEAR(sol.objective, active_set_oracle(qp), 1e-8) << "trial " << trial;
    EXPECT_NEAR(sol.objective, qp.objective(sol.v), 1e-9 * std::max(1.0, std::abs(sol.objective)));
    EXPECT_LE(dual_objective(qp, sol), sol.objective + 1e-7);
  }
}

TEST(SolveQpProperty, DeterministicAndWarmStartIndependent) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const QuadraticProgram qp = random_qp(rng, 4);
    const QpSolution a = solve_qp(qp);
    const QpSolution b = solve_qp(qp);
    ASSERT_TRUE(a.optimal());
    EXPECT_EQ(a.iterations, b.iterations);
    EXPECT_TRUE((a.v.array() == b.v.array()).all());

    QpOptions warm;
    warm.warm_start = Vector::Constant(4, 0.9);
    const QpSolution c = solve_qp(qp, warm);
    warm.warm_start = Vector::Constant(4, -0.9);
    const QpSolution d = solve_qp(qp, warm);
    ASSERT_TRUE(c.optimal() && d.optimal());
    EXPECT_LE((c.v - d.v).lpNorm<Eigen::Infinity>(), 1e-6);
    EXPECT_LE((a.v - c.v).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

}  // namespace
}  // namespace scenfilter
