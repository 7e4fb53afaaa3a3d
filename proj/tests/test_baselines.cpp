#include "scenfilter/baselines.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

namespace scenfilter {
namespace {

using Index = Eigen::Index;

AssetStats diagonal_stats() {
  AssetStats s;
  s.mu = Eigen::Vector2d(0.1, 0.2);
  s.cov = Eigen::Vector2d(0.04, 0.01).asDiagonal();
  s.vol = Eigen::Vector2d(0.2, 0.1);
  s.corr = Matrix::Identity(2, 2);
  return s;
}

AssetStats correlated_stats(double c) {
  AssetStats s = diagonal_stats();
  s.corr << 1.0, c, c, 1.0;
  s.cov = s.vol.asDiagonal() * s.corr * s.vol.asDiagonal();
  return s;
}

// ---------------------------------------------------------------- Markowitz

TEST(Markowitz, FloorSlack) {
  const QpSolution sol = solve_markowitz(diagonal_stats(), 0.15);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.v(0), 0.2, 1e-9);
  EXPECT_NEAR(sol.v(1), 0.8, 1e-9);
  EXPECT_NEAR(sol.objective, 0.008, 1e-12);
}

TEST(Markowitz, FloorBinds) {
  const QpSolution sol = solve_markowitz(diagonal_stats(), 0.19);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.v(0), 0.1, 1e-9);
  EXPECT_NEAR(sol.v(1), 0.9, 1e-9);
  EXPECT_NEAR(sol.objective, 0.0085, 1e-12);
}

TEST(Markowitz, EqualityFloor) {
  const QpSolution sol = solve_markowitz(diagonal_stats(), 0.15, FloorMode::Equality);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.v(0), 0.5, 1e-9);
  EXPECT_NEAR(sol.v.dot(diagonal_stats().mu), 0.15, 1e-10);
}

TEST(Markowitz, SingleAsset) {
  AssetStats s;
  s.mu = Vector::Constant(1, 0.01);
  s.cov = Matrix::Constant(1, 1, 0.0004);
  s.vol = Vector::Constant(1, 0.02);
  s.corr = Matrix::Ones(1, 1);
  const QpSolution sol = solve_markowitz(s, 0.0);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.v(0), 1.0, 1e-12);
}

TEST(Markowitz, InfeasibleFloor) {
  EXPECT_EQ(solve_markowitz(diagonal_stats(), 0.3).status, QpStatus::Infeasible);
}

// ---------------------------------------------------------------- eigen

TEST(SortedEigen, DescendingWithSignConvention) {
  Matrix c(2, 2);
  c << 1.0, 0.5, 0.5, 1.0;
  const SortedEigen e = sorted_eigen(c);
  EXPECT_NEAR(e.values(0), 1.5, 1e-15);
  EXPECT_NEAR(e.values(1), 0.5, 1e-15);
  EXPECT_NEAR(e.vectors(0, 0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(e.vectors(1, 0), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(SortedEigenProperty, ReconstructsInput) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const AssetStats stats = compute_stats(testing::random_returns(6, 40, seed));
    const SortedEigen e = sorted_eigen(stats.corr);
    const Matrix back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    EXPECT_LE((back - stats.corr).norm() / stats.corr.norm(), 1e-9);
    for (Index k = 1; k < 6; ++k) EXPECT_GE(e.values(k - 1), e.values(k));
    for (Index k = 0; k < 6; ++k) {
      Index arg = 0;
      e.vectors.col(k).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(e.vectors(arg, k), 0.0);
    }
  }
}

// ---------------------------------------------------------------- RMT

TEST(Rmt, TwoByTwoSingleEigenvalue) {
  const FilteredCorrelation fc = rmt_filter(correlated_stats(0.5), 1);
  Matrix expected(2, 2);
  expected << 1.0, 0.75, 0.75, 1.0;
  EXPECT_LE((fc.matrix - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(fc.method, CorrelationFilter::Rmt);
  EXPECT_EQ(fc.parameter, 1.0);
}

TEST(Rmt, KeepingEverythingIsIdentity) {
  const AssetStats stats = compute_stats(testing::random_returns(5, 30, 2));
  const FilteredCorrelation fc = rmt_filter(stats, 5);
  EXPECT_LE((fc.matrix - stats.corr).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rmt, IdentityStaysIdentity) {
  AssetStats stats = diagonal_stats();
  for (int p : {1, 2}) EXPECT_LE((rmt_filter(stats, p).matrix - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rmt, RejectsBadP) {
  EXPECT_THROW(rmt_filter(diagonal_stats(), 0), InputError);
  EXPECT_THROW(rmt_filter(diagonal_stats(), 3), InputError);
}

TEST(RmtProperty, RankAndSymmetry) {
  for (int p = 1; p <= 4; ++p) {
    const AssetStats stats = compute_stats(testing::random_returns(6, 40, 10 + static_cast<unsigned>(p)));
    const FilteredCorrelation fc = rmt_filter(stats, p);
    EXPECT_LE((fc.matrix - fc.matrix.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(fc.matrix.diagonal(), Vector::Ones(6));
    // Undo the diagonal overwrite and count significant eigenvalues.
    const SortedEigen e = sorted_eigen(stats.corr);
    const Matrix V = e.vectors.leftCols(p);
    Matrix raw = fc.matrix;
    raw.diagonal() = (V * e.values.head(p).asDiagonal() * V.transpose()).diagonal();
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(raw).eigenvalues();
    EXPECT_LE((ev.array().abs() > 1e-8).count(), p);
  }
}

// ---------------------------------------------------------------- power mapping

TEST(PowerMap, Examples) {
  const FilteredCorrelation sq = power_map(correlated_stats(-0.5), 2.0);
  EXPECT_NEAR(sq.matrix(0, 1), -0.25, 1e-15);
  const FilteredCorrelation paper_q = power_map(correlated_stats(0.5), 1.25);
  EXPECT_NEAR(paper_q.matrix(0, 1), std::exp(1.25 * std::log(0.5)), 1e-15);
  EXPECT_NEAR(paper_q.matrix(0, 1), 0.42044820762685725, 1e-15);
  EXPECT_EQ(paper_q.matrix(0, 0), 1.0);
}

TEST(PowerMap, UnitExponentIsIdentity) {
  const AssetStats stats = compute_stats(testing::random_returns(5, 30, 4));
  EXPECT_LE((power_map(stats, 1.0).matrix - stats.corr).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PowerMap, RejectsNonPositiveExponent) {
  EXPECT_THROW(power_map(diagonal_stats(), 0.0), InputError);
  EXPECT_THROW(power_map(diagonal_stats(), -1.0), InputError);
}

TEST(PowerMapProperty, PreservesSignsAndOrder) {
  const AssetStats stats = compute_stats(testing::random_returns(6, 30, 8));
  const Matrix& c = stats.corr;
  const Matrix m = power_map(stats, 1.25).matrix;
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) {
      EXPECT_EQ(std::signbit(m(i, j)), std::signbit(c(i, j)));
      for (Index k = 0; k < 6; ++k)
        for (Index l = 0; l < 6; ++l)
          if (std::abs(c(i, j)) < std::abs(c(k, l))) EXPECT_LE(std::abs(m(i, j)), std::abs(m(k, l)));
    }
}

// ---------------------------------------------------------------- repair

TEST(PsdRepair, PassThrough) {
  FilteredCorrelation fc{correlated_stats(0.3).corr, CorrelationFilter::None, 0.0, 0.0};
  const FilteredCorrelation out = psd_repair(fc);
  EXPECT_EQ(out.repair_shift, 0.0);
  EXPECT_EQ(out.matrix, fc.matrix);
}

TEST(PsdRepair, ShiftsIndefiniteMatrix) {
  Matrix c(2, 2);
  c << 1.0, 1.2, 1.2, 1.0;
  const FilteredCorrelation out = psd_repair({c, CorrelationFilter::PowerMapping, 1.25, 0.0});
  EXPECT_NEAR(out.repair_shift, 0.2 + 1e-10, 1e-14);
  const double smallest = Eigen::SelfAdjointEigenSolver<Matrix>(out.matrix).eigenvalues()(0);
  EXPECT_GE(smallest, -1e-10);
  AssetStats stats = correlated_stats(0.0);
  stats.mu = Eigen::Vector2d(0.1, 0.1);
  const QpSolution sol = solve_filtered_markowitz(stats, out, 0.0);
  EXPECT_TRUE(sol.optimal()) << sol.message;
}

// ---------------------------------------------------------------- filtered Markowitz

TEST(FilteredMarkowitz, IdentityFiltersReproduceMarkowitz) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const AssetStats stats = compute_stats(testing::random_returns(5, 52, seed));
    const double mu0 = stats.mu.mean();
    const QpSolution plain = solve_markowitz(stats, mu0);
    ASSERT_TRUE(plain.optimal());
    const FilteredCorrelation none{stats.corr, CorrelationFilter::None, 0.0, 0.0};
    for (const FilteredCorrelation& fc : {none, rmt_filter(stats, 5), power_map(stats, 1.0)}) {
      const QpSolution sol = solve_filtered_markowitz(stats, psd_repair(fc), mu0);
      ASSERT_TRUE(sol.optimal());
      EXPECT_NEAR(sol.objective, plain.objective, 1e-9);
      EXPECT_LE((sol.v - plain.v).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(FilteredMarkowitzProperty, SolutionsAreFeasible) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const AssetStats stats = compute_stats(testing::random_returns(6, 52, seed));
    const double mu0 = stats.mu.mean();
    for (const FilteredCorrelation& fc : {rmt_filter(stats, 2), power_map(stats, 1.25)}) {
      const QpSolution sol = solve_filtered_markowitz(stats, psd_repair(fc), mu0);
      ASSERT_TRUE(sol.optimal());
      EXPECT_NEAR(sol.v.sum(), 1.0, 1e-8);
      EXPECT_GE(sol.v.minCoeff(), -1e-10);
      EXPECT_GE(sol.v.dot(stats.mu), mu0 - 1e-8);
    }
  }
}

}  // namespace
}  // namespace scenfilter
