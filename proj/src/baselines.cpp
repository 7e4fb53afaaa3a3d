#include "scenfilter/baselines.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace scenfilter {

using Index = Eigen::Index;

std::string to_string(CorrelationFilter method) {
  switch (method) {
    case CorrelationFilter::None: return "none";
    case CorrelationFilter::Rmt: return "rmt";
    case CorrelationFilter::PowerMapping: return "power-mapping";
  }
  return "unknown";
}

QuadraticProgram build_markowitz(const Matrix& cov, const Vector& mu, double mu0, FloorMode floor) {
  const Index n = cov.rows();
  if (cov.cols() != n || mu.size() != n) throw InputError("covariance and mean dimensions differ");
  if (n == 0) throw InputError("no assets");
  QuadraticProgram qp = QuadraticProgram::with_variables(n);
  qp.Q = 2.0 * cov;
  qp.lower.setZero();
  if (floor == FloorMode::Equality) {
    qp.Aeq = Matrix::Ones(2, n);
    qp.Aeq.row(1) = mu.transpose();
    qp.beq = Vector(2);
    qp.beq << 1.0, mu0;
  } else {
    qp.Aeq = Matrix::Ones(1, n);
    qp.beq = Vector::Ones(1);
    qp.Ain = mu.transpose();
    qp.bin = Vector::Constant(1, mu0);
  }
  return qp;
}

QpSolution solve_markowitz(const AssetStats& stats, double mu0, FloorMode floor, const QpOptions& qp_options) {
  return solve_qp(build_markowitz(stats.cov, stats.mu, mu0, floor), qp_options);
}

SortedEigen sorted_eigen(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Index n = symmetric.rows();
  SortedEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  for (Index k = 0; k < n; ++k) {
    Index arg = 0;
    out.vectors.col(k).cwiseAbs().maxCoeff(&arg);
    if (out.vectors(arg, k) < 0.0) out.vectors.col(k) *= -1.0;
  }
  return out;
}

FilteredCorrelation rmt_filter(const AssetStats& stats, int p) {
  const Index n = stats.corr.rows();
  if (p < 1 || p > n) throw InputError("RMT parameter p must lie in [1, n]");
  const SortedEigen eig = sorted_eigen(stats.corr);
  const Matrix V = eig.vectors.leftCols(p);
  Matrix filtered = V * eig.values.head(p).asDiagonal() * V.transpose();
  filtered = 0.5 * (filtered + filtered.transpose());
  filtered.diagonal().setOnes();
  return FilteredCorrelation{filtered, CorrelationFilter::Rmt, static_cast<double>(p), 0.0};
}

FilteredCorrelation power_map(const AssetStats& stats, double q) {
  if (!(q > 0.0) || !std::isfinite(q)) throw InputError("power mapping exponent must be positive");
  Matrix mapped = stats.corr.unaryExpr([q](double c) { return std::copysign(std::pow(std::abs(c), q), c); });
  mapped.diagonal().setOnes();
  return FilteredCorrelation{mapped, CorrelationFilter::PowerMapping, q, 0.0};
}

FilteredCorrelation psd_repair(FilteredCorrelation fc) {
  const double smallest = Eigen::SelfAdjointEigenSolver<Matrix>(fc.matrix, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (smallest < -1e-10) {
    fc.repair_shift = -smallest + 1e-10;
    fc.matrix.diagonal().array() += fc.repair_shift;
  }
  return fc;
}

QpSolution solve_filtered_markowitz(const AssetStats& stats, const FilteredCorrelation& fc, double mu0,
                                    FloorMode floor, const QpOptions& qp_options) {
  const Index n = stats.vol.size();
  if (fc.matrix.rows() != n || fc.matrix.cols() != n) throw InputError("filtered correlation has the wrong size");
  const Matrix cov = stats.vol.asDiagonal() * fc.matrix * stats.vol.asDiagonal();
  return solve_qp(build_markowitz(0.5 * (cov + cov.transpose()), stats.mu, mu0, floor), qp_options);
}

}  // namespace scenfilter
