#pragma once

#include "scenfilter/filter_model.hpp"
#include "scenfilter/market_data.hpp"
#include "scenfilter/qp.hpp"

#include <string>

namespace scenfilter {

enum class CorrelationFilter { None, Rmt, PowerMapping };

std::string to_string(CorrelationFilter method);

struct FilteredCorrelation {
  Matrix matrix;
  CorrelationFilter method = CorrelationFilter::None;
  /// Number of kept eigenvalues (RMT) or exponent (power mapping).
  double parameter = 0.0;
  double repair_shift = 0.0;
};

/// Long-only minimum variance portfolio with a floor on the expected return.
/// The reported objective is the portfolio variance x' cov x.
QpSolution solve_markowitz(const AssetStats& stats, double mu0, FloorMode floor = FloorMode::Inequality,
                           const QpOptions& qp_options = {});

QuadraticProgram build_markowitz(const Matrix& cov, const Vector& mu, double mu0, FloorMode floor);

/// Eigenvalues in descending order; each eigenvector has its largest-magnitude
/// component positive.
struct SortedEigen {
  Vector values;
  Matrix vectors;
};

SortedEigen sorted_eigen(const Matrix& symmetric);

/// Keeps the p largest eigenvalues of the correlation matrix and restores a unit diagonal.
FilteredCorrelation rmt_filter(const AssetStats& stats, int p);

/// sign(C_ij) |C_ij|^q elementwise.
FilteredCorrelation power_map(const AssetStats& stats, double q);

/// Shifts the diagonal when the smallest eigenvalue is below -1e-10.
FilteredCorrelation psd_repair(FilteredCorrelation fc);

/// Markowitz with covariance vol_i vol_j fc_ij.
QpSolution solve_filtered_markowitz(const AssetStats& stats, const FilteredCorrelation& fc, double mu0,
                                    FloorMode floor = FloorMode::Inequality, const QpOptions& qp_options = {});

}  // namespace scenfilter
