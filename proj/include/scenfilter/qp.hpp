#pragma once

#include "scenfilter/market_data.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace scenfilter {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/**
 * Dense convex quadratic program
 *
 *   minimize    1/2 v'Qv + c'v
 *   subject to  Aeq v  = beq
 *               Ain v >= bin
 *               lower <= v <= upper
 *
 * Infinite bounds mean "no bound". A variable with lower == upper is fixed.
 */
struct QuadraticProgram {
  Matrix Q;
  Vector c;
  Matrix Aeq;
  Vector beq;
  Matrix Ain;
  Vector bin;
  Vector lower;
  Vector upper;

  /// Unconstrained program with m free variables and zero objective.
  static QuadraticProgram with_variables(Eigen::Index m);

  Eigen::Index num_variables() const { return c.size(); }

  /// Checks dimensions, symmetry of Q and lower <= upper; throws InputError.
  void validate() const;

  double objective(const Vector& v) const { return 0.5 * v.dot(Q * v) + c.dot(v); }
};

enum class QpStatus { Optimal, Infeasible, NumericalFailure, IterationLimit };

std::string to_string(QpStatus status);

enum class ConstraintClass { None, Equality, Inequality };

struct QpSolution {
  QpStatus status = QpStatus::NumericalFailure;
  Vector v;
  double objective = kInf;
  Vector y_eq;     // multipliers of Aeq v = beq
  Vector y_in;     // multipliers of Ain v >= bin, nonnegative
  Vector z_lower;  // multipliers of v >= lower, zero where the bound is infinite
  Vector z_upper;  // multipliers of v <= upper, zero where the bound is infinite
  int iterations = 0;
  /// For Infeasible: which constraint class carried the phase-one violation.
  ConstraintClass infeasible_class = ConstraintClass::None;
  double phase_one_violation = 0.0;
  /// Offending eigenvalue when Q was rejected as indefinite.
  double min_eigenvalue = 0.0;
  std::string message;

  bool optimal() const { return status == QpStatus::Optimal; }
};

struct QpOptions {
  int max_iterations = 200;
  /// Target relative tolerances; the solver stops early once all are met.
  double feasibility_tol = 1e-10;
  double gap_tol = 1e-10;
  /// Accepted tolerances when progress stalls before reaching the targets.
  double fallback_tol = 1e-8;
  /// Eigenvalues of Q in (-psd_tol, 0) are clipped to zero; below is rejected.
  double psd_tol = 1e-8;
  std::optional<Vector> warm_start;
};

QpSolution solve_qp(const QuadraticProgram& qp, const QpOptions& options = {});

/// Called after every solve_qp, possibly from several threads at once.
/// Intended for auditing; pass an empty function to remove it.
using QpObserver = std::function<void(const QuadraticProgram&, const QpSolution&)>;
void set_qp_observer(QpObserver fn);

/// Infinity-norm residuals of the KKT conditions at a candidate solution.
struct KktReport {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const;
};

KktReport check_kkt(const QuadraticProgram& qp, const QpSolution& sol);

/// Lagrangian dual objective implied by the multipliers in sol.
double dual_objective(const QuadraticProgram& qp, const QpSolution& sol);

}  // namespace scenfilter
