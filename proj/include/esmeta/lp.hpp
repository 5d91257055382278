#pragma once

#include <limits>
#include <string>

#include <Eigen/Dense>

namespace esmeta {

inline constexpr double kLpInfinity = std::numeric_limits<double>::infinity();

// minimize c·x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lo <= x <= hi.
// Infinite bounds are written as ±kLpInfinity.
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_ub;
  Eigen::VectorXd b_ub;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  // Empty constraint blocks and [0, +inf) bounds for n variables.
  static LinearProgram with_variables(int n);

  int num_variables() const { return static_cast<int>(c.size()); }

  // Throws std::invalid_argument on inconsistent dimensions, lo > hi or
  // non-finite data.
  void validate() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

std::string to_string(LpStatus status);

// Sign conventions (minimization):
//   duals_eq  free; d objective / d b_eq
//   duals_ub  >= 0; objective decreases by duals_ub when b_ub grows by one
//   reduced_costs = c - A_eq^T duals_eq + A_ub^T duals_ub; positive entries
//                   sit at a lower bound, negative at an upper bound
// Strong duality: c·x = b_eq·duals_eq - b_ub·duals_ub + bound_term().
struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd duals_eq;
  Eigen::VectorXd duals_ub;
  Eigen::VectorXd reduced_costs;
  int pivots = 0;

  double bound_term(const LinearProgram& lp) const;
  double dual_objective(const LinearProgram& lp) const;
};

struct LpOptions {
  double tol = 1e-9;
  // Consecutive degenerate pivots before switching from Dantzig pricing to
  // Bland's rule.
  int degenerate_switch = 50;
  int max_pivots = 0;  // 0 = automatic
};

// Dense two-phase primal simplex. Entering and leaving choices break ties by
// lowest index, so results are reproducible. Throws NumericError when the
// final basis fails the primal feasibility check.
LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options = {});

// Scale used for the relative tolerance checks: 1 + max |entries| over data.
double lp_scale(const LinearProgram& lp);

}  // namespace esmeta
