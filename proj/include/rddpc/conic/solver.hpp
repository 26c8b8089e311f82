#pragma once

/**
 * @file
 * @brief Solve adapter for ConicProgram: a primal-dual interior-point method
 * (infeasible start, Mehrotra predictor-corrector, HKM search direction) for
 * convex quadratic objectives under affine equalities and LMIs. Squared-norm
 * objective terms are moved into epigraph LMIs, so the method itself only
 * sees a linear objective.
 */

#include "rddpc/conic/program.hpp"

#include <optional>
#include <string>

namespace rddpc::conic {

struct SolveSettings
{
  double feasibility_tol{1e-8};  ///< relative primal and dual residual
  double gap_tol{1e-8};          ///< relative duality gap
  int max_iterations{200};
  double step_fraction{0.98};    ///< fraction of the step to the cone boundary
  /// When progress stalls, the best iterate is still accepted as optimal if
  /// every relative measure is below this (flagged as reduced accuracy).
  double stall_accept_tol{1e-6};
  bool verbose{false};  ///< iteration log on stderr
};

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure, max_iterations };

std::string to_string(SolveStatus s);

struct SolveResult
{
  SolveStatus status{SolveStatus::numerical_failure};
  std::optional<VectorXd> x;  ///< present iff status == optimal
  double objective{0.0};
  double solve_seconds{0.0};
  int iterations{0};
  double primal_residual{0.0};
  double dual_residual{0.0};
  double relative_gap{0.0};
  bool reduced_accuracy{false};  ///< accepted under stall_accept_tol, not the full tolerances

  bool optimal() const { return status == SolveStatus::optimal; }
  /// Value of one declared variable; throws std::logic_error when not optimal.
  MatrixXd value(const ConicProgram & program, VarId id) const;
};

/// Re-entrant: no shared state between calls.
SolveResult solve(const ConicProgram & program, const SolveSettings & settings = {});

}  // namespace rddpc::conic
