#pragma once

/**
 * @file
 * @brief The four predictive controllers: SPC (QP), projection-regularised
 * DDPC (QP), open-loop robust DDPC (SDP) and feedback robust DDPC (SDP).
 */

#include "rddpc/behavioral_data.hpp"
#include "rddpc/conic/program.hpp"
#include "rddpc/conic/solver.hpp"

#include <string>
#include <vector>

namespace rddpc {

/// ||G x + c||^2 <= 1 over a stacked horizon vector x.
struct EllipsoidConstraint
{
  MatrixXd G;
  VectorXd c;
};

struct ControlConfig
{
  Index Lp{0};
  Index Lf{0};
  MatrixXd Q;  ///< per-step output weight, n_y x n_y, positive definite
  MatrixXd R;  ///< per-step input weight, n_u x n_u, positive semidefinite (definite for FR-DDPC)
  VectorXd y_r;  ///< n_y Lf reference over the horizon
  std::vector<EllipsoidConstraint> input_constraints;
  std::vector<EllipsoidConstraint> output_constraints;
  double Lambda{0.0};

  MatrixXd Q_horizon() const { return block_diag_repeat(Q, Lf); }
  MatrixXd R_horizon() const { return block_diag_repeat(R, Lf); }

  /// Throws std::invalid_argument on non-PD Q, indefinite R or mismatched constraint shapes.
  void validate(Index nu, Index ny) const;
};

/**
 * @brief What a controller needs from the data: the predictor split and the
 * deviation matrix with its uncertainty weight.
 *
 * For full data `M` is Y_f PhiPerp (n_y Lf x Nbar); for compressed data it is
 * the small Mt ((nu+ny)L columns). `deviation` is the minimal factor of M.
 */
struct PredictorView
{
  DataDims dims;
  MatrixXd Mf;
  MatrixXd Mp;
  MatrixXd M;
  MatrixXd PhiPerp;
  DeviationFactor deviation;
  bool reduced{false};

  static PredictorView full(const BehavioralData & data);
  static PredictorView compressed(const ReducedData & data);
  /// Synthetic instance; `scale` sets the rank cutoff of the deviation factor.
  static PredictorView custom(
    const DataDims & dims, MatrixXd Mf, MatrixXd Mp, MatrixXd M, MatrixXd PhiPerp, double scale = 0.0);

  VectorXd nominal(const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p) const;
  VectorXd past(const VectorXd & u_p, const VectorXd & y_p) const;
};

/// Affine policy u_f = v_f + K (y_f - b) with strictly lower block triangular K.
struct FeedbackPolicy
{
  VectorXd v_f;
  MatrixXd K;
  VectorXd b;

  VectorXd first_input(Index nu) const { return v_f.head(nu); }
};

struct RobustSolution
{
  conic::SolveStatus status{conic::SolveStatus::numerical_failure};
  VectorXd u_f;  ///< open-loop input, or v_f for the feedback controller
  MatrixXd K;    ///< feedback gain (feedback controller only)
  VectorXd b;    ///< nominal prediction at u_f
  VectorXd w;    ///< optimistic deviation coefficient (PBR only)
  /// Worst-case tracking cost. Open-loop robust: excludes ||u_f||_R^2.
  /// Feedback robust: the full worst-case cost including the input term.
  double psi{0.0};
  double gamma{0.0};
  std::vector<double> mu;   ///< output-constraint multipliers
  std::vector<double> eta;  ///< input-constraint multipliers
  double objective{0.0};
  double solve_seconds{0.0};
  double assembly_seconds{0.0};
  int iterations{0};

  bool ok() const { return status == conic::SolveStatus::optimal; }
  VectorXd applied_input(Index nu) const { return u_f.head(nu); }
  FeedbackPolicy policy() const { return {u_f, K, b}; }
};

/// Handles into an assembled robust program. The program works in
/// w = sqrt(Lambda) w~, so gamma, mu and eta hold the multipliers times Lambda.
struct AssembledProgram
{
  conic::ConicProgram program;
  conic::VarId u_f{-1};  ///< u_f, or v_f for the feedback controller
  conic::VarId K{-1};    ///< -1 unless feedback with free gain
  conic::VarId psi{-1};
  conic::VarId gamma{-1};
  std::vector<conic::VarId> mu;
  std::vector<conic::VarId> eta;
  double assembly_seconds{0.0};
};

RobustSolution solve_spc(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const conic::SolveSettings & settings = {});

struct PbrMode
{
  enum class Kind { penalty, constraint };
  Kind kind{Kind::constraint};
  double value{0.0};  ///< lambda (penalty weight) or Lambda (set size)

  static PbrMode penalty(double lambda) { return {Kind::penalty, lambda}; }
  static PbrMode constraint(double Lambda) { return {Kind::constraint, Lambda}; }
};

/// Optimistic counterpart: the deviation is a decision variable.
RobustSolution solve_pbr(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  PbrMode mode,
  const conic::SolveSettings & settings = {});

/// Throws std::invalid_argument when Lambda <= 0.
AssembledProgram assemble_rddpc(
  const PredictorView & view, const ControlConfig & config, const VectorXd & u_p, const VectorXd & y_p);

RobustSolution solve_rddpc(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const conic::SolveSettings & settings = {});

struct FeedbackOptions
{
  bool zero_gain{false};  ///< fix K = 0 (no gain variables declared)
};

/// Throws std::invalid_argument when Lambda <= 0 or R is not positive definite.
AssembledProgram assemble_frddpc(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  FeedbackOptions options = {});

RobustSolution solve_frddpc(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const conic::SolveSettings & settings = {},
  FeedbackOptions options = {});

/// Mask of the free entries of a strictly lower block triangular (nu Lf) x (ny Lf) gain.
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> feedback_gain_mask(Index nu, Index ny, Index Lf);

enum class ControllerKind { spc, pbr, rddpc, frddpc };

std::string to_string(ControllerKind k);
/// Throws std::invalid_argument on an unknown name.
ControllerKind controller_from_string(const std::string & name);

/**
 * @brief Uniform entry point used by the receding-horizon loop. PBR runs in
 * constraint mode with config.Lambda; the robust controllers fall back to SPC
 * when config.Lambda == 0.
 */
RobustSolution solve_controller(
  ControllerKind kind,
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const conic::SolveSettings & settings = {});

}  // namespace rddpc
