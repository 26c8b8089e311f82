#pragma once

/**
 * @file
 * @brief Independent checks for the robust controllers: brute-force inner
 * maximisation, uncertainty-set membership and empirical Lambda, the
 * theoretical Lambda bounds and the realised-cost certificates.
 */

#include "rddpc/behavioral_data.hpp"
#include "rddpc/controllers.hpp"

#include <random>
#include <string>
#include <vector>

namespace rddpc::verify {

enum class OracleMethod { exact_0d, endpoint_1d, grid_ascent };

std::string to_string(OracleMethod m);

struct OracleResult
{
  double max_value{0.0};
  VectorXd argmax;  ///< maximiser in the coordinates of the deviation factor
  OracleMethod method{OracleMethod::exact_0d};
};

/**
 * @brief max ||D t + e||_Q^2 over ||t||^2 <= Lambda for a factor with at most
 * `rank_cap` columns (e = b - y_r).
 *
 * Rank 1 is solved at the two endpoints; ranks 2 and 3 use a dense sphere grid
 * (1e4 / 1e5 points) refined by fixed-point ascent. Throws std::invalid_argument
 * when D has more columns than `rank_cap`.
 */
OracleResult worst_case_cost_oracle(
  const MatrixXd & D, const VectorXd & e, const MatrixXd & Q, double Lambda, Index rank_cap = 3);

/**
 * @brief Same maximisation over {M w : ||PhiPerp w||^2 <= Lambda}.
 *
 * Requires PhiPerp to be an orthogonal projector with M PhiPerp = M.
 */
OracleResult worst_case_cost_oracle(
  const VectorXd & b,
  const MatrixXd & M,
  const MatrixXd & PhiPerp,
  const MatrixXd & Q,
  const VectorXd & y_r,
  double Lambda,
  Index rank_cap = 3);

/// Uniform samples on {w : w^T P w = Lambda} for a PSD weight P (one column per sample).
MatrixXd sample_boundary(const MatrixXd & P, double Lambda, Index count, std::mt19937_64 & rng);

struct SamplingReport
{
  Index samples{0};
  double worst_output_violation{0.0};  ///< max over samples of ||G y + c||^2 - 1
  double worst_input_violation{0.0};   ///< feedback controller only
  double worst_cost{0.0};              ///< largest sampled cost
  double certificate{0.0};             ///< psi it is compared against
  bool passed{false};
};

/**
 * @brief Robust feasibility by sampling: draws boundary deviations and checks
 * every constraint and the worst-case cost certificate.
 *
 * For the open-loop controller the sampled cost is ||b + M w - y_r||_Q^2 and
 * is compared with psi; for the feedback controller (`feedback` true) the
 * input is v_f + K M w, the output b + (I + Mf K) M w, and the cost includes
 * the input term.
 */
SamplingReport sample_robust_feasibility(
  const PredictorView & view,
  const ControlConfig & config,
  const RobustSolution & solution,
  bool feedback,
  Index count,
  std::mt19937_64 & rng,
  double tol = 1e-6);

struct ValidationSlice
{
  VectorXd u_p, u_f, y_p, y_f;
};

/// `count` windows of length Lp + Lf spread evenly over the trajectory.
std::vector<ValidationSlice> make_validation_slices(const sim::Trajectory & traj, Index Lp, Index Lf, Index count);

struct Membership
{
  double lambda{0.0};    ///< ||PhiPerp w||^2 of the minimum-norm w
  double residual{0.0};  ///< ||y_f - b - M w|| for that w
  bool exact{false};     ///< residual within round-off of the data scale
};

/**
 * @brief Smallest Lambda for which y_f = b + M w with ||PhiPerp w||^2 <= Lambda.
 *
 * Uses the minimum-norm solution through the truncated pseudo-inverse of M.
 * With M numerically zero (noise-free data) lambda is 0 and `exact` tells
 * whether the prediction itself matches.
 */
Membership min_lambda_for_trajectory(
  const PredictorView & view, const VectorXd & u_p, const VectorXd & y_p, const VectorXd & u_f, const VectorXd & y_f);

/// Same test for the feedback parameterisation y_f = b + (I + Mf K) M w, b built from v_f.
Membership min_lambda_feedback(
  const PredictorView & view,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const VectorXd & v_f,
  const MatrixXd & K,
  const VectorXd & y_f);

/// Largest minimal Lambda over the slices; throws std::invalid_argument on an empty list.
double tune_lambda(const PredictorView & view, const std::vector<ValidationSlice> & slices);

/// Per-entry noise bounds for the AR(1) channels: truncation * sigma / (1 - |coeff|), times max |B_v| for outputs.
struct NoiseBounds
{
  double xi_u{0.0};
  double xi_y{0.0};
};

NoiseBounds ar_noise_bounds(const sim::ArNoiseModel & noise_u, const sim::ArNoiseModel & noise_y, const MatrixXd & Bv);

struct TheoryBounds
{
  double delta{0.0};     ///< 1 / sigma_{nu L + nx}(clean Phi)
  double beta{0.0};      ///< max(delta, ||pinv(Phi)||)
  double xi1{0.0};
  double xi2{0.0};
  double Lambda1{0.0};
  double Lambda2{0.0};
  double gain{0.0};      ///< ||PhiPerp pinv(Y_f PhiPerp)||
  double data_norm{0.0}; ///< ||col(u_p, u_f, y_p)|| (v_f in place of u_f for the feedback bound)
  double Lambda_o{0.0};
  /// Feedback bound exactly as stated: divides by ||(I - Mf_clean K)(I + Mf K)||^2.
  double Lambda_c{0.0};
  /// Feedback bound multiplied by ||((I - Mf_clean K)(I + Mf K))^-1||^2 instead.
  double Lambda_c_inverse{0.0};
  double coupling_norm{0.0};  ///< ||(I - Mf_clean K)(I + Mf K)||
  double coupling_cond{0.0};  ///< its condition number
};

/**
 * @brief Data-dependent constants shared by both Lambda bounds.
 *
 * Throws std::domain_error when sigma_{nu L + nx} of the clean data matrix is
 * zero (insufficient excitation).
 */
TheoryBounds theory_constants(
  const BehavioralData & data, const BehavioralData & clean, Index nx, double xi_u_bar, double xi_y_bar);

/// Lambda_o for the online vector z = col(u_p, u_f, y_p).
TheoryBounds theorem1_lambda_o(
  const BehavioralData & data,
  const BehavioralData & clean,
  Index nx,
  double xi_u_bar,
  double xi_y_bar,
  const VectorXd & z);

/**
 * @brief Lambda_c for nominal input v_f and gain K. Throws std::domain_error
 * when (I - Mf_clean K)(I + Mf K) is numerically singular.
 */
TheoryBounds theorem3_lambda_c(
  const BehavioralData & data,
  const BehavioralData & clean,
  Index nx,
  double xi_u_bar,
  double xi_y_bar,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const VectorXd & v_f,
  const MatrixXd & K);

enum class CostBound { open_loop, feedback };

struct CostBoundResult
{
  double realized{0.0};
  double bound{0.0};
  double margin{0.0};  ///< bound - realized
  bool passed{false};
};

/**
 * @brief Realised-cost certificate over one horizon.
 *
 * `optimal_cost` is the optimal value of the robust program. Open loop:
 * realized <= 2 J* + 8 sigma_max(Q) ||Y_f||^2 Lambda. Feedback: realized <=
 * 2 J* + 2 Lambda ||Y_f||^2 (sigma_max(R) ||K||^2 ||2I + Mf K||^2 +
 * 4 sigma_max(Q) ||I + Mf K||^2). `K` is ignored for the open-loop bound.
 */
CostBoundResult cost_bound_check(
  CostBound kind,
  double optimal_cost,
  const VectorXd & u_f,
  const VectorXd & y_f,
  const ControlConfig & config,
  const MatrixXd & Mf,
  double yf_norm,
  const MatrixXd & K = {});

/// Small random data set with a deviation matrix of prescribed rank, for oracle comparisons.
struct SyntheticInstance
{
  BehavioralData data;
  ControlConfig config;
  VectorXd u_p, y_p;
};

/**
 * @brief nu = ny = 1, Lp = 2, Lf = 3, Nbar = 40 and rank(Y_f PhiPerp) = rank
 * (1..3). Random positive Q, R = 1, Lambda in [0.1, 2], one input bound per
 * step and one loose output ellipsoid.
 */
SyntheticInstance make_synthetic_instance(Index rank, std::uint64_t seed);

struct OracleComparison
{
  Index rank{0};
  bool solved{false};
  double psi{0.0};        ///< open-loop robust certificate (full data)
  double oracle{0.0};     ///< brute-force worst case at the optimal input
  double rel_error{0.0};  ///< |psi - oracle| / |oracle|
  double u_diff{0.0};     ///< max |u_f(full) - u_f(compressed)|
  OracleMethod method{OracleMethod::exact_0d};
};

/// Solves the open-loop robust program on the full and the compressed data and compares with the oracle.
OracleComparison compare_with_oracle(const SyntheticInstance & inst, const conic::SolveSettings & settings = {});

}  // namespace rddpc::verify
