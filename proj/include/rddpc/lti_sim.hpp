#pragma once

/**
 * @file
 * @brief Ground-truth plant simulation: the two-mass-spring-damper benchmark,
 * AR(1) coloured noise with truncated innovations, excitation signals and a
 * PID loop used to record closed-loop data.
 */

#include "rddpc/linalg.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>

namespace rddpc::sim {

/**
 * @brief Discrete-time plant
 *
 *   x(t+1) = A x(t) + B_u (u(t) + v_1(t))
 *   y(t)   = C x(t) + D u(t) + B_v v_2(t)
 *
 * v_1 has the dimension of u; v_2 has one channel per column of B_v.
 */
struct SystemModel
{
  MatrixXd A;
  MatrixXd Bu;
  MatrixXd C;
  MatrixXd Bv;
  MatrixXd D;
  double dt{1.0};

  Index nx() const { return A.rows(); }
  Index nu() const { return Bu.cols(); }
  Index ny() const { return C.rows(); }
  Index nv() const { return Bv.cols(); }

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

/// Physical parameters of the two-mass-spring-damper benchmark.
struct TwoMassParameters
{
  double k1{4.0}, k2{4.0};
  double b1{1.5}, b2{2.0};
  double m1{1.2}, m2{2.0};
  double dt{0.1};
};

SystemModel make_two_mass_model(const TwoMassParameters & p = {});

/// AR(1) process v(t) = coeff v(t-1) + e(t) with e clamped to +-truncation*sigma.
struct ArNoiseModel
{
  double coeff{0.5};
  double sigma{0.0};
  double truncation{3.0};
  double state{0.0};
};

/// Advances the process with one standard-normal draw and returns v(t).
double ar_noise_step(ArNoiseModel & model, double rng_draw);

struct PidGains
{
  double kp{0.0}, ki{0.0}, kd{0.0};
};

/// Recorded input/output sequences, one column per time step.
struct Trajectory
{
  MatrixXd inputs;   ///< n_u x T
  MatrixXd outputs;  ///< n_y x T
  MatrixXd states;   ///< n_x x T, empty unless simulated
  /// Underlying exact system trajectory (u + v_1, C x + D(u + v_1)); simulation only.
  std::optional<MatrixXd> clean_inputs;
  std::optional<MatrixXd> clean_outputs;

  Index length() const { return inputs.cols(); }
  Index nu() const { return inputs.rows(); }
  Index ny() const { return outputs.rows(); }
  bool has_clean() const { return clean_inputs.has_value() && clean_outputs.has_value(); }
  /// The clean twin as a Trajectory of its own; throws if absent.
  Trajectory clean() const;
};

/// Pre-drawn disturbance realisation, so several controllers can face the same noise.
struct NoiseRealization
{
  MatrixXd v1;  ///< n_u x T input disturbance
  MatrixXd v2;  ///< n_v x T measurement noise
};

/**
 * @brief Draw T samples of both AR channels from one seeded generator.
 *
 * Draw order per step: v1 components, then v2 components.
 */
NoiseRealization draw_noise(
  ArNoiseModel noise_u, ArNoiseModel noise_y, Index nu, Index nv, Index length, std::uint64_t seed);

/// Mutable plant state used by the receding-horizon loop.
class Plant
{
public:
  explicit Plant(SystemModel model, VectorXd x0 = {});

  const SystemModel & model() const { return model_; }
  const VectorXd & state() const { return x_; }

  /// Measured output at the current state.
  VectorXd measure(const VectorXd & u, const VectorXd & v2) const;
  /// Noise-free output C x + D u.
  VectorXd measure_clean(const VectorXd & u) const;
  /// x <- A x + B_u (u + v1).
  void advance(const VectorXd & u, const VectorXd & v1);

private:
  SystemModel model_;
  VectorXd x_;
};

/**
 * @brief Open-loop simulation driven by `inputs` (n_u x T).
 *
 * Also records the exact trajectory underlying the measurements. With both
 * noise sigmas zero the measured and clean trajectories coincide.
 */
Trajectory simulate(
  const SystemModel & model,
  const ArNoiseModel & noise_u,
  const ArNoiseModel & noise_y,
  const MatrixXd & inputs,
  const VectorXd & x0,
  std::uint64_t seed);

/// Same as simulate() but with a pre-drawn noise realisation.
Trajectory simulate(
  const SystemModel & model, const MatrixXd & inputs, const VectorXd & x0, const NoiseRealization & noise);

/**
 * @brief Square wave (starts at +amplitude, toggles every period/2 steps)
 * plus zero-mean Gaussian perturbation of variance noise_var. Returns 1 x length.
 */
MatrixXd gen_excitation(Index period, double amplitude, double noise_var, Index length, std::uint64_t seed);

/// Square reference wave, same phase convention as gen_excitation.
VectorXd square_wave(Index period, double amplitude, Index length);

/**
 * @brief Record closed-loop data under a discrete positional PID acting on
 * reference - y_1. Integral accumulates e*dt; the derivative acts on the
 * measurement, -(y_1(t) - y_1(t-1))/dt, and is zero at t = 0.
 */
Trajectory collect_closed_loop(
  const SystemModel & model,
  const ArNoiseModel & noise_u,
  const ArNoiseModel & noise_y,
  const PidGains & pid,
  const VectorXd & reference,
  Index length,
  std::uint64_t seed,
  const VectorXd & x0 = {});

/// CSV with header "t,u_1..u_nu,y_1..y_ny"; the clean twin goes to <stem>.clean.csv.
void write_trajectory_csv(const Trajectory & traj, const std::string & path);

/// Reads a trajectory CSV; picks up <stem>.clean.csv when present.
Trajectory read_trajectory_csv(const std::string & path);

/// "<dir>/run.csv" -> "<dir>/run.clean.csv".
std::string clean_twin_path(const std::string & path);

}  // namespace rddpc::sim
