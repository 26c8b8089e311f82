#pragma once

/**
 * @file
 * @brief Experiment configuration: plant, data collection, control weights and
 * constraints, reference, Lambda selection and campaign settings. Stored as
 * JSON; every field has a default so a partial file is valid.
 */

#include "rddpc/controllers.hpp"
#include "rddpc/lti_sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace rddpc::harness {

enum class DataMode { open_loop, closed_loop_pid };

struct NoiseSettings
{
  double sigma_u{0.01};
  double sigma_y{0.019};
  double ar_coeff{0.5};
  double truncation{3.0};
};

struct ExcitationSettings
{
  Index period{600};
  double amplitude{1.0};
  double noise_variance{0.01};
};

struct PidSettings
{
  sim::PidGains gains{1.91, 0.917, 0.93};
  Index reference_period{600};
  double reference_amplitude{0.4};
};

struct DataSettings
{
  DataMode mode{DataMode::open_loop};
  Index length{600};
  ExcitationSettings excitation;
  PidSettings pid;
  std::uint64_t seed{1};
  bool regenerate_per_trial{false};
};

/// Held-out simulation used for Lambda tuning.
struct ValidationSettings
{
  std::uint64_t seed{1001};
  Index length{600};
  Index slices{100};
};

struct ControlSettings
{
  Index Lp{5};
  Index Lf{5};
  std::vector<double> q_diag{1.0, 1e-4, 1e-4, 1e-4};
  double r{0.01};
  double input_gain{0.2};  ///< ||input_gain * u(t)||^2 <= 1 at every horizon step
  /// One output constraint per entry: per-step diagonal weights repeated over the horizon.
  std::vector<std::vector<double>> output_weights{{0.01, 0.01, 0.7, 0.01}, {0.01, 0.01, 0.01, 0.7}};
  bool reduced{true};  ///< use the SVD-compressed data in the controllers
};

enum class ReferenceShape { square, step };

struct ReferenceSettings
{
  ReferenceShape shape{ReferenceShape::square};
  Index period{100};
  double amplitude{0.4};
  Index channel{0};
  Index length{100};  ///< closed-loop test steps after the warm-up
};

/// How a controller's Lambda is chosen: a number, "tuned" (validation membership) or "grid" (grid-search argmin).
using LambdaChoice = std::variant<double, std::string>;

struct LambdaSettings
{
  LambdaChoice fallback{std::string("tuned")};
  std::map<std::string, LambdaChoice> per_controller{{"pbr", std::string("grid")}};
  std::vector<double> grid{1e-10, 1e-6, 1e-4, 1e-3, 1e-2, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0, 1e4, 1e6};
  Index grid_trials{5};
  std::uint64_t grid_seed{5000};  ///< seeds of the grid-search trials, disjoint from the campaign seeds
};

struct BenchSettings
{
  std::vector<Index> N_values{100, 200, 400, 600};
  Index repeats{10};
  Index full_repeats{10};  ///< repeats of the full-size SDPs, which dominate the run time
};

struct ExperimentConfig
{
  sim::TwoMassParameters plant;
  NoiseSettings noise;
  DataSettings data;
  ValidationSettings validation;
  ControlSettings control;
  ReferenceSettings reference;
  std::vector<std::string> controllers{"spc", "pbr", "rddpc", "frddpc"};
  LambdaSettings lambda;
  BenchSettings bench;
  Index trials{30};
  std::uint64_t seed{100};
  Index workers{0};  ///< 0 = hardware concurrency
  std::string output_dir{"out"};
  int max_solver_iterations{200};

  /// Throws std::invalid_argument with the offending field.
  void validate() const;

  std::vector<ControllerKind> controller_kinds() const;
  LambdaChoice lambda_for(ControllerKind kind) const;

  sim::ArNoiseModel noise_u() const { return {noise.ar_coeff, noise.sigma_u, noise.truncation, 0.0}; }
  sim::ArNoiseModel noise_y() const { return {noise.ar_coeff, noise.sigma_y, noise.truncation, 0.0}; }
};

nlohmann::json to_json(const ExperimentConfig & cfg);
/// Missing keys keep their defaults; unknown keys and malformed values throw std::invalid_argument.
ExperimentConfig config_from_json(const nlohmann::json & j);
ExperimentConfig load_config(const std::string & path);
void save_config(const ExperimentConfig & cfg, const std::string & path);

}  // namespace rddpc::harness
