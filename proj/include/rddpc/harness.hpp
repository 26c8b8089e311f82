#pragma once

/**
 * @file
 * @brief Experiment orchestration: offline data preparation, Lambda selection,
 * the receding-horizon loop, Monte Carlo campaigns, Lambda grid search and
 * solver timing.
 */

#include "rddpc/behavioral_data.hpp"
#include "rddpc/controllers.hpp"
#include "rddpc/experiment_config.hpp"
#include "rddpc/report.hpp"

#include <functional>
#include <map>
#include <optional>

namespace rddpc::harness {

/// Offline material shared by the trials of a campaign.
struct Scenario
{
  sim::SystemModel model;
  sim::Trajectory offline;
  BehavioralData data;
  ReducedData reduced;
  PredictorView view;     ///< compressed or full, per control.reduced
  ControlConfig control;  ///< y_r and Lambda are filled per step / trial
  double yf_norm{0.0};    ///< ||Y_f||
};

/// Open-loop excitation or PID closed-loop record of `length` samples.
sim::Trajectory collect_data(const ExperimentConfig & cfg, const sim::SystemModel & model, std::uint64_t seed, Index length);

/// Seeds of the excitation and of the noise derived from one data seed.
std::uint64_t excitation_seed(std::uint64_t seed);
std::uint64_t data_noise_seed(std::uint64_t seed);

Scenario prepare_scenario(const ExperimentConfig & cfg, std::uint64_t data_seed);
Scenario prepare_scenario(const ExperimentConfig & cfg, const sim::Trajectory & offline);

ControlConfig make_control_config(const ExperimentConfig & cfg);

/// ny x length reference, zero except on the tracked channel.
MatrixXd reference_matrix(const ExperimentConfig & cfg, Index ny, Index length);

/// Stacked reference over k .. k+Lf-1; the last column is held beyond the end.
VectorXd reference_horizon(const MatrixXd & ref, Index k, Index Lf);

/// Lambda from membership of held-out validation slices (noise-free data gives 0).
double tune_lambda(const ExperimentConfig & cfg, const Scenario & sc);

struct StepContext
{
  Index step{0};
  ControllerKind kind{ControllerKind::spc};
  const Scenario & scenario;
  const ControlConfig & config;  ///< with this step's y_r and the trial's Lambda
  const VectorXd & u_p;
  const VectorXd & y_p;
  const RobustSolution & solution;
};

using StepHook = std::function<void(const StepContext &)>;

struct RunOptions
{
  bool bound_checks{false};  ///< realised-cost certificates on open-loop / feedback rollouts (robust controllers)
  StepHook hook;             ///< called after every solve; must be thread safe in campaigns
  conic::SolveSettings solver;
};

/**
 * @brief One closed-loop test: Lp zero-input warm-up steps, then
 * reference.length controller steps applying the first input. A failed solve
 * holds the previous input. Throws std::invalid_argument on a dimension
 * mismatch between plant and data.
 */
TrialRecord run_receding_horizon(
  const ExperimentConfig & cfg,
  const Scenario & sc,
  ControllerKind kind,
  double Lambda,
  std::uint64_t seed,
  const RunOptions & options = {});

/// sum_k ||y(k) - y_r(k)||_Q^2 + ||u(k)||_R^2 over the columns.
double j_total(const MatrixXd & u, const MatrixXd & y, const MatrixXd & y_ref, const MatrixXd & Q, const MatrixXd & R);

/// Runs fn(0..n-1) on `workers` threads (0 = hardware concurrency).
void parallel_for(Index n, Index workers, const std::function<void(Index)> & fn);

/// Grid search over cfg.lambda.grid on the grid-search seeds.
std::vector<GridRow> grid_search_lambda(
  const ExperimentConfig & cfg,
  const Scenario & sc,
  const std::vector<ControllerKind> & kinds,
  const std::vector<double> & grid,
  const RunOptions & options = {});

/// Lambda per controller from the configured choices; grid rows are appended to `grid_rows` when given.
std::map<ControllerKind, double> resolve_lambdas(
  const ExperimentConfig & cfg,
  const Scenario & sc,
  const std::vector<ControllerKind> & kinds,
  std::vector<GridRow> * grid_rows = nullptr);

/**
 * @brief Paired-seed campaign: trial i of every controller uses seed cfg.seed + i.
 * A trial that throws is recorded with its error and the campaign continues.
 */
ExperimentReport monte_carlo(
  const ExperimentConfig & cfg,
  const std::vector<ControllerKind> & kinds,
  const std::map<ControllerKind, double> & lambdas,
  Index n_trials,
  const RunOptions & options = {},
  const Scenario * shared = nullptr);

/**
 * @brief Median solve time per formulation and N. Formulations: spc-qp,
 * pbr-qp, rddpc-reduced, frddpc-reduced (bench.repeats solves each) and
 * rddpc-full, frddpc-full (bench.full_repeats solves each).
 */
std::vector<TimingRow> benchmark_solve_times(
  const ExperimentConfig & cfg, const std::vector<Index> & N_values, bool include_full = true);

}  // namespace rddpc::harness
