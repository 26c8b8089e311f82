#pragma once

/**
 * @file
 * @brief Trial records, campaign aggregates and their JSON / CSV forms.
 *
 * Report schema (JSON): {"config": {...}, "trials": [TrialRecord...],
 * "aggregate": {"<controller>": Aggregate...}, "lambdas": {"<controller>": x}}.
 */

#include "rddpc/linalg.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rddpc::harness {

/// Outcome of the realised-cost certificate for one rollout.
struct BoundCheckRecord
{
  Index step{0};
  bool membership{false};  ///< precondition verified on the realised rollout
  double lambda_needed{0.0};
  double realized{0.0};
  double bound{0.0};
  bool passed{false};
};

struct TrialRecord
{
  std::string controller;
  double lambda{0.0};
  std::uint64_t seed{0};
  Index warmup{0};                 ///< zero-input steps before the test window
  MatrixXd u;                      ///< nu x T test inputs
  MatrixXd y;                      ///< ny x T measured outputs
  MatrixXd y_ref;                  ///< ny x T reference
  std::vector<double> solve_seconds;
  std::vector<double> assembly_seconds;
  std::vector<std::string> status;
  std::vector<int> iterations;
  Index failures{0};               ///< steps where the previous input was held
  double J_total{0.0};
  std::string noise_digest;        ///< FNV-1a of the plant noise stream
  std::string trajectory_file;     ///< CSV path when written
  std::vector<BoundCheckRecord> bound_checks;
  std::string error;               ///< non-empty when the trial aborted
};

struct Quantiles
{
  double min{0.0}, q1{0.0}, median{0.0}, q3{0.0}, max{0.0};
};

/// Linear-interpolation quantiles of a non-empty sample.
Quantiles quantiles(std::vector<double> values);

struct Aggregate
{
  Index trials{0};
  Index failed_trials{0};
  double mean_J{0.0};
  double std_J{0.0};  ///< sample standard deviation (0 for one trial)
  double median_J{0.0};
  Quantiles box;
  double solve_p50{0.0}, solve_p90{0.0}, solve_max{0.0};
  double assembly_p50{0.0};
};

/// Statistics over the trials that completed.
Aggregate aggregate(const std::vector<const TrialRecord *> & trials);

struct ExperimentReport
{
  nlohmann::json config;
  std::vector<TrialRecord> trials;
  std::map<std::string, Aggregate> aggregate;
  std::map<std::string, double> lambdas;

  /// Recompute `aggregate` from `trials`.
  void reaggregate();
};

nlohmann::json to_json(const TrialRecord & t);
TrialRecord trial_from_json(const nlohmann::json & j);
nlohmann::json to_json(const Aggregate & a);
Aggregate aggregate_from_json(const nlohmann::json & j);
nlohmann::json to_json(const ExperimentReport & r);
ExperimentReport report_from_json(const nlohmann::json & j);

void write_report(const ExperimentReport & r, const std::string & path);
ExperimentReport read_report(const std::string & path);

/// FNV-1a 64-bit over the raw bytes of the values, as 16 hex digits.
std::string fnv1a_digest(const MatrixXd & a, const MatrixXd & b);

/// Per controller and step: mean and standard deviation of u and of every output channel.
void write_band_csv(const ExperimentReport & r, const std::string & path);

struct GridRow
{
  std::string controller;
  double lambda{0.0};
  double mean_J{0.0};
  double std_J{0.0};
  bool argmin{false};
};

/// Columns controller,lambda,mean_J,std_J (argmin rows are not marked in the CSV).
void write_grid_csv(const std::vector<GridRow> & rows, const std::string & path);
std::vector<GridRow> read_grid_csv(const std::string & path);

struct TimingRow
{
  std::string formulation;
  Index N{0};
  Index repeats{0};
  double median_solve{0.0};
  double median_assembly{0.0};
  int iterations{0};
  std::string status;
};

void write_timing_csv(const std::vector<TimingRow> & rows, const std::string & path);

}  // namespace rddpc::harness
