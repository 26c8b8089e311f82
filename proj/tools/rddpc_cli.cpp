// Command-line front end: data collection, Lambda tuning, single runs,
// Monte Carlo campaigns, grid search, solver timing and verification.

#include "rddpc/harness.hpp"
#include "rddpc/verification.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace rddpc;
using namespace rddpc::harness;

namespace {

struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct Globals
{
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  Index workers{-1};
};

ExperimentConfig load(const Globals & g)
{
  ExperimentConfig cfg;
  if (!g.config_path.empty()) {
    try {
      cfg = load_config(g.config_path);
    } catch (const std::invalid_argument & e) {
      throw UsageError(e.what());
    }
  }
  if (g.seed) { cfg.seed = *g.seed; }
  if (!g.out.empty()) { cfg.output_dir = g.out; }
  if (g.workers >= 0) { cfg.workers = g.workers; }
  fs::create_directories(cfg.output_dir);
  return cfg;
}

std::vector<ControllerKind> kinds_from(const std::vector<std::string> & names, const ExperimentConfig & cfg)
{
  if (names.empty()) { return cfg.controller_kinds(); }
  std::vector<ControllerKind> out;
  for (const auto & n : names) {
    try {
      out.push_back(controller_from_string(n));
    } catch (const std::invalid_argument & e) {
      throw UsageError(e.what());
    }
  }
  return out;
}

std::string path_in(const ExperimentConfig & cfg, const std::string & name) { return (fs::path(cfg.output_dir) / name).string(); }

int cmd_collect(const Globals & g, bool validation, Index length)
{
  const auto cfg   = load(g);
  const auto model = sim::make_two_mass_model(cfg.plant);
  const auto seed  = validation ? cfg.validation.seed : cfg.data.seed;
  const Index n    = length > 0 ? length : (validation ? cfg.validation.length : cfg.data.length);
  const auto traj  = collect_data(cfg, model, seed, n);
  const auto path  = path_in(cfg, validation ? "validation.csv" : "data.csv");
  sim::write_trajectory_csv(traj, path);
  std::cout << "wrote " << path << " (" << traj.length() << " samples)\n";
  return 0;
}

int cmd_tune(const Globals & g, const std::string & data_csv)
{
  const auto cfg = load(g);
  const Scenario sc = data_csv.empty() ? prepare_scenario(cfg, cfg.data.seed) : prepare_scenario(cfg, sim::read_trajectory_csv(data_csv));
  std::cout << std::setprecision(10) << harness::tune_lambda(cfg, sc) << '\n';
  return 0;
}

double lambda_for_run(const ExperimentConfig & cfg, const Scenario & sc, ControllerKind kind, std::optional<double> given)
{
  if (given) { return *given; }
  return resolve_lambdas(cfg, sc, {kind}).at(kind);
}

int cmd_run(const Globals & g, const std::string & controller, std::optional<double> lambda, bool checks)
{
  const auto cfg  = load(g);
  const auto kind = kinds_from({controller}, cfg).front();
  const auto sc   = prepare_scenario(cfg, cfg.data.seed);
  const double L  = lambda_for_run(cfg, sc, kind, lambda);
  RunOptions opt;
  opt.bound_checks = checks;
  opt.solver.max_iterations = cfg.max_solver_iterations;
  TrialRecord rec = run_receding_horizon(cfg, sc, kind, L, cfg.seed, opt);
  rec.trajectory_file = path_in(cfg, "trajectory_" + controller + ".csv");
  sim::Trajectory traj;
  traj.inputs  = rec.u;
  traj.outputs = rec.y;
  sim::write_trajectory_csv(traj, rec.trajectory_file);
  ExperimentReport rep;
  rep.config = to_json(cfg);
  rep.trials.push_back(rec);
  rep.lambdas[controller] = L;
  rep.reaggregate();
  const auto path = path_in(cfg, "report_" + controller + ".json");
  write_report(rep, path);
  std::cout << controller << " Lambda=" << L << " J_total=" << rec.J_total << " failures=" << rec.failures
            << "\nwrote " << rec.trajectory_file << "\nwrote " << path << '\n';
  return 0;
}

int cmd_montecarlo(const Globals & g, Index trials, const std::vector<std::string> & controllers, bool checks)
{
  const auto cfg   = load(g);
  const auto kinds = kinds_from(controllers, cfg);
  const auto sc    = prepare_scenario(cfg, cfg.data.seed);
  std::vector<GridRow> grid;
  const auto lambdas = resolve_lambdas(cfg, sc, kinds, &grid);
  RunOptions opt;
  opt.bound_checks = checks;
  opt.solver.max_iterations = cfg.max_solver_iterations;
  const auto rep = monte_carlo(cfg, kinds, lambdas, trials > 0 ? trials : cfg.trials, opt,
                               cfg.data.regenerate_per_trial ? nullptr : &sc);
  write_report(rep, path_in(cfg, "montecarlo.json"));
  write_band_csv(rep, path_in(cfg, "bands.csv"));
  if (!grid.empty()) { write_grid_csv(grid, path_in(cfg, "lambda_grid.csv")); }
  std::cout << std::setprecision(6);
  for (const auto & [name, a] : rep.aggregate) {
    std::cout << name << " Lambda=" << rep.lambdas.at(name) << " trials=" << a.trials << " failed=" << a.failed_trials
              << " mean_J=" << a.mean_J << " std_J=" << a.std_J << " median_J=" << a.median_J << '\n';
  }
  std::cout << "wrote " << path_in(cfg, "montecarlo.json") << '\n';
  return 0;
}

int cmd_grid(const Globals & g, const std::vector<std::string> & controllers)
{
  const auto cfg  = load(g);
  const auto sc   = prepare_scenario(cfg, cfg.data.seed);
  RunOptions opt;
  opt.solver.max_iterations = cfg.max_solver_iterations;
  const auto rows = grid_search_lambda(cfg, sc, kinds_from(controllers, cfg), cfg.lambda.grid, opt);
  write_grid_csv(rows, path_in(cfg, "lambda_grid.csv"));
  for (const auto & r : rows) {
    std::cout << r.controller << ' ' << r.lambda << ' ' << r.mean_J << ' ' << r.std_J << (r.argmin ? " *" : "") << '\n';
  }
  return 0;
}

int cmd_bench(const Globals & g, std::vector<Index> N_values, bool no_full)
{
  const auto cfg = load(g);
  if (N_values.empty()) { N_values = cfg.bench.N_values; }
  const auto rows = benchmark_solve_times(cfg, N_values, !no_full);
  write_timing_csv(rows, path_in(cfg, "timing.csv"));
  for (const auto & r : rows) {
    std::cout << r.formulation << " N=" << r.N << " median_solve=" << r.median_solve << "s status=" << r.status << '\n';
  }
  return 0;
}

int cmd_verify(const Globals & g, Index instances)
{
  const auto cfg = load(g);
  int failures   = 0;
  double worst_rel = 0.0, worst_du = 0.0;
  for (Index i = 0; i < instances; ++i) {
    const auto inst = verify::make_synthetic_instance(1 + i % 3, cfg.seed + static_cast<std::uint64_t>(i));
    const auto cmp  = verify::compare_with_oracle(inst);
    if (!cmp.solved) {
      ++failures;
      continue;
    }
    worst_rel = std::max(worst_rel, cmp.rel_error);
    worst_du  = std::max(worst_du, cmp.u_diff);
  }
  std::cout << "oracle: " << instances << " instances, unsolved " << failures << ", worst relative psi error "
            << worst_rel << ", worst full/compressed input gap " << worst_du << '\n';

  const auto sc    = prepare_scenario(cfg, cfg.data.seed);
  const double lam = harness::tune_lambda(cfg, sc);
  std::cout << "tuned Lambda " << lam << '\n';
  if (!sc.offline.has_clean()) { return failures ? 1 : 0; }
  const auto clean = partition(sc.offline.clean(), cfg.control.Lp, cfg.control.Lf);
  const auto nb    = verify::ar_noise_bounds(cfg.noise_u(), cfg.noise_y(), sc.model.Bv);
  const auto val   = collect_data(cfg, sc.model, cfg.validation.seed, cfg.validation.length);
  const auto slice = verify::make_validation_slices(val, cfg.control.Lp, cfg.control.Lf, 1).front();
  try {
    const auto t1 = verify::theorem1_lambda_o(sc.data, clean, sc.model.nx(), nb.xi_u, nb.xi_y,
                                              vcat({slice.u_p, slice.u_f, slice.y_p}));
    std::cout << "Lambda_o " << t1.Lambda_o << " (ratio to tuned " << (lam > 0 ? t1.Lambda_o / lam : 0.0) << ")\n";
  } catch (const std::domain_error & e) {
    std::cout << "Lambda_o unavailable: " << e.what() << '\n';
  }
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Robust data-driven predictive control experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "campaign seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--workers", g.workers, "worker threads (0 = all cores)");

  auto * collect = app.add_subcommand("collect", "record offline data to CSV");
  bool validation = false;
  Index length    = 0;
  collect->add_flag("--validation", validation, "record the held-out validation set instead");
  collect->add_option("--length", length, "samples (default from config)");

  auto * tune = app.add_subcommand("tune-lambda", "smallest Lambda enclosing the validation slices");
  std::string data_csv;
  tune->add_option("--data", data_csv, "offline data CSV (default: simulate from config)")->check(CLI::ExistingFile);

  auto * run = app.add_subcommand("run", "one receding-horizon trial");
  std::string controller = "spc";
  std::optional<double> lambda;
  bool checks = false;
  run->add_option("--controller", controller, "spc | pbr | rddpc | frddpc");
  run->add_option("--lambda", lambda, "fixed Lambda (default from config)");
  run->add_flag("--bound-checks", checks, "evaluate the realised-cost certificates");

  auto * mc = app.add_subcommand("montecarlo", "paired-seed campaign");
  Index trials = 0;
  std::vector<std::string> controllers;
  mc->add_option("--trials", trials, "number of trials (default from config)");
  mc->add_option("--controller", controllers, "controllers (repeatable; default from config)");
  mc->add_flag("--bound-checks", checks, "evaluate the realised-cost certificates");

  auto * grid = app.add_subcommand("gridsearch", "mean J_total over the Lambda grid");
  grid->add_option("--controller", controllers, "controllers (repeatable; default from config)");

  auto * bench = app.add_subcommand("bench", "solver time versus data length");
  std::vector<Index> N_values;
  bool no_full = false;
  bench->add_option("--N", N_values, "data lengths (default from config)");
  bench->add_flag("--no-full", no_full, "skip the full-size SDPs");

  auto * ver = app.add_subcommand("verify", "oracle and theory-bound checks");
  Index instances = 30;
  ver->add_option("--instances", instances, "synthetic oracle instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*collect) { return cmd_collect(g, validation, length); }
    if (*tune) { return cmd_tune(g, data_csv); }
    if (*run) { return cmd_run(g, controller, lambda, checks); }
    if (*mc) { return cmd_montecarlo(g, trials, controllers, checks); }
    if (*grid) { return cmd_grid(g, controllers); }
    if (*bench) { return cmd_bench(g, N_values, no_full); }
    if (*ver) { return cmd_verify(g, instances); }
  } catch (const UsageError & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
