// Acceptance suite: runs criteria 1-9 on the benchmark and prints one
// PASS/FAIL line per criterion.

#include "rddpc/harness.hpp"
#include "rddpc/verification.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace rddpc;
using namespace rddpc::harness;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome
{
  int id{0};
  std::string title;
  bool pass{false};
  std::string detail;
  double seconds{0.0};
};

std::string fmt(double v)
{
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

double max_abs_diff(const MatrixXd & a, const MatrixXd & b)
{
  if (a.size() != b.size()) { return std::numeric_limits<double>::infinity(); }
  return (a - b).cwiseAbs().maxCoeff();
}

ExperimentConfig noise_free(ExperimentConfig cfg)
{
  cfg.noise.sigma_u = 0.0;
  cfg.noise.sigma_y = 0.0;
  return cfg;
}

double mean_of(const ExperimentReport & rep, const std::string & name) { return rep.aggregate.at(name).mean_J; }

Index failed_of(const ExperimentReport & rep)
{
  Index n = 0;
  for (const auto & [name, a] : rep.aggregate) { n += a.failed_trials; }
  return n;
}

/// Shared Monte Carlo campaign with boundary sampling on every robust solve.
struct Campaign
{
  ExperimentReport report;
  std::map<ControllerKind, double> lambdas;
  Index sampled_solves{0};
  Index sampling_failures{0};
  double worst_constraint{-std::numeric_limits<double>::infinity()};
  double worst_cost_excess{-std::numeric_limits<double>::infinity()};
  Index bound_total{0};
  Index bound_verified{0};
  Index bound_verified_failed{0};
  double seconds{0.0};
};

Campaign run_campaign(const ExperimentConfig & cfg, const Scenario & sc, Index trials, Index samples)
{
  const auto t0 = Clock::now();
  Campaign c;
  const auto kinds = cfg.controller_kinds();
  c.lambdas        = resolve_lambdas(cfg, sc, kinds);
  std::mutex mtx;
  RunOptions opt;
  opt.bound_checks          = true;
  opt.solver.max_iterations = cfg.max_solver_iterations;
  opt.hook = [&](const StepContext & ctx) {
    if (ctx.kind != ControllerKind::rddpc && ctx.kind != ControllerKind::frddpc) { return; }
    if (!ctx.solution.ok()) { return; }
    std::mt19937_64 rng(0x5eedULL * 1000003ULL + static_cast<std::uint64_t>(ctx.step) * 7919ULL
                        + static_cast<std::uint64_t>(ctx.kind));
    const auto rep = verify::sample_robust_feasibility(ctx.scenario.view, ctx.config, ctx.solution,
                                                       ctx.kind == ControllerKind::frddpc, samples, rng, 1e-6);
    const double excess = (rep.worst_cost - rep.certificate) / (1.0 + std::abs(rep.certificate));
    std::lock_guard lock(mtx);
    ++c.sampled_solves;
    if (!rep.passed) { ++c.sampling_failures; }
    c.worst_constraint  = std::max({c.worst_constraint, rep.worst_output_violation, rep.worst_input_violation});
    c.worst_cost_excess = std::max(c.worst_cost_excess, excess);
  };
  c.report = monte_carlo(cfg, kinds, c.lambdas, trials, opt, &sc);
  for (const auto & t : c.report.trials) {
    for (const auto & b : t.bound_checks) {
      ++c.bound_total;
      if (b.membership) {
        ++c.bound_verified;
        if (!b.passed) { ++c.bound_verified_failed; }
      }
    }
  }
  c.seconds = since(t0);
  return c;
}

Outcome criterion1(const ExperimentConfig & base)
{
  const auto t0 = Clock::now();
  auto cfg      = noise_free(base);
  cfg.reference.length = 20;
  const Scenario sc    = prepare_scenario(cfg, cfg.data.seed);
  const auto spc       = run_receding_horizon(cfg, sc, ControllerKind::spc, 0.0, cfg.seed);
  const auto r         = run_receding_horizon(cfg, sc, ControllerKind::rddpc, 0.5, cfg.seed);
  const auto fr        = run_receding_horizon(cfg, sc, ControllerKind::frddpc, 0.5, cfg.seed);
  const double dr      = max_abs_diff(r.u, spc.u);
  const double dfr     = max_abs_diff(fr.u, spc.u);
  const Index failures = spc.failures + r.failures + fr.failures;
  Outcome o{1, "noise-free equivalence"};
  o.seconds = since(t0);
  o.pass    = failures == 0 && dr <= 1e-5 && dfr <= 1e-4 && o.seconds < 120.0;
  o.detail  = "max|u_R - u_SPC| " + fmt(dr) + " (<= 1e-5), max|u_FR - u_SPC| " + fmt(dfr) + " (<= 1e-4), failed solves "
             + std::to_string(failures) + ", runtime " + fmt(o.seconds) + " s (< 120)";
  return o;
}

Outcome criterion2(const ExperimentConfig & base)
{
  const auto t0 = Clock::now();
  const auto cfg_clean  = noise_free(base);
  const Scenario clean  = prepare_scenario(cfg_clean, cfg_clean.data.seed);
  const Scenario noisy  = prepare_scenario(base, base.data.seed);
  const double ratio    = spectral_norm(clean.data.M) / spectral_norm(clean.data.Yf);
  const VectorXd sv     = singular_values(noisy.data.M);
  const double smin     = sv(sv.size() - 1);
  const double rank_tol = static_cast<double>(std::max(noisy.data.M.rows(), noisy.data.M.cols()))
                        * std::numeric_limits<double>::epsilon() * sv(0);
  Outcome o{2, "fundamental lemma residual"};
  o.seconds = since(t0);
  o.pass    = ratio <= 1e-8 && smin > rank_tol;
  o.detail  = "noise-free ||Y_f PhiPerp||/||Y_f|| " + fmt(ratio) + " (<= 1e-8); noisy sigma_min(Y_f PhiPerp) " + fmt(smin)
             + " vs round-off level " + fmt(rank_tol) + ", numerical rank " + std::to_string(numerical_rank(noisy.data.M))
             + " of " + std::to_string(noisy.data.M.rows());
  return o;
}

Outcome criterion3(const ExperimentConfig & cfg)
{
  const auto t0 = Clock::now();
  conic::SolveSettings st;
  st.feasibility_tol = st.gap_tol = 1e-10;
  Index unsolved = 0;
  double worst_rel = 0.0, worst_du = 0.0;
  for (Index i = 0; i < 50; ++i) {
    const auto inst = verify::make_synthetic_instance(1 + i % 3, cfg.seed + 7000 + static_cast<std::uint64_t>(i));
    const auto cmp  = verify::compare_with_oracle(inst, st);
    if (!cmp.solved) {
      ++unsolved;
      continue;
    }
    worst_rel = std::max(worst_rel, cmp.rel_error);
    worst_du  = std::max(worst_du, cmp.u_diff);
  }
  Outcome o{3, "SDP-oracle equivalence"};
  o.seconds = since(t0);
  o.pass    = unsolved == 0 && worst_rel <= 1e-3 && worst_du <= 1e-5 && o.seconds < 300.0;
  o.detail  = "50 instances, unsolved " + std::to_string(unsolved) + ", worst rel. psi error " + fmt(worst_rel)
             + " (<= 1e-3), worst full/compressed u_f gap " + fmt(worst_du) + " (<= 1e-5), runtime " + fmt(o.seconds)
             + " s (< 300)";
  return o;
}

Outcome criterion4(const Campaign & c)
{
  Outcome o{4, "robust feasibility sampling"};
  o.pass   = c.sampled_solves > 0 && c.sampling_failures == 0;
  o.detail = std::to_string(c.sampled_solves) + " robust solves x 1000 boundary samples, failing solves "
             + std::to_string(c.sampling_failures) + ", worst constraint value " + fmt(c.worst_constraint)
             + " (<= 1e-6), worst rel. cost excess over psi " + fmt(c.worst_cost_excess) + " (<= 1e-6)";
  return o;
}

Outcome criterion5(const Campaign & c, Index trials)
{
  const auto & rep  = c.report;
  const double spc  = mean_of(rep, "spc");
  const double pbr  = mean_of(rep, "pbr");
  const double r    = mean_of(rep, "rddpc");
  const double fr   = mean_of(rep, "frddpc");
  const double drel = std::abs(pbr - spc) / spc;
  Outcome o{5, "Monte Carlo ranking"};
  o.seconds = c.seconds;
  o.pass    = trials >= 30 && failed_of(rep) == 0 && fr <= r && r < spc && drel <= 0.05 && c.seconds < 1800.0;
  o.detail  = std::to_string(trials) + " paired trials, mean J_total SPC " + fmt(spc) + ", PBR " + fmt(pbr) + " (Lambda "
             + fmt(c.lambdas.at(ControllerKind::pbr)) + "), R " + fmt(r) + ", FR " + fmt(fr) + " (Lambda "
             + fmt(c.lambdas.at(ControllerKind::rddpc)) + "); |PBR-SPC|/SPC " + fmt(drel) + " (<= 0.05), failed trials "
             + std::to_string(failed_of(rep)) + ", runtime " + fmt(c.seconds) + " s (< 1800)";
  return o;
}

Outcome criterion6(const ExperimentConfig & base, const Scenario & sc, double tuned)
{
  const auto t0 = Clock::now();
  const auto cfg_clean = noise_free(base);
  const Scenario clean = prepare_scenario(cfg_clean, cfg_clean.data.seed);
  const double tuned0  = harness::tune_lambda(cfg_clean, clean);
  std::vector<double> grid = base.lambda.grid;
  grid.push_back(tuned);
  RunOptions opt;
  opt.solver.max_iterations = base.max_solver_iterations;
  const auto rows = grid_search_lambda(base, sc, {ControllerKind::rddpc}, grid, opt);
  double best = std::numeric_limits<double>::infinity(), best_lambda = 0.0, at_tuned = 0.0;
  for (const auto & r : rows) {
    if (r.lambda == tuned) { at_tuned = r.mean_J; }
    if (r.mean_J < best) {
      best        = r.mean_J;
      best_lambda = r.lambda;
    }
  }
  const double gap = at_tuned / best - 1.0;
  Outcome o{6, "Lambda tuning"};
  o.seconds = since(t0);
  o.pass    = tuned0 <= 1e-10 && tuned >= 0.05 && tuned <= 5.0 && gap <= 0.10;
  o.detail  = "noise-free tuned " + fmt(tuned0) + " (<= 1e-10); noisy tuned " + fmt(tuned) + " (in [0.05, 5]); R mean J at tuned "
             + fmt(at_tuned) + " vs grid optimum " + fmt(best) + " at Lambda " + fmt(best_lambda) + " over "
             + std::to_string(base.lambda.grid_trials) + " trials, excess " + fmt(100.0 * gap) + "% (<= 10%)";
  return o;
}

Outcome criterion7(const ExperimentConfig & cfg, const Scenario & sc, double tuned, const Campaign & c)
{
  const auto t0 = Clock::now();
  Outcome o{7, "theorem bounds"};
  double ratio = 0.0, Lambda_o = 0.0;
  std::string note;
  if (sc.offline.has_clean()) {
    const auto clean = partition(sc.offline.clean(), cfg.control.Lp, cfg.control.Lf);
    const auto nb    = verify::ar_noise_bounds(cfg.noise_u(), cfg.noise_y(), sc.model.Bv);
    const auto val   = collect_data(cfg, sc.model, cfg.validation.seed, cfg.validation.length);
    const auto slice = verify::make_validation_slices(val, cfg.control.Lp, cfg.control.Lf, 1).front();
    try {
      Lambda_o = verify::theorem1_lambda_o(sc.data, clean, sc.model.nx(), nb.xi_u, nb.xi_y,
                                           vcat({slice.u_p, slice.u_f, slice.y_p}))
                   .Lambda_o;
      ratio = tuned > 0.0 ? Lambda_o / tuned : 0.0;
    } catch (const std::domain_error & e) {
      note = std::string(", Lambda_o unavailable: ") + e.what();
    }
  }
  o.seconds = since(t0);
  o.pass    = ratio >= 1e4 && c.bound_verified_failed == 0;
  o.detail  = "Lambda_o " + fmt(Lambda_o) + ", ratio to tuned " + fmt(ratio) + " (>= 1e4)" + note + "; cost bound on "
             + std::to_string(c.bound_verified) + " membership-verified rollouts of " + std::to_string(c.bound_total)
             + ", failures " + std::to_string(c.bound_verified_failed);
  return o;
}

Outcome criterion8(const ExperimentConfig & base)
{
  const auto t0 = Clock::now();
  auto cfg      = base;
  cfg.bench.N_values     = {100, 200, 400, 600};
  cfg.bench.full_repeats = 1;
  const auto rows = benchmark_solve_times(cfg, cfg.bench.N_values, true);
  auto time_of = [&](const std::string & f, Index N) {
    for (const auto & r : rows) {
      if (r.formulation == f && r.N == N) { return r.median_solve; }
    }
    return std::numeric_limits<double>::quiet_NaN();
  };
  bool ok = true;
  std::ostringstream d;
  for (const std::string f : {"rddpc", "frddpc"}) {
    const double red = time_of(f + "-reduced", 600), full = time_of(f + "-full", 600);
    const double growth = red / time_of(f + "-reduced", 100);
    ok = ok && red <= full / 3.0 && growth < 2.0;
    d << f << " reduced/full at N=600 " << fmt(red / full) << " (<= 1/3), reduced growth 100->600 " << fmt(growth)
      << "x (< 2); ";
  }
  bool qp_fastest = true;
  for (Index N : cfg.bench.N_values) {
    const double qp = std::max(time_of("spc-qp", N), time_of("pbr-qp", N));
    for (const std::string f : {"rddpc-reduced", "frddpc-reduced", "rddpc-full", "frddpc-full"}) {
      qp_fastest = qp_fastest && qp < time_of(f, N);
    }
  }
  for (const auto & r : rows) { ok = ok && r.status == "optimal"; }
  Outcome o{8, "timing ratios"};
  o.seconds = since(t0);
  o.pass    = ok && qp_fastest;
  o.detail  = d.str() + "QP fastest at every N: " + (qp_fastest ? "yes" : "no");
  return o;
}

Outcome criterion9(const ExperimentConfig & base, Index trials)
{
  const auto t0 = Clock::now();
  auto cfg      = base;
  cfg.data.mode        = DataMode::closed_loop_pid;
  cfg.reference.shape  = ReferenceShape::step;
  const Scenario sc    = prepare_scenario(cfg, cfg.data.seed);
  const auto kinds     = cfg.controller_kinds();
  const auto lambdas   = resolve_lambdas(cfg, sc, kinds);
  RunOptions opt;
  opt.solver.max_iterations = cfg.max_solver_iterations;
  const auto rep = monte_carlo(cfg, kinds, lambdas, trials, opt, &sc);
  std::map<std::string, double> err;
  std::map<std::string, Index> count;
  for (const auto & t : rep.trials) {
    if (!t.error.empty() || t.y.size() == 0) { continue; }
    const Index ch = cfg.reference.channel;
    err[t.controller] += (t.y.row(ch) - t.y_ref.row(ch)).squaredNorm() / static_cast<double>(t.y.cols());
    ++count[t.controller];
  }
  for (auto & [name, e] : err) { e /= static_cast<double>(std::max<Index>(1, count[name])); }
  const double open_best = std::min(err["spc"], err["pbr"]);
  Outcome o{9, "closed-loop-data robustness"};
  o.seconds = since(t0);
  o.pass    = trials >= 30 && failed_of(rep) == 0 && err["rddpc"] < open_best && err["frddpc"] < open_best;
  o.detail  = std::to_string(trials) + " trials on PID data, mean squared y1 step error SPC " + fmt(err["spc"]) + ", PBR "
             + fmt(err["pbr"]) + ", R " + fmt(err["rddpc"]) + ", FR " + fmt(err["frddpc"]) + " (tuned Lambda "
             + fmt(lambdas.at(ControllerKind::rddpc)) + "), failed trials " + std::to_string(failed_of(rep));
  return o;
}

nlohmann::json to_json(const Outcome & o)
{
  return {{"criterion", o.id}, {"title", o.title}, {"pass", o.pass}, {"detail", o.detail}, {"seconds", o.seconds}};
}

void print(const Outcome & o)
{
  std::cout << "criterion " << o.id << " [" << o.title << "]: " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
            << std::endl;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Acceptance criteria 1-9 on the benchmark"};
  std::string config_path, out_dir = "acceptance_out";
  Index trials = 30, samples = 1000;
  std::vector<int> only;
  bool strict = false;
  app.add_option("--config", config_path, "experiment config (JSON; default: built-in benchmark)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "directory for acceptance.json");
  app.add_option("--trials", trials, "Monte Carlo trials for criteria 5 and 9");
  app.add_option("--samples", samples, "boundary samples per robust solve (criterion 4)");
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 9));
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    cfg.output_dir       = out_dir;
    fs::create_directories(out_dir);
    const std::set<int> selected(only.begin(), only.end());
    auto want = [&](int id) { return selected.empty() || selected.count(id) > 0; };

    std::vector<Outcome> results;
    auto record = [&](Outcome o) {
      print(o);
      results.push_back(std::move(o));
    };
    if (want(1)) { record(criterion1(cfg)); }
    if (want(2)) { record(criterion2(cfg)); }
    if (want(3)) { record(criterion3(cfg)); }

    if (want(4) || want(5) || want(6) || want(7)) {
      const Scenario sc   = prepare_scenario(cfg, cfg.data.seed);
      const double tuned  = harness::tune_lambda(cfg, sc);
      std::optional<Campaign> campaign;
      if (want(4) || want(5) || want(7)) { campaign = run_campaign(cfg, sc, trials, samples); }
      if (want(4)) { record(criterion4(*campaign)); }
      if (want(5)) { record(criterion5(*campaign, trials)); }
      if (want(6)) { record(criterion6(cfg, sc, tuned)); }
      if (want(7)) { record(criterion7(cfg, sc, tuned, *campaign)); }
    }
    if (want(8)) { record(criterion8(cfg)); }
    if (want(9)) { record(criterion9(cfg, trials)); }

    Index passed = 0;
    nlohmann::json j = nlohmann::json::array();
    for (const auto & o : results) {
      passed += o.pass ? 1 : 0;
      j.push_back(to_json(o));
    }
    std::ofstream((fs::path(out_dir) / "acceptance.json").string()) << j.dump(2) << '\n';
    std::cout << "summary: " << passed << " of " << results.size() << " criteria passed" << std::endl;
    return strict && passed != static_cast<Index>(results.size()) ? 1 : 0;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
