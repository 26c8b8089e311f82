#include "rddpc/harness.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <atomic>
#include <fstream>

using namespace rddpc;
using namespace rddpc::harness;

namespace {

ExperimentConfig short_config(Index steps)
{
  ExperimentConfig cfg;
  cfg.reference.length = steps;
  cfg.workers          = 1;
  return cfg;
}

const Scenario & benchmark_scenario()
{
  static const Scenario sc = prepare_scenario(ExperimentConfig{}, 1);
  return sc;
}

}  // namespace

TEST_SUITE("harness_cli")
{
  TEST_CASE("j_total arithmetic")
  {
    const MatrixXd Q = VectorXd((VectorXd(4) << 1.0, 1e-4, 1e-4, 1e-4).finished()).asDiagonal();
    const MatrixXd R = MatrixXd::Constant(1, 1, 0.01);
    CHECK(j_total(MatrixXd::Zero(1, 100), MatrixXd::Zero(4, 100), MatrixXd::Zero(4, 100), Q, R) == 0.0);
    test::Rng rng(1);
    const MatrixXd yr = rng.matrix(4, 100);
    MatrixXd y        = yr;
    y.row(0).array() += 1.0;
    CHECK(j_total(MatrixXd::Zero(1, 100), y, yr, Q, R) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK_THROWS_AS(j_total(MatrixXd::Zero(1, 99), y, yr, Q, R), std::invalid_argument);
  }

  TEST_CASE("reference horizon holds the last value")
  {
    MatrixXd ref(2, 3);
    ref << 1, 2, 3, 4, 5, 6;
    const VectorXd h = reference_horizon(ref, 1, 4);
    VectorXd expected(8);
    expected << 2, 5, 3, 6, 3, 6, 3, 6;
    CHECK(h == expected);
  }

  TEST_CASE("square and step references on the tracked channel")
  {
    ExperimentConfig cfg;
    const MatrixXd sq = reference_matrix(cfg, 4, 100);
    CHECK(sq(0, 0) == 0.4);
    CHECK(sq(0, 50) == -0.4);
    CHECK(sq.bottomRows(3).isZero());
    cfg.reference.shape = ReferenceShape::step;
    CHECK((reference_matrix(cfg, 4, 10).row(0).array() == 0.4).all());
    cfg.reference.channel = 7;
    CHECK_THROWS_AS(reference_matrix(cfg, 4, 10), std::invalid_argument);
  }

  TEST_CASE("control config from the benchmark settings")
  {
    const auto cc = make_control_config(ExperimentConfig{});
    CHECK(cc.Q(0, 0) == 1.0);
    CHECK(cc.Q(3, 3) == 1e-4);
    CHECK(cc.R(0, 0) == 0.01);
    REQUIRE(cc.input_constraints.size() == 5);
    CHECK(cc.input_constraints[2].G(0, 2) == 0.2);
    REQUIRE(cc.output_constraints.size() == 2);
    CHECK(cc.output_constraints[0].G(2, 2) == 0.7);
    CHECK(cc.output_constraints[1].G(19, 19) == 0.7);
    CHECK(cc.output_constraints[1].G(0, 0) == 0.01);
  }

  TEST_CASE("one step with SPC gives one solve and one input")
  {
    const auto cfg = short_config(1);
    const auto rec = run_receding_horizon(cfg, benchmark_scenario(), ControllerKind::spc, 0.0, 7);
    CHECK(rec.solve_seconds.size() == 1);
    CHECK(rec.u.cols() == 1);
    CHECK(rec.y.cols() == 1);
    CHECK(rec.warmup == 5);
  }

  TEST_CASE("receding horizon rejects a mismatched scenario")
  {
    auto cfg       = short_config(3);
    cfg.control.Lf = 4;
    CHECK_THROWS_AS(run_receding_horizon(cfg, benchmark_scenario(), ControllerKind::spc, 0.0, 7), std::invalid_argument);
  }

  TEST_CASE("noise-free plant and data: SPC and robust inputs coincide")
  {
    auto cfg          = short_config(10);
    cfg.noise.sigma_u = cfg.noise.sigma_y = 0.0;
    const auto sc     = prepare_scenario(cfg, 1);
    const auto spc    = run_receding_horizon(cfg, sc, ControllerKind::spc, 0.0, 3);
    const auto r      = run_receding_horizon(cfg, sc, ControllerKind::rddpc, 0.5, 3);
    CHECK(r.failures == 0);
    CHECK(test::max_abs(spc.u - r.u) <= 1e-5);
  }

  TEST_CASE("benchmark smoke run")
  {
    const auto cfg = short_config(100);
    for (auto kind : {ControllerKind::spc, ControllerKind::rddpc}) {
      const auto rec = run_receding_horizon(cfg, benchmark_scenario(), kind, 0.05, 100);
      CHECK(std::isfinite(rec.J_total));
      CHECK(rec.failures == 0);
      for (const auto & s : rec.status) { CHECK(s == "optimal"); }
      CHECK(rec.J_total == doctest::Approx(j_total(rec.u, rec.y, rec.y_ref, make_control_config(cfg).Q,
                                                   make_control_config(cfg).R)).epsilon(1e-14));
    }
  }

  TEST_CASE("bound checks on open-loop rollouts")
  {
    const auto cfg = short_config(15);
    RunOptions opt;
    opt.bound_checks = true;
    const auto rec   = run_receding_horizon(cfg, benchmark_scenario(), ControllerKind::rddpc, 0.05, 100, opt);
    CHECK(rec.bound_checks.size() == 15);
    for (const auto & b : rec.bound_checks) {
      if (b.membership) { CHECK(b.passed); }
    }
  }

  TEST_CASE("step hook sees every solve")
  {
    const auto cfg = short_config(4);
    RunOptions opt;
    Index calls = 0;
    opt.hook    = [&](const StepContext & ctx) {
      CHECK(ctx.step == calls);
      CHECK(ctx.solution.ok());
      ++calls;
    };
    run_receding_horizon(cfg, benchmark_scenario(), ControllerKind::pbr, 0.01, 1, opt);
    CHECK(calls == 4);
  }

  TEST_CASE("paired seeds share the noise stream")
  {
    auto cfg  = short_config(5);
    const auto & sc = benchmark_scenario();
    const auto rep  = monte_carlo(cfg, {ControllerKind::spc, ControllerKind::pbr},
                                  {{ControllerKind::spc, 0.0}, {ControllerKind::pbr, 0.01}}, 3, {}, &sc);
    REQUIRE(rep.trials.size() == 6);
    for (Index i = 0; i < 3; ++i) {
      const auto & a = rep.trials[static_cast<std::size_t>(i)];
      const auto & b = rep.trials[static_cast<std::size_t>(3 + i)];
      CHECK(a.seed == b.seed);
      CHECK(a.noise_digest == b.noise_digest);
    }
    CHECK(rep.trials[0].noise_digest != rep.trials[1].noise_digest);
  }

  TEST_CASE("one-trial campaign aggregates to that trial")
  {
    auto cfg       = short_config(5);
    const auto rep = monte_carlo(cfg, {ControllerKind::spc}, {{ControllerKind::spc, 0.0}}, 1, {}, &benchmark_scenario());
    const auto & a = rep.aggregate.at("spc");
    CHECK(a.trials == 1);
    CHECK(a.mean_J == rep.trials[0].J_total);
    CHECK(a.median_J == rep.trials[0].J_total);
    CHECK(a.std_J == 0.0);
    CHECK(a.box.min == a.box.max);
    CHECK_THROWS_AS(monte_carlo(cfg, {ControllerKind::spc}, {{ControllerKind::spc, 0.0}}, 0), std::invalid_argument);
    CHECK_THROWS_AS(monte_carlo(cfg, {ControllerKind::rddpc}, {{ControllerKind::spc, 0.0}}, 1), std::invalid_argument);
  }

  TEST_CASE("failed trials are recorded and the campaign continues")
  {
    auto cfg = short_config(3);
    // Lambda < 0 makes every robust solve throw inside the trial.
    const auto rep = monte_carlo(cfg, {ControllerKind::rddpc}, {{ControllerKind::rddpc, -1.0}}, 2, {}, &benchmark_scenario());
    REQUIRE(rep.trials.size() == 2);
    CHECK_FALSE(rep.trials[0].error.empty());
    CHECK(rep.aggregate.at("rddpc").failed_trials == 2);
  }

  TEST_CASE("grid search over one value gives one row")
  {
    auto cfg              = short_config(3);
    cfg.lambda.grid_trials = 2;
    const auto rows       = grid_search_lambda(cfg, benchmark_scenario(), {ControllerKind::pbr}, {0.01});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].argmin);
    CHECK(std::isfinite(rows[0].mean_J));
    CHECK_THROWS_AS(grid_search_lambda(cfg, benchmark_scenario(), {ControllerKind::pbr}, {}), std::invalid_argument);
  }

  TEST_CASE("Lambda resolution")
  {
    auto cfg = short_config(3);
    cfg.lambda.per_controller.clear();
    cfg.lambda.per_controller["pbr"] = 0.25;
    const auto l = resolve_lambdas(cfg, benchmark_scenario(), {ControllerKind::spc, ControllerKind::pbr, ControllerKind::rddpc});
    CHECK(l.at(ControllerKind::spc) == 0.0);
    CHECK(l.at(ControllerKind::pbr) == 0.25);
    CHECK(l.at(ControllerKind::rddpc) == harness::tune_lambda(cfg, benchmark_scenario()));
  }

  TEST_CASE("parallel_for visits every index once")
  {
    std::vector<std::atomic<int>> hits(57);
    parallel_for(57, 3, [&](Index i) { hits[static_cast<std::size_t>(i)]++; });
    for (const auto & h : hits) { CHECK(h.load() == 1); }
    CHECK_THROWS_AS(parallel_for(5, 2, [](Index i) {
                      if (i == 3) { throw std::runtime_error("boom"); }
                    }),
                    std::runtime_error);
  }

  TEST_CASE("quantiles")
  {
    const auto q = quantiles({4.0, 1.0, 3.0, 2.0, 5.0});
    CHECK(q.min == 1.0);
    CHECK(q.q1 == 2.0);
    CHECK(q.median == 3.0);
    CHECK(q.q3 == 4.0);
    CHECK(q.max == 5.0);
    CHECK(quantiles({1.0, 2.0}).median == 1.5);
  }

  TEST_CASE("report JSON round trip and J recomputation from CSV")
  {
    auto cfg       = short_config(6);
    const auto dir = test::scratch_dir("report");
    cfg.output_dir = dir.string();
    RunOptions opt;
    opt.bound_checks = true;
    auto rep = monte_carlo(cfg, {ControllerKind::rddpc}, {{ControllerKind::rddpc, 0.05}}, 2, opt, &benchmark_scenario());
    for (auto & t : rep.trials) {
      t.trajectory_file = (dir / ("trial_" + std::to_string(t.seed) + ".csv")).string();
      sim::Trajectory tr;
      tr.inputs  = t.u;
      tr.outputs = t.y;
      sim::write_trajectory_csv(tr, t.trajectory_file);
    }
    const auto path = (dir / "report.json").string();
    write_report(rep, path);
    const auto back = read_report(path);
    CHECK(to_json(back) == to_json(rep));
    CHECK(to_json(back).dump(2) == to_json(rep).dump(2));

    const auto cc = make_control_config(cfg);
    for (const auto & t : back.trials) {
      const auto tr = sim::read_trajectory_csv(t.trajectory_file);
      CHECK(std::abs(j_total(tr.inputs, tr.outputs, t.y_ref, cc.Q, cc.R) - t.J_total) <= 1e-10);
    }

    ExperimentReport again = back;
    again.aggregate.clear();
    again.reaggregate();
    CHECK(to_json(again.aggregate.at("rddpc")) == to_json(back.aggregate.at("rddpc")));
    const auto j = to_json(back);
    CHECK(j.contains("config"));
    CHECK(j.contains("trials"));
    CHECK(j.contains("aggregate"));
  }

  TEST_CASE("band and grid CSV")
  {
    const auto dir = test::scratch_dir("csv");
    auto cfg       = short_config(4);
    const auto rep = monte_carlo(cfg, {ControllerKind::spc}, {{ControllerKind::spc, 0.0}}, 2, {}, &benchmark_scenario());
    write_band_csv(rep, (dir / "bands.csv").string());
    std::ifstream in(dir / "bands.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "controller,step,signal,mean,std");
    Index lines = 0;
    for (std::string l; std::getline(in, l);) { ++lines; }
    CHECK(lines == 4 * 5);

    std::vector<GridRow> rows{{"pbr", 1e-10, 4.5, 0.1, true}, {"rddpc", 0.3, 3.25, 0.2, false}};
    write_grid_csv(rows, (dir / "grid.csv").string());
    const auto back = read_grid_csv((dir / "grid.csv").string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].controller == "pbr");
    CHECK(back[0].lambda == 1e-10);
    CHECK(back[1].mean_J == 3.25);
  }

  TEST_CASE("noise digest")
  {
    const MatrixXd a = MatrixXd::Ones(2, 3), b = MatrixXd::Zero(1, 3);
    CHECK(fnv1a_digest(a, b).size() == 16);
    CHECK(fnv1a_digest(a, b) == fnv1a_digest(a, b));
    CHECK(fnv1a_digest(a, b) != fnv1a_digest(b, a));
  }

  TEST_CASE("config JSON round trip and validation")
  {
    ExperimentConfig cfg;
    cfg.trials          = 7;
    cfg.control.reduced = false;
    cfg.lambda.fallback = 0.3;
    const auto back = config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    CHECK(std::get<double>(back.lambda_for(ControllerKind::rddpc)) == 0.3);
    CHECK(std::get<std::string>(back.lambda_for(ControllerKind::pbr)) == "grid");
    CHECK(std::get<double>(back.lambda_for(ControllerKind::spc)) == 0.0);

    CHECK(config_from_json(nlohmann::json::object()).trials == 30);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"trails", 3}}), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"trials", "many"}}), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"control", {{"q_diag", {1.0, -1.0, 1.0, 1.0}}}}}), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"controllers", {"lqr"}}}), std::invalid_argument);
  }

  TEST_CASE("bundled benchmark config equals the defaults")
  {
    const auto cfg = load_config(std::string(RDDPC_SOURCE_DIR) + "/configs/benchmark.json");
    CHECK(to_json(cfg) == to_json(ExperimentConfig{}));
  }
}
