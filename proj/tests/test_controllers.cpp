#include "rddpc/controllers.hpp"
#include "rddpc/harness.hpp"
#include "rddpc/verification.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace rddpc;

namespace {

/// One-step scalar toy with prediction b = u and deviation M w, ||w||^2 <= Lambda.
PredictorView scalar_view(double m)
{
  DataDims d{1, 1, 0, 1, 1};
  return PredictorView::custom(d, MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 0), MatrixXd::Constant(1, 1, m),
                               MatrixXd::Identity(1, 1));
}

ControlConfig scalar_config(double q, double r, double y_r, double Lambda)
{
  ControlConfig c;
  c.Lp     = 0;
  c.Lf     = 1;
  c.Q      = MatrixXd::Constant(1, 1, q);
  c.R      = MatrixXd::Constant(1, 1, r);
  c.y_r    = VectorXd::Constant(1, y_r);
  c.Lambda = Lambda;
  return c;
}

struct Bench
{
  BehavioralData data;
  ReducedData reduced;
  PredictorView view;
  ControlConfig config;
  VectorXd u_p, y_p;
};

/// Benchmark data with the default constraints; the past window is taken from the data itself.
const Bench & bench(bool noisy)
{
  auto make = [](bool n) {
    Bench b;
    b.data    = test::benchmark_partition(n);
    b.reduced = svd_reduce(b.data);
    b.view    = PredictorView::compressed(b.reduced);
    harness::ExperimentConfig cfg;
    b.config  = harness::make_control_config(cfg);
    VectorXd yr = VectorXd::Zero(20);
    for (Index i = 0; i < 5; ++i) { yr(4 * i) = 0.4; }
    b.config.y_r = yr;
    const auto tr = test::benchmark_data(n);
    b.u_p = tr.inputs.middleCols(300, 5).reshaped();
    b.y_p = tr.outputs.middleCols(300, 5).reshaped();
    return b;
  };
  static const Bench clean = make(false);
  static const Bench noise = make(true);
  return noisy ? noise : clean;
}

ControlConfig unconstrained(ControlConfig c)
{
  c.input_constraints.clear();
  c.output_constraints.clear();
  return c;
}

/// Same predictor with the deviation matrix set exactly to zero.
PredictorView without_deviation(const PredictorView & v)
{
  return PredictorView::custom(v.dims, v.Mf, v.Mp, MatrixXd::Zero(v.M.rows(), v.M.cols()), v.PhiPerp);
}

double robust_objective(const RobustSolution & s, const ControlConfig & c)
{
  return s.psi + s.u_f.dot(c.R_horizon() * s.u_f);
}

}  // namespace

TEST_SUITE("controllers")
{
  TEST_CASE("SPC with zero reference and zero past returns zero input")
  {
    const auto & b = bench(true);
    auto c         = b.config;
    c.y_r.setZero();
    const auto s = solve_spc(b.view, c, VectorXd::Zero(5), VectorXd::Zero(20));
    REQUIRE(s.ok());
    CHECK(test::max_abs(s.u_f) <= 1e-6);
  }

  TEST_CASE("SPC scalar toy")
  {
    const auto s = solve_spc(scalar_view(0.0), scalar_config(1.0, 1.0, 1.0, 0.0), VectorXd(), VectorXd());
    REQUIRE(s.ok());
    CHECK(s.u_f(0) == doctest::Approx(0.5).epsilon(1e-6));
  }

  TEST_CASE("SPC matches the closed-form least-squares input")
  {
    for (bool noisy : {false, true}) {
      const auto & b = bench(noisy);
      const auto c   = unconstrained(b.config);
      const auto s   = solve_spc(b.view, c, b.u_p, b.y_p);
      REQUIRE(s.ok());
      const MatrixXd Qh = c.Q_horizon(), Rh = c.R_horizon();
      const VectorXd off = b.data.Mp * vcat({b.u_p, b.y_p}) - c.y_r;
      const MatrixXd H   = b.data.Mf.transpose() * Qh * b.data.Mf + Rh;
      const VectorXd u   = -H.ldlt().solve(b.data.Mf.transpose() * Qh * off);
      CHECK(test::max_abs(s.u_f - u) <= 1e-6);
    }
  }

  TEST_CASE("SPC reports infeasible constraints")
  {
    auto c = scalar_config(1.0, 1.0, 0.0, 0.0);
    // ||(u - 3)||^2 <= 1 and ||u + 3||^2 <= 1 cannot both hold.
    c.input_constraints.push_back({MatrixXd::Ones(1, 1), VectorXd::Constant(1, -3.0)});
    c.input_constraints.push_back({MatrixXd::Ones(1, 1), VectorXd::Constant(1, 3.0)});
    const auto s = solve_spc(scalar_view(0.0), c, VectorXd(), VectorXd());
    CHECK_FALSE(s.ok());
  }

  TEST_CASE("PBR at Lambda = 0 or with a huge penalty equals SPC")
  {
    const auto & b = bench(true);
    const auto spc = solve_spc(b.view, b.config, b.u_p, b.y_p);
    const auto z   = solve_pbr(b.view, b.config, b.u_p, b.y_p, PbrMode::constraint(0.0));
    const auto big = solve_pbr(b.view, b.config, b.u_p, b.y_p, PbrMode::penalty(1e10));
    REQUIRE(spc.ok());
    REQUIRE(z.ok());
    REQUIRE(big.ok());
    CHECK(test::max_abs(z.u_f - spc.u_f) <= 1e-6);
    CHECK(test::max_abs(big.u_f - spc.u_f) <= 1e-6);
  }

  TEST_CASE("PBR penalty and constraint modes correspond")
  {
    const auto & b = bench(true);
    const auto c   = unconstrained(b.config);
    for (double lambda : {1e-3, 1e-2, 0.1}) {
      const auto pen = solve_pbr(b.view, c, b.u_p, b.y_p, PbrMode::penalty(lambda));
      REQUIRE(pen.ok());
      const double Lambda = (b.view.PhiPerp * pen.w).squaredNorm();
      REQUIRE(Lambda > 0.0);
      const auto con = solve_pbr(b.view, c, b.u_p, b.y_p, PbrMode::constraint(Lambda));
      REQUIRE(con.ok());
      CHECK(test::max_abs(pen.u_f - con.u_f) <= 1e-5);
    }
  }

  TEST_CASE("PBR objective never exceeds SPC")
  {
    const auto & b = bench(true);
    const auto spc = solve_spc(b.view, b.config, b.u_p, b.y_p);
    for (double Lambda : {1e-4, 0.05, 1.0}) {
      const auto pbr = solve_pbr(b.view, b.config, b.u_p, b.y_p, PbrMode::constraint(Lambda));
      REQUIRE(pbr.ok());
      CHECK(pbr.objective <= spc.objective + 1e-7);
    }
  }

  TEST_CASE("robust program layout on the benchmark")
  {
    const auto & b = bench(true);
    auto c         = b.config;
    c.Lambda       = 0.1;
    const auto a   = assemble_rddpc(b.view, c, b.u_p, b.y_p);
    REQUIRE(a.program.lmis().size() == 3);
    for (const auto & lmi : a.program.lmis()) { CHECK(lmi.dim() == 1 + 50 + 20); }
    CHECK(a.mu.size() == 2);
    c.Lambda = 0.0;
    CHECK_THROWS_AS(assemble_rddpc(b.view, c, b.u_p, b.y_p), std::invalid_argument);
  }

  TEST_CASE("robust scalar toy")
  {
    const auto s = solve_rddpc(scalar_view(1.0), scalar_config(1.0, 0.0, 0.0, 0.25), VectorXd(), VectorXd());
    REQUIRE(s.ok());
    CHECK(std::abs(s.u_f(0)) <= 1e-5);
    CHECK(s.psi == doctest::Approx(0.25).epsilon(1e-6));
  }

  TEST_CASE("robust controller without deviation coincides with SPC")
  {
    const auto & b = bench(false);
    const auto v   = without_deviation(b.view);
    auto c         = b.config;
    c.Lambda       = 0.5;
    const auto spc = solve_spc(v, c, b.u_p, b.y_p);
    const auto r   = solve_rddpc(v, c, b.u_p, b.y_p);
    const auto fr  = solve_frddpc(v, c, b.u_p, b.y_p);
    REQUIRE(spc.ok());
    REQUIRE(r.ok());
    REQUIRE(fr.ok());
    CHECK(test::max_abs(r.u_f - spc.u_f) <= 1e-6);
    CHECK(test::max_abs(fr.applied_input(1) - spc.applied_input(1)) <= 1e-5);
  }

  TEST_CASE("full and compressed robust programs give the same input")
  {
    const auto & b = bench(true);
    auto c         = b.config;
    c.Lambda       = 0.05;
    conic::SolveSettings st;
    st.feasibility_tol = st.gap_tol = 1e-10;
    const auto red  = solve_rddpc(b.view, c, b.u_p, b.y_p, st);
    const auto full = solve_rddpc(PredictorView::full(b.data), c, b.u_p, b.y_p, st);
    REQUIRE(red.ok());
    REQUIRE(full.ok());
    CHECK(test::max_abs(red.u_f - full.u_f) <= 1e-5);
    CHECK(red.psi == doctest::Approx(full.psi).epsilon(1e-5));
  }

  TEST_CASE("robust objective is nondecreasing in Lambda")
  {
    const auto & b = bench(true);
    auto c         = b.config;
    double prev    = -1.0;
    for (double Lambda : {1e-6, 1e-3, 0.01, 0.05, 0.2, 0.5}) {
      c.Lambda     = Lambda;
      const auto s = solve_rddpc(b.view, c, b.u_p, b.y_p);
      REQUIRE(s.ok());
      CHECK(s.objective >= prev - 1e-6 * (1.0 + std::abs(prev)));
      prev = s.objective;
    }
  }

  TEST_CASE("vanishing Lambda recovers the SPC input")
  {
    const auto & b = bench(true);
    auto c         = b.config;
    const auto spc = solve_spc(b.view, c, b.u_p, b.y_p);
    c.Lambda       = 1e-10;
    const auto r   = solve_rddpc(b.view, c, b.u_p, b.y_p);
    const auto fr  = solve_frddpc(b.view, c, b.u_p, b.y_p);
    REQUIRE(r.ok());
    REQUIRE(fr.ok());
    CHECK(std::abs(r.applied_input(1)(0) - spc.applied_input(1)(0)) <= 1e-4);
    CHECK(std::abs(fr.applied_input(1)(0) - spc.applied_input(1)(0)) <= 1e-4);
  }

  TEST_CASE("feedback controller with zero gain reproduces the open-loop robust cost")
  {
    const auto & b = bench(true);
    auto c         = b.config;
    c.Lambda       = 0.05;
    const auto r   = solve_rddpc(b.view, c, b.u_p, b.y_p);
    const auto fr0 = solve_frddpc(b.view, c, b.u_p, b.y_p, {}, FeedbackOptions{true});
    REQUIRE(r.ok());
    REQUIRE(fr0.ok());
    CHECK(fr0.objective == doctest::Approx(r.objective).epsilon(1e-5));
    CHECK(test::max_abs(fr0.u_f - r.u_f) <= 1e-4);
  }

  TEST_CASE("feedback gain can only help without constraints")
  {
    const auto & b = bench(true);
    auto c         = unconstrained(b.config);
    c.Lambda       = 0.1;
    const auto r   = solve_rddpc(b.view, c, b.u_p, b.y_p);
    const auto fr  = solve_frddpc(b.view, c, b.u_p, b.y_p);
    REQUIRE(r.ok());
    REQUIRE(fr.ok());
    CHECK(fr.objective <= r.objective + 1e-6 * (1.0 + r.objective));
  }

  TEST_CASE("feedback solution structure and certificate")
  {
    const auto & b = bench(true);
    auto c         = b.config;
    c.Lambda       = 0.05;
    const auto fr  = solve_frddpc(b.view, c, b.u_p, b.y_p);
    REQUIRE(fr.ok());
    REQUIRE(fr.K.rows() == 5);
    REQUIRE(fr.K.cols() == 20);
    CHECK(fr.K.row(0).isZero(0.0));
    for (Index i = 0; i < 5; ++i) { CHECK(fr.K.block(i, 4 * i, 1, 20 - 4 * i).isZero(0.0)); }
    CHECK(fr.psi >= fr.u_f.dot(c.R_horizon() * fr.u_f) - 1e-9);
    CHECK(fr.policy().first_input(1) == fr.u_f.head(1));
    for (double m : fr.mu) { CHECK(m >= -1e-9); }
    for (double e : fr.eta) { CHECK(e >= -1e-9); }
    CHECK(fr.gamma >= -1e-9);
    CHECK(fr.psi >= 0.0);
  }

  TEST_CASE("feedback controller needs a definite R and a positive Lambda")
  {
    const auto & b = bench(true);
    auto c         = b.config;
    c.Lambda       = 0.1;
    c.R            = MatrixXd::Zero(1, 1);
    CHECK_THROWS_AS(assemble_frddpc(b.view, c, b.u_p, b.y_p), std::invalid_argument);
    c        = b.config;
    c.Lambda = 0.0;
    CHECK_THROWS_AS(assemble_frddpc(b.view, c, b.u_p, b.y_p), std::invalid_argument);
  }

  TEST_CASE("optimism and pessimism sandwich")
  {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto inst = verify::make_synthetic_instance(2, seed);
      const auto view = PredictorView::full(inst.data);
      const auto & c  = inst.config;
      const auto spc  = solve_spc(view, c, inst.u_p, inst.y_p);
      const auto pbr  = solve_pbr(view, c, inst.u_p, inst.y_p, PbrMode::constraint(c.Lambda));
      REQUIRE(spc.ok());
      REQUIRE(pbr.ok());
      const auto worst = verify::worst_case_cost_oracle(spc.b, view.M, view.PhiPerp, c.Q_horizon(), c.y_r, c.Lambda);
      const double pessimistic = worst.max_value + spc.u_f.dot(c.R_horizon() * spc.u_f);
      CHECK(pbr.objective <= spc.objective + 1e-7);
      CHECK(spc.objective <= pessimistic + 1e-7);
    }
  }

  TEST_CASE("config validation")
  {
    auto c = scalar_config(1.0, 1.0, 0.0, 0.0);
    CHECK_NOTHROW(c.validate(1, 1));
    c.Q = MatrixXd::Constant(1, 1, -1.0);
    CHECK_THROWS_AS(c.validate(1, 1), std::invalid_argument);
    c = scalar_config(1.0, -1.0, 0.0, 0.0);
    CHECK_THROWS_AS(c.validate(1, 1), std::invalid_argument);
    c = scalar_config(1.0, 1.0, 0.0, -0.5);
    CHECK_THROWS_AS(c.validate(1, 1), std::invalid_argument);
    c = scalar_config(1.0, 1.0, 0.0, 0.0);
    c.output_constraints.push_back({MatrixXd::Ones(1, 2), VectorXd::Zero(1)});
    CHECK_THROWS_AS(c.validate(1, 1), std::invalid_argument);
  }

  TEST_CASE("controller names")
  {
    for (auto k : {ControllerKind::spc, ControllerKind::pbr, ControllerKind::rddpc, ControllerKind::frddpc}) {
      CHECK(controller_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(controller_from_string("mpc"), std::invalid_argument);
  }
}
