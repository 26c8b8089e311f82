#include "rddpc/harness.hpp"
#include "rddpc/verification.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace rddpc;
using namespace rddpc::verify;

namespace {

double weighted(const VectorXd & v, const MatrixXd & Q) { return v.dot(Q * v); }

struct TheorySetup
{
  BehavioralData data, clean;
  PredictorView view;
  std::vector<ValidationSlice> slices;
  NoiseBounds nb;
};

/// Noisy benchmark data, its clean twin and validation slices from a held-out run.
TheorySetup theory_setup(std::uint64_t seed)
{
  harness::ExperimentConfig cfg;
  cfg.data.seed = seed;
  const auto sc = harness::prepare_scenario(cfg, seed);
  TheorySetup s;
  s.data   = sc.data;
  s.clean  = partition(sc.offline.clean(), 5, 5);
  s.view   = sc.view;
  const auto val = harness::collect_data(cfg, sc.model, cfg.validation.seed + seed, cfg.validation.length);
  s.slices = make_validation_slices(val, 5, 5, cfg.validation.slices);
  s.nb     = ar_noise_bounds(cfg.noise_u(), cfg.noise_y(), sc.model.Bv);
  return s;
}

}  // namespace

TEST_SUITE("verification")
{
  TEST_CASE("oracle in one dimension hits an endpoint")
  {
    test::Rng rng(1);
    for (int k = 0; k < 50; ++k) {
      const double m = rng.uniform(-3, 3), e = rng.uniform(-2, 2), Lambda = rng.uniform(0.0, 2.0);
      const auto r   = worst_case_cost_oracle(MatrixXd::Constant(1, 1, m), VectorXd::Constant(1, e),
                                              MatrixXd::Identity(1, 1), Lambda);
      const double expected = std::pow(std::abs(m) * std::sqrt(Lambda) + std::abs(e), 2);
      CHECK(r.max_value == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  TEST_CASE("oracle with a vector direction matches both endpoints")
  {
    test::Rng rng(2);
    for (int k = 0; k < 20; ++k) {
      const Index n    = rng.integer(1, 6);
      const VectorXd d = rng.vector(n), e = rng.vector(n);
      const MatrixXd Q = rng.spd(n, 0.1, 3.0);
      const double L   = rng.uniform(0.01, 3.0);
      const auto r     = worst_case_cost_oracle(MatrixXd(d), e, Q, L);
      const double s   = std::sqrt(L);
      CHECK(r.method == OracleMethod::endpoint_1d);
      CHECK(r.max_value == doctest::Approx(std::max(weighted(e + s * d, Q), weighted(e - s * d, Q))).epsilon(1e-12));
    }
  }

  TEST_CASE("oracle with Lambda = 0 returns the nominal cost")
  {
    test::Rng rng(3);
    const MatrixXd D = rng.matrix(4, 2);
    const VectorXd e = rng.vector(4);
    const MatrixXd Q = rng.spd(4, 0.5, 2.0);
    const auto r     = worst_case_cost_oracle(D, e, Q, 0.0);
    CHECK(r.max_value == doctest::Approx(weighted(e, Q)).epsilon(1e-14));
  }

  TEST_CASE("oracle dominates random feasible points in two and three dimensions")
  {
    test::Rng rng(4);
    for (Index rank : {2, 3}) {
      for (int k = 0; k < 3; ++k) {
        const Index n    = 5;
        const MatrixXd D = rng.matrix(n, rank);
        const VectorXd e = rng.vector(n);
        const MatrixXd Q = rng.spd(n, 0.2, 2.0);
        const double L   = rng.uniform(0.1, 2.0);
        const auto r     = worst_case_cost_oracle(D, e, Q, L);
        CHECK(r.method == OracleMethod::grid_ascent);
        CHECK(r.argmax.squaredNorm() <= L * (1.0 + 1e-9));
        CHECK(weighted(D * r.argmax + e, Q) == doctest::Approx(r.max_value).epsilon(1e-12));
        double best = 0.0;
        for (int s = 0; s < 10000; ++s) {
          VectorXd t = rng.vector(rank);
          t *= std::sqrt(L) * std::pow(rng.uniform(0, 1), 1.0 / static_cast<double>(rank)) / t.norm();
          best = std::max(best, weighted(D * t + e, Q));
        }
        CHECK(r.max_value >= best - 1e-12);
      }
    }
  }

  TEST_CASE("oracle refuses ranks above the cap")
  {
    test::Rng rng(5);
    CHECK_THROWS_AS(worst_case_cost_oracle(rng.matrix(5, 4), rng.vector(5), MatrixXd::Identity(5, 5), 1.0),
                    std::invalid_argument);
  }

  TEST_CASE("projector form of the oracle")
  {
    test::Rng rng(6);
    // PhiPerp projects onto a 2-D subspace of R^6; M has rank 2 on it.
    const Eigen::HouseholderQR<MatrixXd> qr(rng.matrix(6, 6));
    const MatrixXd V  = MatrixXd(qr.householderQ()).leftCols(2);
    const MatrixXd P  = V * V.transpose();
    const MatrixXd M  = rng.matrix(3, 2) * V.transpose();
    const VectorXd b  = rng.vector(3), yr = rng.vector(3);
    const MatrixXd Q  = MatrixXd::Identity(3, 3);
    const auto full   = worst_case_cost_oracle(b, M, P, Q, yr, 0.7);
    const auto direct = worst_case_cost_oracle(M * V, b - yr, Q, 0.7);
    CHECK(full.max_value == doctest::Approx(direct.max_value).epsilon(1e-9));
    CHECK_THROWS_AS(worst_case_cost_oracle(b, rng.matrix(3, 6), P, Q, yr, 0.7), std::invalid_argument);
  }

  TEST_CASE("SDP certificate matches the oracle on synthetic instances")
  {
    conic::SolveSettings st;
    st.feasibility_tol = st.gap_tol = 1e-10;
    for (std::uint64_t seed = 0; seed < 9; ++seed) {
      const auto inst = make_synthetic_instance(1 + static_cast<Index>(seed % 3), 200 + seed);
      const auto cmp  = compare_with_oracle(inst, st);
      REQUIRE(cmp.solved);
      CHECK(cmp.rel_error <= 1e-4);
      CHECK(cmp.u_diff <= 1e-5);
    }
  }

  TEST_CASE("boundary samples lie on the ellipsoid")
  {
    test::Rng rng(7);
    const MatrixXd A = rng.matrix(3, 6);
    const MatrixXd P = nullspace_projector(A);
    const MatrixXd W = sample_boundary(P, 0.3, 200, rng.engine());
    REQUIRE(W.cols() == 200);
    for (Index j = 0; j < W.cols(); ++j) { CHECK(W.col(j).dot(P * W.col(j)) == doctest::Approx(0.3).epsilon(1e-10)); }
  }

  TEST_CASE("robust solutions survive boundary sampling")
  {
    const auto s  = theory_setup(1);
    harness::ExperimentConfig cfg;
    auto cc       = harness::make_control_config(cfg);
    cc.Lambda     = 0.05;
    cc.y_r        = VectorXd::Zero(20);
    for (Index i = 0; i < 5; ++i) { cc.y_r(4 * i) = 0.4; }
    const auto & sl = s.slices[10];
    std::mt19937_64 rng(9);
    const auto r  = solve_rddpc(s.view, cc, sl.u_p, sl.y_p);
    const auto fr = solve_frddpc(s.view, cc, sl.u_p, sl.y_p);
    REQUIRE(r.ok());
    REQUIRE(fr.ok());
    const auto rr  = sample_robust_feasibility(s.view, cc, r, false, 1000, rng);
    const auto frr = sample_robust_feasibility(s.view, cc, fr, true, 1000, rng);
    CHECK(rr.passed);
    CHECK(frr.passed);
    CHECK(rr.worst_output_violation <= 1e-6);
    CHECK(frr.worst_input_violation <= 1e-6);
    CHECK(rr.worst_cost <= r.psi + 1e-6 * (1.0 + r.psi));
  }

  TEST_CASE("validation slices")
  {
    const auto tr     = test::benchmark_data(true);
    const auto slices = make_validation_slices(tr, 5, 5, 100);
    REQUIRE(slices.size() == 100);
    CHECK(slices.front().u_p == tr.inputs.leftCols(5).reshaped());
    CHECK(slices.back().y_f == tr.outputs.rightCols(5).reshaped());
    CHECK_THROWS_AS(make_validation_slices(tr, 300, 301, 1), std::invalid_argument);
  }

  TEST_CASE("membership of the nominal prediction and of a known deviation")
  {
    const auto & d    = test::benchmark_partition(true);
    const auto view   = PredictorView::full(d);
    test::Rng rng(8);
    const VectorXd up = rng.vector(5), uf = rng.vector(5), yp = rng.vector(20);
    const VectorXd b  = d.predict(up, uf, yp);
    const auto m0     = min_lambda_for_trajectory(view, up, yp, uf, b);
    CHECK(m0.lambda <= 1e-20);
    CHECK(m0.exact);
    for (int k = 0; k < 10; ++k) {
      const VectorXd w0 = d.PhiPerp * (0.1 * rng.vector(d.dims.Nbar()));
      const auto m      = min_lambda_for_trajectory(view, up, yp, uf, b + d.M * w0);
      CHECK(m.exact);
      CHECK(m.lambda <= w0.squaredNorm() + 1e-9);
    }
  }

  TEST_CASE("tune_lambda: single slice, monotone in slices, zero without noise")
  {
    const auto s = theory_setup(1);
    const auto one = min_lambda_for_trajectory(s.view, s.slices[0].u_p, s.slices[0].y_p, s.slices[0].u_f, s.slices[0].y_f);
    CHECK(tune_lambda(s.view, {s.slices[0]}) == one.lambda);
    double prev = 0.0;
    std::vector<ValidationSlice> acc;
    for (const auto & sl : s.slices) {
      acc.push_back(sl);
      const double now = tune_lambda(s.view, acc);
      CHECK(now >= prev);
      prev = now;
    }
    for (const auto & sl : s.slices) {
      CHECK(min_lambda_for_trajectory(s.view, sl.u_p, sl.y_p, sl.u_f, sl.y_f).lambda <= prev);
    }
    CHECK_THROWS_AS(tune_lambda(s.view, {}), std::invalid_argument);

    harness::ExperimentConfig cfg;
    cfg.noise.sigma_u = cfg.noise.sigma_y = 0.0;
    const auto sc = harness::prepare_scenario(cfg, 1);
    CHECK(harness::tune_lambda(cfg, sc) <= 1e-10);
  }

  TEST_CASE("noise bounds of the AR channels")
  {
    const auto m  = sim::make_two_mass_model();
    const auto nb = ar_noise_bounds(sim::ArNoiseModel{0.5, 0.01, 3.0}, sim::ArNoiseModel{0.5, 0.019, 3.0}, m.Bv);
    CHECK(nb.xi_u == doctest::Approx(0.06));
    CHECK(nb.xi_y == doctest::Approx(6 * 0.019));
  }

  TEST_CASE("theory bounds collapse without noise")
  {
    const auto s = theory_setup(1);
    const auto & sl = s.slices[3];
    const auto t1   = theorem1_lambda_o(s.data, s.clean, 4, 0.0, 0.0, vcat({sl.u_p, sl.u_f, sl.y_p}));
    CHECK(t1.Lambda1 == 0.0);
    CHECK(t1.Lambda2 == 0.0);
    CHECK(t1.Lambda_o == 0.0);
    const MatrixXd K = MatrixXd::Zero(5, 20);
    const auto t3    = theorem3_lambda_c(s.data, s.clean, 4, 0.0, 0.0, sl.u_p, sl.y_p, sl.u_f, K);
    CHECK(t3.Lambda_c == 0.0);
  }

  TEST_CASE("theorem bounds on the benchmark")
  {
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto s     = theory_setup(seed);
      const double lam = tune_lambda(s.view, s.slices);
      const auto & sl  = s.slices[0];
      const auto t1    = theorem1_lambda_o(s.data, s.clean, 4, s.nb.xi_u, s.nb.xi_y, vcat({sl.u_p, sl.u_f, sl.y_p}));
      CHECK(std::isfinite(t1.Lambda_o));
      CHECK(t1.Lambda_o > 1e6);
      CHECK(t1.Lambda_o / lam > 1e4);
      CHECK(t1.Lambda_o >= lam);

      const auto t3_zero = theorem3_lambda_c(s.data, s.clean, 4, s.nb.xi_u, s.nb.xi_y, sl.u_p, sl.y_p, sl.u_f,
                                             MatrixXd::Zero(5, 20));
      CHECK(t3_zero.Lambda_c == doctest::Approx(t1.Lambda_o).epsilon(1e-10));

      test::Rng rng(seed);
      MatrixXd K = rng.matrix(5, 20);
      K.array() *= feedback_gain_mask(1, 4, 5).cast<double>().array();
      const auto t3 = theorem3_lambda_c(s.data, s.clean, 4, s.nb.xi_u, s.nb.xi_y, sl.u_p, sl.y_p, sl.u_f, 0.1 * K);
      if (t3.coupling_norm >= 1.0) { CHECK(t3.Lambda_c <= t1.Lambda_o * (1.0 + 1e-12)); }
    }
  }

  TEST_CASE("theory constants need sufficient excitation")
  {
    const auto s = theory_setup(1);
    auto flat    = s.clean;
    flat.Phi.setZero();
    CHECK_THROWS_AS(theory_constants(s.data, flat, 4, 0.06, 0.114), std::domain_error);
  }

  TEST_CASE("cost certificate: noise-free nominal rollout")
  {
    harness::ExperimentConfig cfg;
    auto cc      = harness::make_control_config(cfg);
    test::Rng rng(10);
    const VectorXd u = 0.1 * rng.vector(5), y = 0.1 * rng.vector(20);
    const double J   = weighted(y - cc.y_r, cc.Q_horizon()) + weighted(u, cc.R_horizon());
    const auto res   = cost_bound_check(CostBound::open_loop, J, u, y, cc, MatrixXd::Zero(20, 5), 3.0);
    CHECK(res.passed);
    CHECK(res.realized == doctest::Approx(J));
    CHECK(res.margin == doctest::Approx(J));
  }

  TEST_CASE("feedback certificate with zero gain equals the open-loop one")
  {
    harness::ExperimentConfig cfg;
    auto cc   = harness::make_control_config(cfg);
    cc.Lambda = 0.3;
    test::Rng rng(11);
    const VectorXd u = rng.vector(5), y = rng.vector(20);
    const MatrixXd Mf = rng.matrix(20, 5);
    const auto a = cost_bound_check(CostBound::open_loop, 1.7, u, y, cc, Mf, 12.0);
    const auto b = cost_bound_check(CostBound::feedback, 1.7, u, y, cc, Mf, 12.0, MatrixXd::Zero(5, 20));
    CHECK(a.bound == doctest::Approx(b.bound).epsilon(1e-14));
    CHECK(a.bound == doctest::Approx(2 * 1.7 + 8 * 1.0 * 144.0 * 0.3).epsilon(1e-14));
  }
}
