#include "rddpc/behavioral_data.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace rddpc;

namespace {

MatrixXd row(std::initializer_list<double> v)
{
  MatrixXd r(1, static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) { r(0, i++) = x; }
  return r;
}

/// Random data set whose Hankel blocks have the given sizes (no system behind it).
BehavioralData random_blocks(test::Rng & rng, Index nu, Index ny, Index Lp, Index Lf, Index Nbar)
{
  return from_blocks(rng.matrix(nu * Lp, Nbar), rng.matrix(nu * Lf, Nbar), rng.matrix(ny * Lp, Nbar),
                     rng.matrix(ny * Lf, Nbar), nu, ny);
}

}  // namespace

TEST_SUITE("behavioral_data")
{
  TEST_CASE("scalar Hankel matrix")
  {
    MatrixXd expected(2, 3);
    expected << 1, 2, 3, 2, 3, 4;
    CHECK(build_hankel(row({1, 2, 3, 4}), 2) == expected);
    CHECK(build_hankel(row({5}), 1) == MatrixXd::Constant(1, 1, 5.0));
    CHECK_THROWS_AS(build_hankel(row({1, 2}), 3), std::invalid_argument);
  }

  TEST_CASE("vector Hankel matrix has block-shift columns")
  {
    test::Rng rng(3);
    const MatrixXd x = rng.matrix(2, 4);
    const MatrixXd H = build_hankel(x, 2);
    REQUIRE(H.rows() == 4);
    REQUIRE(H.cols() == 3);
    for (Index j = 0; j < 3; ++j) {
      CHECK(H.col(j).head(2) == x.col(j));
      CHECK(H.col(j).tail(2) == x.col(j + 1));
    }
  }

  TEST_CASE("persistency of excitation")
  {
    CHECK_FALSE(is_persistently_exciting(MatrixXd::Constant(1, 20, 3.0), 2));
    CHECK(is_persistently_exciting(row({1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0}), 2));
    const MatrixXd u = sim::gen_excitation(600, 1.0, 0.01, 600, 2);
    CHECK(is_persistently_exciting(u, 14));
  }

  TEST_CASE("partition shapes")
  {
    const auto & d = test::benchmark_partition(true);
    CHECK(d.Up.rows() == 5);
    CHECK(d.Uf.rows() == 5);
    CHECK(d.Yp.rows() == 20);
    CHECK(d.Yf.rows() == 20);
    CHECK(d.dims.Nbar() == 591);
    CHECK(d.M.rows() == 20);
    CHECK(d.M.cols() == 591);
    CHECK(d.Phi.rows() == 30);
    CHECK(d.warnings.empty());
  }

  TEST_CASE("partition rejects short data")
  {
    sim::Trajectory t;
    t.inputs  = MatrixXd::Zero(1, 8);
    t.outputs = MatrixXd::Zero(2, 8);
    CHECK_THROWS_AS(partition(t, 5, 5), std::invalid_argument);
  }

  TEST_CASE("partition warns when excitation is insufficient")
  {
    sim::Trajectory t;
    t.inputs  = MatrixXd::Constant(1, 60, 1.0);
    t.outputs = MatrixXd::Zero(2, 60);
    const auto d = partition(t, 2, 2, 2);
    CHECK_FALSE(d.warnings.empty());
  }

  TEST_CASE("projector identities on benchmark data")
  {
    for (bool noisy : {false, true}) {
      const auto & d = test::benchmark_partition(noisy);
      const MatrixXd & P = d.PhiPerp;
      CHECK(test::max_abs(P - P.transpose()) <= 1e-12);
      CHECK((P * P - P).norm() <= 1e-10);
      CHECK(test::max_abs(P * d.PhiPinv) <= 1e-10);
      CHECK(test::max_abs(d.Phi * d.PhiPinv * d.Phi - d.Phi) <= 1e-8 * test::max_abs(d.Phi));
      const Eigen::SelfAdjointEigenSolver<MatrixXd> es(P);
      for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()(i);
        CHECK((std::abs(ev) <= 1e-8 || std::abs(ev - 1.0) <= 1e-8));
      }
    }
  }

  TEST_CASE("noise-free residual vanishes")
  {
    const auto & clean = test::benchmark_partition(false);
    CHECK(spectral_norm(clean.M) / spectral_norm(clean.Yf) <= 1e-8);
  }

  TEST_CASE("noisy residual rank is set by the two scalar noise channels")
  {
    // v_2 enters all outputs through one column B_v and C = I, so only half of
    // the 20 output directions are reachable by noise.
    const auto & noisy = test::benchmark_partition(true);
    const VectorXd sv  = singular_values(noisy.M);
    CHECK(numerical_rank(noisy.M) == 10);
    CHECK(sv(9) > 1e-3);
    CHECK(sv(10) < 1e-10 * sv(0));
  }

  TEST_CASE("predictor split reconstructs Y_f pinv(Phi) z")
  {
    const auto & d = test::benchmark_partition(true);
    test::Rng rng(4);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const VectorXd up = rng.vector(5), uf = rng.vector(5), yp = rng.vector(20);
      const VectorXd direct = d.Yf * (d.PhiPinv * vcat({up, uf, yp}));
      const VectorXd split  = d.Mf * uf + d.Mp * vcat({up, yp});
      worst = std::max(worst, test::max_abs(direct - split));
      CHECK(test::max_abs(d.predict(up, uf, yp) - direct) <= 1e-10);
    }
    CHECK(worst <= 1e-10);
  }

  TEST_CASE("spc_predict: zero window gives zero prediction")
  {
    const auto & d = test::benchmark_partition(true);
    CHECK(spc_predict(d, VectorXd::Zero(5), VectorXd::Zero(5), VectorXd::Zero(20)).isZero());
    CHECK_THROWS_AS(spc_predict(d, VectorXd::Zero(4), VectorXd::Zero(5), VectorXd::Zero(20)), std::invalid_argument);
  }

  TEST_CASE("spc_predict is exact on noise-free data")
  {
    const auto & d    = test::benchmark_partition(false);
    const auto model  = sim::make_two_mass_model();
    const MatrixXd u  = sim::gen_excitation(40, 0.7, 0.05, 300, 77);
    const auto tr     = sim::simulate(model, sim::ArNoiseModel{0.5, 0.0}, sim::ArNoiseModel{0.5, 0.0}, u,
                                      VectorXd::Constant(4, 0.1), 0);
    for (Index s = 0; s + 10 <= 300; s += 29) {
      const VectorXd up = tr.inputs.middleCols(s, 5).reshaped();
      const VectorXd uf = tr.inputs.middleCols(s + 5, 5).reshaped();
      const VectorXd yp = tr.outputs.middleCols(s, 5).reshaped();
      const VectorXd yf = tr.outputs.middleCols(s + 5, 5).reshaped();
      CHECK(test::max_abs(spc_predict(d, up, uf, yp) - yf) <= 1e-7);
    }
  }

  TEST_CASE("spc_predict is linear")
  {
    test::Rng rng(21);
    const auto d = random_blocks(rng, 1, 2, 2, 3, 30);
    for (int k = 0; k < 20; ++k) {
      const VectorXd a1 = rng.vector(2), a2 = rng.vector(3), a3 = rng.vector(4);
      const VectorXd b1 = rng.vector(2), b2 = rng.vector(3), b3 = rng.vector(4);
      const double s = rng.uniform(-3, 3), t = rng.uniform(-3, 3);
      const VectorXd lhs = spc_predict(d, s * a1 + t * b1, s * a2 + t * b2, s * a3 + t * b3);
      const VectorXd rhs = s * spc_predict(d, a1, a2, a3) + t * spc_predict(d, b1, b2, b3);
      CHECK(test::max_abs(lhs - rhs) <= 1e-10);
    }
  }

  TEST_CASE("compressed data reproduces the full predictor")
  {
    const auto & d  = test::benchmark_partition(true);
    const auto red  = svd_reduce(d);
    CHECK(red.PhiPerpT.rows() == 50);
    CHECK(red.PhiPerpT.cols() == 50);
    CHECK(red.W1t.cols() == 50);
    CHECK(test::max_abs(red.Mt * red.V1.transpose() - d.M) <= 1e-8);
    test::Rng rng(5);
    for (int k = 0; k < 100; ++k) {
      const VectorXd up = rng.vector(5), uf = rng.vector(5), yp = rng.vector(20);
      const VectorXd z  = vcat({up, uf, yp});
      CHECK(test::max_abs(red.W2t * pinv(red.W1t) * z - d.Yf * d.PhiPinv * z) <= 1e-8);
      CHECK(test::max_abs(spc_predict(red, up, uf, yp) - spc_predict(d, up, uf, yp)) <= 1e-8);
    }
    const MatrixXd & P = red.PhiPerpT;
    CHECK(test::max_abs(P - P.transpose()) <= 1e-12);
    CHECK((P * P - P).norm() <= 1e-10);
  }

  TEST_CASE("compressed identities hold on random data sets")
  {
    test::Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const Index nu = rng.integer(1, 2), ny = rng.integer(1, 3), Lp = rng.integer(1, 3), Lf = rng.integer(1, 3);
      const Index cols = (nu + ny) * (Lp + Lf) + rng.integer(1, 20);
      const auto d   = random_blocks(rng, nu, ny, Lp, Lf, cols);
      const auto red = svd_reduce(d);
      CHECK(red.W1t.cols() == (nu + ny) * (Lp + Lf));
      CHECK(test::max_abs(red.Mt * red.V1.transpose() - d.M) <= 1e-8 * (1.0 + test::max_abs(d.M)));
      CHECK(test::max_abs(red.Predictor - d.Predictor) <= 1e-8 * (1.0 + test::max_abs(d.Predictor)));
    }
  }

  TEST_CASE("svd_reduce rejects all-zero data")
  {
    const auto d = from_blocks(MatrixXd::Zero(2, 10), MatrixXd::Zero(2, 10), MatrixXd::Zero(2, 10),
                               MatrixXd::Zero(2, 10), 1, 1);
    CHECK_THROWS_AS(svd_reduce(d), std::runtime_error);
  }

  TEST_CASE("deviation factor describes the same set")
  {
    test::Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
      const auto d    = random_blocks(rng, 1, 1, 2, 3, 25);
      const auto f    = deviation_factor(d.M);
      CHECK(f.rank() == 3);
      CHECK(test::max_abs(d.M * f.row_basis - f.D) <= 1e-10);
      CHECK(test::max_abs(d.PhiPerp * f.row_basis - f.row_basis) <= 1e-10);
    }
    CHECK(deviation_factor(MatrixXd::Constant(3, 4, 1e-20), 1.0).rank() == 0);
  }

  TEST_CASE("matrix CSV round trip")
  {
    test::Rng rng(2);
    const MatrixXd A = rng.matrix(3, 5);
    const auto path  = (test::scratch_dir("matrix_csv") / "A.csv").string();
    write_matrix_csv(A, path);
    CHECK(read_matrix_csv(path) == A);
  }
}
