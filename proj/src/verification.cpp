#include "rddpc/verification.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rddpc::verify {

namespace {

constexpr int kAscentIterations = 200;

struct Quadratic
{
  MatrixXd A;  // D^T Q D
  VectorXd c;  // D^T Q e
  double f0{0.0};

  double operator()(const VectorXd & t) const { return t.dot(A * t) + 2.0 * c.dot(t) + f0; }
};

// Fixed-point ascent on the sphere ||t|| = radius; monotone for a convex quadratic.
VectorXd ascend(const Quadratic & f, VectorXd t, double radius)
{
  double val = f(t);
  for (int it = 0; it < kAscentIterations; ++it) {
    const VectorXd g = f.A * t + f.c;
    const double gn  = g.norm();
    if (gn == 0.0) { break; }
    const VectorXd next = (radius / gn) * g;
    const double nv     = f(next);
    if (nv <= val * (1.0 + 1e-15)) { break; }
    t   = next;
    val = nv;
  }
  return t;
}

std::vector<VectorXd> sphere_grid(Index dim, double radius)
{
  std::vector<VectorXd> pts;
  if (dim == 2) {
    const Index n = 10000;
    pts.reserve(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      pts.push_back(radius * Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  } else {
    // Fibonacci lattice.
    const Index n      = 100000;
    const double phi   = std::numbers::pi * (3.0 - std::sqrt(5.0));
    pts.reserve(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
      const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = phi * static_cast<double>(k);
      pts.push_back(radius * Eigen::Vector3d(r * std::cos(a), r * std::sin(a), z));
    }
  }
  return pts;
}

double weighted_sq(const VectorXd & v, const MatrixXd & W) { return v.dot(W * v); }

double max_eig(const MatrixXd & S)
{
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

Membership fit_deviation(const MatrixXd & E, const MatrixXd & row_basis, const MatrixXd & PhiPerp, const VectorXd & r,
                         double scale)
{
  Membership m;
  if (E.cols() == 0) {
    m.lambda   = 0.0;
    m.residual = r.norm();
  } else {
    const VectorXd t = pinv(E) * r;
    m.lambda         = (PhiPerp * (row_basis * t)).squaredNorm();
    m.residual       = (r - E * t).norm();
  }
  m.exact = m.residual <= 1e-7 * (1.0 + scale);
  return m;
}

}  // namespace

std::string to_string(OracleMethod m)
{
  switch (m) {
    case OracleMethod::exact_0d: return "exact-0d";
    case OracleMethod::endpoint_1d: return "endpoint-1d";
    case OracleMethod::grid_ascent: return "grid+ascent";
  }
  return "unknown";
}

OracleResult worst_case_cost_oracle(const MatrixXd & D, const VectorXd & e, const MatrixXd & Q, double Lambda,
                                    Index rank_cap)
{
  if (D.rows() != e.size() || Q.rows() != e.size() || Q.cols() != e.size()) {
    throw std::invalid_argument("oracle: inconsistent dimensions");
  }
  if (!(Lambda >= 0.0)) { throw std::invalid_argument("oracle: Lambda must be >= 0"); }
  const Index r = D.cols();
  if (r > rank_cap) {
    throw std::invalid_argument("oracle: deviation rank " + std::to_string(r) + " exceeds the cap "
                                + std::to_string(rank_cap));
  }
  if (r > 3) { throw std::invalid_argument("oracle: ranks above 3 are not supported"); }
  const Quadratic f{D.transpose() * Q * D, D.transpose() * (Q * e), weighted_sq(e, Q)};
  OracleResult out;
  if (r == 0 || Lambda == 0.0) {
    out.argmax    = VectorXd::Zero(r);
    out.max_value = f(out.argmax);
    out.method    = OracleMethod::exact_0d;
    return out;
  }
  const double radius = std::sqrt(Lambda);
  if (r == 1) {
    const VectorXd hi = VectorXd::Constant(1, radius);
    const VectorXd lo = VectorXd::Constant(1, -radius);
    const double fh = f(hi), fl = f(lo);
    out.argmax    = fh >= fl ? hi : lo;
    out.max_value = std::max(fh, fl);
    out.method    = OracleMethod::endpoint_1d;
    return out;
  }
  VectorXd best;
  double best_val = -std::numeric_limits<double>::infinity();
  for (const auto & p : sphere_grid(r, radius)) {
    const double v = f(p);
    if (v > best_val) {
      best_val = v;
      best     = p;
    }
  }
  out.argmax    = ascend(f, best, radius);
  out.max_value = std::max(best_val, f(out.argmax));
  out.method    = OracleMethod::grid_ascent;
  return out;
}

OracleResult worst_case_cost_oracle(const VectorXd & b, const MatrixXd & M, const MatrixXd & PhiPerp, const MatrixXd & Q,
                                    const VectorXd & y_r, double Lambda, Index rank_cap)
{
  if (PhiPerp.rows() != M.cols() || PhiPerp.cols() != M.cols()) {
    throw std::invalid_argument("oracle: PhiPerp must be square with cols(M) rows");
  }
  const double pscale = std::max(1.0, spectral_norm(PhiPerp));
  if (!is_symmetric(PhiPerp, 1e-8 * pscale) || (PhiPerp * PhiPerp - PhiPerp).norm() > 1e-8 * pscale) {
    throw std::invalid_argument("oracle: PhiPerp is not an orthogonal projector");
  }
  if ((M * PhiPerp - M).norm() > 1e-8 * std::max(1.0, M.norm())) {
    throw std::invalid_argument("oracle: rows of M leave the range of PhiPerp");
  }
  const DeviationFactor f = deviation_factor(M);
  return worst_case_cost_oracle(f.D, b - y_r, Q, Lambda, rank_cap);
}

MatrixXd sample_boundary(const MatrixXd & P, double Lambda, Index count, std::mt19937_64 & rng)
{
  if (!(Lambda >= 0.0)) { throw std::invalid_argument("sample_boundary: Lambda must be >= 0"); }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (P + P.transpose()));
  const VectorXd & lam = es.eigenvalues();
  const double cut     = 1e-10 * std::max(0.0, lam.maxCoeff());
  std::vector<Index> keep;
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam(i) > cut) { keep.push_back(i); }
  }
  MatrixXd W = MatrixXd::Zero(P.rows(), count);
  if (keep.empty() || Lambda == 0.0) { return W; }
  const auto r = static_cast<Index>(keep.size());
  MatrixXd T(P.rows(), r);
  for (Index k = 0; k < r; ++k) {
    const Index i = keep[static_cast<std::size_t>(k)];
    T.col(k)      = es.eigenvectors().col(i) / std::sqrt(lam(i));
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const double radius = std::sqrt(Lambda);
  for (Index s = 0; s < count; ++s) {
    VectorXd g(r);
    for (Index k = 0; k < r; ++k) { g(k) = normal(rng); }
    const double gn = g.norm();
    if (gn == 0.0) { g(0) = 1.0; }
    W.col(s) = T * (radius / g.norm() * g);
  }
  return W;
}

SamplingReport sample_robust_feasibility(const PredictorView & view, const ControlConfig & config,
                                         const RobustSolution & solution, bool feedback, Index count,
                                         std::mt19937_64 & rng, double tol)
{
  if (!solution.ok()) { throw std::invalid_argument("sampling needs an optimal solution"); }
  const MatrixXd Qh = config.Q_horizon();
  const MatrixXd Rh = config.R_horizon();
  const MatrixXd W  = sample_boundary(view.PhiPerp, config.Lambda, count, rng);
  SamplingReport rep;
  rep.samples                = count;
  rep.certificate            = solution.psi;
  rep.worst_output_violation = -std::numeric_limits<double>::infinity();
  rep.worst_input_violation  = -std::numeric_limits<double>::infinity();
  rep.worst_cost             = -std::numeric_limits<double>::infinity();
  const bool has_gain        = feedback && solution.K.size() > 0;
  for (Index s = 0; s < count; ++s) {
    const VectorXd d = view.M * W.col(s);
    VectorXd u       = solution.u_f;
    VectorXd y       = solution.b + d;
    if (has_gain) {
      const VectorXd Kd = solution.K * d;
      u += Kd;
      y += view.Mf * Kd;
    }
    for (const auto & c : config.output_constraints) {
      rep.worst_output_violation = std::max(rep.worst_output_violation, (c.G * y + c.c).squaredNorm() - 1.0);
    }
    for (const auto & c : config.input_constraints) {
      rep.worst_input_violation = std::max(rep.worst_input_violation, (c.G * u + c.c).squaredNorm() - 1.0);
    }
    double cost = weighted_sq(y - config.y_r, Qh);
    if (feedback) { cost += weighted_sq(u, Rh); }
    rep.worst_cost = std::max(rep.worst_cost, cost);
  }
  if (config.output_constraints.empty()) { rep.worst_output_violation = 0.0; }
  if (config.input_constraints.empty()) { rep.worst_input_violation = 0.0; }
  if (count == 0) { rep.worst_cost = 0.0; }
  rep.passed = rep.worst_output_violation <= tol && rep.worst_input_violation <= tol
            && rep.worst_cost <= rep.certificate + tol * (1.0 + std::abs(rep.certificate));
  return rep;
}

std::vector<ValidationSlice> make_validation_slices(const sim::Trajectory & traj, Index Lp, Index Lf, Index count)
{
  const Index L = Lp + Lf;
  const Index T = traj.length();
  if (count < 1 || T < L) { throw std::invalid_argument("validation slices need count >= 1 and length >= Lp + Lf"); }
  std::vector<ValidationSlice> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) {
    const Index start = count == 1 ? 0
                                   : static_cast<Index>(std::llround(static_cast<double>(k) * static_cast<double>(T - L)
                                                                     / static_cast<double>(count - 1)));
    ValidationSlice s;
    s.u_p = traj.inputs.middleCols(start, Lp).reshaped();
    s.u_f = traj.inputs.middleCols(start + Lp, Lf).reshaped();
    s.y_p = traj.outputs.middleCols(start, Lp).reshaped();
    s.y_f = traj.outputs.middleCols(start + Lp, Lf).reshaped();
    out.push_back(std::move(s));
  }
  return out;
}

Membership min_lambda_for_trajectory(const PredictorView & view, const VectorXd & u_p, const VectorXd & y_p,
                                     const VectorXd & u_f, const VectorXd & y_f)
{
  if (y_f.size() != view.dims.rows_yf()) { throw std::invalid_argument("y_f length does not match the data"); }
  const VectorXd b = view.nominal(u_p, u_f, y_p);
  return fit_deviation(view.deviation.D, view.deviation.row_basis, view.PhiPerp, y_f - b, y_f.norm() + b.norm());
}

Membership min_lambda_feedback(const PredictorView & view, const VectorXd & u_p, const VectorXd & y_p,
                               const VectorXd & v_f, const MatrixXd & K, const VectorXd & y_f)
{
  const Index ny = view.dims.rows_yf();
  if (y_f.size() != ny || K.rows() != view.dims.rows_uf() || K.cols() != ny) {
    throw std::invalid_argument("feedback membership: dimension mismatch");
  }
  const VectorXd b = view.nominal(u_p, v_f, y_p);
  const MatrixXd E = (MatrixXd::Identity(ny, ny) + view.Mf * K) * view.deviation.D;
  return fit_deviation(E, view.deviation.row_basis, view.PhiPerp, y_f - b, y_f.norm() + b.norm());
}

double tune_lambda(const PredictorView & view, const std::vector<ValidationSlice> & slices)
{
  if (slices.empty()) { throw std::invalid_argument("tune_lambda needs at least one validation slice"); }
  double best = 0.0;
  for (const auto & s : slices) { best = std::max(best, min_lambda_for_trajectory(view, s.u_p, s.y_p, s.u_f, s.y_f).lambda); }
  return best;
}

NoiseBounds ar_noise_bounds(const sim::ArNoiseModel & noise_u, const sim::ArNoiseModel & noise_y, const MatrixXd & Bv)
{
  auto envelope = [](const sim::ArNoiseModel & m) {
    if (std::abs(m.coeff) >= 1.0) { throw std::invalid_argument("AR coefficient must satisfy |coeff| < 1"); }
    return m.truncation * m.sigma / (1.0 - std::abs(m.coeff));
  };
  const double gain = Bv.size() ? Bv.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  return {envelope(noise_u), envelope(noise_y) * gain};
}

TheoryBounds theory_constants(const BehavioralData & data, const BehavioralData & clean, Index nx, double xi_u_bar,
                              double xi_y_bar)
{
  const DataDims & d = data.dims;
  if (clean.dims.Lp != d.Lp || clean.dims.Lf != d.Lf || clean.dims.nu != d.nu || clean.dims.ny != d.ny) {
    throw std::invalid_argument("clean and noisy data have different dimensions");
  }
  if (xi_u_bar < 0.0 || xi_y_bar < 0.0) { throw std::invalid_argument("noise bounds must be >= 0"); }
  const Index k     = d.nu * d.L() + nx;
  const VectorXd sv = singular_values(clean.Phi);
  if (nx < 0 || k > sv.size()) { throw std::domain_error("n_u L + n_x exceeds the size of the clean data matrix"); }
  const double tol = rank_tolerance(sv(0), clean.Phi.rows(), clean.Phi.cols());
  if (sv(k - 1) <= tol) { throw std::domain_error("clean data matrix is rank deficient: insufficient excitation"); }

  TheoryBounds t;
  t.delta           = 1.0 / sv(k - 1);
  t.beta            = std::max(t.delta, spectral_norm(data.PhiPinv));
  t.xi1             = xi_u_bar * std::sqrt(static_cast<double>(d.nu * d.L())) + xi_y_bar * std::sqrt(static_cast<double>(d.ny * d.Lp));
  t.xi2             = xi_y_bar * std::sqrt(static_cast<double>(d.ny * d.Lf));
  const double rN   = std::sqrt(static_cast<double>(d.Nbar()));
  const double yf   = spectral_norm(data.Yf);
  const double gold = 0.5 * (1.0 + std::sqrt(5.0));
  t.Lambda1         = rN * (gold * t.beta * t.beta * t.xi1 * yf + t.delta * t.xi2);
  t.Lambda2         = t.delta * (yf + t.xi2 * rN) * t.xi1 + t.xi2;

  const TruncatedSvd ms = truncated_svd(data.M, yf);
  if (ms.rank() > 0) {
    const MatrixXd scaled = (data.PhiPerp * ms.V) * ms.sigma.cwiseInverse().asDiagonal();
    t.gain                = spectral_norm(scaled);
  }
  return t;
}

TheoryBounds theorem1_lambda_o(const BehavioralData & data, const BehavioralData & clean, Index nx, double xi_u_bar,
                               double xi_y_bar, const VectorXd & z)
{
  if (z.size() != data.dims.rows_phi()) { throw std::invalid_argument("online vector must be col(u_p, u_f, y_p)"); }
  TheoryBounds t = theory_constants(data, clean, nx, xi_u_bar, xi_y_bar);
  t.data_norm    = z.norm();
  const double s = t.Lambda1 * t.data_norm + t.Lambda2;
  t.Lambda_o     = t.gain * t.gain * s * s;
  return t;
}

TheoryBounds theorem3_lambda_c(const BehavioralData & data, const BehavioralData & clean, Index nx, double xi_u_bar,
                               double xi_y_bar, const VectorXd & u_p, const VectorXd & y_p, const VectorXd & v_f,
                               const MatrixXd & K)
{
  const DataDims & d = data.dims;
  if (K.rows() != d.rows_uf() || K.cols() != d.rows_yf()) { throw std::invalid_argument("K has the wrong shape"); }
  const VectorXd z = vcat({u_p, v_f, y_p});
  TheoryBounds t   = theorem1_lambda_o(data, clean, nx, xi_u_bar, xi_y_bar, z);
  const MatrixXd I = MatrixXd::Identity(d.rows_yf(), d.rows_yf());
  const MatrixXd C = (I - clean.Mf * K) * (I + data.Mf * K);
  const VectorXd s = singular_values(C);
  if (s(s.size() - 1) <= 1e-12 * s(0)) { throw std::domain_error("(I - Mf_clean K)(I + Mf K) is singular"); }
  t.coupling_norm    = s(0);
  t.coupling_cond    = s(0) / s(s.size() - 1);
  t.Lambda_c         = t.Lambda_o / (s(0) * s(0));
  t.Lambda_c_inverse = t.Lambda_o / (s(s.size() - 1) * s(s.size() - 1));
  return t;
}

CostBoundResult cost_bound_check(CostBound kind, double optimal_cost, const VectorXd & u_f, const VectorXd & y_f,
                                 const ControlConfig & config, const MatrixXd & Mf, double yf_norm, const MatrixXd & K)
{
  if (u_f.size() != config.R.rows() * config.Lf || y_f.size() != config.y_r.size()) {
    throw std::invalid_argument("cost_bound_check: horizon lengths do not match the configuration");
  }
  CostBoundResult r;
  r.realized      = weighted_sq(y_f - config.y_r, config.Q_horizon()) + weighted_sq(u_f, config.R_horizon());
  const double sQ = max_eig(config.Q);
  const double s2 = yf_norm * yf_norm * config.Lambda;
  if (kind == CostBound::open_loop) {
    r.bound = 2.0 * optimal_cost + 8.0 * sQ * s2;
  } else {
    if (K.rows() != u_f.size() || K.cols() != y_f.size() || Mf.rows() != y_f.size() || Mf.cols() != u_f.size()) {
      throw std::invalid_argument("cost_bound_check: K or Mf has the wrong shape");
    }
    const double sR  = max_eig(config.R);
    const MatrixXd I = MatrixXd::Identity(y_f.size(), y_f.size());
    const MatrixXd N = Mf * K;
    const double k2  = spectral_norm(K);
    const double a   = spectral_norm(2.0 * I + N);
    const double c   = spectral_norm(I + N);
    r.bound          = 2.0 * optimal_cost + 2.0 * s2 * (sR * k2 * k2 * a * a + 4.0 * sQ * c * c);
  }
  r.margin = r.bound - r.realized;
  r.passed = r.realized <= r.bound;
  return r;
}

SyntheticInstance make_synthetic_instance(Index rank, std::uint64_t seed)
{
  if (rank < 1 || rank > 3) { throw std::invalid_argument("synthetic instances support rank 1..3"); }
  const Index nu = 1, ny = 1, Lp = 2, Lf = 3, cols = 40;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto randn = [&](Index r, Index c) {
    MatrixXd A(r, c);
    for (Index i = 0; i < A.size(); ++i) { A(i) = normal(rng); }
    return A;
  };
  const MatrixXd Up = randn(nu * Lp, cols), Uf = randn(nu * Lf, cols), Yp = randn(ny * Lp, cols);
  MatrixXd Phi(Up.rows() + Uf.rows() + Yp.rows(), cols);
  Phi << Up, Uf, Yp;
  const MatrixXd Yf = randn(ny * Lf, Phi.rows()) * Phi / std::sqrt(static_cast<double>(cols))
                    + 0.3 * randn(ny * Lf, rank) * randn(rank, cols) / std::sqrt(static_cast<double>(cols));

  SyntheticInstance inst;
  inst.data = from_blocks(Up, Uf, Yp, Yf, nu, ny);
  ControlConfig & c = inst.config;
  c.Lp = Lp;
  c.Lf = Lf;
  c.Q  = MatrixXd::Constant(1, 1, 0.5 + 1.5 * unif(rng));
  c.R  = MatrixXd::Constant(1, 1, 1.0);
  c.y_r    = 0.5 * randn(ny * Lf, 1);
  c.Lambda = 0.1 + 1.9 * unif(rng);
  for (Index i = 0; i < Lf; ++i) {
    EllipsoidConstraint e{MatrixXd::Zero(nu, nu * Lf), VectorXd::Zero(nu)};
    e.G(0, i) = 0.5;
    c.input_constraints.push_back(e);
  }
  c.output_constraints.push_back({0.1 * MatrixXd::Identity(ny * Lf, ny * Lf), VectorXd::Zero(ny * Lf)});
  inst.u_p = 0.3 * randn(nu * Lp, 1);
  inst.y_p = 0.3 * randn(ny * Lp, 1);
  return inst;
}

OracleComparison compare_with_oracle(const SyntheticInstance & inst, const conic::SolveSettings & settings)
{
  const PredictorView full = PredictorView::full(inst.data);
  const PredictorView red  = PredictorView::compressed(svd_reduce(inst.data));
  OracleComparison out;
  out.rank            = full.deviation.rank();
  const auto sol_full = solve_rddpc(full, inst.config, inst.u_p, inst.y_p, settings);
  const auto sol_red  = solve_rddpc(red, inst.config, inst.u_p, inst.y_p, settings);
  out.solved          = sol_full.ok() && sol_red.ok();
  if (!out.solved) { return out; }
  const auto orc = worst_case_cost_oracle(sol_full.b, full.M, full.PhiPerp, inst.config.Q_horizon(), inst.config.y_r,
                                          inst.config.Lambda);
  out.psi       = sol_full.psi;
  out.oracle    = orc.max_value;
  out.method    = orc.method;
  out.rel_error = std::abs(out.psi - out.oracle) / std::max(1e-12, std::abs(out.oracle));
  out.u_diff    = (sol_full.u_f - sol_red.u_f).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace rddpc::verify
