#include "rddpc/controllers.hpp"

#include "rddpc/conic/lmi.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace rddpc {

using conic::AffineExpr;
using conic::ConicProgram;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void check_shapes(const PredictorView & view, const ControlConfig & config, const VectorXd & u_p, const VectorXd & y_p)
{
  const DataDims & d = view.dims;
  if (config.Lp != d.Lp || config.Lf != d.Lf) { throw std::invalid_argument("controller horizons differ from the data"); }
  config.validate(d.nu, d.ny);
  if (u_p.size() != d.rows_up() || y_p.size() != d.rows_yp()) {
    throw std::invalid_argument("past window lengths do not match the data dimensions");
  }
}

AffineExpr nominal_prediction(const PredictorView & view, const AffineExpr & u, const VectorXd & past)
{
  return view.Mf * u + MatrixXd(view.Mp * past);
}

void add_input_quadratics(ConicProgram & p, const ControlConfig & config, const AffineExpr & u)
{
  for (std::size_t i = 0; i < config.input_constraints.size(); ++i) {
    const auto & c = config.input_constraints[i];
    p.add_quadratic(c.G * u + MatrixXd(c.c), "input[" + std::to_string(i) + "]");
  }
}

void add_output_quadratics(ConicProgram & p, const ControlConfig & config, const AffineExpr & y)
{
  for (std::size_t i = 0; i < config.output_constraints.size(); ++i) {
    const auto & c = config.output_constraints[i];
    p.add_quadratic(c.G * y + MatrixXd(c.c), "output[" + std::to_string(i) + "]");
  }
}

double weighted_sq(const VectorXd & v, const MatrixXd & W) { return v.dot(W * v); }

RobustSolution fill_common(const conic::SolveResult & res, double assembly_seconds)
{
  RobustSolution sol;
  sol.status           = res.status;
  sol.objective        = res.objective;
  sol.solve_seconds    = res.solve_seconds;
  sol.assembly_seconds = assembly_seconds;
  sol.iterations       = res.iterations;
  return sol;
}

double scalar_value(const conic::SolveResult & res, const ConicProgram & p, conic::VarId id)
{
  return res.value(p, id)(0, 0);
}

}  // namespace

void ControlConfig::validate(Index nu, Index ny) const
{
  if (Lf < 1 || Lp < 0) { throw std::invalid_argument("horizons must satisfy Lp >= 0, Lf >= 1"); }
  if (Q.rows() != ny || Q.cols() != ny) { throw std::invalid_argument("Q must be n_y x n_y"); }
  require_positive_definite(Q, "Q");
  if (R.rows() != nu || R.cols() != nu) { throw std::invalid_argument("R must be n_u x n_u"); }
  if (!is_symmetric(R, 1e-10) || min_eigenvalue(R) < 0.0) { throw std::invalid_argument("R must be symmetric PSD"); }
  if (y_r.size() != ny * Lf) { throw std::invalid_argument("reference must have n_y * Lf entries"); }
  if (!(Lambda >= 0.0) || !std::isfinite(Lambda)) { throw std::invalid_argument("Lambda must be finite and >= 0"); }
  for (const auto & c : input_constraints) {
    if (c.G.cols() != nu * Lf || c.c.size() != c.G.rows()) {
      throw std::invalid_argument("input constraint shape does not match n_u * Lf");
    }
  }
  for (const auto & c : output_constraints) {
    if (c.G.cols() != ny * Lf || c.c.size() != c.G.rows()) {
      throw std::invalid_argument("output constraint shape does not match n_y * Lf");
    }
  }
}

PredictorView PredictorView::full(const BehavioralData & data)
{
  return custom(data.dims, data.Mf, data.Mp, data.M, data.PhiPerp, spectral_norm(data.Yf));
}

PredictorView PredictorView::compressed(const ReducedData & data)
{
  PredictorView v = custom(data.dims, data.MfT, data.MpT, data.Mt, data.PhiPerpT, spectral_norm(data.W2t));
  v.reduced       = true;
  return v;
}

PredictorView PredictorView::custom(
  const DataDims & dims, MatrixXd Mf, MatrixXd Mp, MatrixXd M, MatrixXd PhiPerp, double scale)
{
  if (Mf.rows() != dims.rows_yf() || Mf.cols() != dims.rows_uf() || Mp.rows() != dims.rows_yf()
      || Mp.cols() != dims.rows_past() || M.rows() != dims.rows_yf() || PhiPerp.rows() != M.cols()
      || PhiPerp.cols() != M.cols()) {
    throw std::invalid_argument("predictor view matrices have inconsistent shapes");
  }
  PredictorView v;
  v.dims      = dims;
  v.deviation = deviation_factor(M, scale);
  v.Mf        = std::move(Mf);
  v.Mp        = std::move(Mp);
  v.M         = std::move(M);
  v.PhiPerp   = std::move(PhiPerp);
  return v;
}

VectorXd PredictorView::past(const VectorXd & u_p, const VectorXd & y_p) const { return vcat({u_p, y_p}); }

VectorXd PredictorView::nominal(const VectorXd & u_p, const VectorXd & u_f, const VectorXd & y_p) const
{
  return Mf * u_f + Mp * past(u_p, y_p);
}

RobustSolution solve_spc(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const conic::SolveSettings & settings)
{
  const auto t0 = Clock::now();
  check_shapes(view, config, u_p, y_p);
  ConicProgram p;
  const auto uf       = p.add_variable("u_f", view.dims.rows_uf());
  const AffineExpr u  = p.expr(uf);
  const AffineExpr yh = nominal_prediction(view, u, view.past(u_p, y_p));
  const MatrixXd Qh   = config.Q_horizon();
  const MatrixXd Rh   = config.R_horizon();
  p.add_squared_norm_objective(yh + MatrixXd(-config.y_r), Qh);
  p.add_squared_norm_objective(u, Rh);
  add_input_quadratics(p, config, u);
  add_output_quadratics(p, config, yh);
  const double t_asm = seconds_since(t0);

  const conic::SolveResult res = conic::solve(p, settings);
  RobustSolution sol           = fill_common(res, t_asm);
  if (sol.ok()) {
    sol.u_f = res.value(p, uf);
    sol.b   = view.nominal(u_p, sol.u_f, y_p);
    sol.psi = weighted_sq(sol.b - config.y_r, Qh);
    sol.w   = VectorXd::Zero(view.M.cols());
  }
  return sol;
}

RobustSolution solve_pbr(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  PbrMode mode,
  const conic::SolveSettings & settings)
{
  if (!(mode.value >= 0.0)) { throw std::invalid_argument("PBR weight / set size must be >= 0"); }
  const Index r = view.deviation.rank();
  // Lambda = 0 or a deviation-free predictor leaves nothing to optimise over.
  const bool trivial = r == 0 || (mode.kind == PbrMode::Kind::constraint && mode.value == 0.0);
  if (trivial) { return solve_spc(view, config, u_p, y_p, settings); }

  const auto t0 = Clock::now();
  check_shapes(view, config, u_p, y_p);
  ConicProgram p;
  const auto uf       = p.add_variable("u_f", view.dims.rows_uf());
  const auto th       = p.add_variable("theta", r);
  const AffineExpr u  = p.expr(uf);
  const AffineExpr t  = p.expr(th);
  const AffineExpr b  = nominal_prediction(view, u, view.past(u_p, y_p));
  const AffineExpr yh = b + view.deviation.D * t;
  const MatrixXd Qh   = config.Q_horizon();
  const MatrixXd Rh   = config.R_horizon();
  p.add_squared_norm_objective(yh + MatrixXd(-config.y_r), Qh);
  p.add_squared_norm_objective(u, Rh);
  if (mode.kind == PbrMode::Kind::penalty) {
    p.add_squared_norm_objective(t, mode.value * MatrixXd::Identity(r, r));
  } else {
    p.add_quadratic((1.0 / std::sqrt(mode.value)) * t, "deviation set");
  }
  add_input_quadratics(p, config, u);
  add_output_quadratics(p, config, yh);
  const double t_asm = seconds_since(t0);

  const conic::SolveResult res = conic::solve(p, settings);
  RobustSolution sol           = fill_common(res, t_asm);
  if (sol.ok()) {
    sol.u_f              = res.value(p, uf);
    const VectorXd theta = res.value(p, th);
    sol.b                = view.nominal(u_p, sol.u_f, y_p);
    sol.w                = view.deviation.row_basis * theta;
    sol.psi              = weighted_sq(sol.b + view.deviation.D * theta - config.y_r, Qh);
  }
  return sol;
}

AssembledProgram assemble_rddpc(
  const PredictorView & view, const ControlConfig & config, const VectorXd & u_p, const VectorXd & y_p)
{
  const auto t0 = Clock::now();
  check_shapes(view, config, u_p, y_p);
  if (!(config.Lambda > 0.0)) { throw std::invalid_argument("robust DDPC needs Lambda > 0; use SPC for Lambda = 0"); }
  const double Lam = config.Lambda;
  AssembledProgram a;
  ConicProgram & p = a.program;
  a.u_f            = p.add_variable("u_f", view.dims.rows_uf());
  a.psi            = p.add_variable("psi", 1);
  a.gamma          = p.add_variable("gamma", 1);
  const AffineExpr u     = p.expr(a.u_f);
  const AffineExpr psi   = p.expr(a.psi);
  const AffineExpr gamma = p.expr(a.gamma);
  const AffineExpr b     = nominal_prediction(view, u, view.past(u_p, y_p));
  const MatrixXd Qh      = config.Q_horizon();
  const VectorXd Qyr     = Qh * config.y_r;

  add_input_quadratics(p, config, u);
  for (std::size_t i = 0; i < config.output_constraints.size(); ++i) {
    const auto & c = config.output_constraints[i];
    a.mu.push_back(conic::slemma_pair(
      p, view.PhiPerp, Lam, c.G * b + MatrixXd(c.c), AffineExpr(MatrixXd(c.G * view.M)),
      "robust output[" + std::to_string(i) + "]"));
  }
  // Cost LMI in w = sqrt(Lambda) w~; the variable holds gamma Lambda.
  const double sl         = std::sqrt(Lam);
  const AffineExpr corner = psi - gamma + MatrixXd(2.0 * Qyr.transpose()) * b
                          + MatrixXd::Constant(1, 1, -config.y_r.dot(Qyr));
  p.add_lmi(conic::schur_lmi(
    corner, AffineExpr(MatrixXd(sl * view.M.transpose() * Qyr)), AffineExpr::scalar_times(gamma, view.PhiPerp),
    {{b, AffineExpr(MatrixXd(sl * view.M)), Qh}}, "worst-case cost"));
  p.add_nonnegative(gamma, "gamma>=0");
  p.add_linear_objective(psi);
  p.add_squared_norm_objective(u, config.R_horizon());
  a.assembly_seconds = seconds_since(t0);
  return a;
}

RobustSolution solve_rddpc(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const conic::SolveSettings & settings)
{
  const AssembledProgram a     = assemble_rddpc(view, config, u_p, y_p);
  const conic::SolveResult res = conic::solve(a.program, settings);
  RobustSolution sol           = fill_common(res, a.assembly_seconds);
  if (sol.ok()) {
    sol.u_f   = res.value(a.program, a.u_f);
    sol.b     = view.nominal(u_p, sol.u_f, y_p);
    sol.psi   = scalar_value(res, a.program, a.psi);
    sol.gamma = scalar_value(res, a.program, a.gamma) / config.Lambda;
    for (auto id : a.mu) { sol.mu.push_back(scalar_value(res, a.program, id) / config.Lambda); }
  }
  return sol;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> feedback_gain_mask(Index nu, Index ny, Index Lf)
{
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(nu * Lf, ny * Lf);
  mask.setConstant(false);
  for (Index i = 0; i < Lf; ++i) {
    for (Index j = 0; j < i; ++j) { mask.block(i * nu, j * ny, nu, ny).setConstant(true); }
  }
  return mask;
}

AssembledProgram assemble_frddpc(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  FeedbackOptions options)
{
  const auto t0 = Clock::now();
  check_shapes(view, config, u_p, y_p);
  if (!(config.Lambda > 0.0)) { throw std::invalid_argument("feedback robust DDPC needs Lambda > 0"); }
  require_positive_definite(config.R, "R");
  const DataDims & d = view.dims;
  const double Lam   = config.Lambda;
  AssembledProgram a;
  ConicProgram & p = a.program;
  a.u_f            = p.add_variable("v_f", d.rows_uf());
  if (!options.zero_gain) { a.K = p.add_structured_variable("K", feedback_gain_mask(d.nu, d.ny, d.Lf)); }
  a.psi   = p.add_variable("psi", 1);
  a.gamma = p.add_variable("gamma", 1);

  const AffineExpr v     = p.expr(a.u_f);
  const AffineExpr psi   = p.expr(a.psi);
  const AffineExpr gamma = p.expr(a.gamma);
  const AffineExpr K     = options.zero_gain ? AffineExpr(d.rows_uf(), d.rows_yf()) : p.expr(a.K);
  const AffineExpr b     = nominal_prediction(view, v, view.past(u_p, y_p));
  const AffineExpr KM    = K * view.M;
  const AffineExpr MKM   = (view.Mf * K) * view.M + view.M;
  const MatrixXd Qh      = config.Q_horizon();
  const VectorXd Qyr     = Qh * config.y_r;

  for (std::size_t i = 0; i < config.input_constraints.size(); ++i) {
    const auto & c = config.input_constraints[i];
    a.eta.push_back(conic::slemma_pair(
      p, view.PhiPerp, Lam, c.G * v + MatrixXd(c.c), c.G * KM, "robust input[" + std::to_string(i) + "]"));
  }
  for (std::size_t j = 0; j < config.output_constraints.size(); ++j) {
    const auto & c = config.output_constraints[j];
    a.mu.push_back(conic::slemma_pair(
      p, view.PhiPerp, Lam, c.G * b + MatrixXd(c.c), c.G * MKM, "robust output[" + std::to_string(j) + "]"));
  }
  const double sl        = std::sqrt(Lam);
  const AffineExpr alpha = psi - gamma + MatrixXd(2.0 * Qyr.transpose()) * b
                         + MatrixXd::Constant(1, 1, -config.y_r.dot(Qyr));
  p.add_lmi(conic::schur_lmi(
    alpha, sl * (MKM.transpose() * MatrixXd(Qyr)), AffineExpr::scalar_times(gamma, view.PhiPerp),
    {{b, sl * MKM, Qh}, {v, sl * KM, config.R_horizon()}}, "worst-case cost"));
  p.add_nonnegative(gamma, "gamma>=0");
  p.add_linear_objective(psi);
  a.assembly_seconds = seconds_since(t0);
  return a;
}

RobustSolution solve_frddpc(
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const conic::SolveSettings & settings,
  FeedbackOptions options)
{
  const AssembledProgram a     = assemble_frddpc(view, config, u_p, y_p, options);
  const conic::SolveResult res = conic::solve(a.program, settings);
  RobustSolution sol           = fill_common(res, a.assembly_seconds);
  if (sol.ok()) {
    sol.u_f   = res.value(a.program, a.u_f);
    sol.K     = a.K >= 0 ? res.value(a.program, a.K) : MatrixXd::Zero(view.dims.rows_uf(), view.dims.rows_yf());
    sol.b     = view.nominal(u_p, sol.u_f, y_p);
    sol.psi   = scalar_value(res, a.program, a.psi);
    sol.gamma = scalar_value(res, a.program, a.gamma) / config.Lambda;
    for (auto id : a.mu) { sol.mu.push_back(scalar_value(res, a.program, id) / config.Lambda); }
    for (auto id : a.eta) { sol.eta.push_back(scalar_value(res, a.program, id) / config.Lambda); }
  }
  return sol;
}

std::string to_string(ControllerKind k)
{
  switch (k) {
    case ControllerKind::spc: return "spc";
    case ControllerKind::pbr: return "pbr";
    case ControllerKind::rddpc: return "rddpc";
    case ControllerKind::frddpc: return "frddpc";
  }
  return "unknown";
}

ControllerKind controller_from_string(const std::string & name)
{
  if (name == "spc") { return ControllerKind::spc; }
  if (name == "pbr") { return ControllerKind::pbr; }
  if (name == "rddpc") { return ControllerKind::rddpc; }
  if (name == "frddpc") { return ControllerKind::frddpc; }
  throw std::invalid_argument("unknown controller '" + name + "' (expected spc, pbr, rddpc or frddpc)");
}

RobustSolution solve_controller(
  ControllerKind kind,
  const PredictorView & view,
  const ControlConfig & config,
  const VectorXd & u_p,
  const VectorXd & y_p,
  const conic::SolveSettings & settings)
{
  switch (kind) {
    case ControllerKind::spc: return solve_spc(view, config, u_p, y_p, settings);
    case ControllerKind::pbr:
      return solve_pbr(view, config, u_p, y_p, PbrMode::constraint(config.Lambda), settings);
    case ControllerKind::rddpc:
      if (config.Lambda == 0.0) { return solve_spc(view, config, u_p, y_p, settings); }
      return solve_rddpc(view, config, u_p, y_p, settings);
    case ControllerKind::frddpc: {
      if (config.Lambda == 0.0) { return solve_spc(view, config, u_p, y_p, settings); }
      RobustSolution s = solve_frddpc(view, config, u_p, y_p, settings);
      return s;
    }
  }
  throw std::invalid_argument("unknown controller kind");
}

}  // namespace rddpc
