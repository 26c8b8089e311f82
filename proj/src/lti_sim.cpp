#include "rddpc/lti_sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace rddpc::sim {

void SystemModel::validate() const
{
  const Index n = A.rows();
  if (A.cols() != n || n == 0) { throw std::invalid_argument("A must be square and non-empty"); }
  if (Bu.rows() != n) { throw std::invalid_argument("B_u row count must equal n_x"); }
  if (C.cols() != n) { throw std::invalid_argument("C column count must equal n_x"); }
  if (Bv.rows() != C.rows()) { throw std::invalid_argument("B_v row count must equal n_y"); }
  if (D.rows() != C.rows() || D.cols() != Bu.cols()) { throw std::invalid_argument("D must be n_y x n_u"); }
  if (!(dt > 0.0)) { throw std::invalid_argument("dt must be positive"); }
}

SystemModel make_two_mass_model(const TwoMassParameters & p)
{
  const double dt = p.dt;
  SystemModel m;
  m.A.resize(4, 4);
  // clang-format off
  m.A << 1.0,                   0.0,                          dt,                        0.0,
         0.0,                   1.0,                          0.0,                       dt,
         -p.k1 / p.m1 * dt,     p.k1 / p.m1 * dt,             1.0 - p.b1 / p.m1 * dt,    p.b1 / p.m1 * dt,
         p.k1 / p.m2 * dt,      -(p.k1 + p.k2) / p.m2 * dt,   p.b1 / p.m2 * dt,          1.0 - (p.b1 + p.b2) / p.m2 * dt;
  // clang-format on
  m.Bu = MatrixXd::Zero(4, 1);
  m.Bu(2, 0) = dt / p.m1;
  m.C  = MatrixXd::Identity(4, 4);
  m.Bv.resize(4, 1);
  m.Bv << 0.5, 1.0, 0.4, 0.3;
  m.D  = MatrixXd::Zero(4, 1);
  m.dt = dt;
  return m;
}

double ar_noise_step(ArNoiseModel & model, double rng_draw)
{
  const double bound = model.truncation * model.sigma;
  const double e     = std::clamp(model.sigma * rng_draw, -bound, bound);
  model.state        = model.coeff * model.state + e;
  return model.state;
}

Trajectory Trajectory::clean() const
{
  if (!has_clean()) { throw std::logic_error("trajectory has no clean twin"); }
  Trajectory t;
  t.inputs  = *clean_inputs;
  t.outputs = *clean_outputs;
  return t;
}

NoiseRealization draw_noise(
  ArNoiseModel noise_u, ArNoiseModel noise_y, Index nu, Index nv, Index length, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ArNoiseModel> chan_u(static_cast<std::size_t>(nu), noise_u);
  std::vector<ArNoiseModel> chan_y(static_cast<std::size_t>(nv), noise_y);
  NoiseRealization out{MatrixXd(nu, length), MatrixXd(nv, length)};
  for (Index t = 0; t < length; ++t) {
    for (Index i = 0; i < nu; ++i) { out.v1(i, t) = ar_noise_step(chan_u[static_cast<std::size_t>(i)], normal(rng)); }
    for (Index i = 0; i < nv; ++i) { out.v2(i, t) = ar_noise_step(chan_y[static_cast<std::size_t>(i)], normal(rng)); }
  }
  return out;
}

Plant::Plant(SystemModel model, VectorXd x0) : model_(std::move(model)), x_(std::move(x0))
{
  model_.validate();
  if (x_.size() == 0) { x_ = VectorXd::Zero(model_.nx()); }
  if (x_.size() != model_.nx()) { throw std::invalid_argument("initial state has wrong dimension"); }
}

VectorXd Plant::measure(const VectorXd & u, const VectorXd & v2) const
{
  return model_.C * x_ + model_.D * u + model_.Bv * v2;
}

VectorXd Plant::measure_clean(const VectorXd & u) const { return model_.C * x_ + model_.D * u; }

void Plant::advance(const VectorXd & u, const VectorXd & v1) { x_ = model_.A * x_ + model_.Bu * (u + v1); }

Trajectory simulate(
  const SystemModel & model, const MatrixXd & inputs, const VectorXd & x0, const NoiseRealization & noise)
{
  model.validate();
  const Index T = inputs.cols();
  if (T == 0) { throw std::invalid_argument("input sequence is empty"); }
  if (inputs.rows() != model.nu()) { throw std::invalid_argument("input dimension does not match the model"); }
  if (noise.v1.cols() < T || noise.v2.cols() < T || noise.v1.rows() != model.nu() || noise.v2.rows() != model.nv()) {
    throw std::invalid_argument("noise realisation does not cover the input sequence");
  }
  Plant plant(model, x0);
  Trajectory traj;
  traj.inputs  = inputs;
  traj.outputs.resize(model.ny(), T);
  traj.states.resize(model.nx(), T);
  MatrixXd cu(model.nu(), T), cy(model.ny(), T);
  for (Index t = 0; t < T; ++t) {
    const VectorXd u = inputs.col(t);
    traj.states.col(t)  = plant.state();
    cu.col(t)           = u + noise.v1.col(t);
    cy.col(t)           = plant.measure_clean(cu.col(t));
    traj.outputs.col(t) = cy.col(t) + model.Bv * noise.v2.col(t) + model.D * (u - cu.col(t));
    plant.advance(u, noise.v1.col(t));
  }
  traj.clean_inputs  = std::move(cu);
  traj.clean_outputs = std::move(cy);
  return traj;
}

Trajectory simulate(
  const SystemModel & model,
  const ArNoiseModel & noise_u,
  const ArNoiseModel & noise_y,
  const MatrixXd & inputs,
  const VectorXd & x0,
  std::uint64_t seed)
{
  model.validate();
  if (inputs.rows() != model.nu()) { throw std::invalid_argument("input dimension does not match the model"); }
  const NoiseRealization noise = draw_noise(noise_u, noise_y, model.nu(), model.nv(), inputs.cols(), seed);
  return simulate(model, inputs, x0, noise);
}

VectorXd square_wave(Index period, double amplitude, Index length)
{
  if (period <= 0 || length < 0) { throw std::invalid_argument("period must be positive"); }
  VectorXd out(length);
  const Index half = std::max<Index>(1, period / 2);
  for (Index t = 0; t < length; ++t) { out(t) = ((t / half) % 2 == 0) ? amplitude : -amplitude; }
  return out;
}

MatrixXd gen_excitation(Index period, double amplitude, double noise_var, Index length, std::uint64_t seed)
{
  if (period <= 0 || length <= 0) { throw std::invalid_argument("period and length must be positive"); }
  MatrixXd u = square_wave(period, amplitude, length).transpose();
  if (noise_var > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(noise_var));
    for (Index t = 0; t < length; ++t) { u(0, t) += normal(rng); }
  }
  return u;
}

Trajectory collect_closed_loop(
  const SystemModel & model,
  const ArNoiseModel & noise_u,
  const ArNoiseModel & noise_y,
  const PidGains & pid,
  const VectorXd & reference,
  Index length,
  std::uint64_t seed,
  const VectorXd & x0)
{
  model.validate();
  if (reference.size() < length) { throw std::invalid_argument("reference shorter than the requested length"); }
  if (model.nu() != 1) { throw std::invalid_argument("PID loop expects a single input"); }
  const NoiseRealization noise = draw_noise(noise_u, noise_y, model.nu(), model.nv(), length, seed);
  Plant plant(model, x0);
  Trajectory traj;
  traj.inputs.resize(1, length);
  traj.outputs.resize(model.ny(), length);
  traj.states.resize(model.nx(), length);
  MatrixXd cu(1, length), cy(model.ny(), length);
  double integral = 0.0;
  double y1_prev  = 0.0;
  for (Index t = 0; t < length; ++t) {
    traj.states.col(t) = plant.state();
    // D = 0 on the benchmark, so the measurement does not depend on u(t).
    const VectorXd y = plant.measure(VectorXd::Zero(1), noise.v2.col(t));
    const double e   = reference(t) - y(0);
    integral += e * model.dt;
    const double deriv = t == 0 ? 0.0 : -(y(0) - y1_prev) / model.dt;
    y1_prev            = y(0);
    VectorXd u(1);
    u(0)                = pid.kp * e + pid.ki * integral + pid.kd * deriv;
    traj.inputs.col(t)  = u;
    traj.outputs.col(t) = plant.measure(u, noise.v2.col(t));
    cu.col(t)           = u + noise.v1.col(t);
    cy.col(t)           = plant.measure_clean(cu.col(t));
    plant.advance(u, noise.v1.col(t));
  }
  traj.clean_inputs  = std::move(cu);
  traj.clean_outputs = std::move(cy);
  return traj;
}

namespace {

void write_rows(std::ostream & os, const MatrixXd & u, const MatrixXd & y)
{
  os << "t";
  for (Index i = 0; i < u.rows(); ++i) { os << ",u_" << i + 1; }
  for (Index i = 0; i < y.rows(); ++i) { os << ",y_" << i + 1; }
  os << '\n' << std::setprecision(17);
  for (Index t = 0; t < u.cols(); ++t) {
    os << t;
    for (Index i = 0; i < u.rows(); ++i) { os << ',' << u(i, t); }
    for (Index i = 0; i < y.rows(); ++i) { os << ',' << y(i, t); }
    os << '\n';
  }
}

void read_rows(const std::string & path, MatrixXd & u, MatrixXd & y)
{
  std::ifstream in(path);
  if (!in) { throw std::runtime_error("cannot open " + path); }
  std::string line;
  if (!std::getline(in, line)) { throw std::runtime_error(path + ": missing header"); }
  Index nu = 0, ny = 0;
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (cell != "t") { throw std::runtime_error(path + ": header must start with 't'"); }
    while (std::getline(ss, cell, ',')) {
      if (cell.rfind("u_", 0) == 0) {
        ++nu;
      } else if (cell.rfind("y_", 0) == 0) {
        ++ny;
      } else {
        throw std::runtime_error(path + ": unexpected column '" + cell + "'");
      }
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) { continue; }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) { row.push_back(std::stod(cell)); }
    if (static_cast<Index>(row.size()) != 1 + nu + ny) { throw std::runtime_error(path + ": ragged row"); }
    rows.push_back(std::move(row));
  }
  const Index T = static_cast<Index>(rows.size());
  u.resize(nu, T);
  y.resize(ny, T);
  for (Index t = 0; t < T; ++t) {
    const auto & r = rows[static_cast<std::size_t>(t)];
    for (Index i = 0; i < nu; ++i) { u(i, t) = r[static_cast<std::size_t>(1 + i)]; }
    for (Index i = 0; i < ny; ++i) { y(i, t) = r[static_cast<std::size_t>(1 + nu + i)]; }
  }
}

}  // namespace

std::string clean_twin_path(const std::string & path)
{
  std::filesystem::path p(path);
  const std::string stem = p.extension() == ".csv" ? p.stem().string() : p.filename().string();
  return (p.parent_path() / (stem + ".clean.csv")).string();
}

void write_trajectory_csv(const Trajectory & traj, const std::string & path)
{
  {
    std::ofstream os(path);
    if (!os) { throw std::runtime_error("cannot write " + path); }
    write_rows(os, traj.inputs, traj.outputs);
  }
  if (traj.has_clean()) {
    std::ofstream os(clean_twin_path(path));
    if (!os) { throw std::runtime_error("cannot write " + clean_twin_path(path)); }
    write_rows(os, *traj.clean_inputs, *traj.clean_outputs);
  }
}

Trajectory read_trajectory_csv(const std::string & path)
{
  Trajectory traj;
  read_rows(path, traj.inputs, traj.outputs);
  const std::string twin = clean_twin_path(path);
  if (std::filesystem::exists(twin)) {
    MatrixXd u, y;
    read_rows(twin, u, y);
    traj.clean_inputs  = std::move(u);
    traj.clean_outputs = std::move(y);
  }
  return traj;
}

}  // namespace rddpc::sim
