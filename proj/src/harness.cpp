#include "rddpc/harness.hpp"

#include "rddpc/verification.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace rddpc::harness {

namespace {

bool is_robust(ControllerKind k) { return k == ControllerKind::rddpc || k == ControllerKind::frddpc; }

double median(std::vector<double> v)
{
  if (v.empty()) { return 0.0; }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Applies the optimised horizon to a copy of the plant and checks the cost certificate.
BoundCheckRecord rollout_check(
  const Scenario & sc,
  const ControlConfig & cc,
  ControllerKind kind,
  const RobustSolution & sol,
  const sim::Plant & plant,
  const sim::NoiseRealization & noise,
  Index t,
  Index step,
  const VectorXd & u_p,
  const VectorXd & y_p)
{
  const Index nu = sc.model.nu();
  const Index ny = sc.model.ny();
  const Index Lf = cc.Lf;
  sim::Plant p   = plant;
  VectorXd u_real(nu * Lf), y_real(ny * Lf);
  VectorXd err = VectorXd::Zero(ny * Lf);
  const bool feedback = kind == ControllerKind::frddpc;
  for (Index i = 0; i < Lf; ++i) {
    VectorXd u = sol.u_f.segment(i * nu, nu);
    if (feedback && sol.K.size() > 0) { u += sol.K.middleRows(i * nu, nu) * err; }
    const VectorXd y = p.measure(u, noise.v2.col(t + i));
    p.advance(u, noise.v1.col(t + i));
    u_real.segment(i * nu, nu) = u;
    y_real.segment(i * ny, ny) = y;
    err.segment(i * ny, ny)    = y - sol.b.segment(i * ny, ny);
  }
  const verify::Membership m = feedback
                                 ? verify::min_lambda_feedback(sc.view, u_p, y_p, sol.u_f, sol.K, y_real)
                                 : verify::min_lambda_for_trajectory(sc.view, u_p, y_p, u_real, y_real);
  const auto res = verify::cost_bound_check(feedback ? verify::CostBound::feedback : verify::CostBound::open_loop,
                                            sol.objective, u_real, y_real, cc, sc.view.Mf, sc.yf_norm, sol.K);
  BoundCheckRecord r;
  r.step          = step;
  r.membership    = m.exact && m.lambda <= cc.Lambda * (1.0 + 1e-9);
  r.lambda_needed = m.lambda;
  r.realized      = res.realized;
  r.bound         = res.bound;
  r.passed        = res.passed;
  return r;
}

}  // namespace

std::uint64_t excitation_seed(std::uint64_t seed) { return 2 * seed; }
std::uint64_t data_noise_seed(std::uint64_t seed) { return 2 * seed + 1; }

sim::Trajectory collect_data(const ExperimentConfig & cfg, const sim::SystemModel & model, std::uint64_t seed, Index length)
{
  const VectorXd x0 = VectorXd::Zero(model.nx());
  if (cfg.data.mode == DataMode::open_loop) {
    const auto & e    = cfg.data.excitation;
    const MatrixXd u  = sim::gen_excitation(e.period, e.amplitude, e.noise_variance, length, excitation_seed(seed));
    return sim::simulate(model, cfg.noise_u(), cfg.noise_y(), u, x0, data_noise_seed(seed));
  }
  const auto & p     = cfg.data.pid;
  const VectorXd ref = sim::square_wave(p.reference_period, p.reference_amplitude, length);
  return sim::collect_closed_loop(model, cfg.noise_u(), cfg.noise_y(), p.gains, ref, length, data_noise_seed(seed), x0);
}

ControlConfig make_control_config(const ExperimentConfig & cfg)
{
  const auto & c = cfg.control;
  const Index nu = 1;
  const auto ny  = static_cast<Index>(c.q_diag.size());
  ControlConfig cc;
  cc.Lp = c.Lp;
  cc.Lf = c.Lf;
  cc.Q  = Eigen::Map<const VectorXd>(c.q_diag.data(), ny).asDiagonal();
  cc.R  = MatrixXd::Constant(1, 1, c.r);
  cc.y_r = VectorXd::Zero(ny * c.Lf);
  if (c.input_gain > 0.0) {
    for (Index i = 0; i < c.Lf; ++i) {
      EllipsoidConstraint e{MatrixXd::Zero(nu, nu * c.Lf), VectorXd::Zero(nu)};
      e.G.block(0, i * nu, nu, nu) = c.input_gain * MatrixXd::Identity(nu, nu);
      cc.input_constraints.push_back(std::move(e));
    }
  }
  for (const auto & w : c.output_weights) {
    const VectorXd per = Eigen::Map<const VectorXd>(w.data(), ny);
    cc.output_constraints.push_back({MatrixXd(per.replicate(c.Lf, 1).asDiagonal()), VectorXd::Zero(ny * c.Lf)});
  }
  return cc;
}

Scenario prepare_scenario(const ExperimentConfig & cfg, const sim::Trajectory & offline)
{
  Scenario sc{.model    = sim::make_two_mass_model(cfg.plant),
              .offline  = offline,
              .data     = {},
              .reduced  = {},
              .view     = {},
              .control  = make_control_config(cfg),
              .yf_norm  = 0.0};
  if (offline.nu() != sc.model.nu() || offline.ny() != sc.model.ny()) {
    throw std::invalid_argument("offline data dimensions do not match the plant");
  }
  sc.data    = partition(offline, cfg.control.Lp, cfg.control.Lf, sc.model.nx());
  sc.reduced = svd_reduce(sc.data);
  sc.view    = cfg.control.reduced ? PredictorView::compressed(sc.reduced) : PredictorView::full(sc.data);
  sc.yf_norm = spectral_norm(sc.data.Yf);
  return sc;
}

Scenario prepare_scenario(const ExperimentConfig & cfg, std::uint64_t data_seed)
{
  const auto model = sim::make_two_mass_model(cfg.plant);
  return prepare_scenario(cfg, collect_data(cfg, model, data_seed, cfg.data.length));
}

MatrixXd reference_matrix(const ExperimentConfig & cfg, Index ny, Index length)
{
  const auto & r = cfg.reference;
  if (r.channel < 0 || r.channel >= ny) { throw std::invalid_argument("reference channel out of range"); }
  MatrixXd ref = MatrixXd::Zero(ny, length);
  if (r.shape == ReferenceShape::square) {
    ref.row(r.channel) = sim::square_wave(r.period, r.amplitude, length).transpose();
  } else {
    ref.row(r.channel).setConstant(r.amplitude);
  }
  return ref;
}

VectorXd reference_horizon(const MatrixXd & ref, Index k, Index Lf)
{
  const Index ny = ref.rows();
  VectorXd out(ny * Lf);
  for (Index i = 0; i < Lf; ++i) { out.segment(i * ny, ny) = ref.col(std::min(k + i, ref.cols() - 1)); }
  return out;
}

double tune_lambda(const ExperimentConfig & cfg, const Scenario & sc)
{
  const auto val    = collect_data(cfg, sc.model, cfg.validation.seed, cfg.validation.length);
  const auto slices = verify::make_validation_slices(val, cfg.control.Lp, cfg.control.Lf, cfg.validation.slices);
  return verify::tune_lambda(sc.view, slices);
}

double j_total(const MatrixXd & u, const MatrixXd & y, const MatrixXd & y_ref, const MatrixXd & Q, const MatrixXd & R)
{
  if (u.cols() != y.cols() || y.rows() != y_ref.rows() || y.cols() != y_ref.cols() || Q.rows() != y.rows()
      || R.rows() != u.rows()) {
    throw std::invalid_argument("j_total: inconsistent lengths");
  }
  double J = 0.0;
  for (Index k = 0; k < u.cols(); ++k) {
    const VectorXd e = y.col(k) - y_ref.col(k);
    J += e.dot(Q * e) + u.col(k).dot(R * u.col(k));
  }
  return J;
}

TrialRecord run_receding_horizon(
  const ExperimentConfig & cfg, const Scenario & sc, ControllerKind kind, double Lambda, std::uint64_t seed,
  const RunOptions & options)
{
  const auto & model = sc.model;
  const Index nu = model.nu(), ny = model.ny();
  const Index Lp = cfg.control.Lp, Lf = cfg.control.Lf;
  if (sc.data.dims.nu != nu || sc.data.dims.ny != ny || sc.data.dims.Lp != Lp || sc.data.dims.Lf != Lf) {
    throw std::invalid_argument("plant, data and horizon dimensions disagree");
  }
  const Index T     = cfg.reference.length;
  const Index total = Lp + T + Lf;
  const auto noise  = sim::draw_noise(cfg.noise_u(), cfg.noise_y(), nu, model.nv(), total, seed);

  TrialRecord rec;
  rec.controller   = to_string(kind);
  rec.lambda       = Lambda;
  rec.seed         = seed;
  rec.warmup       = Lp;
  rec.noise_digest = fnv1a_digest(noise.v1, noise.v2);
  rec.y_ref        = reference_matrix(cfg, ny, T);

  sim::Plant plant(model, VectorXd::Zero(model.nx()));
  MatrixXd u_all = MatrixXd::Zero(nu, Lp + T);
  MatrixXd y_all = MatrixXd::Zero(ny, Lp + T);
  for (Index t = 0; t < Lp; ++t) {
    const VectorXd u = VectorXd::Zero(nu);
    y_all.col(t)     = plant.measure(u, noise.v2.col(t));
    plant.advance(u, noise.v1.col(t));
  }

  ControlConfig cc = sc.control;
  cc.Lambda        = Lambda;
  VectorXd held    = VectorXd::Zero(nu);
  for (Index k = 0; k < T; ++k) {
    const Index t      = Lp + k;
    const VectorXd u_p = u_all.middleCols(t - Lp, Lp).reshaped();
    const VectorXd y_p = y_all.middleCols(t - Lp, Lp).reshaped();
    cc.y_r             = reference_horizon(rec.y_ref, k, Lf);
    const RobustSolution sol = solve_controller(kind, sc.view, cc, u_p, y_p, options.solver);
    rec.solve_seconds.push_back(sol.solve_seconds);
    rec.assembly_seconds.push_back(sol.assembly_seconds);
    rec.status.push_back(conic::to_string(sol.status));
    rec.iterations.push_back(sol.iterations);
    if (sol.ok()) {
      held = sol.applied_input(nu);
    } else {
      ++rec.failures;
    }
    if (options.bound_checks && sol.ok() && is_robust(kind) && Lambda > 0.0) {
      rec.bound_checks.push_back(rollout_check(sc, cc, kind, sol, plant, noise, t, k, u_p, y_p));
    }
    if (options.hook) { options.hook(StepContext{k, kind, sc, cc, u_p, y_p, sol}); }
    u_all.col(t) = held;
    y_all.col(t) = plant.measure(held, noise.v2.col(t));
    plant.advance(held, noise.v1.col(t));
  }
  rec.u       = u_all.rightCols(T);
  rec.y       = y_all.rightCols(T);
  rec.J_total = j_total(rec.u, rec.y, rec.y_ref, cc.Q, cc.R);
  return rec;
}

void parallel_for(Index n, Index workers, const std::function<void(Index)> & fn)
{
  if (n <= 0) { return; }
  Index w = workers > 0 ? workers : static_cast<Index>(std::max(1u, std::thread::hardware_concurrency()));
  w       = std::min(w, n);
  if (w == 1) {
    for (Index i = 0; i < n; ++i) { fn(i); }
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr first;
  std::mutex mtx;
  std::vector<std::thread> pool;
  for (Index k = 0; k < w; ++k) {
    pool.emplace_back([&] {
      for (Index i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mtx);
          if (!first) { first = std::current_exception(); }
        }
      }
    });
  }
  for (auto & th : pool) { th.join(); }
  if (first) { std::rethrow_exception(first); }
}

std::vector<GridRow> grid_search_lambda(
  const ExperimentConfig & cfg, const Scenario & sc, const std::vector<ControllerKind> & kinds,
  const std::vector<double> & grid, const RunOptions & options)
{
  if (grid.empty()) { throw std::invalid_argument("grid search needs at least one Lambda"); }
  const Index nk = static_cast<Index>(kinds.size()), ng = static_cast<Index>(grid.size());
  const Index nt = cfg.lambda.grid_trials;
  std::vector<double> J(static_cast<std::size_t>(nk * ng * nt), std::numeric_limits<double>::quiet_NaN());
  parallel_for(nk * ng * nt, cfg.workers, [&](Index job) {
    const Index ki = job / (ng * nt), gi = (job / nt) % ng, ti = job % nt;
    try {
      const auto rec = run_receding_horizon(cfg, sc, kinds[static_cast<std::size_t>(ki)],
                                            grid[static_cast<std::size_t>(gi)], cfg.lambda.grid_seed + static_cast<std::uint64_t>(ti),
                                            options);
      J[static_cast<std::size_t>(job)] = rec.J_total;
    } catch (const std::exception &) {
      // recorded as a missing sample
    }
  });
  std::vector<GridRow> rows;
  for (Index ki = 0; ki < nk; ++ki) {
    const std::size_t first_row = rows.size();
    for (Index gi = 0; gi < ng; ++gi) {
      std::vector<double> vals;
      for (Index ti = 0; ti < nt; ++ti) {
        const double v = J[static_cast<std::size_t>((ki * ng + gi) * nt + ti)];
        if (std::isfinite(v)) { vals.push_back(v); }
      }
      GridRow row;
      row.controller = to_string(kinds[static_cast<std::size_t>(ki)]);
      row.lambda     = grid[static_cast<std::size_t>(gi)];
      if (vals.empty()) {
        row.mean_J = std::numeric_limits<double>::infinity();
      } else {
        double s = 0.0;
        for (double v : vals) { s += v; }
        row.mean_J = s / static_cast<double>(vals.size());
        double ss  = 0.0;
        for (double v : vals) { ss += (v - row.mean_J) * (v - row.mean_J); }
        row.std_J = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
      }
      rows.push_back(row);
    }
    auto best = std::min_element(rows.begin() + static_cast<std::ptrdiff_t>(first_row), rows.end(),
                                 [](const GridRow & a, const GridRow & b) { return a.mean_J < b.mean_J; });
    best->argmin = true;
  }
  return rows;
}

std::map<ControllerKind, double> resolve_lambdas(
  const ExperimentConfig & cfg, const Scenario & sc, const std::vector<ControllerKind> & kinds,
  std::vector<GridRow> * grid_rows)
{
  std::map<ControllerKind, double> out;
  std::optional<double> tuned;
  std::vector<ControllerKind> by_grid;
  for (auto k : kinds) {
    const LambdaChoice c = cfg.lambda_for(k);
    if (const auto * d = std::get_if<double>(&c)) {
      out[k] = *d;
    } else if (std::get<std::string>(c) == "tuned") {
      if (!tuned) { tuned = tune_lambda(cfg, sc); }
      out[k] = *tuned;
    } else {
      by_grid.push_back(k);
    }
  }
  if (!by_grid.empty()) {
    const auto rows = grid_search_lambda(cfg, sc, by_grid, cfg.lambda.grid);
    for (const auto & r : rows) {
      if (r.argmin) { out[controller_from_string(r.controller)] = r.lambda; }
    }
    if (grid_rows) { grid_rows->insert(grid_rows->end(), rows.begin(), rows.end()); }
  }
  return out;
}

ExperimentReport monte_carlo(
  const ExperimentConfig & cfg, const std::vector<ControllerKind> & kinds,
  const std::map<ControllerKind, double> & lambdas, Index n_trials, const RunOptions & options,
  const Scenario * shared)
{
  if (n_trials < 1) { throw std::invalid_argument("monte_carlo needs at least one trial"); }
  for (auto k : kinds) {
    if (!lambdas.count(k)) { throw std::invalid_argument("no Lambda given for " + to_string(k)); }
  }
  std::optional<Scenario> own;
  if (!shared && !cfg.data.regenerate_per_trial) {
    own.emplace(prepare_scenario(cfg, cfg.data.seed));
    shared = &*own;
  }
  const auto nk = static_cast<Index>(kinds.size());
  ExperimentReport rep;
  rep.config = to_json(cfg);
  rep.trials.resize(static_cast<std::size_t>(nk * n_trials));
  parallel_for(nk * n_trials, cfg.workers, [&](Index job) {
    const Index ki = job / n_trials, ti = job % n_trials;
    const auto kind = kinds[static_cast<std::size_t>(ki)];
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(ti);
    TrialRecord & slot       = rep.trials[static_cast<std::size_t>(job)];
    try {
      if (shared) {
        slot = run_receding_horizon(cfg, *shared, kind, lambdas.at(kind), seed, options);
      } else {
        const Scenario sc = prepare_scenario(cfg, cfg.data.seed + static_cast<std::uint64_t>(ti));
        slot              = run_receding_horizon(cfg, sc, kind, lambdas.at(kind), seed, options);
      }
    } catch (const std::exception & e) {
      slot            = TrialRecord{};
      slot.controller = to_string(kind);
      slot.lambda     = lambdas.at(kind);
      slot.seed       = seed;
      slot.error      = e.what();
    }
  });
  for (const auto & [k, v] : lambdas) { rep.lambdas[to_string(k)] = v; }
  rep.reaggregate();
  return rep;
}

std::vector<TimingRow> benchmark_solve_times(const ExperimentConfig & cfg, const std::vector<Index> & N_values, bool include_full)
{
  struct Formulation
  {
    const char * name;
    ControllerKind kind;
    bool full;
  };
  const Formulation forms[] = {{"spc-qp", ControllerKind::spc, false},          {"pbr-qp", ControllerKind::pbr, false},
                               {"rddpc-reduced", ControllerKind::rddpc, false}, {"frddpc-reduced", ControllerKind::frddpc, false},
                               {"rddpc-full", ControllerKind::rddpc, true},     {"frddpc-full", ControllerKind::frddpc, true}};
  std::vector<TimingRow> rows;
  const auto model = sim::make_two_mass_model(cfg.plant);
  for (Index N : N_values) {
    const Scenario sc        = prepare_scenario(cfg, collect_data(cfg, model, cfg.data.seed, N));
    const PredictorView full = PredictorView::full(sc.data);
    const PredictorView red  = PredictorView::compressed(sc.reduced);
    const Index Lp = cfg.control.Lp, Lf = cfg.control.Lf;
    const VectorXd u_p = sc.offline.inputs.rightCols(Lp).reshaped();
    const VectorXd y_p = sc.offline.outputs.rightCols(Lp).reshaped();
    ControlConfig cc   = sc.control;
    cc.y_r             = reference_horizon(reference_matrix(cfg, model.ny(), cfg.reference.length), 0, Lf);
    const double tuned = tune_lambda(cfg, sc);
    cc.Lambda          = tuned > 0.0 ? tuned : 0.5;
    for (const auto & f : forms) {
      if (f.full && !include_full) { continue; }
      const Index reps = f.full ? cfg.bench.full_repeats : cfg.bench.repeats;
      std::vector<double> solve, assembly;
      TimingRow row;
      row.formulation = f.name;
      row.N           = N;
      row.repeats     = reps;
      for (Index r = 0; r < reps; ++r) {
        const auto sol = solve_controller(f.kind, f.full ? full : red, cc, u_p, y_p);
        solve.push_back(sol.solve_seconds);
        assembly.push_back(sol.assembly_seconds);
        row.iterations = sol.iterations;
        row.status     = conic::to_string(sol.status);
      }
      row.median_solve    = median(solve);
      row.median_assembly = median(assembly);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace rddpc::harness
