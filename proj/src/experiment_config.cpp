#include "rddpc/experiment_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace rddpc::harness {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string & field, const std::string & why)
{
  throw std::invalid_argument("config: " + field + ": " + why);
}

void reject_unknown(const json & j, const std::string & where, std::initializer_list<const char *> keys)
{
  if (!j.is_object()) { bad(where.empty() ? "<root>" : where, "expected an object"); }
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto & [k, v] : j.items()) {
    if (!allowed.count(k)) { bad(where.empty() ? k : where + "." + k, "unknown key"); }
  }
}

template <class T>
void read(const json & j, const char * key, T & out, const std::string & where)
{
  if (!j.contains(key)) { return; }
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception & e) {
    bad(where.empty() ? std::string(key) : where + "." + key, e.what());
  }
}

std::string mode_name(DataMode m) { return m == DataMode::open_loop ? "open_loop" : "closed_loop_pid"; }

DataMode parse_mode(const std::string & s)
{
  if (s == "open_loop") { return DataMode::open_loop; }
  if (s == "closed_loop_pid") { return DataMode::closed_loop_pid; }
  bad("data.mode", "expected open_loop or closed_loop_pid, got '" + s + "'");
}

std::string shape_name(ReferenceShape s) { return s == ReferenceShape::square ? "square" : "step"; }

ReferenceShape parse_shape(const std::string & s)
{
  if (s == "square") { return ReferenceShape::square; }
  if (s == "step") { return ReferenceShape::step; }
  bad("reference.shape", "expected square or step, got '" + s + "'");
}

json choice_json(const LambdaChoice & c)
{
  if (const auto * d = std::get_if<double>(&c)) { return *d; }
  return std::get<std::string>(c);
}

LambdaChoice parse_choice(const json & j, const std::string & where)
{
  if (j.is_number()) { return j.get<double>(); }
  if (j.is_string()) { return j.get<std::string>(); }
  bad(where, "expected a number, \"tuned\" or \"grid\"");
}

void check_choice(const LambdaChoice & c, const std::string & where)
{
  if (const auto * d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d) || *d < 0.0) { bad(where, "Lambda must be finite and >= 0"); }
  } else {
    const auto & s = std::get<std::string>(c);
    if (s != "tuned" && s != "grid") { bad(where, "expected \"tuned\" or \"grid\", got '" + s + "'"); }
  }
}

}  // namespace

void ExperimentConfig::validate() const
{
  auto positive = [](double v, const char * f) {
    if (!(v > 0.0) || !std::isfinite(v)) { bad(f, "must be > 0"); }
  };
  positive(plant.m1, "plant.m1");
  positive(plant.m2, "plant.m2");
  positive(plant.dt, "plant.dt");
  if (noise.sigma_u < 0.0 || noise.sigma_y < 0.0) { bad("noise", "sigmas must be >= 0"); }
  if (std::abs(noise.ar_coeff) >= 1.0) { bad("noise.ar_coeff", "must satisfy |coeff| < 1"); }
  positive(noise.truncation, "noise.truncation");
  if (control.Lp < 1 || control.Lf < 1) { bad("control", "Lp and Lf must be >= 1"); }
  if (control.q_diag.size() != 4) { bad("control.q_diag", "needs one weight per output (4)"); }
  for (double q : control.q_diag) { positive(q, "control.q_diag"); }
  if (!(control.r > 0.0)) { bad("control.r", "must be > 0"); }
  if (control.input_gain < 0.0) { bad("control.input_gain", "must be >= 0"); }
  for (const auto & w : control.output_weights) {
    if (w.size() != 4) { bad("control.output_weights", "each entry needs 4 weights"); }
  }
  const Index L = control.Lp + control.Lf;
  if (data.length < L + 2) { bad("data.length", "too short for the horizons"); }
  if (data.excitation.period < 2) { bad("data.excitation.period", "must be >= 2"); }
  if (data.excitation.noise_variance < 0.0) { bad("data.excitation.noise_variance", "must be >= 0"); }
  if (data.pid.reference_period < 2) { bad("data.pid.reference_period", "must be >= 2"); }
  if (validation.slices < 1) { bad("validation.slices", "must be >= 1"); }
  if (validation.length < L) { bad("validation.length", "must be >= Lp + Lf"); }
  if (reference.length < 1) { bad("reference.length", "must be >= 1"); }
  if (reference.shape == ReferenceShape::square && reference.period < 2) { bad("reference.period", "must be >= 2"); }
  if (reference.channel < 0 || reference.channel >= 4) { bad("reference.channel", "must index an output"); }
  if (controllers.empty()) { bad("controllers", "must not be empty"); }
  for (const auto & c : controllers) {
    try {
      controller_from_string(c);
    } catch (const std::invalid_argument &) {
      bad("controllers", "unknown controller '" + c + "'");
    }
  }
  check_choice(lambda.fallback, "lambda.default");
  for (const auto & [name, c] : lambda.per_controller) {
    try {
      controller_from_string(name);
    } catch (const std::invalid_argument &) {
      bad("lambda.per_controller", "unknown controller '" + name + "'");
    }
    check_choice(c, "lambda.per_controller." + name);
  }
  if (lambda.grid.empty()) { bad("lambda.grid", "must not be empty"); }
  for (double g : lambda.grid) {
    if (!std::isfinite(g) || g < 0.0) { bad("lambda.grid", "values must be finite and >= 0"); }
  }
  if (lambda.grid_trials < 1) { bad("lambda.grid_trials", "must be >= 1"); }
  if (bench.N_values.empty()) { bad("bench.N_values", "must not be empty"); }
  for (Index n : bench.N_values) {
    if (n < L + 2) { bad("bench.N_values", "every N must exceed Lp + Lf"); }
  }
  if (bench.repeats < 1 || bench.full_repeats < 1) { bad("bench", "repeat counts must be >= 1"); }
  if (trials < 1) { bad("trials", "must be >= 1"); }
  if (workers < 0) { bad("workers", "must be >= 0"); }
  if (max_solver_iterations < 1) { bad("max_solver_iterations", "must be >= 1"); }
}

std::vector<ControllerKind> ExperimentConfig::controller_kinds() const
{
  std::vector<ControllerKind> out;
  for (const auto & c : controllers) { out.push_back(controller_from_string(c)); }
  return out;
}

LambdaChoice ExperimentConfig::lambda_for(ControllerKind kind) const
{
  if (kind == ControllerKind::spc) { return 0.0; }
  const auto it = lambda.per_controller.find(to_string(kind));
  return it != lambda.per_controller.end() ? it->second : lambda.fallback;
}

json to_json(const ExperimentConfig & c)
{
  json per = json::object();
  for (const auto & [k, v] : c.lambda.per_controller) { per[k] = choice_json(v); }
  return json{
    {"plant", {{"k1", c.plant.k1}, {"k2", c.plant.k2}, {"b1", c.plant.b1}, {"b2", c.plant.b2}, {"m1", c.plant.m1},
               {"m2", c.plant.m2}, {"dt", c.plant.dt}}},
    {"noise", {{"sigma_u", c.noise.sigma_u}, {"sigma_y", c.noise.sigma_y}, {"ar_coeff", c.noise.ar_coeff},
               {"truncation", c.noise.truncation}}},
    {"data",
     {{"mode", mode_name(c.data.mode)},
      {"length", c.data.length},
      {"excitation", {{"period", c.data.excitation.period}, {"amplitude", c.data.excitation.amplitude},
                      {"noise_variance", c.data.excitation.noise_variance}}},
      {"pid", {{"kp", c.data.pid.gains.kp}, {"ki", c.data.pid.gains.ki}, {"kd", c.data.pid.gains.kd},
               {"reference_period", c.data.pid.reference_period},
               {"reference_amplitude", c.data.pid.reference_amplitude}}},
      {"seed", c.data.seed},
      {"regenerate_per_trial", c.data.regenerate_per_trial}}},
    {"validation", {{"seed", c.validation.seed}, {"length", c.validation.length}, {"slices", c.validation.slices}}},
    {"control", {{"Lp", c.control.Lp}, {"Lf", c.control.Lf}, {"q_diag", c.control.q_diag}, {"r", c.control.r},
                 {"input_gain", c.control.input_gain}, {"output_weights", c.control.output_weights},
                 {"reduced", c.control.reduced}}},
    {"reference", {{"shape", shape_name(c.reference.shape)}, {"period", c.reference.period},
                   {"amplitude", c.reference.amplitude}, {"channel", c.reference.channel},
                   {"length", c.reference.length}}},
    {"controllers", c.controllers},
    {"lambda", {{"default", choice_json(c.lambda.fallback)}, {"per_controller", per}, {"grid", c.lambda.grid},
                {"grid_trials", c.lambda.grid_trials}, {"grid_seed", c.lambda.grid_seed}}},
    {"bench", {{"N_values", c.bench.N_values}, {"repeats", c.bench.repeats}, {"full_repeats", c.bench.full_repeats}}},
    {"trials", c.trials},
    {"seed", c.seed},
    {"workers", c.workers},
    {"output_dir", c.output_dir},
    {"max_solver_iterations", c.max_solver_iterations}};
}

ExperimentConfig config_from_json(const json & j)
{
  ExperimentConfig c;
  reject_unknown(j, "", {"plant", "noise", "data", "validation", "control", "reference", "controllers", "lambda",
                         "bench", "trials", "seed", "workers", "output_dir", "max_solver_iterations"});
  if (j.contains("plant")) {
    const json & p = j["plant"];
    reject_unknown(p, "plant", {"k1", "k2", "b1", "b2", "m1", "m2", "dt"});
    read(p, "k1", c.plant.k1, "plant");
    read(p, "k2", c.plant.k2, "plant");
    read(p, "b1", c.plant.b1, "plant");
    read(p, "b2", c.plant.b2, "plant");
    read(p, "m1", c.plant.m1, "plant");
    read(p, "m2", c.plant.m2, "plant");
    read(p, "dt", c.plant.dt, "plant");
  }
  if (j.contains("noise")) {
    const json & n = j["noise"];
    reject_unknown(n, "noise", {"sigma_u", "sigma_y", "ar_coeff", "truncation"});
    read(n, "sigma_u", c.noise.sigma_u, "noise");
    read(n, "sigma_y", c.noise.sigma_y, "noise");
    read(n, "ar_coeff", c.noise.ar_coeff, "noise");
    read(n, "truncation", c.noise.truncation, "noise");
  }
  if (j.contains("data")) {
    const json & d = j["data"];
    reject_unknown(d, "data", {"mode", "length", "excitation", "pid", "seed", "regenerate_per_trial"});
    std::string mode = mode_name(c.data.mode);
    read(d, "mode", mode, "data");
    c.data.mode = parse_mode(mode);
    read(d, "length", c.data.length, "data");
    read(d, "seed", c.data.seed, "data");
    read(d, "regenerate_per_trial", c.data.regenerate_per_trial, "data");
    if (d.contains("excitation")) {
      const json & e = d["excitation"];
      reject_unknown(e, "data.excitation", {"period", "amplitude", "noise_variance"});
      read(e, "period", c.data.excitation.period, "data.excitation");
      read(e, "amplitude", c.data.excitation.amplitude, "data.excitation");
      read(e, "noise_variance", c.data.excitation.noise_variance, "data.excitation");
    }
    if (d.contains("pid")) {
      const json & p = d["pid"];
      reject_unknown(p, "data.pid", {"kp", "ki", "kd", "reference_period", "reference_amplitude"});
      read(p, "kp", c.data.pid.gains.kp, "data.pid");
      read(p, "ki", c.data.pid.gains.ki, "data.pid");
      read(p, "kd", c.data.pid.gains.kd, "data.pid");
      read(p, "reference_period", c.data.pid.reference_period, "data.pid");
      read(p, "reference_amplitude", c.data.pid.reference_amplitude, "data.pid");
    }
  }
  if (j.contains("validation")) {
    const json & v = j["validation"];
    reject_unknown(v, "validation", {"seed", "length", "slices"});
    read(v, "seed", c.validation.seed, "validation");
    read(v, "length", c.validation.length, "validation");
    read(v, "slices", c.validation.slices, "validation");
  }
  if (j.contains("control")) {
    const json & k = j["control"];
    reject_unknown(k, "control", {"Lp", "Lf", "q_diag", "r", "input_gain", "output_weights", "reduced"});
    read(k, "Lp", c.control.Lp, "control");
    read(k, "Lf", c.control.Lf, "control");
    read(k, "q_diag", c.control.q_diag, "control");
    read(k, "r", c.control.r, "control");
    read(k, "input_gain", c.control.input_gain, "control");
    read(k, "output_weights", c.control.output_weights, "control");
    read(k, "reduced", c.control.reduced, "control");
  }
  if (j.contains("reference")) {
    const json & r = j["reference"];
    reject_unknown(r, "reference", {"shape", "period", "amplitude", "channel", "length"});
    std::string shape = shape_name(c.reference.shape);
    read(r, "shape", shape, "reference");
    c.reference.shape = parse_shape(shape);
    read(r, "period", c.reference.period, "reference");
    read(r, "amplitude", c.reference.amplitude, "reference");
    read(r, "channel", c.reference.channel, "reference");
    read(r, "length", c.reference.length, "reference");
  }
  read(j, "controllers", c.controllers, "");
  if (j.contains("lambda")) {
    const json & l = j["lambda"];
    reject_unknown(l, "lambda", {"default", "per_controller", "grid", "grid_trials", "grid_seed"});
    if (l.contains("default")) { c.lambda.fallback = parse_choice(l["default"], "lambda.default"); }
    if (l.contains("per_controller")) {
      const json & pc = l["per_controller"];
      if (!pc.is_object()) { bad("lambda.per_controller", "expected an object"); }
      c.lambda.per_controller.clear();
      for (const auto & [k, v] : pc.items()) { c.lambda.per_controller[k] = parse_choice(v, "lambda.per_controller." + k); }
    }
    read(l, "grid", c.lambda.grid, "lambda");
    read(l, "grid_trials", c.lambda.grid_trials, "lambda");
    read(l, "grid_seed", c.lambda.grid_seed, "lambda");
  }
  if (j.contains("bench")) {
    const json & b = j["bench"];
    reject_unknown(b, "bench", {"N_values", "repeats", "full_repeats"});
    read(b, "N_values", c.bench.N_values, "bench");
    read(b, "repeats", c.bench.repeats, "bench");
    read(b, "full_repeats", c.bench.full_repeats, "bench");
  }
  read(j, "trials", c.trials, "");
  read(j, "seed", c.seed, "");
  read(j, "workers", c.workers, "");
  read(j, "output_dir", c.output_dir, "");
  read(j, "max_solver_iterations", c.max_solver_iterations, "");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string & path)
{
  std::ifstream is(path);
  if (!is) { throw std::invalid_argument("config: cannot open " + path); }
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error & e) {
    throw std::invalid_argument("config: " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig & cfg, const std::string & path)
{
  std::ofstream os(path);
  if (!os) { throw std::runtime_error("cannot write " + path); }
  os << to_json(cfg).dump(2) << '\n';
}

}  // namespace rddpc::harness
