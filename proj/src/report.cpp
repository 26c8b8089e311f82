#include "rddpc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rddpc::harness {

using nlohmann::json;

namespace {

json matrix_json(const MatrixXd & A)
{
  json rows = json::array();
  for (Index i = 0; i < A.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(A.cols()));
    for (Index k = 0; k < A.cols(); ++k) { r[static_cast<std::size_t>(k)] = A(i, k); }
    rows.push_back(r);
  }
  return rows;
}

MatrixXd matrix_from(const json & j)
{
  if (!j.is_array()) { throw std::invalid_argument("report: matrix must be an array of rows"); }
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows ? static_cast<Index>(j[0].size()) : 0;
  MatrixXd A(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto r = j[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Index>(r.size()) != cols) { throw std::invalid_argument("report: ragged matrix"); }
    for (Index k = 0; k < cols; ++k) { A(i, k) = r[static_cast<std::size_t>(k)]; }
  }
  return A;
}

double percentile(std::vector<double> v, double p)
{
  if (v.empty()) { return 0.0; }
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo    = static_cast<std::size_t>(std::floor(pos));
  const auto hi    = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<std::string> split(const std::string & line, char sep)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) { out.push_back(cell); }
  return out;
}

}  // namespace

Quantiles quantiles(std::vector<double> values)
{
  if (values.empty()) { throw std::invalid_argument("quantiles of an empty sample"); }
  return {percentile(values, 0.0), percentile(values, 0.25), percentile(values, 0.5), percentile(values, 0.75),
          percentile(values, 1.0)};
}

Aggregate aggregate(const std::vector<const TrialRecord *> & trials)
{
  Aggregate a;
  std::vector<double> J, solve, assembly;
  for (const auto * t : trials) {
    ++a.trials;
    if (!t->error.empty()) {
      ++a.failed_trials;
      continue;
    }
    J.push_back(t->J_total);
    solve.insert(solve.end(), t->solve_seconds.begin(), t->solve_seconds.end());
    assembly.insert(assembly.end(), t->assembly_seconds.begin(), t->assembly_seconds.end());
  }
  if (J.empty()) { return a; }
  const double n = static_cast<double>(J.size());
  a.mean_J       = std::accumulate(J.begin(), J.end(), 0.0) / n;
  double ss      = 0.0;
  for (double v : J) { ss += (v - a.mean_J) * (v - a.mean_J); }
  a.std_J        = J.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  a.box          = quantiles(J);
  a.median_J     = a.box.median;
  a.solve_p50    = percentile(solve, 0.5);
  a.solve_p90    = percentile(solve, 0.9);
  a.solve_max    = percentile(solve, 1.0);
  a.assembly_p50 = percentile(assembly, 0.5);
  return a;
}

void ExperimentReport::reaggregate()
{
  std::map<std::string, std::vector<const TrialRecord *>> groups;
  for (const auto & t : trials) { groups[t.controller].push_back(&t); }
  aggregate.clear();
  for (const auto & [name, g] : groups) { aggregate[name] = harness::aggregate(g); }
}

json to_json(const TrialRecord & t)
{
  json checks = json::array();
  for (const auto & b : t.bound_checks) {
    checks.push_back({{"step", b.step}, {"membership", b.membership}, {"lambda_needed", b.lambda_needed},
                      {"realized", b.realized}, {"bound", b.bound}, {"passed", b.passed}});
  }
  return json{{"controller", t.controller},
              {"lambda", t.lambda},
              {"seed", t.seed},
              {"warmup", t.warmup},
              {"u", matrix_json(t.u)},
              {"y", matrix_json(t.y)},
              {"y_ref", matrix_json(t.y_ref)},
              {"solve_seconds", t.solve_seconds},
              {"assembly_seconds", t.assembly_seconds},
              {"status", t.status},
              {"iterations", t.iterations},
              {"failures", t.failures},
              {"J_total", t.J_total},
              {"noise_digest", t.noise_digest},
              {"trajectory_file", t.trajectory_file},
              {"bound_checks", checks},
              {"error", t.error}};
}

TrialRecord trial_from_json(const json & j)
{
  TrialRecord t;
  t.controller       = j.at("controller").get<std::string>();
  t.lambda           = j.at("lambda").get<double>();
  t.seed             = j.at("seed").get<std::uint64_t>();
  t.warmup           = j.at("warmup").get<Index>();
  t.u                = matrix_from(j.at("u"));
  t.y                = matrix_from(j.at("y"));
  t.y_ref            = matrix_from(j.at("y_ref"));
  t.solve_seconds    = j.at("solve_seconds").get<std::vector<double>>();
  t.assembly_seconds = j.at("assembly_seconds").get<std::vector<double>>();
  t.status           = j.at("status").get<std::vector<std::string>>();
  t.iterations       = j.at("iterations").get<std::vector<int>>();
  t.failures         = j.at("failures").get<Index>();
  t.J_total          = j.at("J_total").get<double>();
  t.noise_digest     = j.at("noise_digest").get<std::string>();
  t.trajectory_file  = j.at("trajectory_file").get<std::string>();
  t.error            = j.at("error").get<std::string>();
  for (const auto & b : j.at("bound_checks")) {
    t.bound_checks.push_back({b.at("step").get<Index>(), b.at("membership").get<bool>(),
                              b.at("lambda_needed").get<double>(), b.at("realized").get<double>(),
                              b.at("bound").get<double>(), b.at("passed").get<bool>()});
  }
  return t;
}

json to_json(const Aggregate & a)
{
  return json{{"trials", a.trials},
              {"failed_trials", a.failed_trials},
              {"mean_J", a.mean_J},
              {"std_J", a.std_J},
              {"median_J", a.median_J},
              {"box", {{"min", a.box.min}, {"q1", a.box.q1}, {"median", a.box.median}, {"q3", a.box.q3}, {"max", a.box.max}}},
              {"solve_p50", a.solve_p50},
              {"solve_p90", a.solve_p90},
              {"solve_max", a.solve_max},
              {"assembly_p50", a.assembly_p50}};
}

Aggregate aggregate_from_json(const json & j)
{
  Aggregate a;
  a.trials        = j.at("trials").get<Index>();
  a.failed_trials = j.at("failed_trials").get<Index>();
  a.mean_J        = j.at("mean_J").get<double>();
  a.std_J         = j.at("std_J").get<double>();
  a.median_J      = j.at("median_J").get<double>();
  const json & b  = j.at("box");
  a.box           = {b.at("min").get<double>(), b.at("q1").get<double>(), b.at("median").get<double>(),
                     b.at("q3").get<double>(), b.at("max").get<double>()};
  a.solve_p50     = j.at("solve_p50").get<double>();
  a.solve_p90     = j.at("solve_p90").get<double>();
  a.solve_max     = j.at("solve_max").get<double>();
  a.assembly_p50  = j.at("assembly_p50").get<double>();
  return a;
}

json to_json(const ExperimentReport & r)
{
  json trials = json::array();
  for (const auto & t : r.trials) { trials.push_back(to_json(t)); }
  json agg = json::object();
  for (const auto & [k, a] : r.aggregate) { agg[k] = to_json(a); }
  return json{{"config", r.config}, {"trials", trials}, {"aggregate", agg}, {"lambdas", r.lambdas}};
}

ExperimentReport report_from_json(const json & j)
{
  ExperimentReport r;
  try {
    r.config = j.at("config");
    for (const auto & t : j.at("trials")) { r.trials.push_back(trial_from_json(t)); }
    for (const auto & [k, a] : j.at("aggregate").items()) { r.aggregate[k] = aggregate_from_json(a); }
    r.lambdas = j.at("lambdas").get<std::map<std::string, double>>();
  } catch (const json::exception & e) {
    throw std::invalid_argument(std::string("report: ") + e.what());
  }
  return r;
}

void write_report(const ExperimentReport & r, const std::string & path)
{
  std::ofstream os(path);
  if (!os) { throw std::runtime_error("cannot write " + path); }
  os << to_json(r).dump(2) << '\n';
}

ExperimentReport read_report(const std::string & path)
{
  std::ifstream is(path);
  if (!is) { throw std::invalid_argument("cannot open " + path); }
  return report_from_json(json::parse(is));
}

std::string fnv1a_digest(const MatrixXd & a, const MatrixXd & b)
{
  std::uint64_t h = 14695981039346656037ULL;
  auto feed       = [&h](const MatrixXd & m) {
    for (Index i = 0; i < m.size(); ++i) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, m.data() + i, sizeof(double));
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
      }
    }
  };
  feed(a);
  feed(b);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_band_csv(const ExperimentReport & r, const std::string & path)
{
  std::ofstream os(path);
  if (!os) { throw std::runtime_error("cannot write " + path); }
  os << std::setprecision(10) << "controller,step,signal,mean,std\n";
  std::map<std::string, std::vector<const TrialRecord *>> groups;
  for (const auto & t : r.trials) {
    if (t.error.empty()) { groups[t.controller].push_back(&t); }
  }
  for (const auto & [name, g] : groups) {
    const Index T  = g.front()->u.cols();
    const Index nu = g.front()->u.rows();
    const Index ny = g.front()->y.rows();
    auto band      = [&](const char * label, Index row, bool input) {
      for (Index k = 0; k < T; ++k) {
        double s = 0.0, s2 = 0.0;
        for (const auto * t : g) {
          const double v = input ? t->u(row, k) : t->y(row, k);
          s += v;
          s2 += v * v;
        }
        const double n  = static_cast<double>(g.size());
        const double m  = s / n;
        const double sd = g.size() > 1 ? std::sqrt(std::max(0.0, (s2 - n * m * m) / (n - 1.0))) : 0.0;
        os << name << ',' << k << ',' << label << row + 1 << ',' << m << ',' << sd << '\n';
      }
    };
    for (Index i = 0; i < nu; ++i) { band("u", i, true); }
    for (Index i = 0; i < ny; ++i) { band("y", i, false); }
  }
}

void write_grid_csv(const std::vector<GridRow> & rows, const std::string & path)
{
  std::ofstream os(path);
  if (!os) { throw std::runtime_error("cannot write " + path); }
  os << std::setprecision(17) << "controller,lambda,mean_J,std_J\n";
  for (const auto & r : rows) { os << r.controller << ',' << r.lambda << ',' << r.mean_J << ',' << r.std_J << '\n'; }
}

std::vector<GridRow> read_grid_csv(const std::string & path)
{
  std::ifstream is(path);
  if (!is) { throw std::invalid_argument("cannot open " + path); }
  std::string line;
  std::getline(is, line);
  if (line != "controller,lambda,mean_J,std_J") { throw std::invalid_argument("grid csv: unexpected header"); }
  std::vector<GridRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) { continue; }
    const auto c = split(line, ',');
    if (c.size() != 4) { throw std::invalid_argument("grid csv: expected 4 columns"); }
    rows.push_back({c[0], std::stod(c[1]), std::stod(c[2]), std::stod(c[3]), false});
  }
  return rows;
}

void write_timing_csv(const std::vector<TimingRow> & rows, const std::string & path)
{
  std::ofstream os(path);
  if (!os) { throw std::runtime_error("cannot write " + path); }
  os << std::setprecision(10) << "formulation,N,repeats,median_solve_s,median_assembly_s,iterations,status\n";
  for (const auto & r : rows) {
    os << r.formulation << ',' << r.N << ',' << r.repeats << ',' << r.median_solve << ',' << r.median_assembly << ','
       << r.iterations << ',' << r.status << '\n';
  }
}

}  // namespace rddpc::harness
