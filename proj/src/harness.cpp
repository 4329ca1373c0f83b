#include "ftmg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

namespace ftmg {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& msg) {
  fail(ErrorCode::Config, (path.empty() ? std::string("<root>") : path) + ": " + msg);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string at_index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void check_object(const json& obj, const std::string& path,
                  std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error(path, "expected an object");
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) config_error(join(path, item.key()), "unknown field");
  }
}

int as_int(const json& v, const std::string& path, int lo, int hi) {
  if (!v.is_number_integer()) config_error(path, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < lo || x > hi) {
    config_error(path, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
  }
  return static_cast<int>(x);
}

int get_int(const json& obj, const std::string& path, const char* key, int def, int lo, int hi) {
  if (!obj.contains(key)) return def;
  return as_int(obj.at(key), join(path, key), lo, hi);
}

double get_double(const json& obj, const std::string& path, const char* key, double def, double lo) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number()) config_error(join(path, key), "expected a number");
  const double x = v.get<double>();
  if (!(x >= lo) || !std::isfinite(x)) config_error(join(path, key), "value out of range");
  return x;
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool def) {
  if (!obj.contains(key)) return def;
  if (!obj.at(key).is_boolean()) config_error(join(path, key), "expected true or false");
  return obj.at(key).get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& def) {
  if (!obj.contains(key)) return def;
  if (!obj.at(key).is_string()) config_error(join(path, key), "expected a string");
  return obj.at(key).get<std::string>();
}

template <class E>
struct Names {
  std::initializer_list<std::pair<const char*, E>> table;

  E parse(const json& v, const std::string& path) const {
    if (!v.is_string()) config_error(path, "expected a string");
    const std::string s = v.get<std::string>();
    for (const auto& [name, value] : table) {
      if (s == name) return value;
    }
    std::string options;
    for (const auto& [name, value] : table) options += (options.empty() ? "" : "|") + std::string(name);
    config_error(path, "unknown value '" + s + "' (expected " + options + ")");
  }
};

const Names<Strategy> kStrategies{
    {{"none", Strategy::None}, {"LR", Strategy::LR}, {"DD", Strategy::DD}, {"DN", Strategy::DN}}};
const Names<LocalSolver> kLocalSolvers{{{"Vcycle", LocalSolver::Vcycle},
                                        {"Wcycle", LocalSolver::Wcycle},
                                        {"Fcycle", LocalSolver::Fcycle},
                                        {"PCG", LocalSolver::PCG},
                                        {"Smooth", LocalSolver::Smooth}}};
const Names<CycleKind> kCycles{{{"V", CycleKind::V}, {"W", CycleKind::W}, {"F", CycleKind::F}}};
const Names<Accounting> kAccounting{
    {{"global", Accounting::Global}, {"table1", Accounting::Table1}}};
const Names<ProblemKind> kProblems{
    {{"harmonic", ProblemKind::Harmonic}, {"manufactured", ProblemKind::Manufactured}}};

std::string rational_str(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

std::optional<Rational> parse_rational(const std::string& s) {
  const auto slash = s.find('/');
  auto to_i64 = [](std::string_view t, std::int64_t& out) {
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc() && p == t.data() + t.size() && !t.empty();
  };
  std::int64_t n = 0, d = 1;
  std::string_view sv(s);
  if (slash == std::string::npos) {
    if (!to_i64(sv, n)) return std::nullopt;
  } else {
    if (!to_i64(sv.substr(0, slash), n) || !to_i64(sv.substr(slash + 1), d) || d == 0) {
      return std::nullopt;
    }
  }
  return Rational(n, d);
}

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string(to_string(err->code())) + ": " + err->what();
  }
  return e.what();
}

Rational as_rational(const json& v, const std::string& path) {
  if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
  if (v.is_string()) {
    if (auto r = parse_rational(v.get<std::string>())) return *r;
  }
  config_error(path, "expected an integer or a fraction string such as \"3/2\"");
}

json rational_json(const Rational& r) {
  if (r.denominator() == 1) return r.numerator();
  return rational_str(r);
}

template <class T, class F>
std::vector<T> parse_list(const json& obj, const std::string& path, const char* key, F&& item) {
  std::vector<T> out;
  if (!obj.contains(key)) return out;
  const json& arr = obj.at(key);
  const std::string p = join(path, key);
  if (!arr.is_array() || arr.empty()) config_error(p, "expected a nonempty array");
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(item(arr[i], at_index(p, i)));
  return out;
}

void parse_grid(const json& j, PartitionSpec& g) {
  check_object(j, "grid", {"subdomains", "base_cells", "levels"});
  if (j.contains("subdomains")) {
    const json& s = j.at("subdomains");
    if (!s.is_array() || s.size() != 3) config_error("grid.subdomains", "expected 3 integers");
    for (int d = 0; d < 3; ++d) g.subdomains[d] = as_int(s[d], at_index("grid.subdomains", d), 1, 64);
  }
  g.base_cells = get_int(j, "grid", "base_cells", g.base_cells, 2, 1024);
  g.levels = get_int(j, "grid", "levels", g.levels, 0, 12);
  try {
    validate(g);
  } catch (const Error& e) {
    config_error("grid", e.what());
  }
}

void parse_solver(const json& j, ScenarioConfig& c) {
  const std::string p = "solver";
  check_object(j, p, {"cycle", "pre_smooth", "post_smooth", "coarse", "rel_residual_tol", "max_cycles"});
  if (j.contains("cycle")) c.cycle.kind = kCycles.parse(j.at("cycle"), join(p, "cycle"));
  c.cycle.pre_smooth = get_int(j, p, "pre_smooth", c.cycle.pre_smooth, 0, 100);
  c.cycle.post_smooth = get_int(j, p, "post_smooth", c.cycle.post_smooth, 0, 100);
  c.stop.rel_residual_tol = get_double(j, p, "rel_residual_tol", c.stop.rel_residual_tol, 0.0);
  c.stop.max_cycles = get_int(j, p, "max_cycles", c.stop.max_cycles, 0, 100000);
  if (j.contains("coarse")) {
    const json& k = j.at("coarse");
    const std::string q = join(p, "coarse");
    check_object(k, q, {"preconditioner", "rel_tol", "max_iter"});
    const std::string pre = get_string(k, q, "preconditioner", "jacobi");
    if (pre != "jacobi" && pre != "none") {
      config_error(join(q, "preconditioner"), "unknown value '" + pre + "' (expected jacobi|none)");
    }
    c.cycle.coarse.jacobi = pre == "jacobi";
    c.cycle.coarse.rel_tol = get_double(k, q, "rel_tol", c.cycle.coarse.rel_tol, 0.0);
    c.cycle.coarse.max_iter = get_int(k, q, "max_iter", c.cycle.coarse.max_iter, 1, 1000000);
  }
}

void parse_recovery(const json& j, RecoveryConfig& r) {
  const std::string p = "recovery";
  check_object(j, p, {"strategy", "local_solver", "n_I", "eta", "n_F"});
  if (j.contains("strategy")) r.strategy = kStrategies.parse(j.at("strategy"), join(p, "strategy"));
  if (j.contains("local_solver")) {
    r.local_solver = kLocalSolvers.parse(j.at("local_solver"), join(p, "local_solver"));
  }
  r.n_I = get_int(j, p, "n_I", r.n_I, 0, 10000);
  if (j.contains("eta")) {
    r.eta = as_rational(j.at("eta"), join(p, "eta"));
    if (r.eta < 1) config_error(join(p, "eta"), "eta must be >= 1");
  }
  if (j.contains("n_F")) r.n_F_direct = as_int(j.at("n_F"), join(p, "n_F"), 0, 1000000);
  try {
    r.validate();
  } catch (const Error& e) {
    config_error(p, e.what());
  }
}

void resolve_faults(ScenarioConfig& c) {
  int last = 0;
  for (std::size_t i = 0; i < c.faults.size(); ++i) {
    FaultSpec& f = c.faults[i];
    const std::string p = at_index("faults", i);
    if (!f.scenario.empty()) {
      try {
        f.subdomains = {scenario_subdomain(c.problem.grid, f.scenario)};
      } catch (const Error& e) {
        config_error(join(p, "scenario"), e.what());
      }
    }
    if (f.subdomains.empty()) config_error(p, "needs a scenario or a nonempty subdomains list");
    if (f.after_cycle <= last) config_error(join(p, "after_cycle"), "faults must be strictly ordered");
    last = f.after_cycle;
    const int count = c.problem.grid.subdomains[0] * c.problem.grid.subdomains[1] *
                      c.problem.grid.subdomains[2];
    std::vector<int> ids = f.subdomains;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int id : ids) {
      if (id < 0 || id >= count) {
        config_error(join(p, "subdomains"), "subdomain id " + std::to_string(id) +
                                                " out of range [0, " + std::to_string(count) + ")");
      }
    }
    if (static_cast<int>(ids.size()) == count) {
      config_error(join(p, "subdomains"), "every subdomain is faulty, no healthy region left");
    }
  }
}

ScenarioConfig parse_scenario(const json& j) {
  ScenarioConfig c;
  check_object(j, "", {"grid", "problem", "solver", "faults", "recovery", "accounting",
                       "trace_regions", "output_dir", "seed", "sweep"});
  if (j.contains("grid")) parse_grid(j.at("grid"), c.problem.grid);
  else parse_grid(json::object(), c.problem.grid);
  if (j.contains("problem")) {
    const json& p = j.at("problem");
    check_object(p, "problem", {"kind", "initial_guess"});
    if (p.contains("kind")) c.problem.kind = kProblems.parse(p.at("kind"), "problem.kind");
    const std::string guess = get_string(p, "problem", "initial_guess", "zero");
    if (guess != "zero" && guess != "random") {
      config_error("problem.initial_guess", "unknown value '" + guess + "' (expected zero|random)");
    }
    c.problem.random_guess = guess == "random";
  }
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      config_error("seed", "expected a nonnegative integer");
    }
    c.problem.seed = s.get<std::uint64_t>();
  }
  if (j.contains("solver")) parse_solver(j.at("solver"), c);
  c.faults = parse_list<FaultSpec>(j, "", "faults", [](const json& f, const std::string& p) {
    check_object(f, p, {"after_cycle", "scenario", "subdomains"});
    FaultSpec out;
    out.after_cycle = get_int(f, p, "after_cycle", 1, 1, 100000);
    out.scenario = get_string(f, p, "scenario", "");
    if (f.contains("subdomains")) {
      if (!out.scenario.empty()) config_error(p, "give either scenario or subdomains, not both");
      out.subdomains = parse_list<int>(f, p, "subdomains", [](const json& v, const std::string& q) {
        return as_int(v, q, -1000000, 1000000);
      });
    }
    return out;
  });
  resolve_faults(c);
  if (j.contains("recovery")) parse_recovery(j.at("recovery"), c.recovery);
  if (j.contains("accounting")) c.accounting = kAccounting.parse(j.at("accounting"), "accounting");
  c.trace_regions = get_bool(j, "", "trace_regions", c.trace_regions);
  c.output_dir = get_string(j, "", "output_dir", c.output_dir);
  return c;
}

SweepAxes parse_axes(const json& j) {
  const std::string p = "sweep";
  check_object(j, p, {"strategy", "local_solver", "n_I", "n_F", "eta", "k_F", "scenario"});
  SweepAxes a;
  a.strategy = parse_list<Strategy>(j, p, "strategy", [](const json& v, const std::string& q) {
    return kStrategies.parse(v, q);
  });
  a.local_solver = parse_list<LocalSolver>(j, p, "local_solver", [](const json& v, const std::string& q) {
    return kLocalSolvers.parse(v, q);
  });
  a.n_I = parse_list<int>(j, p, "n_I", [](const json& v, const std::string& q) { return as_int(v, q, 0, 10000); });
  a.n_F = parse_list<int>(j, p, "n_F", [](const json& v, const std::string& q) { return as_int(v, q, 0, 1000000); });
  a.eta = parse_list<Rational>(j, p, "eta", [](const json& v, const std::string& q) {
    Rational r = as_rational(v, q);
    if (r < 1) config_error(q, "eta must be >= 1");
    return r;
  });
  a.k_F = parse_list<int>(j, p, "k_F", [](const json& v, const std::string& q) { return as_int(v, q, 1, 100000); });
  a.scenario = parse_list<std::string>(j, p, "scenario", [](const json& v, const std::string& q) {
    if (!v.is_string()) config_error(q, "expected a string");
    return v.get<std::string>();
  });
  return a;
}

}  // namespace

bool SweepAxes::empty() const {
  return strategy.empty() && local_solver.empty() && n_I.empty() && n_F.empty() && eta.empty() &&
         k_F.empty() && scenario.empty();
}

int scenario_subdomain(const PartitionSpec& grid, const std::string& name) {
  const Index3& P = grid.subdomains;
  Index3 box;
  if (name == "corner") {
    box = {0, 0, 0};
  } else if (name == "edge") {
    box = {std::min(1, P[0] - 1), 0, 0};
  } else if (name == "center") {
    box = {P[0] / 2, P[1] / 2, P[2] / 2};
  } else {
    fail(ErrorCode::Config, "unknown scenario '" + name + "' (expected corner|edge|center)");
  }
  return (box[2] * P[1] + box[1]) * P[0] + box[0];
}

SweepSpec parse_config(const json& doc) {
  const json& j = doc.is_object() && doc.contains("config") ? doc.at("config") : doc;
  SweepSpec spec;
  spec.base = parse_scenario(j);
  if (j.contains("sweep")) spec.axes = parse_axes(j.at("sweep"));
  if ((!spec.axes.k_F.empty() || !spec.axes.scenario.empty()) && spec.base.faults.empty()) {
    config_error("sweep", "k_F and scenario axes move the first fault; the base config has none");
  }
  for (std::size_t i = 0; i < spec.axes.scenario.size(); ++i) {
    try {
      scenario_subdomain(spec.base.problem.grid, spec.axes.scenario[i]);
    } catch (const Error& e) {
      config_error(at_index("sweep.scenario", i), e.what());
    }
  }
  return spec;
}

SweepSpec load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Config, path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const SweepSpec& spec) {
  const ScenarioConfig& c = spec.base;
  json j;
  j["grid"] = {{"subdomains", c.problem.grid.subdomains},
               {"base_cells", c.problem.grid.base_cells},
               {"levels", c.problem.grid.levels}};
  j["problem"] = {{"kind", to_string(c.problem.kind)},
                  {"initial_guess", c.problem.random_guess ? "random" : "zero"}};
  j["seed"] = c.problem.seed;
  j["solver"] = {{"cycle", to_string(c.cycle.kind)},
                 {"pre_smooth", c.cycle.pre_smooth},
                 {"post_smooth", c.cycle.post_smooth},
                 {"coarse",
                  {{"preconditioner", c.cycle.coarse.jacobi ? "jacobi" : "none"},
                   {"rel_tol", c.cycle.coarse.rel_tol},
                   {"max_iter", c.cycle.coarse.max_iter}}},
                 {"rel_residual_tol", c.stop.rel_residual_tol},
                 {"max_cycles", c.stop.max_cycles}};
  j["faults"] = json::array();
  for (const FaultSpec& f : c.faults) {
    json e = {{"after_cycle", f.after_cycle}};
    if (!f.scenario.empty()) e["scenario"] = f.scenario;
    else e["subdomains"] = f.subdomains;
    j["faults"].push_back(e);
  }
  j["recovery"] = {{"strategy", to_string(c.recovery.strategy)},
                   {"local_solver", to_string(c.recovery.local_solver)},
                   {"n_I", c.recovery.n_I},
                   {"eta", rational_json(c.recovery.eta)}};
  if (c.recovery.n_F_direct) j["recovery"]["n_F"] = *c.recovery.n_F_direct;
  j["accounting"] = to_string(c.accounting);
  j["trace_regions"] = c.trace_regions;
  j["output_dir"] = c.output_dir;
  if (!spec.axes.empty()) {
    json s = json::object();
    const SweepAxes& a = spec.axes;
    auto names = [](const auto& v) {
      json arr = json::array();
      for (const auto& x : v) arr.push_back(to_string(x));
      return arr;
    };
    if (!a.strategy.empty()) s["strategy"] = names(a.strategy);
    if (!a.local_solver.empty()) s["local_solver"] = names(a.local_solver);
    if (!a.n_I.empty()) s["n_I"] = a.n_I;
    if (!a.n_F.empty()) s["n_F"] = a.n_F;
    if (!a.eta.empty()) {
      s["eta"] = json::array();
      for (const Rational& r : a.eta) s["eta"].push_back(rational_json(r));
    }
    if (!a.k_F.empty()) s["k_F"] = a.k_F;
    if (!a.scenario.empty()) s["scenario"] = a.scenario;
    j["sweep"] = s;
  }
  return j;
}

std::vector<ScenarioConfig> expand(const SweepSpec& spec) {
  const SweepAxes& a = spec.axes;
  const ScenarioConfig& b = spec.base;
  auto axis = [](const auto& values, const auto& fallback) {
    using T = std::decay_t<decltype(fallback)>;
    return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values.begin(), values.end());
  };
  const std::string base_scenario = b.faults.empty() ? "" : b.faults.front().scenario;
  const int base_kF = b.faults.empty() ? 0 : b.faults.front().after_cycle;
  std::vector<ScenarioConfig> out;
  for (const std::string& sc : axis(a.scenario, base_scenario)) {
    for (int kF : axis(a.k_F, base_kF)) {
      for (Strategy st : axis(a.strategy, b.recovery.strategy)) {
        for (LocalSolver ls : axis(a.local_solver, b.recovery.local_solver)) {
          for (int nI : axis(a.n_I, b.recovery.n_I)) {
            for (int nF : axis(a.n_F, b.recovery.n_F_direct.value_or(-1))) {
              for (const Rational& eta : axis(a.eta, b.recovery.eta)) {
                ScenarioConfig c = b;
                if (!c.faults.empty()) {
                  FaultSpec& f = c.faults.front();
                  if (!a.scenario.empty()) {
                    f.scenario = sc;
                    f.subdomains = {scenario_subdomain(c.problem.grid, sc)};
                  }
                  f.after_cycle = kF;
                }
                c.recovery.strategy = st;
                c.recovery.local_solver = ls;
                c.recovery.n_I = nI;
                c.recovery.n_F_direct = nF >= 0 ? std::optional<int>(nF) : std::nullopt;
                c.recovery.eta = eta;
                out.push_back(std::move(c));
              }
            }
          }
        }
      }
    }
  }
  return out;
}

bool SweepResult::all_converged() const {
  return std::all_of(runs.begin(), runs.end(),
                     [](const RunOutput& r) { return r.row.error.empty() && r.row.converged; });
}

std::size_t SweepResult::error_rows() const {
  return static_cast<std::size_t>(std::count_if(
      runs.begin(), runs.end(), [](const RunOutput& r) { return !r.row.error.empty(); }));
}

namespace {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string baseline_key(const ScenarioConfig& c) {
  if (!c.trace_regions || c.faults.empty()) return "baseline";
  std::vector<int> ids = c.faults.front().subdomains;
  std::sort(ids.begin(), ids.end());
  std::string key = "baseline";
  for (int id : ids) key += "_s" + std::to_string(id);
  return key;
}

std::string fault_label(const ScenarioConfig& c) {
  if (c.faults.empty()) return "none";
  const FaultSpec& f = c.faults.front();
  if (!f.scenario.empty()) return f.scenario;
  std::string s;
  for (int id : f.subdomains) s += (s.empty() ? "s" : "+s") + std::to_string(id);
  return s;
}

JobSpec job_of(const ScenarioConfig& c) {
  JobSpec job;
  for (const FaultSpec& f : c.faults) job.schedule.push_back(FaultEvent{f.after_cycle, f.subdomains});
  job.recovery = c.recovery;
  job.stop = c.stop;
  job.accounting = c.accounting;
  job.trace_regions = c.trace_regions;
  return job;
}

RunRow row_of(const ScenarioConfig& c, std::size_t index) {
  RunRow r;
  char id[32];
  std::snprintf(id, sizeof id, "run%03zu", index);
  r.run_id = id;
  r.scenario = fault_label(c);
  r.strategy = to_string(c.recovery.strategy);
  r.local_solver = to_string(c.recovery.local_solver);
  r.k_F = c.faults.empty() ? 0 : c.faults.front().after_cycle;
  r.n_I = c.recovery.n_I;
  r.eta = c.recovery.eta;
  r.accounting = to_string(c.accounting);
  return r;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, int jobs) {
  const std::vector<ScenarioConfig> points = expand(spec);
  const PoissonProblem problem(spec.base.problem);
  SweepResult result;

  // One baseline per fault geometry; only the region columns differ.
  std::vector<std::string> keys;
  std::map<std::string, const ScenarioConfig*> first_of;
  for (const ScenarioConfig& c : points) {
    const std::string k = baseline_key(c);
    if (first_of.emplace(k, &c).second) keys.push_back(k);
  }
  std::vector<SolveTrace> traces(keys.size());
  std::vector<std::string> errors(keys.size());
  parallel_for(keys.size(), jobs, [&](std::size_t i) {
    const ScenarioConfig& c = *first_of.at(keys[i]);
    try {
      std::optional<RegionMask> mask;
      if (keys[i] != "baseline") mask = region_masks(problem.hierarchy(), c.faults.front().subdomains);
      traces[i] = run_baseline(problem, c.cycle, c.stop, mask ? &*mask : nullptr);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    slot[keys[i]] = i;
    if (errors[i].empty()) result.baselines[keys[i]] = traces[i];
  }

  result.runs.resize(points.size());
  parallel_for(points.size(), jobs, [&](std::size_t i) {
    const ScenarioConfig& c = points[i];
    RunOutput& out = result.runs[i];
    out.row = row_of(c, i);
    out.baseline_key = baseline_key(c);
    const std::size_t b = slot.at(out.baseline_key);
    try {
      out.row.n_F = c.recovery.n_F();
      if (!errors[b].empty()) fail(ErrorCode::InvalidArgument, "baseline failed: " + errors[b]);
      const RecoveryReport rep = run_faulty_job(problem, c.cycle, job_of(c), &traces[b]);
      out.row.k_free = rep.k_free;
      out.row.k_faulty = rep.k_faulty;
      out.row.kappa = rep.kappa;
      out.row.logical_time = rep.logical_time;
      out.row.converged = rep.converged;
      out.trace = rep.faulty;
    } catch (const std::exception& e) {
      out.row.error = describe(e);
    }
  });
  return result;
}

SweepResult run_scenario(const ScenarioConfig& cfg) {
  SweepSpec spec;
  spec.base = cfg;
  return run_sweep(spec, 1);
}

SweepResult run_baseline_only(const ScenarioConfig& cfg) {
  ScenarioConfig c = cfg;
  c.faults.clear();
  c.recovery = RecoveryConfig{};
  const PoissonProblem problem(c.problem);
  SweepResult result;
  RunOutput out;
  out.row = row_of(c, 0);
  out.baseline_key = "baseline";
  try {
    SolveTrace t = run_baseline(problem, c.cycle, c.stop);
    out.row.k_free = out.row.k_faulty = t.iterations;
    out.row.logical_time = Rational(t.global_cycles);
    out.row.converged = t.converged;
    out.trace = t;
    result.baselines["baseline"] = std::move(t);
  } catch (const std::exception& e) {
    out.row.error = describe(e);
  }
  result.runs.push_back(std::move(out));
  return result;
}

const char* const kTableHeader =
    "run_id,scenario,strategy,local_solver,k_F,n_I,n_F,eta,accounting,k_free,k_faulty,kappa,"
    "kappa_exact,logical_time,converged,error";
const char* const kTraceHeader =
    "cycle,rel_residual,res_healthy,res_faulty,res_interface,logical_time,phase";

namespace {

std::string fmt_double(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

double parse_double(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) fail(ErrorCode::Io, "bad number '" + s + "'");
  return x;
}

int parse_int(const std::string& s) {
  int x = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) fail(ErrorCode::Io, "bad integer '" + s + "'");
  return x;
}

Rational parse_rational_field(const std::string& s) {
  if (auto r = parse_rational(s)) return *r;
  fail(ErrorCode::Io, "bad fraction '" + s + "'");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        out.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else {
      out.back() += ch;
    }
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(std::istream& is, const char* header) {
  std::string line;
  if (!std::getline(is, line) || line != header) fail(ErrorCode::Io, "unexpected CSV header");
  std::vector<std::vector<std::string>> rows;
  const std::size_t width = split_csv(header).size();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv(line));
    if (rows.back().size() != width) fail(ErrorCode::Io, "CSV row with wrong field count");
  }
  return rows;
}

}  // namespace

void emit_table(std::ostream& os, const std::vector<RunRow>& rows) {
  os << kTableHeader << '\n';
  for (const RunRow& r : rows) {
    const bool ok = r.error.empty();
    os << csv_field(r.run_id) << ',' << csv_field(r.scenario) << ',' << r.strategy << ','
       << r.local_solver << ',' << r.k_F << ',' << r.n_I << ',' << r.n_F << ','
       << rational_str(r.eta) << ',' << r.accounting << ',';
    if (ok) {
      os << r.k_free << ',' << r.k_faulty << ',' << fmt_double(to_double(r.kappa)) << ','
         << rational_str(r.kappa) << ',' << rational_str(r.logical_time) << ','
         << (r.converged ? 1 : 0) << ',';
    } else {
      os << ",,,,,0,";
    }
    os << csv_field(r.error) << '\n';
  }
}

std::vector<RunRow> parse_table(std::istream& is) {
  std::vector<RunRow> out;
  for (const auto& f : read_csv(is, kTableHeader)) {
    RunRow r;
    r.run_id = f[0];
    r.scenario = f[1];
    r.strategy = f[2];
    r.local_solver = f[3];
    r.k_F = parse_int(f[4]);
    r.n_I = parse_int(f[5]);
    r.n_F = parse_int(f[6]);
    r.eta = parse_rational_field(f[7]);
    r.accounting = f[8];
    r.error = f[15];
    if (r.error.empty()) {
      r.k_free = parse_int(f[9]);
      r.k_faulty = parse_int(f[10]);
      r.kappa = parse_rational_field(f[12]);
      if (parse_double(f[11]) != to_double(r.kappa)) {
        fail(ErrorCode::Io, "kappa columns disagree in row " + r.run_id);
      }
      r.logical_time = parse_rational_field(f[13]);
    }
    r.converged = f[14] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

void emit_trace(std::ostream& os, const SolveTrace& trace) {
  os << kTraceHeader << '\n';
  for (const TraceRow& r : trace.rows) {
    os << r.cycle << ',' << fmt_double(r.rel_residual) << ',' << fmt_double(r.res_healthy) << ','
       << fmt_double(r.res_faulty) << ',' << fmt_double(r.res_interface) << ','
       << fmt_double(r.logical_time) << ',' << r.phase << '\n';
  }
}

std::vector<TraceRow> parse_trace(std::istream& is) {
  std::vector<TraceRow> out;
  for (const auto& f : read_csv(is, kTraceHeader)) {
    TraceRow r;
    r.cycle = parse_int(f[0]);
    r.rel_residual = parse_double(f[1]);
    r.res_healthy = parse_double(f[2]);
    r.res_faulty = parse_double(f[3]);
    r.res_interface = parse_double(f[4]);
    r.logical_time = parse_double(f[5]);
    r.phase = f[6];
    out.push_back(std::move(r));
  }
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::Io, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

const char* version() { return "0.1.0"; }

void write_bundle(const SweepSpec& spec, const SweepResult& result,
                  const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "traces", ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + (dir / "traces").string() + ": " + ec.message());
  json outputs = json::object();
  auto put = [&](const std::string& rel, const std::string& bytes) {
    std::ofstream f(dir / rel, std::ios::binary);
    if (!f) fail(ErrorCode::Io, "cannot write " + (dir / rel).string());
    f << bytes;
    if (!f) fail(ErrorCode::Io, "write failed for " + (dir / rel).string());
    outputs[rel] = sha256_hex(bytes);
  };
  std::vector<RunRow> rows;
  for (const RunOutput& r : result.runs) rows.push_back(r.row);
  std::ostringstream table;
  emit_table(table, rows);
  put("kappa_table.csv", table.str());
  for (const auto& [key, trace] : result.baselines) {
    std::ostringstream os;
    emit_trace(os, trace);
    put("traces/" + key + ".csv", os.str());
  }
  for (const RunOutput& r : result.runs) {
    if (!r.row.error.empty()) continue;
    std::ostringstream os;
    emit_trace(os, r.trace);
    put("traces/" + r.row.run_id + ".csv", os.str());
  }
  json manifest = {{"tool", "ftmg"},
                   {"version", version()},
                   {"config", to_json(spec)},
                   {"outputs", outputs}};
  std::ofstream m(dir / "manifest.json", std::ios::binary);
  if (!m) fail(ErrorCode::Io, "cannot write " + (dir / "manifest.json").string());
  m << manifest.dump(2) << '\n';
}

}  // namespace ftmg
