#include "ftmg/harness.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ftmg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny() {
  return json::parse(R"({
    "grid": {"subdomains": [3, 3, 3], "base_cells": 2, "levels": 2},
    "faults": [{"after_cycle": 3, "scenario": "center"}],
    "recovery": {"strategy": "DD", "local_solver": "Vcycle", "n_I": 2}
  })");
}

std::string config_error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    return e.what();
  }
  FAIL("config was accepted");
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> bundle_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  }
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ftmg_test_" + name)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("defaults of an empty configuration") {
  const SweepSpec s = parse_config(json::object());
  CHECK(s.axes.empty());
  CHECK(s.base.problem.grid.subdomains == std::array<int, 3>{3, 3, 3});
  CHECK(s.base.problem.grid.base_cells == 2);
  CHECK(s.base.problem.grid.levels == 4);
  CHECK(s.base.cycle.kind == CycleKind::V);
  CHECK(s.base.cycle.pre_smooth == 3);
  CHECK(s.base.stop.rel_residual_tol == 1e-13);
  CHECK(s.base.faults.empty());
  CHECK(s.base.recovery.strategy == Strategy::None);
  CHECK(s.base.accounting == Accounting::Global);
  CHECK(expand(s).size() == 1);
}

TEST_CASE("scenario names resolve to subdomain ids") {
  const PartitionSpec g{{3, 3, 3}, 2, 1};
  CHECK(scenario_subdomain(g, "corner") == 0);
  CHECK(scenario_subdomain(g, "edge") == 1);
  CHECK(scenario_subdomain(g, "center") == 13);
  CHECK_THROWS_AS(scenario_subdomain(g, "middle"), Error);
  const SweepSpec s = parse_config(tiny());
  CHECK(s.base.faults.at(0).subdomains == std::vector<int>{13});
}

TEST_CASE("config errors name the field") {
  json d = tiny();
  d["recovery"]["strategy"] = "XX";
  CHECK(config_error_of(d).find("recovery.strategy") != std::string::npos);

  d = tiny();
  d["faults"][0].erase("scenario");
  d["faults"][0]["subdomains"] = {27};
  CHECK(config_error_of(d).find("faults[0].subdomains") != std::string::npos);

  d = tiny();
  d["grid"]["colour"] = 1;
  CHECK(config_error_of(d).find("grid.colour") != std::string::npos);

  d = tiny();
  d["recovery"]["eta"] = "1/2";
  CHECK(config_error_of(d).find("recovery.eta") != std::string::npos);

  d = tiny();
  d["recovery"]["n_F"] = 3;
  CHECK(config_error_of(d).find("recovery") != std::string::npos);

  d = tiny();
  d["faults"].push_back({{"after_cycle", 3}, {"scenario", "corner"}});
  CHECK(config_error_of(d).find("faults[1].after_cycle") != std::string::npos);

  d = tiny();
  d["grid"]["subdomains"] = {1, 1, 1};
  d["faults"][0] = {{"after_cycle", 2}, {"subdomains", {0}}};
  CHECK(config_error_of(d).find("healthy") != std::string::npos);

  d = tiny();
  d["sweep"] = {{"scenario", {"nowhere"}}};
  CHECK(config_error_of(d).find("sweep.scenario") != std::string::npos);

  d = tiny();
  d.erase("faults");
  d["sweep"] = {{"k_F", {2, 3}}};
  CHECK(config_error_of(d).find("k_F") != std::string::npos);
}

TEST_CASE("eta accepts integers and fractions") {
  json d = tiny();
  d["recovery"]["eta"] = "3/2";
  CHECK(parse_config(d).base.recovery.eta == Rational(3, 2));
  d["recovery"]["eta"] = 2;
  CHECK(parse_config(d).base.recovery.eta == Rational(2));
}

TEST_CASE("resolved config round trips, also through the manifest wrapper") {
  json d = tiny();
  d["sweep"] = {{"n_I", {1, 2, 3}}, {"strategy", {"DD", "DN", "LR", "none"}}};
  const SweepSpec s = parse_config(d);
  const json resolved = to_json(s);
  CHECK(to_json(parse_config(resolved)) == resolved);
  CHECK(to_json(parse_config(json{{"config", resolved}})) == resolved);
}

TEST_CASE("sweep expansion order") {
  json d = tiny();
  d["sweep"] = {{"n_I", {1, 2, 3}}, {"strategy", {"DD", "DN", "LR", "none"}}};
  const auto points = expand(parse_config(d));
  REQUIRE(points.size() == 12);
  CHECK(points[0].recovery.strategy == Strategy::DD);
  CHECK(points[0].recovery.n_I == 1);
  CHECK(points[1].recovery.n_I == 2);
  CHECK(points[3].recovery.strategy == Strategy::DN);

  d = tiny();
  d["sweep"] = {{"scenario", {"corner", "edge"}}, {"k_F", {2, 5}}};
  const auto geo = expand(parse_config(d));
  REQUIRE(geo.size() == 4);
  CHECK(geo[0].faults[0].subdomains == std::vector<int>{0});
  CHECK(geo[0].faults[0].after_cycle == 2);
  CHECK(geo[1].faults[0].after_cycle == 5);
  CHECK(geo[2].faults[0].subdomains == std::vector<int>{1});
}

TEST_CASE("a one point sweep equals the scenario run") {
  const SweepSpec s = parse_config(tiny());
  const SweepResult a = run_sweep(s, 1);
  const SweepResult b = run_scenario(s.base);
  REQUIRE(a.runs.size() == 1);
  REQUIRE(b.runs.size() == 1);
  CHECK(a.runs[0].row.k_faulty == b.runs[0].row.k_faulty);
  CHECK(a.runs[0].row.kappa == b.runs[0].row.kappa);
  CHECK(a.runs[0].row.run_id == "run000");
  CHECK(a.runs[0].row.error.empty());
  CHECK(a.all_converged());
}

TEST_CASE("rows satisfy the kappa identity and share baselines") {
  json d = tiny();
  d["sweep"] = {{"strategy", {"DD", "DN"}}, {"n_I", {1, 3}}, {"scenario", {"corner", "center"}}};
  const SweepResult r = run_sweep(parse_config(d), 2);
  REQUIRE(r.runs.size() == 8);
  CHECK(r.baselines.size() == 1);
  for (const RunOutput& o : r.runs) {
    CHECK(o.row.error.empty());
    CHECK(o.row.kappa == Rational(o.row.k_faulty - o.row.k_free, o.row.k_F));
    CHECK(o.row.k_free == r.baselines.at(o.baseline_key).iterations);
  }
  d["trace_regions"] = true;
  const SweepResult split = run_sweep(parse_config(d), 1);
  CHECK(split.baselines.size() == 2);
  CHECK(split.baselines.count("baseline_s0"));
  CHECK(split.baselines.count("baseline_s13"));
}

TEST_CASE("failing points become error rows") {
  json d = tiny();
  d["faults"].push_back({{"after_cycle", 4}, {"scenario", "corner"}});
  d["recovery"]["n_I"] = 5;
  d["sweep"] = {{"n_I", {0, 5}}};
  const SweepResult r = run_sweep(parse_config(d), 1);
  REQUIRE(r.runs.size() == 2);
  CHECK(r.runs[0].row.error.empty());
  CHECK(r.runs[1].row.error.find("ScheduleConflict") != std::string::npos);
  CHECK(r.error_rows() == 1);
  CHECK_FALSE(r.all_converged());
}

TEST_CASE("csv round trip") {
  RunRow a;
  a.run_id = "run007";
  a.scenario = "edge";
  a.strategy = "DN";
  a.local_solver = "PCG";
  a.k_F = 5;
  a.n_I = 3;
  a.n_F = 5;
  a.eta = Rational(3, 2);
  a.accounting = "global";
  a.k_free = 21;
  a.k_faulty = 25;
  a.kappa = Rational(4, 5);
  a.logical_time = Rational(71, 3);
  a.converged = true;
  RunRow b = a;
  b.run_id = "run008";
  b.error = "Breakdown: pcg, \"odd\" curvature";
  std::stringstream ss;
  emit_table(ss, {a, b});
  CHECK(ss.str().rfind(std::string(kTableHeader) + "\n", 0) == 0);
  const auto rows = parse_table(ss);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].kappa == Rational(4, 5));
  CHECK(rows[0].eta == Rational(3, 2));
  CHECK(rows[0].logical_time == Rational(71, 3));
  CHECK(rows[0].k_faulty == 25);
  CHECK(rows[0].converged);
  CHECK(rows[1].error == b.error);

  std::stringstream empty;
  emit_table(empty, {});
  CHECK(empty.str() == std::string(kTableHeader) + "\n");
  CHECK(parse_table(empty).empty());

  SolveTrace t;
  t.rows.push_back({0, 1.0, 0.5, 0.25, 0.125, 0.0, "initial"});
  t.rows.push_back({1, 0.1, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, 1.0 / 3.0, "cycle"});
  std::stringstream ts;
  emit_trace(ts, t);
  const auto back = parse_trace(ts);
  REQUIRE(back.size() == 2);
  CHECK(back[0].res_interface == 0.125);
  CHECK(std::isnan(back[1].res_healthy));
  CHECK(back[1].logical_time == 1.0 / 3.0);
  CHECK(back[1].phase == "cycle");
}

TEST_CASE("parse_table rejects a wrong header") {
  std::stringstream ss("run_id,scenario\nrun000,edge\n");
  CHECK_THROWS_AS(parse_table(ss), Error);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("bundles are byte identical across job counts and reruns") {
  json d = tiny();
  d["sweep"] = {{"strategy", {"DD", "DN", "LR"}}, {"n_I", {1, 2}}};
  const SweepSpec s = parse_config(d);
  TempDir one("bundle1"), three("bundle3"), again("bundle_again");
  write_bundle(s, run_sweep(s, 1), one.path);
  write_bundle(s, run_sweep(s, 3), three.path);
  const auto a = bundle_files(one.path);
  CHECK(a == bundle_files(three.path));
  CHECK(a.count("kappa_table.csv"));
  CHECK(a.count("manifest.json"));
  CHECK(a.count("traces/baseline.csv"));
  CHECK(a.count("traces/run005.csv"));

  const json manifest = json::parse(a.at("manifest.json"));
  CHECK(manifest.at("version") == version());
  for (const auto& [name, hash] : manifest.at("outputs").items()) {
    CHECK(sha256_hex(a.at(name)) == hash.get<std::string>());
  }
  const SweepSpec re = load_config(one.path / "manifest.json");
  write_bundle(re, run_sweep(re, 2), again.path);
  CHECK(a == bundle_files(again.path));
}

TEST_CASE("baseline only") {
  const SweepSpec s = parse_config(tiny());
  const SweepResult r = run_baseline_only(s.base);
  REQUIRE(r.runs.size() == 1);
  CHECK(r.runs[0].row.k_free == r.runs[0].row.k_faulty);
  CHECK(r.runs[0].row.kappa == Rational(0));
  REQUIRE(r.baselines.size() == 1);
  CHECK(r.baselines.begin()->second.converged);
  CHECK(r.baselines.begin()->second.iterations == r.runs[0].row.k_free);
}

TEST_CASE("load_config errors") {
  try {
    load_config("/nonexistent/ftmg.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
  TempDir dir("badjson");
  fs::create_directories(dir.path);
  std::ofstream(dir.path / "bad.json") << "{ not json";
  try {
    load_config(dir.path / "bad.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
  }
}
