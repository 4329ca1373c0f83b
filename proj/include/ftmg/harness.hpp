#pragma once

// Experiment configuration, scenario and sweep execution, CSV emission and
// the reproducibility manifest.

#include "ftmg/resilience.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace ftmg {

struct FaultSpec {
  int after_cycle = 1;
  std::string scenario;  ///< corner | edge | center, empty for explicit ids
  std::vector<int> subdomains;
};

struct ScenarioConfig {
  ProblemSpec problem;
  CycleSpec cycle;
  StoppingRule stop;
  std::vector<FaultSpec> faults;
  RecoveryConfig recovery;
  Accounting accounting = Accounting::Global;
  bool trace_regions = false;
  std::string output_dir = "ftmg_out";
};

/// Sweep axes; an empty axis keeps the base value.
struct SweepAxes {
  std::vector<Strategy> strategy;
  std::vector<LocalSolver> local_solver;
  std::vector<int> n_I;
  std::vector<int> n_F;
  std::vector<Rational> eta;
  std::vector<int> k_F;
  std::vector<std::string> scenario;

  bool empty() const;
};

struct SweepSpec {
  ScenarioConfig base;
  SweepAxes axes;
};

/// Subdomain id of a named fault position in a partition.
int scenario_subdomain(const PartitionSpec& grid, const std::string& name);

/// Parses and validates a configuration document. A manifest written by this
/// tool ({"config": {...}}) is accepted as well. Errors carry ErrorCode::Config
/// and name the offending field.
SweepSpec parse_config(const nlohmann::json& doc);
SweepSpec load_config(const std::filesystem::path& path);

/// Fully resolved configuration with every default spelled out.
nlohmann::json to_json(const SweepSpec& spec);

/// Cross product of the axes, in a fixed order.
std::vector<ScenarioConfig> expand(const SweepSpec& spec);

struct RunRow {
  std::string run_id;
  std::string scenario;
  std::string strategy;
  std::string local_solver;
  int k_F = 0;
  int n_I = 0;
  int n_F = 0;
  Rational eta{1};
  std::string accounting;
  int k_free = 0;
  int k_faulty = 0;
  Rational kappa{0};
  Rational logical_time{0};
  bool converged = false;
  std::string error;  ///< nonempty for failed runs; numeric fields are then meaningless
};

struct RunOutput {
  RunRow row;
  SolveTrace trace;
  std::string baseline_key;  ///< which baseline trace the run compares against
};

struct SweepResult {
  std::vector<RunOutput> runs;
  std::map<std::string, SolveTrace> baselines;

  bool all_converged() const;
  std::size_t error_rows() const;
};

/// Runs every point of the sweep, `jobs` at a time. The fault-free baseline
/// is solved once per fault geometry and shared. Failures become error rows.
SweepResult run_sweep(const SweepSpec& spec, int jobs = 1);

/// A single configuration: the one-point sweep.
SweepResult run_scenario(const ScenarioConfig& cfg);

/// Fault-free solve only.
SweepResult run_baseline_only(const ScenarioConfig& cfg);

/// CSV column orders are fixed:
///   table: run_id,scenario,strategy,local_solver,k_F,n_I,n_F,eta,accounting,
///          k_free,k_faulty,kappa,kappa_exact,logical_time,converged,error
///   trace: cycle,rel_residual,res_healthy,res_faulty,res_interface,logical_time,phase
extern const char* const kTableHeader;
extern const char* const kTraceHeader;

void emit_table(std::ostream& os, const std::vector<RunRow>& rows);
void emit_trace(std::ostream& os, const SolveTrace& trace);
std::vector<RunRow> parse_table(std::istream& is);
std::vector<TraceRow> parse_trace(std::istream& is);

/// Writes kappa_table.csv, traces/*.csv and manifest.json (resolved config,
/// version, SHA-256 of every output) into dir.
void write_bundle(const SweepSpec& spec, const SweepResult& result,
                  const std::filesystem::path& dir);

std::string sha256_hex(const std::string& bytes);

const char* version();

}  // namespace ftmg
