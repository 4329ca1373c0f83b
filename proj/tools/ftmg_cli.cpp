// Command line front end. Talks to the library only through the C API.

#include "ftmg/ftmg.h"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNotConverged = 3;

struct Options {
  std::string config;
  std::string output_dir;
  std::string accounting;
  int jobs = 1;
  bool trace_regions = false;
  bool print_config = false;
};

using ConfigPtr = std::unique_ptr<ftmg_config, decltype(&ftmg_config_free)>;
using ReportPtr = std::unique_ptr<ftmg_report, decltype(&ftmg_report_free)>;

int report_error(ftmg_status st) {
  std::cerr << "ftmg: " << ftmg_status_name(st) << ": " << ftmg_last_error() << '\n';
  return st == FTMG_ERR_CONFIG ? kExitConfig : kExitFailure;
}

int load(const Options& o, ConfigPtr& cfg) {
  ftmg_config* raw = nullptr;
  ftmg_status st = ftmg_config_load(o.config.c_str(), &raw);
  if (st != FTMG_OK) return st == FTMG_ERR_IO ? report_error(FTMG_ERR_CONFIG) : report_error(st);
  cfg.reset(raw);
  if (!o.output_dir.empty()) ftmg_config_set_output_dir(cfg.get(), o.output_dir.c_str());
  if (!o.accounting.empty()) {
    ftmg_config_set_accounting(cfg.get(), o.accounting == "table1" ? FTMG_ACCOUNTING_TABLE1
                                                                    : FTMG_ACCOUNTING_GLOBAL);
  }
  if (o.trace_regions) ftmg_config_set_trace_regions(cfg.get(), 1);
  return kExitOk;
}

void print_rows(ftmg_report* rep) {
  const size_t n = ftmg_report_row_count(rep);
  for (size_t i = 0; i < n; ++i) {
    ftmg_row r;
    if (ftmg_report_row(rep, i, &r) != FTMG_OK) continue;
    if (r.error[0] != '\0') {
      std::printf("%s %-8s %-3s %-7s ERROR %s\n", r.run_id, r.scenario, r.strategy, r.local_solver,
                  r.error);
      continue;
    }
    std::printf("%s %-8s %-3s %-7s k_F=%d n_I=%d n_F=%d k_free=%d k_faulty=%d kappa=%lld/%lld%s\n",
                r.run_id, r.scenario, r.strategy, r.local_solver, r.k_F, r.n_I, r.n_F, r.k_free,
                r.k_faulty, static_cast<long long>(r.kappa_num),
                static_cast<long long>(r.kappa_den), r.converged ? "" : " (not converged)");
  }
}

int finish(ftmg_config* cfg, ftmg_report* rep) {
  print_rows(rep);
  const ftmg_status st = ftmg_report_write(rep, ftmg_config_output_dir(cfg));
  if (st != FTMG_OK) return report_error(st);
  std::printf("wrote %s\n", ftmg_config_output_dir(cfg));
  if (ftmg_report_error_count(rep) > 0 || !ftmg_report_all_converged(rep)) return kExitNotConverged;
  return kExitOk;
}

int cmd_run(const Options& o, bool sweep) {
  ConfigPtr cfg(nullptr, ftmg_config_free);
  if (int rc = load(o, cfg); rc != kExitOk) return rc;
  size_t count = 0;
  if (ftmg_status st = ftmg_config_run_count(cfg.get(), &count); st != FTMG_OK) return report_error(st);
  if (!sweep && count != 1) {
    std::cerr << "ftmg: config defines " << count << " runs; use the sweep command\n";
    return kExitConfig;
  }
  ftmg_report* raw = nullptr;
  if (ftmg_status st = ftmg_run(cfg.get(), o.jobs, &raw); st != FTMG_OK) return report_error(st);
  ReportPtr rep(raw, ftmg_report_free);
  return finish(cfg.get(), rep.get());
}

int cmd_baseline(const Options& o) {
  ConfigPtr cfg(nullptr, ftmg_config_free);
  if (int rc = load(o, cfg); rc != kExitOk) return rc;
  ftmg_report* raw = nullptr;
  if (ftmg_status st = ftmg_run_baseline(cfg.get(), &raw); st != FTMG_OK) return report_error(st);
  ReportPtr rep(raw, ftmg_report_free);
  return finish(cfg.get(), rep.get());
}

int cmd_validate(const Options& o) {
  ConfigPtr cfg(nullptr, ftmg_config_free);
  if (int rc = load(o, cfg); rc != kExitOk) return rc;
  size_t count = 0;
  if (ftmg_status st = ftmg_config_run_count(cfg.get(), &count); st != FTMG_OK) return report_error(st);
  if (o.print_config) {
    const char* json = nullptr;
    if (ftmg_status st = ftmg_config_resolved_json(cfg.get(), &json); st != FTMG_OK) {
      return report_error(st);
    }
    std::printf("%s\n", json);
  }
  std::printf("ok: %zu run%s\n", count, count == 1 ? "" : "s");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault tolerant geometric multigrid experiments"};
  app.set_version_flag("--version", std::string(ftmg_version()));
  app.require_subcommand(1);

  Options o;
  auto add_common = [&](CLI::App* sub, bool outputs) {
    sub->add_option("config", o.config, "JSON configuration file")->required();
    if (!outputs) return;
    sub->add_option("-o,--output-dir", o.output_dir, "output directory (overrides the config)");
    sub->add_option("-j,--jobs", o.jobs, "concurrent runs")->check(CLI::Range(1, 256));
    sub->add_option("--accounting", o.accounting, "global or table1")
        ->check(CLI::IsMember({"global", "table1"}));
    sub->add_flag("--trace-regions", o.trace_regions, "split residuals by region in traces");
  };
  CLI::App* run = app.add_subcommand("run", "run a single configuration");
  add_common(run, true);
  CLI::App* sweep = app.add_subcommand("sweep", "run every point of the sweep axes");
  add_common(sweep, true);
  CLI::App* baseline = app.add_subcommand("baseline", "fault-free solve only");
  add_common(baseline, true);
  CLI::App* validate = app.add_subcommand("validate", "check a configuration without running it");
  add_common(validate, false);
  validate->add_flag("--print", o.print_config, "print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (run->parsed()) return cmd_run(o, false);
  if (sweep->parsed()) return cmd_run(o, true);
  if (baseline->parsed()) return cmd_baseline(o);
  return cmd_validate(o);
}
