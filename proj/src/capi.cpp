#include "ftmg/ftmg.h"

#include "ftmg/harness.hpp"

#include <fstream>
#include <sstream>

struct ftmg_config {
  ftmg::SweepSpec spec;
  std::string resolved;
};

struct ftmg_report {
  ftmg::SweepSpec spec;
  ftmg::SweepResult result;
  std::string table;
};

struct ftmg_hierarchy {
  ftmg::GridHierarchy h;
  std::string csv;
};

namespace {

thread_local std::string g_last_error;

ftmg_status status_of(ftmg::ErrorCode code) {
  using ftmg::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return FTMG_ERR_INVALID_ARGUMENT;
    case ErrorCode::OutOfRange: return FTMG_ERR_OUT_OF_RANGE;
    case ErrorCode::LevelMismatch: return FTMG_ERR_LEVEL_MISMATCH;
    case ErrorCode::UnrecoverableInterface: return FTMG_ERR_UNRECOVERABLE_INTERFACE;
    case ErrorCode::NoHealthyRegion: return FTMG_ERR_NO_HEALTHY_REGION;
    case ErrorCode::EmptyRegion: return FTMG_ERR_EMPTY_REGION;
    case ErrorCode::MissingFlux: return FTMG_ERR_MISSING_FLUX;
    case ErrorCode::Breakdown: return FTMG_ERR_BREAKDOWN;
    case ErrorCode::UnsupportedSolver: return FTMG_ERR_UNSUPPORTED_SOLVER;
    case ErrorCode::ScheduleConflict: return FTMG_ERR_SCHEDULE_CONFLICT;
    case ErrorCode::NotConverged: return FTMG_ERR_NOT_CONVERGED;
    case ErrorCode::Config: return FTMG_ERR_CONFIG;
    case ErrorCode::Io: return FTMG_ERR_IO;
  }
  return FTMG_ERR_INTERNAL;
}

template <class F>
ftmg_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return FTMG_OK;
  } catch (const ftmg::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return FTMG_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FTMG_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return FTMG_ERR_INTERNAL;
  }
}

ftmg_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be NULL";
  return FTMG_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* ftmg_version(void) { return ftmg::version(); }

const char* ftmg_last_error(void) { return g_last_error.c_str(); }

const char* ftmg_status_name(ftmg_status status) {
  switch (status) {
    case FTMG_OK: return "ok";
    case FTMG_ERR_INTERNAL: return "internal";
    default: break;
  }
  if (status >= FTMG_ERR_INVALID_ARGUMENT && status <= FTMG_ERR_IO) {
    return ftmg::to_string(static_cast<ftmg::ErrorCode>(status - 1));
  }
  return "unknown";
}

ftmg_status ftmg_config_load(const char* path, ftmg_config** out) {
  if (path == nullptr || out == nullptr) return null_arg("path and out");
  *out = nullptr;
  return guarded([&] { *out = new ftmg_config{ftmg::load_config(path), {}}; });
}

ftmg_status ftmg_config_parse(const char* json_text, ftmg_config** out) {
  if (json_text == nullptr || out == nullptr) return null_arg("json_text and out");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      ftmg::fail(ftmg::ErrorCode::Config, e.what());
    }
    *out = new ftmg_config{ftmg::parse_config(doc), {}};
  });
}

ftmg_status ftmg_config_set_output_dir(ftmg_config* cfg, const char* dir) {
  if (cfg == nullptr || dir == nullptr) return null_arg("cfg and dir");
  cfg->spec.base.output_dir = dir;
  return FTMG_OK;
}

ftmg_status ftmg_config_set_accounting(ftmg_config* cfg, ftmg_accounting accounting) {
  if (cfg == nullptr) return null_arg("cfg");
  if (accounting != FTMG_ACCOUNTING_GLOBAL && accounting != FTMG_ACCOUNTING_TABLE1) {
    g_last_error = "unknown accounting mode";
    return FTMG_ERR_INVALID_ARGUMENT;
  }
  cfg->spec.base.accounting =
      accounting == FTMG_ACCOUNTING_GLOBAL ? ftmg::Accounting::Global : ftmg::Accounting::Table1;
  return FTMG_OK;
}

ftmg_status ftmg_config_set_trace_regions(ftmg_config* cfg, int enabled) {
  if (cfg == nullptr) return null_arg("cfg");
  cfg->spec.base.trace_regions = enabled != 0;
  return FTMG_OK;
}

ftmg_status ftmg_config_run_count(const ftmg_config* cfg, size_t* out) {
  if (cfg == nullptr || out == nullptr) return null_arg("cfg and out");
  return guarded([&] { *out = ftmg::expand(cfg->spec).size(); });
}

ftmg_status ftmg_config_resolved_json(ftmg_config* cfg, const char** out) {
  if (cfg == nullptr || out == nullptr) return null_arg("cfg and out");
  return guarded([&] {
    cfg->resolved = ftmg::to_json(cfg->spec).dump(2);
    *out = cfg->resolved.c_str();
  });
}

const char* ftmg_config_output_dir(const ftmg_config* cfg) {
  return cfg == nullptr ? "" : cfg->spec.base.output_dir.c_str();
}

void ftmg_config_free(ftmg_config* cfg) { delete cfg; }

ftmg_status ftmg_run(const ftmg_config* cfg, int jobs, ftmg_report** out) {
  if (cfg == nullptr || out == nullptr) return null_arg("cfg and out");
  *out = nullptr;
  if (jobs < 1) {
    g_last_error = "jobs must be at least 1";
    return FTMG_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    auto rep = std::make_unique<ftmg_report>();
    rep->spec = cfg->spec;
    rep->result = ftmg::run_sweep(cfg->spec, jobs);
    *out = rep.release();
  });
}

ftmg_status ftmg_run_baseline(const ftmg_config* cfg, ftmg_report** out) {
  if (cfg == nullptr || out == nullptr) return null_arg("cfg and out");
  *out = nullptr;
  return guarded([&] {
    auto rep = std::make_unique<ftmg_report>();
    rep->spec.base = cfg->spec.base;
    rep->spec.base.faults.clear();
    rep->spec.base.recovery = ftmg::RecoveryConfig{};
    rep->result = ftmg::run_baseline_only(cfg->spec.base);
    *out = rep.release();
  });
}

ftmg_status ftmg_report_write(const ftmg_report* rep, const char* dir) {
  if (rep == nullptr) return null_arg("rep");
  return guarded([&] {
    const std::string target = dir != nullptr ? dir : rep->spec.base.output_dir;
    ftmg::write_bundle(rep->spec, rep->result, target);
  });
}

size_t ftmg_report_row_count(const ftmg_report* rep) {
  return rep == nullptr ? 0 : rep->result.runs.size();
}

ftmg_status ftmg_report_row(const ftmg_report* rep, size_t i, ftmg_row* out) {
  if (rep == nullptr || out == nullptr) return null_arg("rep and out");
  if (i >= rep->result.runs.size()) {
    g_last_error = "row index " + std::to_string(i) + " out of range";
    return FTMG_ERR_OUT_OF_RANGE;
  }
  const ftmg::RunRow& r = rep->result.runs[i].row;
  out->run_id = r.run_id.c_str();
  out->scenario = r.scenario.c_str();
  out->strategy = r.strategy.c_str();
  out->local_solver = r.local_solver.c_str();
  out->accounting = r.accounting.c_str();
  out->error = r.error.c_str();
  out->k_F = r.k_F;
  out->n_I = r.n_I;
  out->n_F = r.n_F;
  out->eta_num = r.eta.numerator();
  out->eta_den = r.eta.denominator();
  out->k_free = r.k_free;
  out->k_faulty = r.k_faulty;
  out->kappa_num = r.kappa.numerator();
  out->kappa_den = r.kappa.denominator();
  out->time_num = r.logical_time.numerator();
  out->time_den = r.logical_time.denominator();
  out->converged = r.converged ? 1 : 0;
  return FTMG_OK;
}

int ftmg_report_all_converged(const ftmg_report* rep) {
  return rep != nullptr && rep->result.all_converged() ? 1 : 0;
}

size_t ftmg_report_error_count(const ftmg_report* rep) {
  return rep == nullptr ? 0 : rep->result.error_rows();
}

const char* ftmg_report_table_csv(ftmg_report* rep) {
  if (rep == nullptr) return "";
  if (rep->table.empty()) {
    std::vector<ftmg::RunRow> rows;
    for (const auto& r : rep->result.runs) rows.push_back(r.row);
    std::ostringstream os;
    ftmg::emit_table(os, rows);
    rep->table = os.str();
  }
  return rep->table.c_str();
}

void ftmg_report_free(ftmg_report* rep) { delete rep; }

ftmg_status ftmg_hierarchy_create(const int subdomains[3], int base_cells, int levels,
                                  ftmg_hierarchy** out) {
  if (subdomains == nullptr || out == nullptr) return null_arg("subdomains and out");
  *out = nullptr;
  return guarded([&] {
    const ftmg::PartitionSpec spec{{subdomains[0], subdomains[1], subdomains[2]}, base_cells, levels};
    *out = new ftmg_hierarchy{ftmg::GridHierarchy(spec), {}};
  });
}

ftmg_status ftmg_hierarchy_node_count(const ftmg_hierarchy* h, int level, size_t* out) {
  if (h == nullptr || out == nullptr) return null_arg("h and out");
  return guarded([&] {
    if (level < 0 || level >= h->h.level_count()) {
      ftmg::fail(ftmg::ErrorCode::OutOfRange, "level " + std::to_string(level) + " does not exist");
    }
    *out = h->h.level(level).size();
  });
}

ftmg_status ftmg_hierarchy_containers_csv(ftmg_hierarchy* h, int level, const char** out) {
  if (h == nullptr || out == nullptr) return null_arg("h and out");
  return guarded([&] {
    if (level < 0 || level >= h->h.level_count()) {
      ftmg::fail(ftmg::ErrorCode::OutOfRange, "level " + std::to_string(level) + " does not exist");
    }
    std::ostringstream os;
    h->h.dump_containers_csv(os, level);
    h->csv = os.str();
    *out = h->csv.c_str();
  });
}

void ftmg_hierarchy_free(ftmg_hierarchy* h) { delete h; }

ftmg_status ftmg_cycle_advantage(int k_faulty, int k_free, int k_F, int64_t* num, int64_t* den) {
  if (num == nullptr || den == nullptr) return null_arg("num and den");
  return guarded([&] {
    const ftmg::Rational k = ftmg::cycle_advantage(k_faulty, k_free, k_F);
    *num = k.numerator();
    *den = k.denominator();
  });
}

}  // extern "C"
