/* C interface of the fault tolerant multigrid library.
 *
 * All objects are opaque and owned by the caller once returned; release
 * them with the matching *_free function. Every call that can fail returns
 * an ftmg_status and leaves a message readable through ftmg_last_error()
 * on the calling thread.
 */
#ifndef FTMG_FTMG_H
#define FTMG_FTMG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FTMG_API __declspec(dllexport)
#else
#define FTMG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ftmg_status {
  FTMG_OK = 0,
  FTMG_ERR_INVALID_ARGUMENT = 1,
  FTMG_ERR_OUT_OF_RANGE = 2,
  FTMG_ERR_LEVEL_MISMATCH = 3,
  FTMG_ERR_UNRECOVERABLE_INTERFACE = 4,
  FTMG_ERR_NO_HEALTHY_REGION = 5,
  FTMG_ERR_EMPTY_REGION = 6,
  FTMG_ERR_MISSING_FLUX = 7,
  FTMG_ERR_BREAKDOWN = 8,
  FTMG_ERR_UNSUPPORTED_SOLVER = 9,
  FTMG_ERR_SCHEDULE_CONFLICT = 10,
  FTMG_ERR_NOT_CONVERGED = 11,
  FTMG_ERR_CONFIG = 12,
  FTMG_ERR_IO = 13,
  FTMG_ERR_INTERNAL = 99
} ftmg_status;

typedef enum ftmg_accounting { FTMG_ACCOUNTING_GLOBAL = 0, FTMG_ACCOUNTING_TABLE1 = 1 } ftmg_accounting;

typedef struct ftmg_config ftmg_config;
typedef struct ftmg_report ftmg_report;
typedef struct ftmg_hierarchy ftmg_hierarchy;

/* One row of the kappa table. String members point into the report. */
typedef struct ftmg_row {
  const char* run_id;
  const char* scenario;
  const char* strategy;
  const char* local_solver;
  const char* accounting;
  const char* error; /* "" for successful runs */
  int k_F;
  int n_I;
  int n_F;
  int64_t eta_num, eta_den;
  int k_free;
  int k_faulty;
  int64_t kappa_num, kappa_den;
  int64_t time_num, time_den;
  int converged;
} ftmg_row;

FTMG_API const char* ftmg_version(void);
FTMG_API const char* ftmg_last_error(void);
FTMG_API const char* ftmg_status_name(ftmg_status status);

/* Configuration */
FTMG_API ftmg_status ftmg_config_load(const char* path, ftmg_config** out);
FTMG_API ftmg_status ftmg_config_parse(const char* json_text, ftmg_config** out);
FTMG_API ftmg_status ftmg_config_set_output_dir(ftmg_config* cfg, const char* dir);
FTMG_API ftmg_status ftmg_config_set_accounting(ftmg_config* cfg, ftmg_accounting accounting);
FTMG_API ftmg_status ftmg_config_set_trace_regions(ftmg_config* cfg, int enabled);
/* Number of runs the sweep expands to. */
FTMG_API ftmg_status ftmg_config_run_count(const ftmg_config* cfg, size_t* out);
/* Resolved configuration as JSON; the string lives until the next call on cfg. */
FTMG_API ftmg_status ftmg_config_resolved_json(ftmg_config* cfg, const char** out);
FTMG_API const char* ftmg_config_output_dir(const ftmg_config* cfg);
FTMG_API void ftmg_config_free(ftmg_config* cfg);

/* Execution. Failed runs become error rows; the call itself only fails for
 * problems that prevent the sweep from starting. */
FTMG_API ftmg_status ftmg_run(const ftmg_config* cfg, int jobs, ftmg_report** out);
FTMG_API ftmg_status ftmg_run_baseline(const ftmg_config* cfg, ftmg_report** out);
/* Writes kappa_table.csv, traces/ and manifest.json into dir (NULL: the
 * configured output directory). */
FTMG_API ftmg_status ftmg_report_write(const ftmg_report* rep, const char* dir);
FTMG_API size_t ftmg_report_row_count(const ftmg_report* rep);
FTMG_API ftmg_status ftmg_report_row(const ftmg_report* rep, size_t i, ftmg_row* out);
FTMG_API int ftmg_report_all_converged(const ftmg_report* rep);
FTMG_API size_t ftmg_report_error_count(const ftmg_report* rep);
/* Kappa table as CSV text; lives as long as the report. */
FTMG_API const char* ftmg_report_table_csv(ftmg_report* rep);
FTMG_API void ftmg_report_free(ftmg_report* rep);

/* Grid inspection */
FTMG_API ftmg_status ftmg_hierarchy_create(const int subdomains[3], int base_cells, int levels,
                                           ftmg_hierarchy** out);
FTMG_API ftmg_status ftmg_hierarchy_node_count(const ftmg_hierarchy* h, int level, size_t* out);
/* Container table of one level as CSV; lives until the next call on h. */
FTMG_API ftmg_status ftmg_hierarchy_containers_csv(ftmg_hierarchy* h, int level, const char** out);
FTMG_API void ftmg_hierarchy_free(ftmg_hierarchy* h);

/* (k_faulty - k_free) / k_F in lowest terms. */
FTMG_API ftmg_status ftmg_cycle_advantage(int k_faulty, int k_free, int k_F, int64_t* num,
                                          int64_t* den);

#ifdef __cplusplus
}
#endif

#endif
