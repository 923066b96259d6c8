/* Public C interface of libdecaf: a decentralized low-rank-adapter
 * fine-tuning simulator. All state lives behind opaque handles; every
 * function returns a decaf_status and the last error message per thread is
 * available through decaf_last_error(). */
#ifndef DECAF_DECAF_H
#define DECAF_DECAF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DECAF_API __declspec(dllexport)
#else
#define DECAF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum decaf_status {
  DECAF_OK = 0,
  DECAF_ERR_INVALID_ARG = 1, /* bad key, bad value, contract violation */
  DECAF_ERR_IO = 2,          /* file could not be read or written */
  DECAF_ERR_RUNTIME = 3      /* internal failure during a run */
} decaf_status;

typedef struct decaf_config decaf_config;
typedef struct decaf_result decaf_result;

DECAF_API const char* decaf_version(void);

/* Thread-local message describing the most recent failure. */
DECAF_API const char* decaf_last_error(void);

/* -- configuration ------------------------------------------------------- */

/* Fresh config holding all defaults. */
DECAF_API decaf_status decaf_config_create(decaf_config** out);
DECAF_API decaf_status decaf_config_clone(const decaf_config* cfg, decaf_config** out);
DECAF_API void decaf_config_destroy(decaf_config* cfg);

/* Applies a flat `key = value` config file (unknown keys are rejected). */
DECAF_API decaf_status decaf_config_load_file(decaf_config* cfg, const char* path);
/* Single key override; identical semantics to a config-file line. */
DECAF_API decaf_status decaf_config_set(decaf_config* cfg, const char* key, const char* value);
DECAF_API decaf_status decaf_config_get(const decaf_config* cfg, const char* key,
                                        char* buf, size_t buf_len);

/* -- running ------------------------------------------------------------- */

/* Progress callback: one call per sampled metrics row (CSV formatted). */
typedef void (*decaf_progress_fn)(const char* csv_row, void* user);

DECAF_API decaf_status decaf_run(const decaf_config* cfg, decaf_progress_fn progress, void* user,
                                 decaf_result** out);

/* Runs one configuration per value along a sweepable axis
 * (r, topology, n_agents, tau, alpha, heterogeneity), seeds held fixed;
 * results are written to <out_dir>/<axis>=<value>/. */
DECAF_API decaf_status decaf_sweep(const decaf_config* cfg, const char* axis,
                                   const char* const* values, size_t n_values,
                                   const char* out_dir);

DECAF_API void decaf_result_destroy(decaf_result* res);

/* Writes metrics.csv, summary.json, ledger.csv (and optional dumps) into the
 * directory, creating it if needed. All writes are atomic. */
DECAF_API decaf_status decaf_result_write_outputs(const decaf_result* res, const char* out_dir);

DECAF_API decaf_status decaf_result_num_records(const decaf_result* res, size_t* out);
DECAF_API decaf_status decaf_result_record_iter(const decaf_result* res, size_t index,
                                                int64_t* out);
/* Named scalars per record: global_loss, avg_grad_norm_sq, disagreement,
 * interference_max, tsvd_error_max, tsvd_bound_max, consensus_diff,
 * consensus_diff_bound, comm_bytes. Unpopulated fields yield NaN. */
DECAF_API decaf_status decaf_result_record_value(const decaf_result* res, size_t index,
                                                 const char* name, double* out);
/* Summary scalars: final_global_loss, final_avg_grad_norm_sq, rho,
 * spectral_gap, alpha_ceiling, L, G, c, zeta, kappa, L_hat, total_comm_bytes,
 * comm_rounds, wall_seconds, step_size_ok. */
DECAF_API decaf_status decaf_result_summary_value(const decaf_result* res, const char* name,
                                                  double* out);
DECAF_API decaf_status decaf_result_num_warnings(const decaf_result* res, size_t* out);
DECAF_API decaf_status decaf_result_warning(const decaf_result* res, size_t index,
                                            char* buf, size_t buf_len);

/* -- diagnostics --------------------------------------------------------- */

/* Builds (or loads, when csv_path is non-NULL) a mixing matrix and reports
 * its spectral quantities. */
DECAF_API decaf_status decaf_topology_report(const char* kind, int n_agents, const char* csv_path,
                                             double* rho, double* spectral_gap, int* connected);

/* Estimated constants for a config: L, G, c, zeta, kappa, L_hat (6 values). */
DECAF_API decaf_status decaf_estimate_constants(const decaf_config* cfg, double out[6]);

/* Truncated-SVD microbenchmark on random rank-r inputs of size d x k.
 * Reports mean milliseconds per decomposition and the worst relative
 * reconstruction error observed. */
DECAF_API decaf_status decaf_bench_tsvd(int d, int k, int r, int trials, uint64_t seed,
                                        double* ms_per_call, double* max_rel_err);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DECAF_DECAF_H */
