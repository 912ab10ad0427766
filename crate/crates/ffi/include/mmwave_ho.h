#ifndef MMWAVE_HO_H
#define MMWAVE_HO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MmwhoStatus {
  MMWHO_STATUS_OK = 0,
  MMWHO_STATUS_NULL_POINTER = 1,
  MMWHO_STATUS_INVALID_ARGUMENT = 2,
  MMWHO_STATUS_IO = 3,
  MMWHO_STATUS_FORMAT = 4,
  MMWHO_STATUS_INFEASIBLE = 5,
  MMWHO_STATUS_PANIC = 6,
} MmwhoStatus;

/**
 * Scenario configuration.
 */
typedef struct MmwhoConfig MmwhoConfig;

/**
 * Result of one experiment: tuned threshold, per-episode metrics and
 * per-policy summaries.
 */
typedef struct MmwhoExperiment MmwhoExperiment;

/**
 * Summary of one policy.
 */
typedef struct MmwhoSummary {
  /**
   * 0 ours, 1 ours-ED, 2 multi-connectivity, 3 SMART-UCB.
   */
  uint32_t policy;
  uint64_t replications;
  double mean_r_traj_bps;
  double std_r_traj_bps;
  double mean_handovers;
  double median_handovers;
  double rate_fluctuation_bps;
  double mean_renewals;
} MmwhoSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, without the
 * terminating NUL.
 */
size_t mmwho_last_error_length(void);

/**
 * Copy the last error message into `buf` with a terminating NUL. Returns
 * the number of bytes written without the NUL, or -1 when `buf` is null or
 * shorter than `mmwho_last_error_length() + 1`.
 *
 * # Safety
 * `buf` must point to `len` writable bytes.
 */
ptrdiff_t mmwho_last_error_message(char *buf, size_t len);

/**
 * New configuration with built-in defaults.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MmwhoStatus mmwho_config_default(struct MmwhoConfig **out);

/**
 * Parse a configuration from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MmwhoStatus mmwho_config_from_toml(const char *toml, struct MmwhoConfig **out);

/**
 * Load a configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MmwhoStatus mmwho_config_load(const char *path, struct MmwhoConfig **out);

/**
 * # Safety
 * `cfg` must come from a `mmwho_config_*` constructor and not be used
 * afterwards. Null is ignored.
 */
void mmwho_config_free(struct MmwhoConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum MmwhoStatus mmwho_config_set_seed(struct MmwhoConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum MmwhoStatus mmwho_config_set_replications(struct MmwhoConfig *cfg, uint64_t n);

/**
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum MmwhoStatus mmwho_config_set_training_episodes(struct MmwhoConfig *cfg, uint64_t n);

/**
 * Fix the skeleton-distance threshold. A negative value restores tuning.
 *
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum MmwhoStatus mmwho_config_set_t_d(struct MmwhoConfig *cfg, double t_d);

/**
 * Tune, train and evaluate every configured policy.
 *
 * # Safety
 * `cfg` must be a live configuration handle and `out` a valid pointer.
 */
enum MmwhoStatus mmwho_experiment_run(const struct MmwhoConfig *cfg, struct MmwhoExperiment **out);

/**
 * # Safety
 * `exp` must come from `mmwho_experiment_run` and not be used afterwards.
 * Null is ignored.
 */
void mmwho_experiment_free(struct MmwhoExperiment *exp);

/**
 * # Safety
 * `exp` must be a live experiment handle and `out` a valid pointer.
 */
enum MmwhoStatus mmwho_experiment_t_d(const struct MmwhoExperiment *exp, double *out);

/**
 * # Safety
 * `exp` must be a live experiment handle and `out` a valid pointer.
 */
enum MmwhoStatus mmwho_experiment_policy_count(const struct MmwhoExperiment *exp, size_t *out);

/**
 * Summary of the `index`-th evaluated policy.
 *
 * # Safety
 * `exp` must be a live experiment handle and `out` a valid pointer.
 */
enum MmwhoStatus mmwho_experiment_summary(const struct MmwhoExperiment *exp,
                                          size_t index,
                                          struct MmwhoSummary *out);

/**
 * Write the per-location metrics CSV of every policy to `path`.
 *
 * # Safety
 * `exp` must be a live experiment handle and `path` a NUL-terminated string.
 */
enum MmwhoStatus mmwho_experiment_write_metrics(const struct MmwhoExperiment *exp,
                                                const char *path);

/**
 * Run the built-in checks; `failed` receives how many did not pass.
 *
 * # Safety
 * `failed` must be a valid pointer.
 */
enum MmwhoStatus mmwho_validate(uint32_t *failed);

/**
 * LoS probability at 3D distance `d` meters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MmwhoStatus mmwho_los_probability(double d, double *out);

/**
 * Achievable rate in bit/s for a linear SNR and a bandwidth in Hz.
 */
double mmwho_rate_bps(double snr_linear, double bandwidth_hz);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMWAVE_HO_H */
