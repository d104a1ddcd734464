#ifndef ADMISSION_LAB_H
#define ADMISSION_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Values accepted by the `rule` argument of [`al_simulation_new`].
 */
typedef enum AlRule {
  AL_RULE_MAJORITY = 0,
  AL_RULE_CONSENSUS = 1,
  AL_RULE_VETO = 2,
} AlRule;

typedef enum AlStatus {
  AL_STATUS_OK = 0,
  AL_STATUS_NULL_POINTER = 1,
  AL_STATUS_INVALID_UTF8 = 2,
  AL_STATUS_DOMAIN = 3,
  AL_STATUS_RANGE = 4,
  AL_STATUS_STATE = 5,
  AL_STATUS_PRECONDITION = 6,
  AL_STATUS_CONSTRUCTION = 7,
  AL_STATUS_UNSUPPORTED = 8,
  AL_STATUS_CONFIG = 9,
  AL_STATUS_IO = 10,
  AL_STATUS_PANIC = 11,
} AlStatus;

/**
 * A growing group of opinions in `[0, 1]`.
 */
typedef struct AlGroup AlGroup;

/**
 * A finished experiment.
 */
typedef struct AlRun AlRun;

/**
 * A simulation in progress.
 */
typedef struct AlSimulation AlSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *al_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *al_version(void);

/**
 * # Safety
 * `out` must be valid for writing one `double`.
 */
enum AlStatus al_f_majority(double q, double *out);

/**
 * # Safety
 * `out` must be valid for writing one `double`.
 */
enum AlStatus al_f_veto(double q, double *out);

/**
 * The limit of the `p`-quantile under veto, for `p ∈ (1/2, 1]`.
 *
 * # Safety
 * `out` must be valid for writing one `double`.
 */
enum AlStatus al_tau(double p, double *out);

/**
 * Builds a group from `len` opinions (`values` may be null when `len` is 0).
 *
 * # Safety
 * `values` must point to `len` doubles and `out` must be writable.
 */
enum AlStatus al_group_new(const double *values, uintptr_t len, struct AlGroup **out);

/**
 * # Safety
 * `group` must come from [`al_group_new`] and not be used afterwards. Null is ignored.
 */
void al_group_free(struct AlGroup *group);

/**
 * # Safety
 * `group` must be a live handle.
 */
enum AlStatus al_group_insert(struct AlGroup *group, double x);

/**
 * # Safety
 * `group` must be a live handle and `out` writable.
 */
enum AlStatus al_group_len(const struct AlGroup *group, uintptr_t *out);

/**
 * The member of rank `max(1, ⌈p·k⌉)`.
 *
 * # Safety
 * `group` must be a live handle and `out` writable.
 */
enum AlStatus al_group_quantile(const struct AlGroup *group, double p, double *out);

/**
 * The `rank`-th smallest member, counting from 1.
 *
 * # Safety
 * `group` must be a live handle and `out` writable.
 */
enum AlStatus al_group_select(const struct AlGroup *group, uintptr_t rank, double *out);

/**
 * Members in `[lo, hi]` when `closed`, else in `[lo, hi)`.
 *
 * # Safety
 * `group` must be a live handle and `out` writable.
 */
enum AlStatus al_group_count_interval(const struct AlGroup *group,
                                      double lo,
                                      double hi,
                                      bool closed,
                                      uintptr_t *out);

/**
 * Starts a simulation from `len` initial opinions. `r` is only read for veto.
 *
 * # Safety
 * `initial` must point to `len` doubles and `out` must be writable.
 */
enum AlStatus al_simulation_new(uint32_t rule,
                                double r,
                                const double *initial,
                                uintptr_t len,
                                uint64_t seed,
                                struct AlSimulation **out);

/**
 * # Safety
 * `sim` must come from [`al_simulation_new`] and not be used afterwards. Null is ignored.
 */
void al_simulation_free(struct AlSimulation *sim);

/**
 * Steps until `accepted` admissions in total, giving up after `max_steps`
 * further raw steps (0 means no limit).
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum AlStatus al_simulation_run(struct AlSimulation *sim, uint64_t accepted, uint64_t max_steps);

/**
 * Raw steps and admissions so far; either pointer may be null.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum AlStatus al_simulation_counts(const struct AlSimulation *sim,
                                   uint64_t *steps,
                                   uint64_t *accepted);

/**
 * The quantile driving the rule (the median for majority and consensus).
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum AlStatus al_simulation_quantile(const struct AlSimulation *sim, double *out);

/**
 * Runs an experiment described by a JSON config (any kind). Output
 * directories in the config are ignored; use the summary instead.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` writable.
 */
enum AlStatus al_run_config(const char *config_json, struct AlRun **out);

/**
 * # Safety
 * `run` must come from [`al_run_config`] and not be used afterwards. Null is ignored.
 */
void al_run_free(struct AlRun *run);

/**
 * Whether every verdict of the run passed.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum AlStatus al_run_passed(const struct AlRun *run, bool *out);

/**
 * The run's summary JSON, the same bytes the CLI writes to `summary.json`.
 * Release it with [`al_string_free`].
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum AlStatus al_run_summary_json(const struct AlRun *run, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void al_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADMISSION_LAB_H */
