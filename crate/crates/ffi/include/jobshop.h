#ifndef JOBSHOP_H
#define JOBSHOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  /**
   * Twice the best rule makespan.
   */
  JOBSHOP_BUDGET_AUTO = 0,
  /**
   * Use the `budget` argument as the time ceiling.
   */
  JOBSHOP_BUDGET_FIXED = 1,
  JOBSHOP_BUDGET_UNBOUNDED = 2,
} JobshopBudget;

typedef enum {
  JOBSHOP_FORMAT_STANDARD = 0,
  JOBSHOP_FORMAT_TAILLARD = 1,
} JobshopFormat;

typedef enum {
  JOBSHOP_RULE_SPT = 0,
  JOBSHOP_RULE_LPT = 1,
  JOBSHOP_RULE_FIFO = 2,
  JOBSHOP_RULE_MWKR = 3,
  JOBSHOP_RULE_RANDOM = 4,
} JobshopRule;

typedef enum {
  JOBSHOP_STATUS_OK = 0,
  JOBSHOP_STATUS_NULL_POINTER = 1,
  JOBSHOP_STATUS_INVALID_UTF8 = 2,
  JOBSHOP_STATUS_PARSE_ERROR = 3,
  JOBSHOP_STATUS_INVALID_ARGUMENT = 4,
  JOBSHOP_STATUS_BUFFER_TOO_SMALL = 5,
  JOBSHOP_STATUS_EPISODE_FINISHED = 6,
  JOBSHOP_STATUS_ENV_ERROR = 7,
  JOBSHOP_STATUS_PANIC = 8,
} JobshopStatus;

/**
 * Opaque environment bound to one instance.
 */
typedef struct JobshopEnv JobshopEnv;

/**
 * Opaque parsed instance.
 */
typedef struct JobshopInstance JobshopInstance;

/**
 * Outcome of one environment step; read the next observation separately.
 */
typedef struct {
  double reward;
  bool done;
  bool truncated;
  bool invalid;
  uint64_t clock;
} JobshopStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *jobshop_last_error(void);

/**
 * Parses a NUL-terminated instance text.
 *
 * # Safety
 * `text` must be a valid C string and `out` a writable pointer.
 */
JobshopStatus jobshop_instance_parse(const char *text, JobshopFormat format, JobshopInstance **out);

/**
 * Generates a seeded random instance with durations in `[min_duration, max_duration]`.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
JobshopStatus jobshop_instance_random(size_t n_jobs,
                                      size_t n_machines,
                                      uint64_t min_duration,
                                      uint64_t max_duration,
                                      uint64_t seed,
                                      JobshopInstance **out);

/**
 * Releases an instance; NULL is ignored.
 *
 * # Safety
 * `inst` must come from this library and not have been freed.
 */
void jobshop_instance_free(JobshopInstance *inst);

/**
 * # Safety
 * `inst` must be a live instance; the out pointers must be writable.
 */
JobshopStatus jobshop_instance_dims(const JobshopInstance *inst,
                                    size_t *n_jobs,
                                    size_t *n_machines);

/**
 * Larger of the heaviest machine load and the longest job.
 *
 * # Safety
 * `inst` must be a live instance and `out` writable.
 */
JobshopStatus jobshop_instance_lower_bound(const JobshopInstance *inst, uint64_t *out);

/**
 * Runs a dispatching rule to completion. `schedule_json` may be NULL; when
 * not, it receives a schedule record to release with [`jobshop_string_free`].
 * `seed` only matters for [`JobshopRule::Random`].
 *
 * # Safety
 * `inst` must be a live instance and `makespan` writable.
 */
JobshopStatus jobshop_dispatch(const JobshopInstance *inst,
                               JobshopRule rule,
                               uint64_t seed,
                               uint64_t *makespan,
                               char **schedule_json);

/**
 * Releases a string returned by this library; NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void jobshop_string_free(char *s);

/**
 * Creates an environment over a copy of `inst`, already reset.
 * `budget` is read only with [`JobshopBudget::Fixed`].
 *
 * # Safety
 * `inst` must be a live instance and `out` writable.
 */
JobshopStatus jobshop_env_new(const JobshopInstance *inst,
                              JobshopBudget budget_kind,
                              uint64_t budget,
                              JobshopEnv **out);

/**
 * Releases an environment; NULL is ignored.
 *
 * # Safety
 * `env` must come from this library and not have been freed.
 */
void jobshop_env_free(JobshopEnv *env);

/**
 * Length of the flattened observation, `3m + 2n + nm`.
 *
 * # Safety
 * `env` must be live and `out` writable.
 */
JobshopStatus jobshop_env_observation_dim(const JobshopEnv *env, size_t *out);

/**
 * # Safety
 * `env` must be live.
 */
JobshopStatus jobshop_env_reset(JobshopEnv *env);

/**
 * Writes the current observation into `obs[0..observation_dim]`.
 *
 * # Safety
 * `env` must be live and `obs` must hold `len` writable doubles.
 */
JobshopStatus jobshop_env_observation(const JobshopEnv *env, double *obs, size_t len);

/**
 * Writes the eligibility mask into `mask[0..n_jobs]`.
 *
 * # Safety
 * `env` must be live and `mask` must hold `len` writable bools.
 */
JobshopStatus jobshop_env_action_mask(const JobshopEnv *env, bool *mask, size_t len);

/**
 * Assigns the next operation of job `action`.
 *
 * # Safety
 * `env` must be live and `out` writable.
 */
JobshopStatus jobshop_env_step(JobshopEnv *env, size_t action, JobshopStep *out);

/**
 * Makespan of the completed episode.
 *
 * # Safety
 * `env` must be live and `out` writable.
 */
JobshopStatus jobshop_env_makespan(const JobshopEnv *env, uint64_t *out);

/**
 * Assignments made so far as a schedule record; free with [`jobshop_string_free`].
 *
 * # Safety
 * `env` must be live and `out` writable.
 */
JobshopStatus jobshop_env_schedule_json(const JobshopEnv *env, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JOBSHOP_H */
