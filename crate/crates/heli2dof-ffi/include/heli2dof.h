#ifndef HELI2DOF_H
#define HELI2DOF_H

/* Generated from the Rust sources by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call. Anything other than OK leaves a readable
 * diagnostic in the thread-local error slot.
 */
typedef enum H2dStatus {
  H2D_STATUS_OK = 0,
  H2D_STATUS_NULL_ARGUMENT = 1,
  H2D_STATUS_INVALID_ARGUMENT = 2,
  H2D_STATUS_SYNTHESIS_FAILED = 3,
  H2D_STATUS_PARSE_FAILED = 4,
  H2D_STATUS_SIMULATION_FAILED = 5,
  H2D_STATUS_STATS_FAILED = 6,
  H2D_STATUS_PANICKED = 7,
} H2dStatus;

/**
 * Synthesized feedback handle: the Riccati solution and its PID-style
 * partition, as consumed by both control laws.
 */
typedef struct H2dGains H2dGains;

/**
 * Plant description handle: physical parameters plus the linearized
 * state-space model built from them.
 */
typedef struct H2dModel H2dModel;

/**
 * Parsed scenario handle.
 */
typedef struct H2dScenario H2dScenario;

/**
 * Completed run handle: one record per control tick.
 */
typedef struct H2dTrace H2dTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message for this thread into `buf` as a
 * NUL-terminated string, truncating if `cap` is too small. Returns the
 * full length of the message including the terminator, or 0 when no
 * error is pending. Passing NULL or `cap == 0` only queries the length.
 */
uintptr_t h2d_last_error(char *buf, uintptr_t cap);

/**
 * Creates the nominal plant model. Returns NULL on failure.
 */
struct H2dModel *h2d_model_default(void);

/**
 * Frees a model handle. NULL is accepted.
 */
void h2d_model_free(struct H2dModel *model);

/**
 * Synthesizes the state-feedback gain for `model` with the default
 * cost weights. Returns NULL on failure.
 */
struct H2dGains *h2d_gains_synthesize(const struct H2dModel *model);

/**
 * Frobenius norm of the Riccati residual for a gains handle; NaN when
 * the handle is NULL.
 */
double h2d_gains_residual(const struct H2dGains *gains);

/**
 * Copies the 2×6 feedback gain `K` (u = −K·x) into `out` in row-major
 * order. `len` must be at least 12.
 */
enum H2dStatus h2d_gains_feedback(const struct H2dGains *gains, double *out, uintptr_t len);

/**
 * Frees a gains handle. NULL is accepted.
 */
void h2d_gains_free(struct H2dGains *gains);

/**
 * Loads and validates a scenario file (same format the CLI reads).
 * Returns NULL on failure.
 */
struct H2dScenario *h2d_scenario_load(const char *path);

/**
 * Frees a scenario handle. NULL is accepted.
 */
void h2d_scenario_free(struct H2dScenario *scenario);

/**
 * Runs one closed-loop experiment. `controller` is 0 for the classic
 * law, 1 for the model-free law. Returns NULL on failure.
 */
struct H2dTrace *h2d_run(const struct H2dScenario *scenario,
                         const struct H2dGains *gains,
                         int controller);

/**
 * Number of records (control ticks) in a trace; 0 for NULL.
 */
uintptr_t h2d_trace_len(const struct H2dTrace *trace);

/**
 * Tracking-error statistics over `[t0, t1]` for one axis (0 = pitch,
 * 1 = yaw), in degrees. Any output pointer may be NULL to skip that
 * value.
 */
enum H2dStatus h2d_trace_stats(const struct H2dTrace *trace,
                               int axis,
                               double t0,
                               double t1,
                               double *out_mean_deg,
                               double *out_rms_deg,
                               double *out_std_deg,
                               double *out_max_abs_deg);

/**
 * Frees a trace handle. NULL is accepted.
 */
void h2d_trace_free(struct H2dTrace *trace);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HELI2DOF_H */
