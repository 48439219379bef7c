#ifndef NDSTAB_H
#define NDSTAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NdstabStatus {
  NDSTAB_STATUS_OK = 0,
  NDSTAB_STATUS_NULL_POINTER = 1,
  NDSTAB_STATUS_INVALID_UTF8 = 2,
  NDSTAB_STATUS_PARSE_ERROR = 3,
  NDSTAB_STATUS_VALIDATION_ERROR = 4,
  NDSTAB_STATUS_DOMAIN_ERROR = 5,
  NDSTAB_STATUS_SIMULATION_ERROR = 6,
  NDSTAB_STATUS_PANIC = 7,
} NdstabStatus;

typedef enum NdstabHistoryKind {
  /**
   * `phi = value`
   */
  NDSTAB_HISTORY_KIND_CONSTANT = 0,
  /**
   * `phi = sin t`
   */
  NDSTAB_HISTORY_KIND_SINE = 1,
  /**
   * Reproducible random piecewise-linear history from `seed`.
   */
  NDSTAB_HISTORY_KIND_SEEDED = 2,
} NdstabHistoryKind;

/**
 * Parsed equation.
 */
typedef struct NdstabSpec NdstabSpec;

/**
 * Integrated trajectory on a uniform grid.
 */
typedef struct NdstabTrajectory NdstabTrajectory;

/**
 * Scalar bounds of an equation. `inf_a > 0` is required by the
 * positive-coefficient test.
 */
typedef struct NdstabSummary {
  double norm_a;
  double inf_a;
  double norm_a_plus;
  double norm_a_minus;
  double norm_b;
  double inf_b;
  double sigma;
  double tau;
  double delta;
} NdstabSummary;

typedef struct NdstabInterval {
  double lower;
  double upper;
  bool lower_open;
  bool upper_open;
  bool empty;
} NdstabInterval;

typedef struct NdstabHistory {
  enum NdstabHistoryKind kind;
  double value;
  uint64_t seed;
} NdstabHistory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call into the library on this thread.
 */
const char *ndstab_last_error_message(void);

/**
 * Parses an equation from a NUL-terminated JSON string.
 *
 * # Safety
 * `json` must be null or a valid NUL-terminated string; `out` must be null
 * or writable.
 */
enum NdstabStatus ndstab_spec_from_json(const char *json, struct NdstabSpec **out);

/**
 * # Safety
 * `spec` must be null or a handle from [`ndstab_spec_from_json`] that has
 * not been freed.
 */
void ndstab_spec_free(struct NdstabSpec *spec);

/**
 * Checks the standing assumptions on `grid_points` samples. Returns
 * `ValidationError` with the failed checks in the error message.
 *
 * # Safety
 * `spec` must be null or a live handle.
 */
enum NdstabStatus ndstab_spec_validate(const struct NdstabSpec *spec, size_t grid_points);

/**
 * Bounds of `spec` from its overrides or from `grid_points` samples.
 *
 * # Safety
 * `spec` must be null or a live handle; `out` must be null or writable.
 */
enum NdstabStatus ndstab_spec_summary(const struct NdstabSpec *spec,
                                      size_t grid_points,
                                      struct NdstabSummary *out);

/**
 * Every criterion verdict as a JSON document. `alpha` is NaN for the
 * automatic choice, otherwise a value in `[0, 1]`. Free the string with
 * [`ndstab_string_free`].
 *
 * # Safety
 * `spec` must be null or a live handle; `out_json` must be null or
 * writable.
 */
enum NdstabStatus ndstab_check_json(const struct NdstabSpec *spec,
                                    double alpha,
                                    size_t grid_points,
                                    char **out_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void ndstab_string_free(char *s);

/**
 * `(1 - |a|) / (e |b|)`; NaN when `summary` is null.
 *
 * # Safety
 * `summary` must be null or readable.
 */
double ndstab_tau0(const struct NdstabSummary *summary);

/**
 * The `alpha` values in `[0, 1]` for which the positive-coefficient test
 * holds.
 *
 * # Safety
 * `summary` must be null or readable; `out` must be null or writable.
 */
enum NdstabStatus ndstab_alpha_interval_theorem1(const struct NdstabSummary *summary,
                                                 struct NdstabInterval *out);

/**
 * Integrates `spec` from `t0` to `t_end` with step `step`.
 *
 * # Safety
 * `spec` must be null or a live handle; `out` must be null or writable.
 */
enum NdstabStatus ndstab_simulate(const struct NdstabSpec *spec,
                                  struct NdstabHistory history,
                                  double t_end,
                                  double step,
                                  struct NdstabTrajectory **out);

/**
 * Number of grid points; 0 for null.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t ndstab_trajectory_len(const struct NdstabTrajectory *traj);

/**
 * Time of the first point; NaN for null.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
double ndstab_trajectory_t0(const struct NdstabTrajectory *traj);

/**
 * Grid spacing; NaN for null.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
double ndstab_trajectory_step(const struct NdstabTrajectory *traj);

/**
 * `x` at the grid points, `ndstab_trajectory_len` values owned by the
 * handle; null for null.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
const double *ndstab_trajectory_x(const struct NdstabTrajectory *traj);

/**
 * `y = x - a x(g)` at the grid points.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
const double *ndstab_trajectory_y(const struct NdstabTrajectory *traj);

/**
 * # Safety
 * `traj` must be null or a handle from [`ndstab_simulate`] that has not
 * been freed.
 */
void ndstab_trajectory_free(struct NdstabTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NDSTAB_H */
