#ifndef FRAMELAB_H
#define FRAMELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>

/**
 * Result code of every fallible call.
 */
typedef enum FlStatus {
  FL_STATUS_OK = 0,
  FL_STATUS_NULL_POINTER = 1,
  FL_STATUS_INVALID_ARGUMENT = 2,
  FL_STATUS_DIMENSION_MISMATCH = 3,
  FL_STATUS_INVALID_JOB = 4,
  FL_STATUS_NUMERICAL = 5,
  FL_STATUS_PANIC = 6,
} FlStatus;

/**
 * Outcome of a perturbation check.
 */
typedef enum FlVerdict {
  FL_VERDICT_VERIFIED = 0,
  FL_VERDICT_HYPOTHESIS_FAILS = 1,
  FL_VERDICT_BOUND_VIOLATED = 2,
  FL_VERDICT_INCONCLUSIVE = 3,
} FlVerdict;

/**
 * The outcome of a frame perturbation check.
 */
typedef struct FlReport FlReport;

/**
 * A finite sequence in `l^p(n)` together with its coefficient space `l^q(m)`.
 */
typedef struct FlSystem FlSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *fl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fl_version(void);

/**
 * Builds a system from `rows` vectors of length `cols` (row-major), living
 * in `l^p(cols)` with coefficients in `l^q(rows)`.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles and `out` must be writable.
 */
enum FlStatus fl_system_new(const double *data,
                            size_t rows,
                            size_t cols,
                            double p,
                            double q,
                            struct FlSystem **out);

/**
 * Releases a system. NULL is ignored.
 *
 * # Safety
 * `system` must come from [`fl_system_new`] and not be used afterwards.
 */
void fl_system_free(struct FlSystem *system);

/**
 * Number of vectors and their dimension.
 *
 * # Safety
 * All pointers must be valid.
 */
enum FlStatus fl_system_shape(const struct FlSystem *system, size_t *rows, size_t *cols);

/**
 * Operator norm of the `rows x cols` matrix from `l^p(cols)` to `l^q(rows)`.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles and `out` must be writable.
 */
enum FlStatus fl_op_norm(const double *data,
                         size_t rows,
                         size_t cols,
                         double p,
                         double q,
                         double *out);

/**
 * Optimal lower and upper frame bounds of a system.
 *
 * # Safety
 * All pointers must be valid.
 */
enum FlStatus fl_frame_bounds(const struct FlSystem *system, double *lower, double *upper);

/**
 * Smallest `mu` for which the perturbation of `g` by `phi` satisfies the
 * residual condition with the given `lambda1`, `lambda2`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum FlStatus fl_minimal_mu(const struct FlSystem *g,
                            const struct FlSystem *phi,
                            double lambda1,
                            double lambda2,
                            double *out);

/**
 * Checks the frame perturbation theorem for `phi` against `g`. A failing
 * hypothesis is reported through the verdict, not the status.
 *
 * # Safety
 * All pointers must be valid.
 */
enum FlStatus fl_verify_frame(const struct FlSystem *g,
                              const struct FlSystem *phi,
                              double mu,
                              double lambda1,
                              double lambda2,
                              struct FlReport **out);

/**
 * Releases a report. NULL is ignored.
 *
 * # Safety
 * `report` must come from this library and not be used afterwards.
 */
void fl_report_free(struct FlReport *report);

/**
 * Verdict of a report.
 *
 * # Safety
 * All pointers must be valid.
 */
enum FlStatus fl_report_verdict(const struct FlReport *report, enum FlVerdict *out);

/**
 * Predicted bounds and the perturbation size `delta`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum FlStatus fl_report_bounds(const struct FlReport *report,
                               double *lower,
                               double *upper,
                               double *delta);

/**
 * The report as JSON. Release the string with [`fl_string_free`].
 *
 * # Safety
 * All pointers must be valid.
 */
enum FlStatus fl_report_json(const struct FlReport *report, char **out);

/**
 * Runs a job given as JSON text and returns the report document as JSON.
 * Oracles are off and the timestamp is fixed at zero, so the output is a
 * function of the job alone. Release the string with [`fl_string_free`].
 *
 * # Safety
 * `job_json` must be a NUL-terminated string and `out` must be writable.
 */
enum FlStatus fl_run_job_json(const char *job_json, char **out);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void fl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAMELAB_H */
