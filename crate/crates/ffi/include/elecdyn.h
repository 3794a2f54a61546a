#ifndef ELECDYN_H
#define ELECDYN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function in this library.
 */
typedef enum ElecdynStatus {
  ELECDYN_STATUS_OK = 0,
  ELECDYN_STATUS_NULL_POINTER = 1,
  ELECDYN_STATUS_INVALID_ARGUMENT = 2,
  ELECDYN_STATUS_CONFIG = 3,
  ELECDYN_STATUS_DOMAIN = 4,
  ELECDYN_STATUS_REFUSED = 5,
  ELECDYN_STATUS_IO = 6,
  ELECDYN_STATUS_OUT_OF_RANGE = 7,
  ELECDYN_STATUS_PANIC = 8,
} ElecdynStatus;

/**
 * Per-round series that can be copied out of a run.
 */
typedef enum ElecdynMetric {
  ELECDYN_METRIC_WINNER_RADIUS = 0,
  ELECDYN_METRIC_SUPPORTER_RADIUS = 1,
  ELECDYN_METRIC_VOTER_VARIANCE = 2,
  ELECDYN_METRIC_CANDIDATE_VARIANCE = 3,
  ELECDYN_METRIC_ASYMMETRY = 4,
  ELECDYN_METRIC_SIGNED_ASYMMETRY = 5,
  ELECDYN_METRIC_WINNER_TO_MEAN = 6,
  ELECDYN_METRIC_WINNER_TO_MEDIAN = 7,
} ElecdynMetric;

/**
 * A completed simulation.
 */
typedef struct ElecdynRun ElecdynRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or an empty string. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *elecdyn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *elecdyn_version(void);

/**
 * Parses a TOML run configuration, simulates it and stores the result in `*out`.
 *
 * # Safety
 * `config_toml` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum ElecdynStatus elecdyn_run_from_toml(const char *config_toml, struct ElecdynRun **out);

/**
 * Releases a run. Null is ignored.
 *
 * # Safety
 * `run` must be null or a handle from [`elecdyn_run_from_toml`] not yet freed.
 */
void elecdyn_run_free(struct ElecdynRun *run);

/**
 * Number of recorded rounds (`rounds + 1`, round 0 included).
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum ElecdynStatus elecdyn_run_len(const struct ElecdynRun *run, size_t *out);

/**
 * Copies one metric series into `dest`, which must hold at least
 * [`elecdyn_run_len`] values.
 *
 * # Safety
 * `run` must be a live handle; `dest` must be valid for `capacity` writes.
 */
enum ElecdynStatus elecdyn_run_metric(const struct ElecdynRun *run,
                                      enum ElecdynMetric metric,
                                      double *dest,
                                      size_t capacity);

/**
 * Copies the winner of round `t` into `dest` (`dim` coordinates).
 *
 * # Safety
 * `run` must be a live handle; `dest` must be valid for `dim` writes.
 */
enum ElecdynStatus elecdyn_run_winner(const struct ElecdynRun *run,
                                      size_t t,
                                      double *dest,
                                      size_t dim);

/**
 * Checks the voter contraction bound on a noiseless run. Returns
 * [`ElecdynStatus::Refused`] for noisy runs.
 *
 * # Safety
 * `run` must be a live handle; the output pointers must be valid.
 */
enum ElecdynStatus elecdyn_run_check_voter_bound(const struct ElecdynRun *run,
                                                 bool *satisfied,
                                                 double *max_violation);

/**
 * Empirical variance of `n` points in `dim` dimensions (row-major).
 *
 * # Safety
 * `points` must be valid for `n * dim` reads and `out` for one write.
 */
enum ElecdynStatus elecdyn_pairwise_variance(const double *points,
                                             size_t n,
                                             size_t dim,
                                             double *out);

/**
 * Largest distance from `w` to any of the points.
 *
 * # Safety
 * `points` must be valid for `n * dim` reads, `w` for `dim` reads, `out` for one write.
 */
enum ElecdynStatus elecdyn_winner_radius(const double *points,
                                         size_t n,
                                         size_t dim,
                                         const double *w,
                                         double *out);

/**
 * Point of the box `[lo, hi]` minimizing the largest distance to the points.
 *
 * # Safety
 * `points` must be valid for `n * dim` reads; `lo`, `hi` for `dim` reads;
 * `center` for `dim` writes and `radius` for one write.
 */
enum ElecdynStatus elecdyn_chebyshev_center(const double *points,
                                            size_t n,
                                            size_t dim,
                                            const double *lo,
                                            const double *hi,
                                            double *center,
                                            double *radius);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELECDYN_H */
