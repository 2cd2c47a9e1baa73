#ifndef SBMO_H
#define SBMO_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SbmoStatus {
  SBMO_STATUS_OK = 0,
  SBMO_STATUS_NULL_POINTER = 1,
  SBMO_STATUS_INVALID_ARGUMENT = 2,
  SBMO_STATUS_UNSUPPORTED = 3,
  SBMO_STATUS_COVERAGE = 4,
  SBMO_STATUS_NON_CONVERGENCE = 5,
  SBMO_STATUS_CONFIG = 6,
  SBMO_STATUS_IO = 7,
  SBMO_STATUS_FORMAT = 8,
  /**
   * Ran to completion, but a judged row failed its threshold.
   */
  SBMO_STATUS_CHECKS_FAILED = 9,
  SBMO_STATUS_INTERNAL = 10,
  SBMO_STATUS_PANIC = 11,
} SbmoStatus;

/**
 * A generated or loaded obstacle environment.
 */
typedef struct SbmoEnvironment SbmoEnvironment;

/**
 * A solved `w(t, x)` on a grid.
 */
typedef struct SbmoGrid SbmoGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *sbmo_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sbmo_version(void);

/**
 * Poisson obstacles of radius `eps` with constant density `nu` (scaled by
 * `s_d(eps)`) in the box `[lo, hi]` of dimension `dim`.
 *
 * # Safety
 * `lo` and `hi` point to `dim` doubles; `out` is writable.
 */
enum SbmoStatus sbmo_environment_new(uint64_t seed,
                                     double eps,
                                     double nu,
                                     const double *lo,
                                     const double *hi,
                                     size_t dim,
                                     struct SbmoEnvironment **out);

/**
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum SbmoStatus sbmo_environment_load(const char *path, struct SbmoEnvironment **out);

/**
 * # Safety
 * `env` is a live handle; `path` is a NUL-terminated string.
 */
enum SbmoStatus sbmo_environment_save(const struct SbmoEnvironment *env, const char *path);

/**
 * Number of obstacle centres; 0 for a null handle.
 *
 * # Safety
 * `env` is null or a live handle.
 */
size_t sbmo_environment_len(const struct SbmoEnvironment *env);

/**
 * Whether `x` lies in the union of obstacles.
 *
 * # Safety
 * `env` is a live handle; `x` points to `dim` doubles; `out` is writable.
 */
enum SbmoStatus sbmo_environment_covers(const struct SbmoEnvironment *env,
                                        const double *x,
                                        size_t dim,
                                        bool *out);

/**
 * # Safety
 * `env` is null or a handle not yet freed.
 */
void sbmo_environment_free(struct SbmoEnvironment *env);

/**
 * Solves the rate-killed log-Laplace equation with `f = lambda` at `t`,
 * constant density `nu`, on the box `[lo, hi]`.
 *
 * # Safety
 * `lo` and `hi` point to `dim` doubles; `out` is writable.
 */
enum SbmoStatus sbmo_solve_constant(const double *lo,
                                    const double *hi,
                                    size_t dim,
                                    double nu,
                                    double lambda,
                                    double t,
                                    double dt,
                                    double spacing,
                                    struct SbmoGrid **out);

/**
 * `w(t, x)`; zero outside the box or past the last probe time.
 *
 * # Safety
 * `grid` is a live handle; `x` points to `dim` doubles; `out` is writable.
 */
enum SbmoStatus sbmo_grid_value(const struct SbmoGrid *grid,
                                double t,
                                const double *x,
                                size_t dim,
                                double *out);

/**
 * # Safety
 * `grid` is a live handle; `path` is a NUL-terminated string.
 */
enum SbmoStatus sbmo_grid_write_csv(const struct SbmoGrid *grid, const char *path);

/**
 * # Safety
 * `grid` is null or a handle not yet freed.
 */
void sbmo_grid_free(struct SbmoGrid *grid);

/**
 * Fills `out[0..replicates]` with total masses at time `t` of the critical
 * branching system with `n` particles per unit mass, initial mass `y` and
 * killing rate `kappa`.
 *
 * # Safety
 * `out` points to `replicates` writable doubles.
 */
enum SbmoStatus sbmo_total_masses(uint64_t seed,
                                  double n,
                                  double kappa,
                                  double y,
                                  double t,
                                  size_t replicates,
                                  double *out);

/**
 * Runs the experiment described by a JSON config and writes its report
 * files into `out_dir`. Returns `ChecksFailed` when a judged row failed.
 *
 * # Safety
 * `config_json` and `out_dir` are NUL-terminated strings.
 */
enum SbmoStatus sbmo_run_experiment(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBMO_H */
