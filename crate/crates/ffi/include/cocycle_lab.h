#ifndef COCYCLE_LAB_H
#define COCYCLE_LAB_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum CocycleLabStatus {
  COCYCLE_LAB_STATUS_OK = 0,
  COCYCLE_LAB_STATUS_NULL_POINTER = 1,
  COCYCLE_LAB_STATUS_INVALID_ARGUMENT = 2,
  COCYCLE_LAB_STATUS_NOT_UNIMODULAR = 3,
  COCYCLE_LAB_STATUS_NOT_HYPERBOLIC = 4,
  COCYCLE_LAB_STATUS_NO_CONVERGENCE = 5,
  COCYCLE_LAB_STATUS_NUMERICAL = 6,
  COCYCLE_LAB_STATUS_CONFIG = 7,
  COCYCLE_LAB_STATUS_IO = 8,
  COCYCLE_LAB_STATUS_PANIC = 9,
} CocycleLabStatus;

/**
 * Hyperbolic toral automorphism.
 */
typedef struct CocycleLabAutomorphism CocycleLabAutomorphism;

/**
 * Linear cocycle over an automorphism.
 */
typedef struct CocycleLabCocycle CocycleLabCocycle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last call on this thread that failed; empty after a successful call.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *cocycle_lab_last_error(void);

/**
 * Builds an automorphism from a row-major `dim`×`dim` integer matrix.
 *
 * # Safety
 * `entries` must point to `dim * dim` readable values and `out_handle` must be writable.
 */
enum CocycleLabStatus cocycle_lab_automorphism_new(const int64_t *entries,
                                                   size_t dim,
                                                   struct CocycleLabAutomorphism **out_handle);

/**
 * The Arnold cat map [[2, 1], [1, 1]].
 */
struct CocycleLabAutomorphism *cocycle_lab_automorphism_cat_map(void);

/**
 * # Safety
 * `handle` must be null or come from this library and not have been freed.
 */
void cocycle_lab_automorphism_free(struct CocycleLabAutomorphism *handle);

/**
 * Torus dimension, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live automorphism.
 */
size_t cocycle_lab_automorphism_dim(const struct CocycleLabAutomorphism *handle);

/**
 * Contraction and expansion rates ν and ν̂.
 *
 * # Safety
 * `handle` must be a live automorphism; `nu` and `nu_hat` must be writable.
 */
enum CocycleLabStatus cocycle_lab_automorphism_rates(const struct CocycleLabAutomorphism *handle,
                                                     double *nu,
                                                     double *nu_hat);

/**
 * Applies the automorphism `n` times (negative `n` steps backwards).
 *
 * # Safety
 * `x` and `y` must each hold `dim` doubles.
 */
enum CocycleLabStatus cocycle_lab_automorphism_step(const struct CocycleLabAutomorphism *handle,
                                                    const double *x,
                                                    int64_t n,
                                                    double *y);

/**
 * Cocycle with the constant generator given as a row-major `d`×`d` matrix.
 *
 * # Safety
 * `base` must be live, `matrix` must hold `d * d` doubles, `out_handle` must be writable.
 */
enum CocycleLabStatus cocycle_lab_cocycle_constant(const struct CocycleLabAutomorphism *base,
                                                   const double *matrix,
                                                   size_t d,
                                                   struct CocycleLabCocycle **out_handle);

/**
 * # Safety
 * `handle` must be null or come from this library and not have been freed.
 */
void cocycle_lab_cocycle_free(struct CocycleLabCocycle *handle);

/**
 * Fiber dimension, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live cocycle.
 */
size_t cocycle_lab_cocycle_dim(const struct CocycleLabCocycle *handle);

/**
 * Writes the row-major iterate A^n(x).
 *
 * # Safety
 * `x` must hold the torus dimension in doubles and `out_matrix` must hold `d * d`.
 */
enum CocycleLabStatus cocycle_lab_cocycle_iterate(const struct CocycleLabCocycle *handle,
                                                  const double *x,
                                                  int64_t n,
                                                  double *out_matrix);

/**
 * Lyapunov exponents along the orbit of `x`, in decreasing order.
 *
 * # Safety
 * `x` must hold the torus dimension in doubles and `exponents` must hold `d`.
 */
enum CocycleLabStatus cocycle_lab_lyapunov(const struct CocycleLabCocycle *handle,
                                           const double *x,
                                           size_t n_steps,
                                           size_t qr_period,
                                           double *exponents);

/**
 * Fiber bunching estimate at exponent `beta`; `passed` is set only on a pass verdict.
 *
 * # Safety
 * `handle` must be live; `theta_hat` and `passed` must be writable.
 */
enum CocycleLabStatus cocycle_lab_fiber_bunching(const struct CocycleLabCocycle *handle,
                                                 double beta,
                                                 double *theta_hat,
                                                 bool *passed);

/**
 * Runs a named scenario and writes its CSV files into `out_dir`.
 * A null `config_path` uses the default configuration.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `passed` must be writable.
 */
enum CocycleLabStatus cocycle_lab_run_scenario(const char *scenario,
                                               const char *config_path,
                                               const char *out_dir,
                                               bool serial,
                                               bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COCYCLE_LAB_H */
