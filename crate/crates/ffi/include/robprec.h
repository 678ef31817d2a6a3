#ifndef ROBPREC_H
#define ROBPREC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_POINTER = 1,
  RP_STATUS_INVALID_INPUT = 2,
  RP_STATUS_NOT_CONVERGED = 3,
  RP_STATUS_NUMERIC = 4,
  RP_STATUS_BUFFER_TOO_SMALL = 5,
  RP_STATUS_PANIC = 6,
} RpStatus;

/**
 * An n x p data matrix.
 */
typedef struct RpData RpData;

/**
 * A fitted precision matrix with its diagnostics.
 */
typedef struct RpEstimate RpEstimate;

/**
 * A pipeline: pairwise covariance, PSD repair and graphical lasso settings.
 */
typedef struct RpPipeline RpPipeline;

/**
 * Solver diagnostics of an estimate.
 */
typedef struct {
  double lambda;
  size_t iterations;
  double kkt_residual;
  double min_eigenvalue;
  size_t edge_count;
  int converged;
} RpDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the untruncated message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t rp_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rp_version(void);

/**
 * Copies an `n x p` row-major buffer into a new data handle.
 *
 * # Safety
 * `values` must point to `n * p` doubles and `out` to a writable handle slot.
 */
RpStatus rp_data_new(const double *values, size_t n, size_t p, RpData **out);

/**
 * # Safety
 * `data` must be null or a handle from [`rp_data_new`] not yet freed.
 */
void rp_data_free(RpData *data);

/**
 * Robust pipeline from estimator names, e.g. `"qn"` and `"npd"`.
 *
 * # Safety
 * `scale` and `psd` must be NUL-terminated strings; `out` a writable slot.
 */
RpStatus rp_pipeline_new(const char *scale, const char *psd, RpPipeline **out);

/**
 * Pipeline using the classical sample covariance.
 *
 * # Safety
 * `out` must be a writable handle slot.
 */
RpStatus rp_pipeline_new_classical(RpPipeline **out);

/**
 * Whether the graphical lasso penalizes the diagonal (default: nonzero).
 *
 * # Safety
 * `pipeline` must be a live pipeline handle.
 */
RpStatus rp_pipeline_set_penalize_diagonal(RpPipeline *pipeline, int penalize);

/**
 * Solver limits; `max_iter == 0` or `tol <= 0` leave the current value.
 *
 * # Safety
 * `pipeline` must be a live pipeline handle.
 */
RpStatus rp_pipeline_set_solver(RpPipeline *pipeline, size_t max_iter, double tol);

/**
 * # Safety
 * `pipeline` must be null or a handle not yet freed.
 */
void rp_pipeline_free(RpPipeline *pipeline);

/**
 * Fits a sparse precision matrix at penalty `lambda`.
 *
 * On `RP_STATUS_NOT_CONVERGED` the last iterate is still returned in `out`.
 *
 * # Safety
 * `pipeline` and `data` must be live handles; `out` a writable slot.
 */
RpStatus rp_estimate(const RpPipeline *pipeline,
                     const RpData *data,
                     double lambda,
                     RpEstimate **out);

/**
 * Dimension `p` of the estimate, or 0 for a null handle.
 *
 * # Safety
 * `est` must be null or a live estimate handle.
 */
size_t rp_estimate_dim(const RpEstimate *est);

/**
 * Copies the `p x p` precision matrix, row-major, into `out` of length `len`.
 *
 * # Safety
 * `est` must be a live handle and `out` point to `len` writable doubles.
 */
RpStatus rp_estimate_precision(const RpEstimate *est, double *out, size_t len);

/**
 * # Safety
 * `est` must be a live handle and `out` a writable struct.
 */
RpStatus rp_estimate_diagnostics(const RpEstimate *est, RpDiagnostics *out);

/**
 * # Safety
 * `est` must be null or a handle not yet freed.
 */
void rp_estimate_free(RpEstimate *est);

/**
 * Gaussian-consistent scale of `x` with the named estimator.
 *
 * # Safety
 * `kind` must be a NUL-terminated string, `x` point to `n` doubles and `out`
 * be writable.
 */
RpStatus rp_scale(const char *kind, const double *x, size_t n, double *out);

/**
 * Nearest positive definite matrix with eigenvalues at least `delta`.
 * `a` and `out` are `p x p` row-major and may alias.
 *
 * # Safety
 * `a` and `out` must each point to `p * p` doubles.
 */
RpStatus rp_nearest_pd(const double *a, size_t p, double delta, double *out);

/**
 * Entropy loss `tr(T^-1 H) - log det(T^-1 H) - p` of precision estimate `H`
 * against truth `T`, both `p x p` row-major.
 *
 * # Safety
 * `theta_true` and `theta_hat` must point to `p * p` doubles; `out` writable.
 */
RpStatus rp_entropy_loss(const double *theta_true, const double *theta_hat, size_t p, double *out);

/**
 * Probability that a row of `p` independently contaminated cells holds at
 * least one outlier.
 *
 * # Safety
 * `out` must be writable.
 */
RpStatus rp_row_contamination_prob(double epsilon, size_t p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBPREC_H */
