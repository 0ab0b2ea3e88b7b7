#ifndef WIGNER_CLT_H
#define WIGNER_CLT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WcltMethod {
  WCLT_METHOD_SERIES = 0,
  WCLT_METHOD_CONTOUR = 1,
  WCLT_METHOD_LOG_KERNEL = 2,
  WCLT_METHOD_CHEBYSHEV_CLOSED = 3,
  WCLT_METHOD_CHEBYSHEV_EXPANDED = 4,
} WcltMethod;

/**
 * Status codes; the values match the command-line exit codes.
 */
typedef enum WcltStatus {
  WCLT_STATUS_OK = 0,
  WCLT_STATUS_VERDICT_FAILURE = 1,
  WCLT_STATUS_USAGE = 2,
  WCLT_STATUS_CONFIG = 3,
  WCLT_STATUS_NUMERICAL = 4,
  WCLT_STATUS_PANIC = 5,
} WcltStatus;

/**
 * Moment estimates of a finished run.
 */
typedef struct WcltEstimates WcltEstimates;

/**
 * A validated experiment.
 */
typedef struct WcltExperiment WcltExperiment;

/**
 * Result of comparing estimates with the limit.
 */
typedef struct WcltReport WcltReport;

/**
 * Parameters of one limiting covariance entry; `beta` is 1 or 2.
 */
typedef struct WcltCovarianceQuery {
  uint32_t k_p;
  uint32_t k_q;
  double b_p;
  double b_q;
  double b_pq;
  double c;
  uint8_t beta;
} WcltCovarianceQuery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *wclt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wclt_version(void);

/**
 * Limiting covariance of one query by the chosen evaluator, with the
 * default quadrature.
 *
 * # Safety
 * `query` and `out` must be valid pointers.
 */
enum WcltStatus wclt_covariance(const struct WcltCovarianceQuery *query,
                                enum WcltMethod method,
                                double *out);

/**
 * As [`wclt_covariance`] with explicit quadrature nodes and contour shrink.
 *
 * # Safety
 * `query` and `out` must be valid pointers.
 */
enum WcltStatus wclt_covariance_with_quadrature(const struct WcltCovarianceQuery *query,
                                                enum WcltMethod method,
                                                size_t n_nodes,
                                                double delta,
                                                double *out);

/**
 * Space-time kernel at a precomputed `c = c(s, t)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WcltStatus wclt_kernel(double z_re,
                            double z_im,
                            double w_re,
                            double w_im,
                            double c,
                            double *out);

/**
 * Dirichlet Green function of the upper half-plane.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WcltStatus wclt_green(double z_re, double z_im, double w_re, double w_im, double *out);

/**
 * Parse and validate an experiment from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WcltStatus wclt_experiment_from_json(const char *json, struct WcltExperiment **out);

/**
 * Load a built-in preset by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WcltStatus wclt_experiment_from_preset(const char *name, struct WcltExperiment **out);

/**
 * Override seed, sample count and scale; zero leaves a value unchanged.
 *
 * # Safety
 * `exp` must come from `wclt_experiment_from_*`.
 */
enum WcltStatus wclt_experiment_override(struct WcltExperiment *exp,
                                         uint64_t seed,
                                         size_t n_samples,
                                         double scale);

/**
 * Release an experiment; null is ignored.
 *
 * # Safety
 * `exp` must come from `wclt_experiment_from_*` and not be used afterwards.
 */
void wclt_experiment_free(struct WcltExperiment *exp);

/**
 * Number of observables, or 0 for a null handle.
 *
 * # Safety
 * `exp` must be null or a live experiment handle.
 */
size_t wclt_experiment_observable_count(const struct WcltExperiment *exp);

/**
 * Label of observable `index`, owned by the handle; null when out of range.
 *
 * # Safety
 * `exp` must be null or a live experiment handle.
 */
const char *wclt_experiment_label(const struct WcltExperiment *exp, size_t index);

/**
 * Limiting covariance matrix (row-major `m x m`) by the default evaluator
 * of each pair.
 *
 * # Safety
 * `exp` must be a live handle and `out` must hold `len` doubles.
 */
enum WcltStatus wclt_experiment_theory(const struct WcltExperiment *exp, double *out, size_t len);

/**
 * Run the Monte Carlo experiment; `threads == 0` uses all cores.
 *
 * # Safety
 * `exp` must be a live handle and `out` a valid pointer.
 */
enum WcltStatus wclt_simulate(const struct WcltExperiment *exp,
                              size_t threads,
                              struct WcltEstimates **out);

/**
 * Number of samples that entered the estimates, or 0 for a null handle.
 *
 * # Safety
 * `est` must be null or a live estimates handle.
 */
size_t wclt_estimates_n_used(const struct WcltEstimates *est);

/**
 * Empirical covariances and their jackknife standard errors, row-major.
 * Either output may be null.
 *
 * # Safety
 * `est` must be a live handle; non-null outputs must hold `len` doubles.
 */
enum WcltStatus wclt_estimates_covariance(const struct WcltEstimates *est,
                                          double *values,
                                          double *stderrs,
                                          size_t len);

/**
 * Release estimates; null is ignored.
 *
 * # Safety
 * `est` must come from [`wclt_simulate`] and not be used afterwards.
 */
void wclt_estimates_free(struct WcltEstimates *est);

/**
 * Compare estimates with the limit of the same experiment.
 *
 * # Safety
 * `exp` and `est` must be live handles and `out` a valid pointer.
 */
enum WcltStatus wclt_compare(const struct WcltExperiment *exp,
                             const struct WcltEstimates *est,
                             struct WcltReport **out);

/**
 * 1 when every verdict passed, 0 otherwise (including null).
 *
 * # Safety
 * `report` must be null or a live report handle.
 */
int32_t wclt_report_passed(const struct WcltReport *report);

/**
 * Largest `|z|` over the covariance entries; NaN for null.
 *
 * # Safety
 * `report` must be null or a live report handle.
 */
double wclt_report_max_abs_z(const struct WcltReport *report);

/**
 * Report as JSON; free the string with [`wclt_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum WcltStatus wclt_report_to_json(const struct WcltReport *report, char **out);

/**
 * Release a report; null is ignored.
 *
 * # Safety
 * `report` must come from [`wclt_compare`] and not be used afterwards.
 */
void wclt_report_free(struct WcltReport *report);

/**
 * Release a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void wclt_string_free(char *s);

/**
 * Run the deterministic identity suite. Returns `WCLT_STATUS_VERDICT_FAILURE`
 * when any identity fails; `identities` (optional) receives the count.
 *
 * # Safety
 * `identities` must be null or a valid pointer.
 */
enum WcltStatus wclt_selftest(size_t *identities);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIGNER_CLT_H */
