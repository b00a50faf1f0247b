/* C interface to the spthecl estimation library. Generated by cbindgen; do not edit. */

#ifndef SPTHECL_H
#define SPTHECL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum SpthEclStatus {
  SPTH_ECL_STATUS_OK = 0,
  /**
   * An argument failed validation.
   */
  SPTH_ECL_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A time or gain value fell outside the law's domain.
   */
  SPTH_ECL_STATUS_DOMAIN_ERROR = 2,
  /**
   * A convergence certificate or switching constraint failed.
   */
  SPTH_ECL_STATUS_CERTIFICATE_ERROR = 3,
  /**
   * Filesystem failure.
   */
  SPTH_ECL_STATUS_IO_ERROR = 4,
  /**
   * A required pointer was NULL.
   */
  SPTH_ECL_STATUS_NULL_POINTER = 5,
  /**
   * A string was not valid UTF-8.
   */
  SPTH_ECL_STATUS_INVALID_UTF8 = 6,
} SpthEclStatus;

/**
 * Opaque gain-law handle.
 */
typedef struct SpthEclLaw SpthEclLaw;

/**
 * Opaque dataset-registry handle.
 */
typedef struct SpthEclRegistry SpthEclRegistry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread, or NULL. Caller frees the
 * returned string with `spthecl_string_free`.
 */
char *spthecl_last_error_message(void);

/**
 * Frees a string returned by this library. NULL is accepted.
 *
 * # Safety
 * `s` must come from this library and must not have been freed already.
 */
void spthecl_string_free(char *s);

/**
 * Exponentially growing gain (`ell = 1`).
 */
enum SpthEclStatus spthecl_law_exponential(double upsilon, struct SpthEclLaw **out);

/**
 * Finite-exponent gain law (`ell >= 1`).
 */
enum SpthEclStatus spthecl_law_finite(double ell, double upsilon, struct SpthEclLaw **out);

/**
 * Blow-up gain law (`ell = inf`), the prescribed-time case.
 */
enum SpthEclStatus spthecl_law_prescribed_time(double upsilon, struct SpthEclLaw **out);

/**
 * Frozen gain (`mu` constant): the classical constant-gain baseline.
 */
enum SpthEclStatus spthecl_law_frozen(struct SpthEclLaw **out);

/**
 * Destroys a law handle. NULL is accepted.
 *
 * # Safety
 * `law` must come from a `spthecl_law_*` constructor and not be used again.
 */
void spthecl_law_free(struct SpthEclLaw *law);

/**
 * `F(mu)`, the gain ODE right-hand side.
 */
enum SpthEclStatus spthecl_law_rate(const struct SpthEclLaw *law, double mu, double *out);

/**
 * Closed-form gain `mu(t)` started at `mu0`.
 */
enum SpthEclStatus spthecl_law_solution(const struct SpthEclLaw *law,
                                        double mu0,
                                        double t,
                                        double *out);

/**
 * Blow-up time of the law started at `mu0` (infinity when none).
 */
enum SpthEclStatus spthecl_law_blow_up_time(const struct SpthEclLaw *law, double mu0, double *out);

/**
 * Dilated time `s = D_c(t)`.
 */
enum SpthEclStatus spthecl_law_dilate(const struct SpthEclLaw *law,
                                      double c,
                                      double t,
                                      double *out);

/**
 * Real time `t = D_c^{-1}(s)`.
 */
enum SpthEclStatus spthecl_law_contract(const struct SpthEclLaw *law,
                                        double c,
                                        double s,
                                        double *out);

/**
 * `F(mu_hat)/mu_hat`, the dilated-clock gain rate.
 */
enum SpthEclStatus spthecl_law_dilated_rate(const struct SpthEclLaw *law,
                                            double mu_hat,
                                            double *out);

/**
 * Loads a dataset registry document.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum SpthEclStatus spthecl_registry_load(const char *path, struct SpthEclRegistry **out);

/**
 * The built-in benchmark registry (four datasets).
 */
enum SpthEclStatus spthecl_registry_builtin(struct SpthEclRegistry **out);

/**
 * Destroys a registry handle. NULL is accepted.
 *
 * # Safety
 * `reg` must come from a registry constructor and not be used again.
 */
void spthecl_registry_free(struct SpthEclRegistry *reg);

/**
 * Number of datasets in the registry.
 */
enum SpthEclStatus spthecl_registry_len(const struct SpthEclRegistry *reg, size_t *out);

/**
 * Parameter dimension of the registry's datasets.
 */
enum SpthEclStatus spthecl_registry_dimension(const struct SpthEclRegistry *reg, size_t *out);

/**
 * Richness level (`lambda_min` of the data matrix) of dataset `id`.
 * Fails with `DOMAIN_ERROR` on corrupted (asymmetric) datasets.
 */
enum SpthEclStatus spthecl_registry_richness(const struct SpthEclRegistry *reg,
                                             size_t id,
                                             double *out);

/**
 * Classification label of dataset `id`: 0 = sufficiently rich,
 * 1 = insufficiently rich, 2 = corrupted.
 */
enum SpthEclStatus spthecl_registry_classification(const struct SpthEclRegistry *reg,
                                                   size_t id,
                                                   int32_t *out);

/**
 * Runs a benchmark variant ("standard", "he", or "pt"), writes the artifact
 * directory, and returns the final estimation error.
 *
 * # Safety
 * `variant` and `out_dir` must be NUL-terminated strings.
 */
enum SpthEclStatus spthecl_run_benchmark(const char *variant,
                                         const char *out_dir,
                                         uint64_t seed,
                                         double *final_error);

/**
 * Runs an experiment config document and writes the artifact directory.
 *
 * # Safety
 * `config_path` and `out_dir` must be NUL-terminated strings.
 */
enum SpthEclStatus spthecl_simulate(const char *config_path, const char *out_dir);

/**
 * Checks a trace CSV against the dilated switching constraints.
 * `drain_modes` points at `drain_count` mode indices that consume the
 * activation budget. On success `*ok` reports the verdict.
 *
 * # Safety
 * `trace_path` must be a NUL-terminated string; `drain_modes` must point at
 * `drain_count` readable entries.
 */
enum SpthEclStatus spthecl_verify_trace(const char *trace_path,
                                        const struct SpthEclLaw *law,
                                        double mu0,
                                        double tau_d,
                                        double tau_a,
                                        double n0,
                                        double t0,
                                        const size_t *drain_modes,
                                        size_t drain_count,
                                        bool *ok);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPTHECL_H */
