#ifndef OTFLUCT_H
#define OTFLUCT_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum OtfStatus {
  OTF_STATUS_OK = 0,
  OTF_STATUS_NULL_POINTER = 1,
  OTF_STATUS_INVALID_PARAMETER = 2,
  OTF_STATUS_RESOURCE_BUDGET = 3,
  OTF_STATUS_QUADRATURE = 4,
  OTF_STATUS_NOT_PSD = 5,
  OTF_STATUS_CONFIG = 6,
  OTF_STATUS_IO = 7,
  OTF_STATUS_PANIC = 8,
} OtfStatus;

typedef enum OtfRegime {
  OTF_REGIME_LARGE = 0,
  OTF_REGIME_CRITICAL = 1,
  OTF_REGIME_INTERMEDIATE = 2,
} OtfRegime;

typedef enum OtfFieldKind {
  OTF_FIELD_KIND_Y1 = 0,
  OTF_FIELD_KIND_Y2 = 1,
} OtfFieldKind;

/**
 * Operator-scaling Gaussian field.
 */
typedef struct OtfField OtfField;

/**
 * Limit covariances of one system and a family of test functions.
 */
typedef struct OtfLimitModel OtfLimitModel;

/**
 * Branching system parameters.
 */
typedef struct OtfSystem OtfSystem;

/**
 * Spatial test function.
 */
typedef struct OtfTestFunction OtfTestFunction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *otf_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *otf_version(void);

/**
 * Create a system with stability indices `alphas[0..dim]`, branching rate
 * `gamma`, degeneracy `theta` and time scale `n`.
 *
 * # Safety
 * `alphas` must hold `dim` values and `out` must be writable.
 */
enum OtfStatus otf_system_new(const double *alphas,
                              size_t dim,
                              double gamma,
                              double theta,
                              double n,
                              struct OtfSystem **out);

/**
 * # Safety
 * `system` must be null or a handle from [`otf_system_new`] not yet freed.
 */
void otf_system_free(struct OtfSystem *system);

/**
 * # Safety
 * `system` must be a live handle and `out` writable.
 */
enum OtfStatus otf_system_alpha_bar(const struct OtfSystem *system, double *out);

/**
 * # Safety
 * `system` must be a live handle and `out` writable.
 */
enum OtfStatus otf_system_regime(const struct OtfSystem *system, enum OtfRegime *out);

/**
 * Norming `F_n` of the system's regime.
 *
 * # Safety
 * `system` must be a live handle and `out` writable.
 */
enum OtfStatus otf_system_norming(const struct OtfSystem *system, double *out);

/**
 * Mean density factor `f_n(s)`: `E⟨N(s), φ⟩ = f_n(s) ∫φ`.
 *
 * # Safety
 * `system` must be a live handle and `out` writable.
 */
enum OtfStatus otf_system_mean_factor(const struct OtfSystem *system, double s, double *out);

/**
 * Gaussian bump `Π exp(-(x_k - c_k)² / (2 w_k²))`.
 *
 * # Safety
 * `center` and `widths` must hold `dim` values and `out` must be writable.
 */
enum OtfStatus otf_test_function_gaussian(const double *center,
                                          const double *widths,
                                          size_t dim,
                                          struct OtfTestFunction **out);

/**
 * # Safety
 * `f` must be a live handle and `out` writable.
 */
enum OtfStatus otf_test_function_integral(const struct OtfTestFunction *f, double *out);

/**
 * # Safety
 * `f` must be null or a live handle.
 */
void otf_test_function_free(struct OtfTestFunction *f);

/**
 * Precompute the limit covariances of `system` for `count` test functions,
 * with default quadrature settings.
 *
 * # Safety
 * `system` must be live, `functions` must hold `count` live handles and
 * `out` must be writable.
 */
enum OtfStatus otf_limit_model_new(const struct OtfSystem *system,
                                   const struct OtfTestFunction *const *functions_ptr,
                                   size_t count,
                                   struct OtfLimitModel **out);

/**
 * Limit of `Cov(⟨X_n(r), φ_i⟩, ⟨X_n(t), φ_j⟩)` with its quadrature error.
 *
 * # Safety
 * `model` must be live and `value`, `err` writable.
 */
enum OtfStatus otf_limit_model_cov(const struct OtfLimitModel *model,
                                   size_t i,
                                   size_t j,
                                   double r,
                                   double t,
                                   double *value,
                                   double *err);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
void otf_limit_model_free(struct OtfLimitModel *model);

/**
 * Operator-scaling field of the large regime; needs `ᾱ > 2` and `gamma > 0`.
 *
 * # Safety
 * `alphas` must hold `dim` values and `out` must be writable.
 */
enum OtfStatus otf_field_new(enum OtfFieldKind kind,
                             const double *alphas,
                             size_t dim,
                             double theta,
                             double gamma,
                             struct OtfField **out);

/**
 * `Cov(Y(u), Y(v))` for points `u, v ∈ [0, ∞)^d`.
 *
 * # Safety
 * `field` must be live, `u` and `v` must hold the field's dimension in
 * values and `value`, `err` must be writable.
 */
enum OtfStatus otf_field_cov(const struct OtfField *field,
                             const double *u,
                             const double *v,
                             double *value,
                             double *err);

/**
 * # Safety
 * `field` must be null or a live handle.
 */
void otf_field_free(struct OtfField *field);

/**
 * Simulate replicate `replicate` of seed `seed` on the default periodic box
 * and write `⟨X_n(times[a]), φ_i⟩` to `out[a * count + i]`.
 *
 * # Safety
 * `system` must be live, `functions` must hold `count` live handles,
 * `times` must hold `n_times` values and `out` must have room for
 * `n_times * count` values.
 */
enum OtfStatus otf_fluctuation_sample(const struct OtfSystem *system,
                                      const struct OtfTestFunction *const *functions_ptr,
                                      size_t count,
                                      const double *times,
                                      size_t n_times,
                                      uint64_t seed,
                                      uint64_t replicate,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTFLUCT_H */
