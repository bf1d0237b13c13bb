#ifndef FANO_EP_H
#define FANO_EP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FanoStatus {
  FANO_STATUS_OK = 0,
  FANO_STATUS_NULL_POINTER = 1,
  FANO_STATUS_INVALID_ARGUMENT = 2,
  FANO_STATUS_SINGULAR_MATRIX = 3,
  FANO_STATUS_NO_CONVERGENCE = 4,
  FANO_STATUS_JACOBIAN_SINGULAR = 5,
  FANO_STATUS_POLE_TOO_CLOSE = 6,
  FANO_STATUS_DEGENERATE_INIT = 7,
  FANO_STATUS_INSUFFICIENT_DATA = 8,
  FANO_STATUS_NON_FINITE = 9,
  FANO_STATUS_EMPTY_CURVE = 10,
  FANO_STATUS_IO = 11,
  FANO_STATUS_FORMAT = 12,
  FANO_STATUS_PANIC = 13,
} FanoStatus;

typedef enum FanoChannel {
  FANO_CHANNEL_G11 = 0,
  FANO_CHANNEL_G22 = 1,
  FANO_CHANNEL_G12 = 2,
  FANO_CHANNEL_G21 = 3,
  FANO_CHANNEL_ANTI = 4,
  FANO_CHANNEL_EFFECTIVE = 5,
} FanoChannel;

typedef enum FanoModel {
  FANO_MODEL_SINGLE = 0,
  FANO_MODEL_DOUBLE = 1,
  FANO_MODEL_ENERGY_DEP = 2,
  FANO_MODEL_SIMPLIFIED = 3,
} FanoModel;

/**
 * Sampled cross section.
 */
typedef struct FanoCurve FanoCurve;

/**
 * Result of a least-squares fit.
 */
typedef struct FanoFit FanoFit;

typedef struct FanoComplex {
  double re;
  double im;
} FanoComplex;

typedef struct FanoExceptionalPoint {
  struct FanoComplex omega;
  double f;
  double g;
  double residual;
  size_t iterations;
} FanoExceptionalPoint;

typedef struct FanoOscillator {
  double omega1;
  double omega2;
  double k1;
  double k2;
} FanoOscillator;

typedef struct FanoCoupling {
  double f;
  double g;
} FanoCoupling;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fano_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into the library on the same thread.
 */
const char *fano_last_error_message(void);

/**
 * Closed-form exceptional point of two undamped oscillators.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FanoStatus fano_analytic_ep(double omega1, double omega2, struct FanoExceptionalPoint *out_ep);

/**
 * Newton refinement of an exceptional point from `guess` (its `omega`, `f`
 * and `g` are used).
 *
 * # Safety
 * Pointers must be valid; `out` for writes.
 */
enum FanoStatus fano_numeric_ep(const struct FanoOscillator *osc,
                                const struct FanoExceptionalPoint *guess,
                                struct FanoExceptionalPoint *out_ep);

/**
 * Cross section `|T|^2` at a real frequency.
 *
 * # Safety
 * Pointers must be valid; `out` for writes.
 */
enum FanoStatus fano_cross_section(const struct FanoOscillator *osc,
                                   const struct FanoCoupling *coup,
                                   double omega,
                                   enum FanoChannel channel,
                                   double *out_value);

/**
 * The four roots of `det D`, sorted by real then imaginary part.
 *
 * # Safety
 * `out_poles` must point to space for four values.
 */
enum FanoStatus fano_resonance_poles(const struct FanoOscillator *osc,
                                     const struct FanoCoupling *coup,
                                     struct FanoComplex *out_poles);

/**
 * Samples a cross section on `points` uniform frequencies in `[lo, hi]`.
 *
 * # Safety
 * Pointers must be valid; `out` for writes.
 */
enum FanoStatus fano_curve_sample(const struct FanoOscillator *osc,
                                  const struct FanoCoupling *coup,
                                  double lo,
                                  double hi,
                                  size_t points,
                                  enum FanoChannel channel,
                                  struct FanoCurve **out_curve);

/**
 * Builds a curve from `len` samples, copying the data.
 *
 * # Safety
 * `energies` and `values` must each hold `len` values.
 */
enum FanoStatus fano_curve_from_arrays(const double *energies,
                                       const double *values,
                                       size_t len,
                                       struct FanoCurve **out_curve);

/**
 * Reads an `omega,sigma` CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for writes.
 */
enum FanoStatus fano_curve_read_csv(const char *path, struct FanoCurve **out_curve);

/**
 * Writes the curve as `omega,sigma` CSV.
 *
 * # Safety
 * `curve` must come from this library; `path` NUL-terminated.
 */
enum FanoStatus fano_curve_write_csv(const struct FanoCurve *curve, const char *path);

/**
 * Number of samples; 0 for NULL.
 *
 * # Safety
 * `curve` must be NULL or come from this library.
 */
size_t fano_curve_len(const struct FanoCurve *curve);

/**
 * Copies up to `capacity` samples into the output arrays.
 *
 * # Safety
 * Output arrays must hold `capacity` values.
 */
enum FanoStatus fano_curve_copy(const struct FanoCurve *curve,
                                double *energies,
                                double *values,
                                size_t capacity);

/**
 * # Safety
 * `curve` must be NULL or come from this library, and not be used again.
 */
void fano_curve_free(struct FanoCurve *curve);

/**
 * Multistart Levenberg-Marquardt fit. `poles` (may be NULL when
 * `n_poles` is 0) seed the resonance energies and widths.
 *
 * # Safety
 * `curve` must come from this library; `poles` must hold `n_poles` values.
 */
enum FanoStatus fano_fit(const struct FanoCurve *curve,
                         enum FanoModel model,
                         const struct FanoComplex *poles,
                         size_t n_poles,
                         uint64_t seed,
                         size_t multistart,
                         struct FanoFit **out_fit);

/**
 * Root mean square residual; NaN for NULL.
 *
 * # Safety
 * `fit` must be NULL or come from this library.
 */
double fano_fit_rms(const struct FanoFit *fit);

/**
 * # Safety
 * `fit` must be NULL or come from this library.
 */
size_t fano_fit_iterations(const struct FanoFit *fit);

/**
 * # Safety
 * `fit` must be NULL or come from this library.
 */
bool fano_fit_converged(const struct FanoFit *fit);

/**
 * Number of parameters reported by [`fano_fit_params`]: 5 (single),
 * 9 (double), 6 (energy-dep) or 5 (simplified); 0 for NULL.
 *
 * # Safety
 * `fit` must be NULL or come from this library.
 */
size_t fano_fit_param_count(const struct FanoFit *fit);

/**
 * Copies the fitted parameters in family order:
 * single `e_r, gamma, q, scale, offset`;
 * double `e1, gamma1, q1, scale1, e2, gamma2, q2, scale2, offset`;
 * energy-dep `e1, gamma1, e2, gamma2, delta, scale`;
 * simplified `e1, gamma1, e2, gamma2, scale`.
 *
 * # Safety
 * `out_params` must hold `capacity` values.
 */
enum FanoStatus fano_fit_params(const struct FanoFit *fit, double *out_params, size_t capacity);

/**
 * Fitted model at `energy`; NaN for NULL.
 *
 * # Safety
 * `fit` must be NULL or come from this library.
 */
double fano_fit_eval(const struct FanoFit *fit, double energy);

/**
 * Model family of the fit.
 *
 * # Safety
 * `fit` must come from this library.
 */
enum FanoStatus fano_fit_model(const struct FanoFit *fit, enum FanoModel *out_model);

/**
 * # Safety
 * `fit` must be NULL or come from this library, and not be used again.
 */
void fano_fit_free(struct FanoFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FANO_EP_H */
