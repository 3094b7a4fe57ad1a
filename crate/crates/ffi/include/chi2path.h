#ifndef CHI2PATH_H
#define CHI2PATH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every exported function.
 */
typedef enum Chi2Status {
  CHI2_STATUS_OK = 0,
  CHI2_STATUS_NULL_POINTER = 1,
  /*
   Invalid input: domain, range or order errors.
   */
  CHI2_STATUS_VALIDATION = 2,
  /*
   Numerical breakdown: quadrature, singularities, forbidden kinematics.
   */
  CHI2_STATUS_NUMERICAL = 3,
  /*
   A Rust panic was caught at the boundary.
   */
  CHI2_STATUS_PANIC = 4,
  /*
   The caller's buffer is too small.
   */
  CHI2_STATUS_BUFFER_TOO_SMALL = 5,
} Chi2Status;

/*
 Opaque oscillator-reservoir permittivity model.
 */
typedef struct Chi2HbModel Chi2HbModel;

/*
 Opaque dressed propagator.
 */
typedef struct Chi2Propagator Chi2Propagator;

typedef struct Chi2Complex {
  double re;
  double im;
} Chi2Complex;

/*
 Homogeneous three-wave configuration. Wave numbers follow from `index`;
 the pump wave number is chosen so that `k_p + k_s + k_i = delta_k`.
 */
typedef struct Chi2Setup {
  /*
   chi(2), m/V.
   */
  double chi2;
  double crystal_start;
  double crystal_length;
  double index;
  /*
   rad/s.
   */
  double omega_s;
  double omega_i;
  /*
   V/m.
   */
  double pump_amplitude;
  double pump_phase;
  /*
   1/m.
   */
  double delta_k;
} Chi2Setup;

typedef struct Chi2Squeezing {
  double s;
  double theta;
} Chi2Squeezing;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *chi2_version(void);

/*
 Copies the calling thread's last error message into `buf` (NUL-terminated).
 `*len` receives the length without the terminator. An empty string means
 no error has been recorded.

 # Safety
 `buf` must be valid for `cap` bytes; `len` may be NULL.
 */
enum Chi2Status chi2_last_error_message(char *buf, size_t cap, size_t *len);

/*
 `L^2 sinc^2(L dk / 2)`.

 # Safety
 `out` must be valid for writes.
 */
enum Chi2Status chi2_spdc_probability(double length, double delta_k, double *out);

/*
 Creates an oscillator-reservoir model with constant coupling `f`
 (`f = 0` gives the lossless Lorentz limit).

 # Safety
 `out` must be valid for writes. Release the handle with [`chi2_hb_model_free`].
 */
enum Chi2Status chi2_hb_model_new(double omega0,
                                  double beta,
                                  double rho,
                                  double coupling,
                                  double cutoff,
                                  struct Chi2HbModel **out);

/*
 # Safety
 `model` must come from [`chi2_hb_model_new`] and not be used afterwards.
 */
void chi2_hb_model_free(struct Chi2HbModel *model);

/*
 Effective permittivity at `omega` for geometry factor `g`.

 # Safety
 `model` must be a live handle; `out` must be valid for writes.
 */
enum Chi2Status chi2_effective_epsilon(const struct Chi2HbModel *model,
                                       double g,
                                       double omega,
                                       struct Chi2Complex *out);

/*
 Analytic propagator in a homogeneous medium with `eps = index^2 + i loss`.

 # Safety
 `out` must be valid for writes. Release with [`chi2_propagator_free`].
 */
enum Chi2Status chi2_propagator_new_homogeneous(double index,
                                                double loss,
                                                struct Chi2Propagator **out);

/*
 Numeric propagator for `n_regions` slabs `[x_start[k], x_end[k])` of
 index `index[k]` in a background of index `background_index`, validated
 on a uniform grid of `grid_points` over `[grid_min, grid_max]`.

 # Safety
 The three arrays must hold `n_regions` values each; `out` must be valid for writes.
 */
enum Chi2Status chi2_propagator_new_layered(double background_index,
                                            size_t n_regions,
                                            const double *x_start,
                                            const double *x_end,
                                            const double *index,
                                            double grid_min,
                                            double grid_max,
                                            size_t grid_points,
                                            struct Chi2Propagator **out);

/*
 # Safety
 `prop` must come from a `chi2_propagator_new_*` call and not be used afterwards.
 */
void chi2_propagator_free(struct Chi2Propagator *prop);

/*
 `G(x, y; omega)`.

 # Safety
 `prop` must be a live handle; `out` must be valid for writes.
 */
enum Chi2Status chi2_propagator_evaluate(const struct Chi2Propagator *prop,
                                         double omega,
                                         double x,
                                         double y,
                                         struct Chi2Complex *out);

/*
 Closed-form 1D biphoton amplitude at `(x, y)`.

 # Safety
 `setup` must be readable; `out` must be valid for writes.
 */
enum Chi2Status chi2_biphoton_1d_analytic(const struct Chi2Setup *setup,
                                          double x,
                                          double y,
                                          struct Chi2Complex *out);

/*
 Closed-form squeezing parameter; needs `delta_k = 0`.

 # Safety
 `setup` must be readable; `out` must be valid for writes.
 */
enum Chi2Status chi2_squeezing_closed_form(const struct Chi2Setup *setup,
                                           double x,
                                           double y,
                                           struct Chi2Squeezing *out);

/*
 Number of catalogued diagrams with `vertices` vertices and `propagators` lines.

 # Safety
 `out` must be valid for writes.
 */
enum Chi2Status chi2_diagram_count(size_t vertices, size_t propagators, size_t *out);

/*
 Symmetry factor of the `position`-th diagram of order `vertices`, in
 canonical order.

 # Safety
 `out` must be valid for writes.
 */
enum Chi2Status chi2_diagram_symmetry_factor(size_t vertices, size_t position, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHI2PATH_H */
