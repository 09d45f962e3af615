#ifndef CTRW_H
#define CTRW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtrwStatus {
  CTRW_STATUS_OK = 0,
  /**
   * Null pointer, bad length, or malformed text.
   */
  CTRW_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Parameters outside the model's domain.
   */
  CTRW_STATUS_DOMAIN = 2,
  /**
   * Step budget spent, instability, or quadrature failure.
   */
  CTRW_STATUS_NUMERICAL = 3,
  CTRW_STATUS_UNSUPPORTED = 4,
  /**
   * Caller buffer shorter than the data.
   */
  CTRW_STATUS_BUFFER_TOO_SMALL = 5,
  CTRW_STATUS_PANIC = 6,
} CtrwStatus;

/**
 * Opaque grid solution handle.
 */
typedef struct CtrwField CtrwField;

/**
 * Opaque model handle.
 */
typedef struct CtrwModel CtrwModel;

/**
 * Opaque Monte Carlo sample handle.
 */
typedef struct CtrwSample CtrwSample;

/**
 * Uniform grid: space [-half_width, half_width] with step dx, time [s, t_end] with step dt.
 */
typedef struct CtrwGrid {
  double half_width;
  double dx;
  double dt;
  double s;
  double t_end;
} CtrwGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ctrw_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to fit)
 * and returns the full message length excluding the NUL. Passing `len = 0` only queries the length.
 *
 * # Safety
 * `buf` must be valid for `len` bytes when `len > 0`.
 */
size_t ctrw_last_error_message(char *buf, size_t len);

/**
 * Parses a model from JSON, e.g. `{"kind":"subdiffusion","beta":0.5}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CtrwStatus ctrw_model_from_json(const char *json, struct CtrwModel **out);

/**
 * Subdiffusion of order `beta` in the drift `amplitude`·sin(x)·cos(t) (0 for none).
 *
 * # Safety
 * `out` must be writable.
 */
enum CtrwStatus ctrw_model_subdiffusion(double beta, double amplitude, struct CtrwModel **out);

/**
 * Variable order β(x) = mid + amplitude·tanh(x / scale).
 *
 * # Safety
 * `out` must be writable.
 */
enum CtrwStatus ctrw_model_variable_order(double mid,
                                          double amplitude,
                                          double scale,
                                          struct CtrwModel **out);

/**
 * Unbiased unit-speed Lévy walk with isotropic directions.
 *
 * # Safety
 * `out` must be writable.
 */
enum CtrwStatus ctrw_model_levy_walk(double beta, size_t dimension, struct CtrwModel **out);

/**
 * Spatial dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ctrw_model_dimension(const struct CtrwModel *model);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void ctrw_model_free(struct CtrwModel *model);

/**
 * Samples the lagging (X) and leading (Y) limit processes at `times` on `n_paths` paths.
 *
 * # Safety
 * `x0` must hold `dim` values, `times` must hold `n_times` values, `out` must be writable.
 */
enum CtrwStatus ctrw_sample_marginals(const struct CtrwModel *model,
                                      const double *x0,
                                      size_t dim,
                                      double t0,
                                      const double *times,
                                      size_t n_times,
                                      size_t n_paths,
                                      double dr,
                                      uint64_t seed,
                                      struct CtrwSample **out);

/**
 * Number of values in each of the X and Y arrays: paths × times × dimension.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
size_t ctrw_sample_len(const struct CtrwSample *sample);

/**
 * Paths that spent their step budget and were dropped.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
size_t ctrw_sample_failures(const struct CtrwSample *sample);

/**
 * Copies X values, laid out [path][time][coordinate].
 *
 * # Safety
 * `buf` must be valid for `len` doubles.
 */
enum CtrwStatus ctrw_sample_copy_x(const struct CtrwSample *sample, double *buf, size_t len);

/**
 * Copies Y values, laid out like X.
 *
 * # Safety
 * `buf` must be valid for `len` doubles.
 */
enum CtrwStatus ctrw_sample_copy_y(const struct CtrwSample *sample, double *buf, size_t len);

/**
 * # Safety
 * `sample` must be null or a handle not yet freed.
 */
void ctrw_sample_free(struct CtrwSample *sample);

/**
 * Forward density from a unit mass at (x0, grid.s).
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CtrwStatus ctrw_solve_forward(const struct CtrwModel *model,
                                   double x0,
                                   struct CtrwGrid grid,
                                   struct CtrwField **out);

/**
 * Backward expectation of a Gaussian bump payoff at time `t`, default mollifier.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CtrwStatus ctrw_solve_backward_bump(const struct CtrwModel *model,
                                         double center,
                                         double width,
                                         double t,
                                         struct CtrwGrid grid,
                                         struct CtrwField **out);

/**
 * Number of time rows and space nodes.
 *
 * # Safety
 * `field` must be a live handle; `nt` and `nx` writable.
 */
enum CtrwStatus ctrw_field_shape(const struct CtrwField *field, size_t *nt, size_t *nx);

/**
 * Copies values, time-major: `buf[m * nx + i]`.
 *
 * # Safety
 * `buf` must be valid for `len` doubles.
 */
enum CtrwStatus ctrw_field_copy_values(const struct CtrwField *field, double *buf, size_t len);

/**
 * # Safety
 * `buf` must be valid for `len` doubles.
 */
enum CtrwStatus ctrw_field_copy_x(const struct CtrwField *field, double *buf, size_t len);

/**
 * # Safety
 * `buf` must be valid for `len` doubles.
 */
enum CtrwStatus ctrw_field_copy_t(const struct CtrwField *field, double *buf, size_t len);

/**
 * Linear interpolation in x at the time row nearest t.
 *
 * # Safety
 * `field` must be a live handle and `value` writable.
 */
enum CtrwStatus ctrw_field_sample(const struct CtrwField *field, double x, double t, double *value);

/**
 * # Safety
 * `field` must be null or a handle not yet freed.
 */
void ctrw_field_free(struct CtrwField *field);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTRW_H */
