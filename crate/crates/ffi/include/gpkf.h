#ifndef GPKF_H
#define GPKF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum GpkfStatus {
  GPKF_STATUS_OK = 0,
  GPKF_STATUS_NULL_POINTER = 1,
  GPKF_STATUS_INVALID_ARGUMENT = 2,
  GPKF_STATUS_CONFIG = 3,
  GPKF_STATUS_NUMERICAL = 4,
  GPKF_STATUS_BUFFER_TOO_SMALL = 5,
  GPKF_STATUS_PANIC = 6,
} GpkfStatus;

// Opaque filter handle.
typedef struct GpkfFilter GpkfFilter;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a filter from a named preset such as `"advection-ifac"`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum GpkfStatus gpkf_filter_from_preset(const char *name, struct GpkfFilter **out);

// Creates a filter from config text in `key = value` form. `preset_name`
// may be null.
//
// # Safety
// `text` and a non-null `preset_name` must be NUL-terminated strings and
// `out` a valid pointer.
enum GpkfStatus gpkf_filter_from_config(const char *text,
                                        const char *preset_name,
                                        struct GpkfFilter **out);

// Releases a filter. Null is ignored.
//
// # Safety
// `filter` must come from a constructor of this library and not be used
// afterwards.
void gpkf_filter_free(struct GpkfFilter *filter);

// Number of test grid points, or 0 for a null handle.
//
// # Safety
// `filter` must be null or a live handle.
size_t gpkf_filter_grid_len(const struct GpkfFilter *filter);

// Index of the last completed step (0 after construction).
//
// # Safety
// `filter` must be null or a live handle.
size_t gpkf_filter_step_index(const struct GpkfFilter *filter);

// Number of boundary values each step expects.
//
// # Safety
// `filter` must be null or a live handle.
size_t gpkf_filter_boundary_len(const struct GpkfFilter *filter);

// Copies the test grid into `out[0..grid_len]`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum GpkfStatus gpkf_filter_grid(const struct GpkfFilter *filter, double *out, size_t len);

// Copies the posterior mean into `out[0..grid_len]`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum GpkfStatus gpkf_filter_mean(const struct GpkfFilter *filter, double *out, size_t len);

// Copies the posterior marginal variances into `out[0..grid_len]`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum GpkfStatus gpkf_filter_variance(const struct GpkfFilter *filter, double *out, size_t len);

// Writes `(sigma2_se, l, sigma2_q, sigma2_r)` into `out[0..4]`.
//
// # Safety
// `out` must point to 4 writable doubles.
enum GpkfStatus gpkf_filter_hyperparams(const struct GpkfFilter *filter, double *out);

// Advances one step with `n` measurements and `n_boundary` boundary
// values. The handle is unchanged on failure.
//
// # Safety
// The arrays must hold `n`, `n` and `n_boundary` doubles respectively;
// they may be null when their length is 0.
enum GpkfStatus gpkf_filter_step(struct GpkfFilter *filter,
                                 const double *locations,
                                 const double *values,
                                 size_t n,
                                 const double *boundary_values,
                                 size_t n_boundary);

// Advances one step using the configured scenario's simulated sensors.
//
// # Safety
// `filter` must be a live handle.
enum GpkfStatus gpkf_filter_step_simulated(struct GpkfFilter *filter);

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *gpkf_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GPKF_H */
