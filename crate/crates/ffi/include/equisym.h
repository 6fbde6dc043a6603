#ifndef EQUISYM_H
#define EQUISYM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of the C interface.
typedef enum EquisymStatus {
  EQUISYM_STATUS_OK = 0,
  EQUISYM_STATUS_NULL_POINTER = 1,
  EQUISYM_STATUS_INVALID_ARGUMENT = 2,
  EQUISYM_STATUS_DOMAIN = 3,
  EQUISYM_STATUS_IO = 4,
  EQUISYM_STATUS_FORMAT = 5,
  EQUISYM_STATUS_ILL_CONDITIONED = 6,
  EQUISYM_STATUS_NON_FINITE = 7,
  EQUISYM_STATUS_DIVERGED = 8,
  EQUISYM_STATUS_PANIC = 9,
} EquisymStatus;

// Per-pixel combination of stencil responses.
typedef enum EquisymAggregation {
  EQUISYM_AGGREGATION_MAGNITUDE = 0,
  EQUISYM_AGGREGATION_DIRECTIONAL = 1,
} EquisymAggregation;

typedef enum EquisymScenario {
  EQUISYM_SCENARIO_SAMPLE_STRICT = 0,
  EQUISYM_SCENARIO_DATASET_STRICT = 1,
  EQUISYM_SCENARIO_DATASET_ADAPTIVE = 2,
} EquisymScenario;

// Opaque grayscale image.
typedef struct EquisymImage EquisymImage;

// Opaque regularizer with its steerable stencils.
typedef struct EquisymRegularizer EquisymRegularizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *equisym_version(void);

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *equisym_last_error(void);

// Copies `side × side` row-major values into a new image with mesh size `mesh`.
//
// # Safety
// `values` must point to `len` readable doubles and `out` must be writable.
enum EquisymStatus equisym_image_new(size_t side,
                                     double mesh,
                                     const double *values,
                                     size_t len,
                                     struct EquisymImage **out);

// Loads a PGM or PNG file onto the unit-extent grid.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum EquisymStatus equisym_image_load(const char *path, struct EquisymImage **out);

// Writes an 8-bit binary PGM.
//
// # Safety
// `image` must come from this library and `path` be NUL-terminated.
enum EquisymStatus equisym_image_save(const struct EquisymImage *image, const char *path);

// Side length of the image, or 0 for a null handle.
//
// # Safety
// `image` must be null or come from this library.
size_t equisym_image_side(const struct EquisymImage *image);

// Copies the row-major values into `buf`, which must hold `side²` doubles.
//
// # Safety
// `image` must come from this library and `buf` point to `len` writable doubles.
enum EquisymStatus equisym_image_values(const struct EquisymImage *image, double *buf, size_t len);

// Releases an image; null is ignored.
//
// # Safety
// `image` must be null or come from this library and not be used afterwards.
void equisym_image_free(struct EquisymImage *image);

// Builds one of `tv`, `tv2`, `sobel`, `laplacian`, `prewitt`.
//
// # Safety
// `name` must be NUL-terminated and `out` writable.
enum EquisymStatus equisym_regularizer_new(const char *name,
                                           enum EquisymAggregation aggregation,
                                           struct EquisymRegularizer **out);

// Releases a regularizer; null is ignored.
//
// # Safety
// `reg` must be null or come from this library and not be used afterwards.
void equisym_regularizer_free(struct EquisymRegularizer *reg);

// Mean interior response with the stencils steered by the row-major 2×2 `matrix`.
//
// # Safety
// Handles must come from this library, `matrix` must hold 4 doubles and
// `out` be writable.
enum EquisymStatus equisym_feature_response(const struct EquisymImage *image,
                                            const struct EquisymRegularizer *reg,
                                            const double *matrix,
                                            double *out);

// Symmetry error `ε_G` of `count` images. For the adaptive scenario,
// `weights` holds `count` triples `[α, s_x, s_y]`; it is ignored otherwise.
//
// # Safety
// `images` must hold `count` valid handles, `weights` (when used) `3·count`
// doubles, and `out` be writable.
enum EquisymStatus equisym_epsilon(const struct EquisymImage *const *images,
                                   size_t count,
                                   const struct EquisymRegularizer *reg,
                                   enum EquisymScenario scenario,
                                   size_t angles,
                                   const double *weights,
                                   double *out);

// Fits `w = [α, s_x, s_y]` for one image with default descent settings
// apart from `angles`, `max_iters` and `multi_start`.
//
// # Safety
// Handles must come from this library, `w_out` must hold 3 doubles and
// `objective_out` be writable.
enum EquisymStatus equisym_fit_w(const struct EquisymImage *image,
                                 const struct EquisymRegularizer *reg,
                                 size_t angles,
                                 size_t max_iters,
                                 bool multi_start,
                                 double *w_out,
                                 double *objective_out);

// Runs a bench suite (or `all`) and returns its results as a JSON array in
// a string to be released with [`equisym_string_free`]. `passed` receives
// whether every bench passed.
//
// # Safety
// `name` must be NUL-terminated; `json_out` and `passed` must be writable.
enum EquisymStatus equisym_run_suite(const char *name, char **json_out, bool *passed);

// Releases a string returned by this library; null is ignored.
//
// # Safety
// `s` must be null or come from this library and not be used afterwards.
void equisym_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQUISYM_H */
