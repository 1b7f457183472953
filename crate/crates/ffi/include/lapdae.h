#ifndef LAPDAE_H
#define LAPDAE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Values 2 to 7 match the command-line exit codes.
typedef enum LapdaeStatus {
  LAPDAE_STATUS_OK = 0,
  LAPDAE_STATUS_NULL_POINTER = 1,
  LAPDAE_STATUS_INVALID_ARGUMENT = 2,
  LAPDAE_STATUS_CONFIG = 3,
  LAPDAE_STATUS_DATA = 4,
  LAPDAE_STATUS_IO = 5,
  LAPDAE_STATUS_NUMERIC = 6,
  LAPDAE_STATUS_FORMAT = 7,
  LAPDAE_STATUS_BUFFER_TOO_SMALL = 8,
  LAPDAE_STATUS_PANIC = 9,
} LapdaeStatus;

// A loaded checkpoint.
typedef struct LapdaeModel LapdaeModel;

// A Laplacian pyramid of one image.
typedef struct LapdaePyramid LapdaePyramid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *lapdae_last_error(void);

// Static name of a status code.
const char *lapdae_status_name(enum LapdaeStatus status);

// Load a checkpoint file into a new model handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum LapdaeStatus lapdae_model_load(const char *path, struct LapdaeModel **out);

// # Safety
// `model` must come from [`lapdae_model_load`] and not be used afterwards.
void lapdae_model_free(struct LapdaeModel *model);

// Checkpoint content hash, owned by the model handle.
//
// # Safety
// `model` must be a live handle.
const char *lapdae_model_fingerprint(const struct LapdaeModel *model);

// Number of input channels the model expects.
//
// # Safety
// `model` must be a live handle.
size_t lapdae_model_channels(const struct LapdaeModel *model);

// Per-sample embedding length at `layer` for `height × width` inputs.
// A zero `budget` keeps the full feature map.
//
// # Safety
// `model` must be a live handle, `layer` a NUL-terminated string, `out` valid.
enum LapdaeStatus lapdae_model_embedding_dim(const struct LapdaeModel *model,
                                             const char *layer,
                                             size_t height,
                                             size_t width,
                                             size_t budget,
                                             size_t *out);

// Embed `n` images, writing `n × dim` floats row-major into `out`.
//
// # Safety
// `images` must hold `n·c·h·w` floats and `out` `out_len` floats.
enum LapdaeStatus lapdae_model_embed(const struct LapdaeModel *model,
                                     const float *images,
                                     size_t n,
                                     size_t c,
                                     size_t h,
                                     size_t w,
                                     const char *layer,
                                     size_t budget,
                                     float *out,
                                     size_t out_len);

// Run the full autoencoder; `out` receives `n·c·h·w` floats.
//
// # Safety
// `images` must hold `n·c·h·w` floats and `out` `out_len` floats.
enum LapdaeStatus lapdae_model_reconstruct(const struct LapdaeModel *model,
                                           const float *images,
                                           size_t n,
                                           size_t c,
                                           size_t h,
                                           size_t w,
                                           float *out,
                                           size_t out_len);

// Deepest pyramid a `height × width` image supports.
size_t lapdae_max_levels(size_t height, size_t width);

// Decompose one `c × h × w` image into `levels` Laplacian bands.
//
// # Safety
// `image` must hold `c·h·w` floats and `out` be a valid pointer.
enum LapdaeStatus lapdae_pyramid_build(const float *image,
                                       size_t c,
                                       size_t h,
                                       size_t w,
                                       size_t levels,
                                       struct LapdaePyramid **out);

// # Safety
// `p` must come from [`lapdae_pyramid_build`] and not be used afterwards.
void lapdae_pyramid_free(struct LapdaePyramid *p);

// # Safety
// `p` must be a live handle.
size_t lapdae_pyramid_num_levels(const struct LapdaePyramid *p);

// Height and width of band `level`.
//
// # Safety
// `p` must be a live handle; `height` and `width` valid pointers.
enum LapdaeStatus lapdae_pyramid_level_shape(const struct LapdaePyramid *p,
                                             size_t level,
                                             size_t *height,
                                             size_t *width);

// Copy band `level` into `out`.
//
// # Safety
// `p` must be a live handle and `out` hold `out_len` floats.
enum LapdaeStatus lapdae_pyramid_level(const struct LapdaePyramid *p,
                                       size_t level,
                                       float *out,
                                       size_t out_len);

// Overwrite band `level` with `len` floats from `data`.
//
// # Safety
// `p` must be a live handle and `data` hold `len` floats.
enum LapdaeStatus lapdae_pyramid_set_level(struct LapdaePyramid *p,
                                           size_t level,
                                           const float *data,
                                           size_t len);

// Collapse the pyramid back to a `c·h·w` image.
//
// # Safety
// `p` must be a live handle and `out` hold `out_len` floats.
enum LapdaeStatus lapdae_pyramid_reconstruct(const struct LapdaePyramid *p,
                                             float *out,
                                             size_t out_len);

// Add Gaussian noise of standard deviation `sigma` (0-255 scale) to one
// Laplacian band and collapse. A negative `level` draws the band from
// `seed`; the band used is written to `realized_level` when non-null.
//
// # Safety
// `image` must hold `c·h·w` floats and `out` `out_len` floats.
enum LapdaeStatus lapdae_lap_corrupt(const float *image,
                                     size_t c,
                                     size_t h,
                                     size_t w,
                                     size_t levels,
                                     float sigma,
                                     int32_t level,
                                     uint64_t seed,
                                     float *out,
                                     size_t out_len,
                                     size_t *realized_level);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAPDAE_H */
