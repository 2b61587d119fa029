/* C interface to the geoflow optical-flow loss toolkit. */

#ifndef GEOFLOW_H
#define GEOFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GfStatus {
  GF_STATUS_OK = 0,
  GF_STATUS_NULL_POINTER = 1,
  GF_STATUS_INVALID_ARGUMENT = 2,
  GF_STATUS_DIMENSION_MISMATCH = 3,
  GF_STATUS_IO = 4,
  GF_STATUS_PARSE = 5,
  GF_STATUS_NON_FINITE = 6,
  GF_STATUS_PANIC = 7,
} GfStatus;

/**
 * Opaque flow field.
 */
typedef struct GfFlow GfFlow;

/**
 * Opaque color image.
 */
typedef struct GfImage GfImage;

/**
 * Opaque occlusion mask.
 */
typedef struct GfMask GfMask;

typedef struct GfLossConfig {
  double census_weight;
  double smoothness_weight;
  double non_intersection_weight;
  double non_blocking_weight;
  /**
   * 1 or 2.
   */
  uint32_t smoothness_order;
  double smoothness_mu;
  double robust_epsilon;
  double robust_q;
  double occlusion_alpha;
  double occlusion_beta;
} GfLossConfig;

typedef struct GfOptimizeConfig {
  double learning_rate;
  double beta1;
  double beta2;
  double adam_epsilon;
  size_t iterations_per_level;
  size_t levels;
  size_t occlusion_refresh;
} GfOptimizeConfig;

typedef struct GfLossTerms {
  double census;
  double smoothness;
  double non_intersection;
  double non_blocking;
  double total;
} GfLossTerms;

typedef struct GfEvalResult {
  double epe_mean;
  /**
   * NaN when no non-occlusion mask was given or it selects no pixel.
   */
  double epe_mean_noc;
  double error_rate;
  size_t valid_count;
} GfEvalResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `gf_*` call on the same thread.
 */
const char *gf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gf_version(void);

struct GfLossConfig gf_loss_config_default(void);

struct GfOptimizeConfig gf_optimize_config_default(void);

/**
 * Creates an image from `height * width * 3` RGB doubles in `[0, 1]`.
 *
 * # Safety
 * `rgb` must point to `height * width * 3` readable doubles and `out` to a
 * writable handle slot.
 */
enum GfStatus gf_image_new(size_t height, size_t width, const double *rgb, struct GfImage **out);

/**
 * Reads an 8-bit PNG or PPM/PGM file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum GfStatus gf_image_read(const char *path, struct GfImage **out);

/**
 * # Safety
 * `image` must be NULL or a handle from this library that is not used
 * afterwards.
 */
void gf_image_free(struct GfImage *image);

/**
 * # Safety
 * `image` must be a live handle; `height` and `width` writable.
 */
enum GfStatus gf_image_dims(const struct GfImage *image, size_t *height, size_t *width);

/**
 * Creates a flow field from `height * width * 2` doubles.
 *
 * # Safety
 * `uv` must point to `height * width * 2` readable doubles and `out` to a
 * writable handle slot.
 */
enum GfStatus gf_flow_new(size_t height, size_t width, const double *uv, struct GfFlow **out);

/**
 * # Safety
 * `out` must be a writable handle slot.
 */
enum GfStatus gf_flow_zeros(size_t height, size_t width, struct GfFlow **out);

/**
 * Reads a Middlebury `.flo` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum GfStatus gf_flow_read(const char *path, struct GfFlow **out);

/**
 * Writes a Middlebury `.flo` file.
 *
 * # Safety
 * `flow` must be a live handle and `path` a NUL-terminated string.
 */
enum GfStatus gf_flow_write(const struct GfFlow *flow, const char *path);

/**
 * # Safety
 * `flow` must be NULL or a handle from this library that is not used
 * afterwards.
 */
void gf_flow_free(struct GfFlow *flow);

/**
 * # Safety
 * `flow` must be a live handle; `height` and `width` writable.
 */
enum GfStatus gf_flow_dims(const struct GfFlow *flow, size_t *height, size_t *width);

/**
 * Copies the flow into `uv`, which holds `len` doubles; `len` must equal
 * `height * width * 2`.
 *
 * # Safety
 * `flow` must be a live handle and `uv` point to `len` writable doubles.
 */
enum GfStatus gf_flow_copy(const struct GfFlow *flow, double *uv, size_t len);

/**
 * Forward-backward consistency occlusion mask of `forward` given
 * `backward`, using `alpha` (relative) and `beta` (px²) tolerances.
 *
 * # Safety
 * Flow handles must be live; `out` a writable handle slot.
 */
enum GfStatus gf_occlusion_mask(const struct GfFlow *forward,
                                const struct GfFlow *backward,
                                double alpha,
                                double beta,
                                struct GfMask **out);

/**
 * Mask from `height * width` bytes; nonzero marks an occluded pixel.
 *
 * # Safety
 * `occluded` must point to `height * width` readable bytes and `out` to a
 * writable handle slot.
 */
enum GfStatus gf_mask_new(size_t height,
                          size_t width,
                          const uint8_t *occluded,
                          struct GfMask **out);

/**
 * # Safety
 * `mask` must be NULL or a handle from this library that is not used
 * afterwards.
 */
void gf_mask_free(struct GfMask *mask);

/**
 * # Safety
 * `mask` must be a live handle and `count` writable.
 */
enum GfStatus gf_mask_occluded_count(const struct GfMask *mask, size_t *count);

/**
 * Non-intersection loss of `flow` guided by `image`. `mask` may be NULL
 * (nothing occluded) and `grad` may be NULL when the gradient is not
 * wanted; otherwise it receives a new flow handle.
 *
 * # Safety
 * Handles must be live; `value` writable; `grad` NULL or a writable slot.
 */
enum GfStatus gf_non_intersection_loss(const struct GfImage *image,
                                       const struct GfFlow *flow,
                                       const struct GfMask *mask,
                                       double *value,
                                       struct GfFlow **grad);

/**
 * Non-blocking loss of `flow`; `mask` and `grad` as for
 * [`gf_non_intersection_loss`].
 *
 * # Safety
 * Handles must be live; `value` writable; `grad` NULL or a writable slot.
 */
enum GfStatus gf_non_blocking_loss(const struct GfFlow *flow,
                                   const struct GfMask *mask,
                                   double *value,
                                   struct GfFlow **grad);

/**
 * Number of crossing neighbor pairs among non-occluded pixels; `mask` may
 * be NULL.
 *
 * # Safety
 * Handles must be live and `count` writable.
 */
enum GfStatus gf_crossing_count(const struct GfFlow *flow,
                                const struct GfMask *mask,
                                size_t *count);

/**
 * Weighted sum of all loss terms for a forward/backward flow pair, with
 * occlusion estimated from the flows. `config` may be NULL for defaults.
 *
 * # Safety
 * Handles must be live; `config` NULL or readable; `terms` writable.
 */
enum GfStatus gf_total_loss(const struct GfImage *frame_t,
                            const struct GfImage *frame_t1,
                            const struct GfFlow *forward,
                            const struct GfFlow *backward,
                            const struct GfLossConfig *config,
                            struct GfLossTerms *terms);

/**
 * Coarse-to-fine flow estimation between two frames. Either config may be
 * NULL for defaults. On success both output slots receive new handles.
 *
 * # Safety
 * Handles must be live; configs NULL or readable; output slots writable.
 */
enum GfStatus gf_optimize(const struct GfImage *frame_t,
                          const struct GfImage *frame_t1,
                          const struct GfLossConfig *loss_config,
                          const struct GfOptimizeConfig *optimize_config,
                          struct GfFlow **forward_out,
                          struct GfFlow **backward_out);

/**
 * Endpoint error of `flow` against `gt`. `valid` (nonzero = ground truth
 * present) and `noc` (nonzero = non-occluded) are optional
 * `height * width` byte masks.
 *
 * # Safety
 * Handles must be live; masks NULL or `height * width` readable bytes;
 * `result` writable.
 */
enum GfStatus gf_epe(const struct GfFlow *flow,
                     const struct GfFlow *gt,
                     const uint8_t *valid,
                     const uint8_t *noc,
                     struct GfEvalResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOFLOW_H */
