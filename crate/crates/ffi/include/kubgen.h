#ifndef KUBGEN_H
#define KUBGEN_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum KubgenStatus {
  KUBGEN_STATUS_OK = 0,
  KUBGEN_STATUS_NULL_POINTER = 1,
  KUBGEN_STATUS_INVALID_ARGUMENT = 2,
  KUBGEN_STATUS_UNKNOWN_WORKER = 3,
  KUBGEN_STATUS_INVALID_JOB_SPEC = 4,
  KUBGEN_STATUS_IO = 5,
  KUBGEN_STATUS_FORMAT = 6,
  KUBGEN_STATUS_METRIC = 7,
  /**
   * The job ran but at least one scene failed; see the manifest.
   */
  KUBGEN_STATUS_SCENE_FAILED = 8,
  KUBGEN_STATUS_PANIC = 9,
} KubgenStatus;

typedef struct KubgenJob KubgenJob;

typedef struct KubgenRaster KubgenRaster;

typedef struct KubgenRng KubgenRng;

/**
 * Pinhole camera; `quaternion` is `[w, x, y, z]`, looking along local −Z.
 */
typedef struct KubgenCamera {
  double position[3];
  double quaternion[4];
  double focal_length;
  double sensor_width;
  double near_clip;
  double far_clip;
} KubgenCamera;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next kubgen call on the same thread.
 */
const char *kubgen_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` is null or was returned by this library and not yet freed.
 */
void kubgen_string_free(char *s);

/**
 * Seed of scene `scene_index` under `master_seed`.
 */
uint64_t kubgen_derive_scene_seed(uint64_t master_seed, uint64_t scene_index);

struct KubgenRng *kubgen_rng_new(uint64_t seed);

/**
 * # Safety
 * `rng` is a live handle from [`kubgen_rng_new`].
 */
uint64_t kubgen_rng_next_u64(struct KubgenRng *rng);

/**
 * Uniform in `[0, 1)` with 53 bits of precision.
 *
 * # Safety
 * `rng` is a live handle from [`kubgen_rng_new`].
 */
double kubgen_rng_next_f64(struct KubgenRng *rng);

/**
 * # Safety
 * `rng` is null or a handle from [`kubgen_rng_new`] not yet freed.
 */
void kubgen_rng_free(struct KubgenRng *rng);

/**
 * Primary ray through image point `(x, y)`; integers are pixel centres.
 *
 * # Safety
 * `camera` is readable; `origin` and `direction` point to 3 writable doubles.
 */
enum KubgenStatus kubgen_camera_ray(const struct KubgenCamera *camera,
                                    uint32_t width,
                                    uint32_t height,
                                    double x,
                                    double y,
                                    double *origin,
                                    double *direction);

/**
 * New job for `worker` writing under `out`, with one scene, seed 0, a
 * single shard and 128x128 output.
 *
 * # Safety
 * `worker` and `out` are NUL-terminated; `job` points to a writable pointer.
 */
enum KubgenStatus kubgen_job_new(const char *worker, const char *out, struct KubgenJob **job);

/**
 * # Safety
 * `job` is a live handle.
 */
enum KubgenStatus kubgen_job_set_scenes(struct KubgenJob *job,
                                        uint64_t num_scenes,
                                        uint64_t master_seed);

/**
 * # Safety
 * `job` is a live handle.
 */
enum KubgenStatus kubgen_job_set_shard(struct KubgenJob *job, uint32_t job_id, uint32_t num_jobs);

/**
 * # Safety
 * `job` is a live handle.
 */
enum KubgenStatus kubgen_job_set_resolution(struct KubgenJob *job, uint32_t width, uint32_t height);

/**
 * Inclusive frame range.
 *
 * # Safety
 * `job` is a live handle.
 */
enum KubgenStatus kubgen_job_set_frames(struct KubgenJob *job,
                                        int32_t frame_start,
                                        int32_t frame_end);

/**
 * # Safety
 * `job` is a live handle.
 */
enum KubgenStatus kubgen_job_set_parallelism(struct KubgenJob *job, uintptr_t jobs_parallel);

/**
 * Sets a worker option, as `--config key=value` would.
 *
 * # Safety
 * `job` is a live handle; `key` and `value` are NUL-terminated.
 */
enum KubgenStatus kubgen_job_set_config(struct KubgenJob *job, const char *key, const char *value);

/**
 * Runs the job. `failed_scenes` (nullable) receives the number of
 * failed scenes; any failure gives `SCENE_FAILED`.
 *
 * # Safety
 * `job` is a live handle; `failed_scenes` is null or writable.
 */
enum KubgenStatus kubgen_job_run(const struct KubgenJob *job, uint64_t *failed_scenes);

/**
 * # Safety
 * `job` is null or a handle not yet freed.
 */
void kubgen_job_free(struct KubgenJob *job);

/**
 * # Safety
 * `path` is NUL-terminated; `raster` points to a writable pointer.
 */
enum KubgenStatus kubgen_raster_read(const char *path, struct KubgenRaster **raster);

/**
 * Copies `width * height * channels` values into a new f32 raster.
 *
 * # Safety
 * `data` points to that many floats; `raster` points to a writable pointer.
 */
enum KubgenStatus kubgen_raster_new_f32(uint32_t width,
                                        uint32_t height,
                                        uint32_t channels,
                                        const float *data,
                                        struct KubgenRaster **raster);

/**
 * # Safety
 * `raster` is a live handle; `path` is NUL-terminated.
 */
enum KubgenStatus kubgen_raster_write(const struct KubgenRaster *raster, const char *path);

/**
 * Writes width, height, channels and the dtype code (0 f32, 1 u32,
 * 2 u16, 3 u8). Any output pointer may be null.
 *
 * # Safety
 * `raster` is a live handle; non-null outputs are writable.
 */
enum KubgenStatus kubgen_raster_shape(const struct KubgenRaster *raster,
                                      uint32_t *width,
                                      uint32_t *height,
                                      uint32_t *channels,
                                      uint8_t *dtype);

/**
 * Borrowed pointer to the row-major, channel-interleaved payload in
 * native element type. Valid until the raster is freed.
 *
 * # Safety
 * `raster` is a live handle.
 */
const uint8_t *kubgen_raster_data(const struct KubgenRaster *raster);

/**
 * # Safety
 * `raster` is null or a handle not yet freed.
 */
void kubgen_raster_free(struct KubgenRaster *raster);

/**
 * Adjusted Rand index over pixels whose ground-truth label is not
 * `background`.
 *
 * # Safety
 * `gt` and `pred` point to `len` labels; `out` is writable.
 */
enum KubgenStatus kubgen_fg_ari(const uint32_t *gt,
                                const uint32_t *pred,
                                uintptr_t len,
                                uint32_t background,
                                double *out);

/**
 * Average end-point error over `num_pixels` interleaved `(dx, dy)` pairs.
 * A null `mask` selects every pixel; otherwise nonzero entries are kept.
 *
 * # Safety
 * `pred` and `gt` point to `2 * num_pixels` floats, `mask` is null or
 * points to `num_pixels` bytes, `out` is writable.
 */
enum KubgenStatus kubgen_aepe(const float *pred,
                              const float *gt,
                              const uint8_t *mask,
                              uintptr_t num_pixels,
                              double *out);

/**
 * PSNR in dB; identical inputs give positive infinity.
 *
 * # Safety
 * `a` and `b` point to `len` doubles; `out` is writable.
 */
enum KubgenStatus kubgen_psnr(const double *a,
                              const double *b,
                              uintptr_t len,
                              double max_val,
                              double *out);

/**
 * Same report as `kubgen eval`, as a JSON string released with
 * [`kubgen_string_free`]. `task` is flow, segmentation, tracks or psnr.
 *
 * # Safety
 * String arguments are NUL-terminated; `report` points to a writable pointer.
 */
enum KubgenStatus kubgen_eval(const char *task, const char *pred, const char *gt, char **report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KUBGEN_H */
