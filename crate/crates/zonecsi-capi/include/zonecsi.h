#ifndef ZONECSI_H
#define ZONECSI_H

/* Generated from the zonecsi-capi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible ABI call.
 */
typedef enum ZcStatus {
  ZC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ZC_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  ZC_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid argument or configuration value.
   */
  ZC_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Scene file failed to parse or validate.
   */
  ZC_STATUS_PARSE_ERROR = 4,
  /**
   * Numerically degenerate input (ill-conditioned channel, degenerate
   * partition).
   */
  ZC_STATUS_NUMERIC_ERROR = 5,
  /**
   * A pipeline stage is missing or stale upstream artifacts.
   */
  ZC_STATUS_MISSING_ARTIFACT = 6,
  /**
   * File system or serialization failure.
   */
  ZC_STATUS_IO_ERROR = 7,
  /**
   * Internal panic; the library state is still consistent.
   */
  ZC_STATUS_PANIC = 8,
} ZcStatus;

/**
 * Opaque loaded scene.
 */
typedef struct ZcScene ZcScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *zc_version(void);

/**
 * Message for the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next zonecsi call on the same thread.
 */
const char *zc_last_error(void);

/**
 * Loads and validates a scene file, shifting all coordinates by the given
 * origin. On success writes a heap-owned handle to `out`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer;
 * the returned handle must be released with [`zc_scene_free`].
 */
enum ZcStatus zc_scene_load(const char *path,
                            double origin_x,
                            double origin_y,
                            double origin_z,
                            struct ZcScene **out);

/**
 * Releases a scene handle. A null handle is a no-op.
 *
 * # Safety
 * `scene` must be null or a handle produced by this library that has not
 * been freed already.
 */
void zc_scene_free(struct ZcScene *scene);

/**
 * Number of planar surfaces in the scene.
 *
 * # Safety
 * `scene` must be a live handle from this library and `out` a valid
 * pointer.
 */
enum ZcStatus zc_scene_plane_count(const struct ZcScene *scene, size_t *out);

/**
 * Quantizes vertices to the resolution grid and merges coincident planes,
 * returning a new handle.
 *
 * # Safety
 * `scene` must be a live handle and `out` a valid pointer; the new handle
 * must be released with [`zc_scene_free`].
 */
enum ZcStatus zc_scene_quantize(const struct ZcScene *scene,
                                double resolution,
                                struct ZcScene **out);

/**
 * Number of feasible UT lattice points at the given spacing.
 *
 * # Safety
 * `scene` must be a live handle and `out` a valid pointer.
 */
enum ZcStatus zc_scene_feasible_count(const struct ZcScene *scene, double spacing, size_t *out);

/**
 * Free-space path loss in dB over `distance_m` at `frequency_hz` with the
 * given path-loss exponent.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZcStatus zc_fspl_db(double distance_m, double frequency_hz, double exponent, double *out);

/**
 * Reflection loss in dB for a material with the given reflection
 * coefficient (in [0, 1]) and roughness factor (in (0, 1]).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZcStatus zc_reflection_loss_db(double reflection_coefficient,
                                    double roughness_factor,
                                    double *out);

/**
 * Cohen's kappa from a 2x2 confusion matrix. Degenerate tables (one class
 * only) come back as NaN.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZcStatus zc_cohen_kappa(uint64_t true_positive,
                             uint64_t false_positive,
                             uint64_t true_negative,
                             uint64_t false_negative,
                             double *out);

/**
 * CSI overhead reduction in percent when only `rf_chains` of `antennas`
 * coefficients are sounded: 100 (1 - rf/antennas).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZcStatus zc_csi_overhead_reduction(size_t antennas, size_t rf_chains, double *out);

/**
 * Runs pipeline stages against a config file and artifact directory.
 * `stages` is a comma-separated list (null or empty means all stages);
 * `seed_override` replaces the config seed when non-null; `force` re-runs
 * up-to-date stages and accepts stale upstream artifacts.
 *
 * # Safety
 * `config_path` and `out_dir` must be valid NUL-terminated strings;
 * `stages` and `seed_override` must each be null or valid for the call.
 */
enum ZcStatus zc_run_pipeline(const char *config_path,
                              const char *out_dir,
                              const char *stages,
                              const uint64_t *seed_override,
                              bool force);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZONECSI_H */
