#ifndef MAGRAY_H
#define MAGRAY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MagrayStatus {
  MAGRAY_STATUS_OK = 0,
  MAGRAY_STATUS_NULL_POINTER = 1,
  MAGRAY_STATUS_INVALID_ARGUMENT = 2,
  MAGRAY_STATUS_PARSE = 3,
  MAGRAY_STATUS_TRAPPED = 4,
  MAGRAY_STATUS_SOLVER_STALLED = 5,
  MAGRAY_STATUS_IO = 6,
  MAGRAY_STATUS_BUFFER_TOO_SMALL = 7,
  MAGRAY_STATUS_PANIC = 8,
} MagrayStatus;

/**
 * Opaque scene handle.
 */
typedef struct MagrayScene MagrayScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a scene from JSON text.
 *
 * # Safety
 * `json` must be a valid C string and `out` a valid pointer.
 */
enum MagrayStatus magray_scene_from_json(const char *json, struct MagrayScene **out);

/**
 * Loads a scene file.
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum MagrayStatus magray_scene_load(const char *path, struct MagrayScene **out);

/**
 * Releases a scene; null is ignored.
 *
 * # Safety
 * `scene` must come from this library and not be used afterwards.
 */
void magray_scene_free(struct MagrayScene *scene);

/**
 * Rank n of the connection; 0 for a null handle.
 *
 * # Safety
 * `scene` must be null or a live handle.
 */
size_t magray_scene_rank(const struct MagrayScene *scene);

/**
 * Sizes of the ∂₊ grid: ns boundary points by nphi directions.
 *
 * # Safety
 * `scene` must be a live handle; outputs may be null.
 */
enum MagrayStatus magray_boundary_grid(const struct MagrayScene *scene, size_t *ns, size_t *nphi);

/**
 * Scattering relation: the curve entering at (cos s, sin s) at angle φ from
 * the inward normal leaves at s_exit with angle φ_exit from the outward
 * normal after time tau.
 *
 * # Safety
 * `scene` must be a live handle; outputs may be null.
 */
enum MagrayStatus magray_scatter(const struct MagrayScene *scene,
                                 double s,
                                 double phi,
                                 double *s_exit,
                                 double *phi_exit,
                                 double *tau);

/**
 * Ray transform of a field file (JSON text) on the ∂₊ grid. Writes
 * ns·nphi·n complex values as interleaved (re, im) pairs, layout [s][φ][comp],
 * so `out` needs 2·ns·nphi·n doubles; `len` is its length in doubles.
 *
 * # Safety
 * `scene` must be a live handle, `field_json` a valid C string and `out`
 * valid for `len` writes.
 */
enum MagrayStatus magray_transform(const struct MagrayScene *scene,
                                   const char *field_json,
                                   double *out,
                                   size_t len);

/**
 * Runs the comma-separated checks (all when `checks` is null) and stores 1 in
 * `passed` when none failed.
 *
 * # Safety
 * `scene` must be a live handle, `checks` null or a valid C string.
 */
enum MagrayStatus magray_verify(const struct MagrayScene *scene,
                                const char *checks,
                                uint64_t seed,
                                int *passed);

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *magray_last_error(void);

/**
 * Library version as a static C string.
 */
const char *magray_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAGRAY_H */
