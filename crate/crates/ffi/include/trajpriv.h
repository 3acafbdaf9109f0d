#ifndef TRAJPRIV_H
#define TRAJPRIV_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TpStatus {
  TP_STATUS_OK = 0,
  TP_STATUS_NULL_POINTER = 1,
  TP_STATUS_INVALID_UTF8 = 2,
  TP_STATUS_INVALID_JSON = 3,
  TP_STATUS_INVALID_INPUT = 4,
  TP_STATUS_UNKNOWN_OP = 5,
  TP_STATUS_PANIC = 6,
} TpStatus;

/**
 * Mobility profiles compiled for scoring under one strength configuration.
 */
typedef struct TpProfiles TpProfiles;

/**
 * A validated trajectory.
 */
typedef struct TpTrajectory TpTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *tp_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void tp_string_free(char *s);

/**
 * Parse a trajectory from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum TpStatus tp_trajectory_from_json(const char *json, struct TpTrajectory **out);

/**
 * Serialize a trajectory; free the result with [`tp_string_free`].
 *
 * # Safety
 * `t` must be a live handle; `out` must be writable.
 */
enum TpStatus tp_trajectory_to_json(const struct TpTrajectory *t, char **out);

/**
 * Number of reports in the trajectory; 0 for NULL.
 *
 * # Safety
 * `t` must be NULL or a live handle.
 */
size_t tp_trajectory_len(const struct TpTrajectory *t);

/**
 * # Safety
 * `t` must be NULL or a handle from this library not yet freed.
 */
void tp_trajectory_free(struct TpTrajectory *t);

/**
 * Compile profiles from a JSON array of mobility profiles.
 *
 * `config_json` holds a strength configuration (`alpha`, optional
 * `match_key`, optional `clamp`); NULL selects the defaults.
 *
 * # Safety
 * `profiles_json` must be a NUL-terminated string, `config_json` NULL or a
 * NUL-terminated string, and `out` writable.
 */
enum TpStatus tp_profiles_from_json(const char *profiles_json,
                                    const char *config_json,
                                    struct TpProfiles **out);

/**
 * Number of compiled profiles; 0 for NULL.
 *
 * # Safety
 * `p` must be NULL or a live handle.
 */
size_t tp_profiles_len(const struct TpProfiles *p);

/**
 * # Safety
 * `p` must be NULL or a handle from this library not yet freed.
 */
void tp_profiles_free(struct TpProfiles *p);

/**
 * Mean social strength of the trajectory against the profiles.
 *
 * # Safety
 * `p` and `t` must be live handles; `out` must be writable.
 */
enum TpStatus tp_score(const struct TpProfiles *p, const struct TpTrajectory *t, double *out);

/**
 * Sanitize with a mode or operation name (`moderate_cloak`, `cloak`, ...).
 * `params_json` overrides operation parameters; NULL selects the defaults.
 * The result is the sanitized trajectory as JSON; free it with
 * [`tp_string_free`].
 *
 * # Safety
 * `t` must be a live handle, `op` a NUL-terminated string, `params_json`
 * NULL or a NUL-terminated string, and `out` writable.
 */
enum TpStatus tp_sanitize(const struct TpTrajectory *t,
                          const char *op,
                          const char *params_json,
                          char **out);

/**
 * Coreset of the trajectory at threshold `theta`, as a new handle.
 *
 * # Safety
 * `t` must be a live handle; `out` must be writable.
 */
enum TpStatus tp_compress(const struct TpTrajectory *t, double theta, struct TpTrajectory **out);

/**
 * Longest common contiguous run of two trajectories under the category
 * match key.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
enum TpStatus tp_lcs(const struct TpTrajectory *a, const struct TpTrajectory *b, size_t *out);

/**
 * Longest common contiguous run of two integer sequences.
 *
 * # Safety
 * `a` must point to `a_len` readable values (or be NULL with `a_len` 0),
 * likewise `b`; `out` must be writable.
 */
enum TpStatus tp_lcs_u32(const uint32_t *a,
                         size_t a_len,
                         const uint32_t *b,
                         size_t b_len,
                         size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRAJPRIV_H */
