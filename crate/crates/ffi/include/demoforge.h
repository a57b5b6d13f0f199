#ifndef DEMOFORGE_H
#define DEMOFORGE_H

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum DfStatus {
  DfStatus_Ok = 0,
  DfStatus_NullPointer = 1,
  DfStatus_InvalidArgument = 2,
  DfStatus_Io = 3,
  DfStatus_Parse = 4,
  DfStatus_SchemaMismatch = 5,
  DfStatus_StageOrder = 6,
  DfStatus_Numeric = 7,
  DfStatus_NotFound = 8,
  DfStatus_Internal = 9,
} DfStatus;

// Opaque loaded episode.
typedef struct DfEpisode DfEpisode;

// Opaque loaded manifest.
typedef struct DfManifest DfManifest;

// Episode-level smoothness summary.
typedef struct DfSmoothness {
  double a_ep;
  double j_ep;
  double coverage;
} DfSmoothness;

// Per-episode quality record snapshot. Unknown booleans are -1; unset
// floats are NaN.
typedef struct DfQuality {
  double a_ep;
  double j_ep;
  double coverage;
  double episode_score;
  int32_t in_prescreen;
  int32_t replay_success;
  int32_t collision_free;
  int32_t in_high_quality;
  uintptr_t clip_count;
} DfQuality;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; do not free.
const char *df_version(void);

// Description of the most recent failure on this thread, or NULL. The
// caller owns the returned string (free with `df_string_free`).
char *df_last_error_message(void);

// Release a string returned by this library.
//
// # Safety
// `s` must have been returned by a `df_*` function and not freed before.
void df_string_free(char *s);

// Load a `demoforge-episode-v1` file.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be writable.
enum DfStatus df_episode_load(const char *path, struct DfEpisode **out);

// # Safety
// `episode` must come from `df_episode_load` and not be freed twice.
void df_episode_free(struct DfEpisode *episode);

// # Safety
// `episode` must be a live handle; `out` must be writable.
enum DfStatus df_episode_len(const struct DfEpisode *episode, uintptr_t *out);

// # Safety
// `episode` must be a live handle; `out` must be writable.
enum DfStatus df_episode_dims(const struct DfEpisode *episode, uintptr_t *out);

// # Safety
// `episode` must be a live handle; `out` receives a caller-owned string.
enum DfStatus df_episode_id(const struct DfEpisode *episode, char **out);

// Smoothness under explicit per-dimension min/max normalization stats
// (arrays of length `dims`).
//
// # Safety
// `episode` must be a live handle; `per_dim_min`/`per_dim_max` must point
// to `dims` readable doubles; `out` must be writable.
enum DfStatus df_episode_smoothness(const struct DfEpisode *episode,
                                    const double *per_dim_min,
                                    const double *per_dim_max,
                                    uintptr_t dims,
                                    struct DfSmoothness *out);

// Smoothness with the episode's own state extrema as normalization.
//
// # Safety
// `episode` must be a live handle; `out` must be writable.
enum DfStatus df_episode_smoothness_self(const struct DfEpisode *episode, struct DfSmoothness *out);

// Load a `demoforge-manifest-v1` file (episode files must exist).
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be writable.
enum DfStatus df_manifest_load(const char *path, struct DfManifest **out);

// # Safety
// `manifest` must come from `df_manifest_load` and not be freed twice.
void df_manifest_free(struct DfManifest *manifest);

// # Safety
// `manifest` must be a live handle; `out` must be writable.
enum DfStatus df_manifest_len(const struct DfManifest *manifest, uintptr_t *out);

// # Safety
// `manifest` must be a live handle; `out` receives a caller-owned string.
enum DfStatus df_manifest_episode_id(const struct DfManifest *manifest,
                                     uintptr_t index,
                                     char **out);

// Quality snapshot for the episode at `index`.
//
// # Safety
// `manifest` must be a live handle; `out` must be writable.
enum DfStatus df_manifest_quality(const struct DfManifest *manifest,
                                  uintptr_t index,
                                  struct DfQuality *out);

// Run one pipeline stage (same names as the CLI subcommands, e.g.
// "gen-corpus", "curate", ..., "posttrain-vanilla", "eval"). When
// `out_summary` is non-NULL it receives a caller-owned summary string.
//
// # Safety
// String arguments must be valid NUL-terminated strings; `out_summary`
// may be NULL or writable.
enum DfStatus df_run_stage(const char *config_path,
                           const char *workdir,
                           const char *stage,
                           int32_t force,
                           char **out_summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEMOFORGE_H */
