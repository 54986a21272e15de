#ifndef FACEHAL_FACEHAL_H
#define FACEHAL_FACEHAL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define FH_API __declspec(dllexport)
#else
#define FH_API __attribute__((visibility("default")))
#endif

/* Status codes double as process exit codes. */
typedef enum fh_status {
  FH_OK = 0,
  FH_ERR_USAGE = 1,
  FH_ERR_DATA = 2,
  FH_ERR_NUMERICAL = 3
} fh_status;

/* Message and error-code name of the last failure on this thread. The
   pointers stay valid until the next failing call on the same thread. */
FH_API const char* fh_last_error_message(void);
FH_API const char* fh_last_error_code(void);

FH_API const char* fh_version(void);

/* Pipeline configuration. */
typedef struct fh_config fh_config;

FH_API fh_status fh_config_create(fh_config** out);
/* Reads a JSON config; unknown keys are rejected. */
FH_API fh_status fh_config_load(const char* path, fh_config** out);
FH_API void fh_config_destroy(fh_config* cfg);

/* Fields in canonical order; names double as CLI long flags. */
FH_API size_t fh_config_field_count(void);
FH_API const char* fh_config_field_name(size_t i);
FH_API const char* fh_config_field_help(size_t i);

/* Parses `value` into field `name` and revalidates. On failure the config
   is left unchanged. */
FH_API fh_status fh_config_set(fh_config* cfg, const char* name, const char* value);
/* Current value of field `name` as text (strings unquoted), owned by `cfg`
   and valid until the next call on it; null for an unknown name. */
FH_API const char* fh_config_get(fh_config* cfg, const char* name);
/* Canonical JSON text, owned by `cfg`, valid until the next call on it. */
FH_API const char* fh_config_json(fh_config* cfg);

/* Depth rendering of a face mesh. */
typedef struct fh_render_options {
  int width;
  int height;
  double fx, fy, cx, cy;
  double distance_mm;
  double yaw_deg;
  double pitch_deg;
  double noise_mm;
  double dropout;
  uint64_t seed;
} fh_render_options;

FH_API fh_render_options fh_render_options_default(void);

/* Synthetic database of `count` faces under `out_dir`; writes manifest.json
   there. Registration and feather settings come from `cfg`. */
FH_API fh_status fh_build_db_synthetic(const fh_config* cfg, const char* out_dir, int count, uint64_t seed);
/* Database from `<id>.obj|.ply` + `<id>.json` pairs in `input_dir`. */
FH_API fh_status fh_build_db_from_dir(const fh_config* cfg, const char* input_dir, const char* out_dir);

/* Descriptor index for the database named by cfg's `database` field. */
FH_API fh_status fh_build_index(const fh_config* cfg, const char* out_manifest);

/* Writes reconstruction.ply, merge_report.json and timing.json (plus
   expression.ply when both expression paths are non-null) into cfg's
   `output_dir`. */
FH_API fh_status fh_reconstruct(const fh_config* cfg, const char* depth, const char* landmarks,
                                const char* expression_depth, const char* expression_landmarks);

/* Ranking tables ranking_{nose,cheeks,mouth,eyes}.csv for the held-out
   database ids, written into cfg's `output_dir`. */
FH_API fh_status fh_evaluate(const fh_config* cfg, const char* const* heldout_ids, size_t heldout_count,
                             const fh_render_options* render, uint64_t seed);

/* Renders a mesh with its 3D fiducial file. */
FH_API fh_status fh_render_depth(const char* mesh, const char* landmarks, const fh_render_options* render,
                                 const char* out_depth, const char* out_landmarks);
/* Renders database entry `id` with the database's fiducial locations. */
FH_API fh_status fh_render_database_entry(const char* manifest, const char* id, const fh_render_options* render,
                                          const char* out_depth, const char* out_landmarks);

#ifdef __cplusplus
}
#endif

#endif
