#include "facehal/facehal.h"

#include "common/error.hpp"
#include "dataset/database.hpp"
#include "pipeline/config.hpp"
#include "pipeline/evaluate.hpp"
#include "pipeline/reconstruct.hpp"

#include <json.hpp>

#include <exception>
#include <new>
#include <string>

struct fh_config {
  facehal::pipeline::PipelineConfig value;
  std::string json;
  std::string field;
};

namespace {

using namespace facehal;

thread_local std::string g_message;
thread_local std::string g_code;

fh_status fail(fh_status status, std::string code, std::string message) {
  g_code = std::move(code);
  g_message = std::move(message);
  return status;
}

template <typename F>
fh_status guarded(F&& f) {
  try {
    f();
    return FH_OK;
  } catch (const Error& e) {
    fh_status s = FH_ERR_DATA;
    switch (error_category(e.code())) {
      case ErrorCategory::Usage: s = FH_ERR_USAGE; break;
      case ErrorCategory::Numerical: s = FH_ERR_NUMERICAL; break;
      case ErrorCategory::Data: break;
    }
    return fail(s, std::string(error_code_name(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FH_ERR_NUMERICAL, "OutOfMemory", "out of memory");
  } catch (const std::exception& e) {
    return fail(FH_ERR_DATA, "Exception", e.what());
  }
}

fh_status null_argument(const char* name) {
  return fail(FH_ERR_USAGE, "InvalidArgument", std::string("null argument '") + name + "'");
}

pipeline::RenderOptions to_render(const fh_render_options* o) {
  pipeline::RenderOptions r;
  if (o == nullptr) return r;
  r.width = o->width;
  r.height = o->height;
  r.intrinsics = depthio::Intrinsics{o->fx, o->fy, o->cx, o->cy};
  r.distance_mm = o->distance_mm;
  r.yaw_deg = o->yaw_deg;
  r.pitch_deg = o->pitch_deg;
  r.noise_mm = o->noise_mm;
  r.dropout = o->dropout;
  r.seed = o->seed;
  return r;
}

void check_render(const pipeline::RenderOptions& r) {
  if (r.width < 1 || r.height < 1) throw Error(ErrorCode::InvalidConfig, "render size must be positive");
  if (!(r.noise_mm >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise must be >= 0");
  if (!(r.dropout >= 0.0 && r.dropout < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout must be in [0, 1)");
  if (!(r.distance_mm > 0.0)) throw Error(ErrorCode::InvalidConfig, "render distance must be positive");
}

dataset::SyntheticBuildOptions build_options(const pipeline::PipelineConfig& cfg) {
  dataset::SyntheticBuildOptions o;
  o.feather_mm = cfg.feather_mm;
  o.registration = cfg.registration();
  return o;
}

}  // namespace

extern "C" {

const char* fh_last_error_message(void) { return g_message.c_str(); }
const char* fh_last_error_code(void) { return g_code.c_str(); }
const char* fh_version(void) { return "0.1.0"; }

fh_status fh_config_create(fh_config** out) {
  if (out == nullptr) return null_argument("out");
  return guarded([&] { *out = new fh_config{}; });
}

fh_status fh_config_load(const char* path, fh_config** out) {
  if (path == nullptr) return null_argument("path");
  if (out == nullptr) return null_argument("out");
  return guarded([&] { *out = new fh_config{pipeline::load_config(path), {}, {}}; });
}

void fh_config_destroy(fh_config* cfg) { delete cfg; }

size_t fh_config_field_count(void) { return pipeline::config_fields().size(); }

const char* fh_config_field_name(size_t i) {
  const auto& f = pipeline::config_fields();
  return i < f.size() ? f[i].name.data() : nullptr;
}

const char* fh_config_field_help(size_t i) {
  const auto& f = pipeline::config_fields();
  return i < f.size() ? f[i].help.data() : nullptr;
}

fh_status fh_config_set(fh_config* cfg, const char* name, const char* value) {
  if (cfg == nullptr) return null_argument("cfg");
  if (name == nullptr) return null_argument("name");
  if (value == nullptr) return null_argument("value");
  return guarded([&] {
    auto next = cfg->value;
    pipeline::set_config_field(next, name, value);
    pipeline::validate(next);
    cfg->value = std::move(next);
  });
}

const char* fh_config_get(fh_config* cfg, const char* name) {
  if (cfg == nullptr || name == nullptr) return nullptr;
  const auto j = nlohmann::json::parse(pipeline::config_to_json(cfg->value));
  const auto it = j.find(name);
  if (it == j.end()) return nullptr;
  cfg->field = it->is_string() ? it->get<std::string>() : it->dump();
  return cfg->field.c_str();
}

const char* fh_config_json(fh_config* cfg) {
  if (cfg == nullptr) return nullptr;
  cfg->json = pipeline::config_to_json(cfg->value);
  return cfg->json.c_str();
}

fh_render_options fh_render_options_default(void) {
  const pipeline::RenderOptions r;
  return fh_render_options{r.width,       r.height,  r.intrinsics.fx, r.intrinsics.fy,
                           r.intrinsics.cx, r.intrinsics.cy, r.distance_mm, r.yaw_deg,
                           r.pitch_deg,   r.noise_mm, r.dropout,      r.seed};
}

fh_status fh_build_db_synthetic(const fh_config* cfg, const char* out_dir, int count, uint64_t seed) {
  if (cfg == nullptr) return null_argument("cfg");
  if (out_dir == nullptr) return null_argument("out_dir");
  return guarded([&] {
    if (count < 1) throw Error(ErrorCode::InvalidConfig, "synthetic count must be >= 1");
    auto o = build_options(cfg->value);
    o.count = count;
    o.seed = seed;
    dataset::build_synthetic_database(o, out_dir);
  });
}

fh_status fh_build_db_from_dir(const fh_config* cfg, const char* input_dir, const char* out_dir) {
  if (cfg == nullptr) return null_argument("cfg");
  if (input_dir == nullptr) return null_argument("input_dir");
  if (out_dir == nullptr) return null_argument("out_dir");
  return guarded([&] { dataset::build_database_from_dir(input_dir, out_dir, build_options(cfg->value)); });
}

fh_status fh_build_index(const fh_config* cfg, const char* out_manifest) {
  if (cfg == nullptr) return null_argument("cfg");
  if (out_manifest == nullptr) return null_argument("out_manifest");
  return guarded([&] { pipeline::run_build_index(cfg->value, out_manifest); });
}

fh_status fh_reconstruct(const fh_config* cfg, const char* depth, const char* landmarks,
                         const char* expression_depth, const char* expression_landmarks) {
  if (cfg == nullptr) return null_argument("cfg");
  if (depth == nullptr) return null_argument("depth");
  if (landmarks == nullptr) return null_argument("landmarks");
  return guarded([&] {
    pipeline::ReconstructPaths p;
    p.depth = depth;
    p.landmarks = landmarks;
    if (expression_depth != nullptr) p.expression_depth = expression_depth;
    if (expression_landmarks != nullptr) p.expression_landmarks = expression_landmarks;
    pipeline::run_reconstruct(p, cfg->value);
  });
}

fh_status fh_evaluate(const fh_config* cfg, const char* const* heldout_ids, size_t heldout_count,
                      const fh_render_options* render, uint64_t seed) {
  if (cfg == nullptr) return null_argument("cfg");
  if (heldout_ids == nullptr && heldout_count > 0) return null_argument("heldout_ids");
  return guarded([&] {
    std::vector<std::string> ids;
    for (size_t i = 0; i < heldout_count; ++i) {
      if (heldout_ids[i] == nullptr) throw Error(ErrorCode::InvalidArgument, "null held-out id");
      ids.emplace_back(heldout_ids[i]);
    }
    const auto r = to_render(render);
    check_render(r);
    pipeline::run_evaluate(cfg->value, ids, r, seed);
  });
}

fh_status fh_render_depth(const char* mesh, const char* landmarks, const fh_render_options* render,
                          const char* out_depth, const char* out_landmarks) {
  if (mesh == nullptr) return null_argument("mesh");
  if (landmarks == nullptr) return null_argument("landmarks");
  if (out_depth == nullptr) return null_argument("out_depth");
  if (out_landmarks == nullptr) return null_argument("out_landmarks");
  return guarded([&] {
    const auto r = to_render(render);
    check_render(r);
    pipeline::run_render_depth(geometry::load_mesh(mesh), depthio::load_landmark_file(landmarks), r,
                               {out_depth, out_landmarks});
  });
}

fh_status fh_render_database_entry(const char* manifest, const char* id, const fh_render_options* render,
                                   const char* out_depth, const char* out_landmarks) {
  if (manifest == nullptr) return null_argument("manifest");
  if (id == nullptr) return null_argument("id");
  if (out_depth == nullptr) return null_argument("out_depth");
  if (out_landmarks == nullptr) return null_argument("out_landmarks");
  return guarded([&] {
    const auto r = to_render(render);
    check_render(r);
    const auto db = dataset::load_database(manifest);
    const auto& mesh = db.meshes[db.find(id)];
    pipeline::run_render_depth(mesh, dataset::landmarks_at(mesh, db.fiducials), r, {out_depth, out_landmarks});
  });
}

}  // extern "C"
