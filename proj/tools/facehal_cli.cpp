// Command-line front end over the facehal C API.

#include "facehal/facehal.h"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

struct ConfigDeleter {
  void operator()(fh_config* c) const { fh_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<fh_config, ConfigDeleter>;

int report(fh_status s) {
  if (s != FH_OK) std::fprintf(stderr, "error: %s\n", fh_last_error_message());
  return static_cast<int>(s);
}

struct FieldFlag {
  std::string name;
  std::vector<std::string> values;
  CLI::Option* option = nullptr;
};

struct RenderFlags {
  double noise = 2.0;
  double dropout = 0.05;
  std::uint64_t seed = 1;
  double yaw = 0.0;
  double pitch = 0.0;
  std::optional<double> distance;

  void add(CLI::App* cmd, bool with_seed) {
    cmd->add_option("--noise", noise, "depth noise sigma in mm")->capture_default_str();
    cmd->add_option("--dropout", dropout, "fraction of pixels dropped")->capture_default_str();
    if (with_seed) cmd->add_option("--seed", seed, "noise seed")->capture_default_str();
    cmd->add_option("--yaw", yaw, "head yaw in degrees")->capture_default_str();
    cmd->add_option("--pitch", pitch, "head pitch in degrees")->capture_default_str();
    cmd->add_option("--distance", distance, "camera distance in mm");
  }

  fh_render_options options() const {
    auto o = fh_render_options_default();
    o.noise_mm = noise;
    o.dropout = dropout;
    o.seed = seed;
    o.yaw_deg = yaw;
    o.pitch_deg = pitch;
    if (distance) o.distance_mm = *distance;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face reconstruction from a single depth frame by part-wise retrieval"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::string config_path;
  bool print_config = false;
  app.add_option("--config", config_path, "JSON pipeline configuration")->check(CLI::ExistingFile);
  app.add_flag("--print-config", print_config, "print the effective configuration as JSON");

  std::vector<FieldFlag> fields(fh_config_field_count());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    fields[i].name = fh_config_field_name(i);
    fields[i].option = app.add_option("--" + fields[i].name, fields[i].values, fh_config_field_help(i))
                           ->expected(0, 1)
                           ->group("Configuration");
  }

  auto* build_db = app.add_subcommand("build-db", "register a face database");
  std::optional<int> synthetic;
  std::uint64_t db_seed = 7;
  std::string from_dir;
  std::string db_out;
  auto* synth_opt = build_db->add_option("--synthetic", synthetic, "generate N synthetic faces");
  build_db->add_option("--seed", db_seed, "synthetic generator seed")->capture_default_str();
  auto* from_opt = build_db->add_option("--from-dir", from_dir, "directory of <id>.ply|obj + <id>.json pairs");
  synth_opt->excludes(from_opt);
  build_db->add_option("--out", db_out, "output directory")->required();

  auto* build_index = app.add_subcommand("build-index", "precompute database descriptors");
  std::string index_out;
  build_index->add_option("--out", index_out, "index manifest path")->required();

  auto* reconstruct = app.add_subcommand("reconstruct", "reconstruct a face from a depth frame");
  std::string depth;
  std::string landmarks;
  std::vector<std::string> expression;
  reconstruct->add_option("--depth", depth, "16-bit PGM depth frame")->required()->check(CLI::ExistingFile);
  reconstruct->add_option("--landmarks", landmarks, "pixel fiducials JSON")->required()->check(CLI::ExistingFile);
  reconstruct->add_option("--expression", expression, "expression depth frame and its fiducials")
      ->expected(2)
      ->type_name("DEPTH LANDMARKS");

  auto* evaluate = app.add_subcommand("evaluate", "ranking tables for held-out database subjects");
  std::vector<std::string> heldout;
  RenderFlags eval_render;
  evaluate->add_option("--heldout", heldout, "held-out database ids")->delimiter(',');
  eval_render.add(evaluate, true);

  auto* render = app.add_subcommand("render-depth", "render a synthetic depth frame");
  std::string mesh;
  std::string mesh_landmarks;
  std::string entry;
  std::string out_depth;
  std::string out_landmarks;
  RenderFlags render_flags;
  auto* mesh_opt = render->add_option("--mesh", mesh, "face mesh (.ply or .obj)")->check(CLI::ExistingFile);
  auto* lm_opt = render->add_option("--landmarks", mesh_landmarks, "3D fiducials JSON")->check(CLI::ExistingFile);
  auto* id_opt = render->add_option("--id", entry, "database entry to render (uses --database)");
  mesh_opt->needs(lm_opt);
  lm_opt->needs(mesh_opt);
  id_opt->excludes(mesh_opt);
  render->add_option("--out-depth", out_depth, "output PGM path")->required();
  render->add_option("--out-landmarks", out_landmarks, "output pixel fiducials JSON")->required();
  render_flags.add(render, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(FH_ERR_USAGE);
  }

  fh_config* raw = nullptr;
  const fh_status loaded = config_path.empty() ? fh_config_create(&raw) : fh_config_load(config_path.c_str(), &raw);
  if (loaded != FH_OK) return report(loaded);
  ConfigPtr cfg(raw);
  for (const auto& f : fields) {
    if (f.option->count() == 0) continue;
    const std::string value = f.values.empty() || f.values.front().empty() ? "true" : f.values.front();
    if (const auto s = fh_config_set(cfg.get(), f.name.c_str(), value.c_str()); s != FH_OK) {
      std::fprintf(stderr, "--%s: ", f.name.c_str());
      return report(s);
    }
  }
  if (print_config) std::printf("%s\n", fh_config_json(cfg.get()));

  if (*build_db) {
    if (!synthetic && from_dir.empty()) {
      std::fprintf(stderr, "error: build-db needs --synthetic N or --from-dir DIR\n");
      return FH_ERR_USAGE;
    }
    if (synthetic) return report(fh_build_db_synthetic(cfg.get(), db_out.c_str(), *synthetic, db_seed));
    return report(fh_build_db_from_dir(cfg.get(), from_dir.c_str(), db_out.c_str()));
  }
  if (*build_index) return report(fh_build_index(cfg.get(), index_out.c_str()));
  if (*reconstruct) {
    const char* ed = expression.empty() ? nullptr : expression[0].c_str();
    const char* el = expression.empty() ? nullptr : expression[1].c_str();
    return report(fh_reconstruct(cfg.get(), depth.c_str(), landmarks.c_str(), ed, el));
  }
  if (*evaluate) {
    std::vector<const char*> ids;
    for (const auto& id : heldout) ids.push_back(id.c_str());
    const auto o = eval_render.options();
    return report(fh_evaluate(cfg.get(), ids.data(), ids.size(), &o, eval_render.seed));
  }
  if (*render) {
    const auto o = render_flags.options();
    if (!entry.empty()) {
      const char* db_text = fh_config_get(cfg.get(), "database");
      const std::string db = db_text != nullptr ? db_text : "";
      if (db.empty()) {
        std::fprintf(stderr, "error: --id needs --database\n");
        return FH_ERR_USAGE;
      }
      return report(fh_render_database_entry(db.c_str(), entry.c_str(), &o, out_depth.c_str(), out_landmarks.c_str()));
    }
    if (mesh.empty()) {
      std::fprintf(stderr, "error: render-depth needs --mesh and --landmarks, or --id\n");
      return FH_ERR_USAGE;
    }
    return report(fh_render_depth(mesh.c_str(), mesh_landmarks.c_str(), &o, out_depth.c_str(), out_landmarks.c_str()));
  }
  if (!print_config) {
    std::fprintf(stderr, "%s", app.help().c_str());
    return FH_ERR_USAGE;
  }
  return 0;
}
