#include "common/error.hpp"
#include "dataset/database.hpp"
#include "depthio/landmarks.hpp"
#include "generators.hpp"
#include "geometry/spatial.hpp"
#include "pipeline/config.hpp"
#include "pipeline/evaluate.hpp"
#include "pipeline/reconstruct.hpp"
#include "pipeline/render.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace facehal;
using namespace facehal::pipeline;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path dir;
  fs::path manifest;
  dataset::Database db;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    out.dir = fs::temp_directory_path() / "facehal_pipeline_db";
    fs::remove_all(out.dir);
    dataset::SyntheticBuildOptions options;
    options.count = 8;
    options.seed = 7;
    out.manifest = dataset::build_synthetic_database(options, out.dir / "db");
    out.db = dataset::load_database(out.manifest);
    return out;
  }();
  return f;
}

PipelineConfig config_for(const fs::path& output) {
  PipelineConfig cfg;
  cfg.database = fixture().manifest.string();
  cfg.output_dir = output.string();
  return cfg;
}

RenderedFrame render_entry(std::size_t k, std::uint64_t seed) {
  const auto& db = fixture().db;
  RenderOptions o;
  o.seed = seed;
  return render_depth(db.meshes[k], dataset::landmarks_at(db.meshes[k], db.fiducials), o);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double vertex_rms(const TriangleMesh& a, const TriangleMesh& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.vertices.size(); ++i) sum += (a.vertices[i] - b.vertices[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(a.vertices.size()));
}

}  // namespace

TEST_CASE("config round trips through canonical JSON") {
  PipelineConfig cfg;
  cfg.m = 63;
  cfg.n = 65;
  cfg.alpha_mouth = 7.5;
  cfg.no_warp = true;
  cfg.smoothing_scheme = "explicit";
  const auto text = config_to_json(cfg);
  CHECK(config_to_json(parse_config(text)) == text);
  CHECK(parse_config(text).alpha().at("mouth") == 7.5);
  CHECK(config_to_json(parse_config("{}")) == config_to_json(PipelineConfig{}));
}

TEST_CASE("config rejects unknown keys, wrong types and bad ranges") {
  auto code = [](std::string_view text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code(R"({"colour": 1})") == ErrorCode::InvalidConfig);
  CHECK(code(R"({"m": "many"})") == ErrorCode::InvalidConfig);
  CHECK(code(R"({"m": -1})") == ErrorCode::InvalidConfig);
  CHECK(code(R"({"pts_only": true, "normals_only": true})") == ErrorCode::InvalidConfig);
  CHECK(code(R"({"retrieval_warp": "affine"})") == ErrorCode::InvalidConfig);
  CHECK(code("[1, 2]") == ErrorCode::InvalidConfig);
}

TEST_CASE("every config field can be set from text") {
  PipelineConfig cfg;
  set_config_field(cfg, "n", "65");
  set_config_field(cfg, "lambda_norm", "12.5");
  set_config_field(cfg, "no_warp", "true");
  set_config_field(cfg, "index", "cache.json");
  CHECK(cfg.n == 65);
  CHECK(cfg.lambda_norm == 12.5);
  CHECK(cfg.no_warp);
  CHECK(cfg.index == "cache.json");
  CHECK_THROWS_AS(set_config_field(cfg, "bogus", "1"), Error);
  CHECK_THROWS_AS(set_config_field(cfg, "m", "x"), Error);
  std::set<std::string_view> names;
  for (const auto& f : config_fields()) CHECK(names.insert(f.name).second);
  CHECK(names.count("alpha_eyes") == 1);
  CHECK(PipelineConfig{}.alpha() == features::default_alpha_map());
}

TEST_CASE("distance mode follows the flags") {
  PipelineConfig cfg;
  CHECK(cfg.distance_mode() == retrieval::DistanceMode::Combined);
  cfg.pts_only = true;
  CHECK(cfg.distance_mode() == retrieval::DistanceMode::PtsOnly);
  cfg.pts_only = false;
  cfg.normals_only = true;
  CHECK(cfg.distance_mode() == retrieval::DistanceMode::NormalsOnly);
}

TEST_CASE("renders are deterministic, quantized and carry projected landmarks") {
  const auto a = render_entry(0, 3);
  const auto b = render_entry(0, 3);
  const auto c = render_entry(0, 4);
  CHECK(a.frame.depth == b.frame.depth);
  CHECK(a.frame.depth != c.frame.depth);
  CHECK(a.frame.width == 640);
  CHECK(a.frame.height == 480);
  for (double d : a.frame.depth) CHECK(std::abs(d * 10.0 - std::round(d * 10.0)) < 1e-6);
  CHECK(a.pixel_landmarks.pixel_coordinates);
  CHECK(a.pixel_landmarks.points.size() == 83);
  const auto& db = fixture().db;
  const auto lm = dataset::landmarks_at(db.meshes[0], db.fiducials);
  for (std::size_t i = 0; i < lm.points.size(); ++i) {
    const auto uv = depthio::project(a.frame.intrinsics, a.pose.apply(lm.points[i].coord));
    CHECK(std::abs(uv.x() - a.pixel_landmarks.points[i].coord.x()) < 1e-9);
  }
}

TEST_CASE("noise-free render back-projects onto the mesh") {
  const auto& db = fixture().db;
  RenderOptions o;
  o.noise_mm = 0.0;
  o.dropout = 0.0;
  const auto r = render_depth(db.meshes[1], dataset::landmarks_at(db.meshes[1], db.fiducials), o);
  const auto mesh = align::apply(r.pose, db.meshes[1]);
  const auto back = depthio::backproject(r.frame, depthio::full_frame(r.frame));
  const geometry::TriangleBvh bvh(mesh);
  double worst = 0.0;
  for (const auto& v : back.mesh.vertices) worst = std::max(worst, bvh.nearest(v).distance);
  CHECK(worst < 0.1);
}

TEST_CASE("dropout removes about the requested fraction") {
  const auto& db = fixture().db;
  RenderOptions o;
  o.noise_mm = 0.0;
  o.dropout = 0.0;
  const auto lm = dataset::landmarks_at(db.meshes[2], db.fiducials);
  const auto clean = render_depth(db.meshes[2], lm, o);
  o.dropout = 0.2;
  const auto holes = render_depth(db.meshes[2], lm, o);
  const double kept = static_cast<double>(holes.frame.valid_count()) / static_cast<double>(clean.frame.valid_count());
  CHECK(kept == doctest::Approx(0.8).epsilon(0.05));
}

TEST_CASE("a rendered database entry retrieves itself for most parts") {
  const auto& db = fixture().db;
  const auto cfg = config_for(fs::temp_directory_path() / "facehal_unused");
  for (std::size_t k : {0u, 3u, 6u}) {
    const auto r = render_entry(k, 11 + k);
    const auto rec = reconstruct(db, r.frame, r.pixel_landmarks, cfg);
    int own = 0;
    for (const auto& res : rec.rankings) own += res.best == db.ids[k];
    CHECK(own >= 3);
    CHECK(rec.rankings.size() == 5);
    CHECK(rec.merged.mesh.triangles == db.generic.triangles);
    for (double s : rec.timing.seconds) CHECK(s >= 0.0);
  }
}

TEST_CASE("normal error of a mesh against itself is zero") {
  const auto& db = fixture().db;
  const std::vector<double> w(db.generic.vertices.size(), 1.0);
  CHECK(mean_normal_error_deg(db.meshes[0], db.meshes[0], w) < 1e-6);
  CHECK(mean_normal_error_deg(db.meshes[0], db.meshes[1], w) > 0.0);
}

TEST_CASE("an expression frame equal to the neutral frame reproduces the neutral output") {
  const auto& db = fixture().db;
  const auto cfg = config_for(fs::temp_directory_path() / "facehal_unused");
  const auto r = render_entry(4, 5);
  const auto rec = reconstruct(db, r.frame, r.pixel_landmarks, cfg);
  std::vector<std::string> ids;
  for (const auto& s : rec.merged.sources) ids.push_back(s.id);
  const auto e = merge_expression(db, ids, r.frame, r.pixel_landmarks, cfg);
  CHECK(vertex_rms(e.mesh, rec.merged.mesh) < 1e-3);
}

TEST_CASE("file-level reconstruct writes outputs, is deterministic and names failing stages") {
  const auto out = fixture().dir / "run";
  const auto r = render_entry(2, 9);
  run_render_depth(fixture().db.meshes[2], dataset::landmarks_at(fixture().db.meshes[2], fixture().db.fiducials), RenderOptions{},
                   {out / "in" / "q.pgm", out / "in" / "q_lm.json"});
  CHECK(fs::exists(out / "in" / "q.json"));
  ReconstructPaths paths{out / "in" / "q.pgm", out / "in" / "q_lm.json", {}, {}};
  run_reconstruct(paths, config_for(out / "a"));
  run_reconstruct(paths, config_for(out / "b"));
  for (const char* name : {"reconstruction.ply", "merge_report.json"}) {
    CHECK(read_bytes(out / "a" / name) == read_bytes(out / "b" / name));
    CHECK(!read_bytes(out / "a" / name).empty());
  }
  const auto timing = read_bytes(out / "a" / "timing.json");
  for (auto stage : kStageNames) CHECK(timing.find(std::string(stage)) != std::string::npos);

  fs::remove(out / "in" / "q.json");
  try {
    run_reconstruct(paths, config_for(out / "c"));
    FAIL("expected MissingIntrinsics");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingIntrinsics);
    CHECK(std::string(e.what()).find("ingest") != std::string::npos);
  }
  (void)r;
}

TEST_CASE("render-depth refuses to overwrite the intrinsics sidecar") {
  const auto& db = fixture().db;
  const auto out = fixture().dir / "collide";
  CHECK_THROWS_AS(run_render_depth(db.meshes[0], dataset::landmarks_at(db.meshes[0], db.fiducials), RenderOptions{},
                                   {out / "q.pgm", out / "q.json"}),
                  Error);
}

TEST_CASE("evaluation tables") {
  const auto& f = fixture();
  const auto out = f.dir / "eval";
  auto cfg = config_for(out);
  run_evaluate(cfg, {}, RenderOptions{}, 1);
  for (auto table : kEvaluationTables) {
    const auto text = read_bytes(out / ("ranking_" + std::string(table) + ".csv"));
    CHECK(text.rfind("variant\n", 0) == 0);
    CHECK(text == "variant\nPts 35x35\nPts 65x65\nA-E hist\nCombined\n");
  }

  const std::vector<std::string> heldout = {f.db.ids[1], f.db.ids[5]};
  const auto tables = evaluate_rankings(f.db, heldout, cfg, RenderOptions{}, 2);
  CHECK(tables.subjects == heldout);
  for (const auto& table : tables.ranks) {
    for (const auto& row : table) {
      REQUIRE(row.size() == 2);
      for (auto rank : row) {
        CHECK(rank >= 1);
        CHECK(rank <= f.db.ids.size());
      }
    }
  }
  const auto csv = table_csv(tables, 0);
  CHECK(csv.rfind("variant," + heldout[0] + "," + heldout[1] + "\n", 0) == 0);
  CHECK(subject_seed(2, heldout[0]) != subject_seed(2, heldout[1]));
  CHECK(subject_seed(2, heldout[0]) == subject_seed(2, heldout[0]));
  const std::vector<std::string> unknown = {"nobody"};
  CHECK_THROWS_AS(evaluate_rankings(f.db, unknown, cfg, RenderOptions{}, 2), Error);
}

TEST_CASE("expression merging tracks a jaw drop and keeps the retrieved nose") {
  const auto& db = fixture().db;
  const auto cfg = config_for(fs::temp_directory_path() / "facehal_unused");
  const std::size_t k = 5;
  const auto neutral = render_entry(k, 21);
  const auto rec = reconstruct(db, neutral.frame, neutral.pixel_landmarks, cfg);
  std::vector<std::string> ids;
  for (const auto& s : rec.merged.sources) ids.push_back(s.id);

  // lower face drops by up to 6 mm below the mouth line
  TriangleMesh open = db.meshes[k];
  const double mouth_y = dataset::landmarks_at(open, db.fiducials).find("mouth_center")->coord.y();
  for (auto& v : open.vertices) {
    const double t = std::clamp((mouth_y - v.y()) / 15.0, 0.0, 1.0);
    v.y() -= 6.0 * t * t * (3.0 - 2.0 * t);
  }
  open = geometry::compute_vertex_normals(std::move(open));
  RenderOptions o;
  o.seed = 22;
  const auto expr = render_depth(open, dataset::landmarks_at(open, db.fiducials), o);
  const auto out = merge_expression(db, ids, expr.frame, expr.pixel_landmarks, cfg);

  const auto truth = align::apply(expr.pose, open);
  const geometry::TriangleBvh bvh(truth);
  const auto mouth = retrieval::find_part(db.masks, "mouth").dense(db.generic.vertices.size());
  double sum = 0.0;
  int count = 0;
  for (std::size_t v = 0; v < mouth.size(); ++v) {
    if (mouth[v] < 1.0) continue;
    sum += std::pow(bvh.nearest(out.mesh.vertices[v]).distance, 2);
    ++count;
  }
  CHECK(std::sqrt(sum / count) < 1.0);

  // the transferred field is the detail carried onto the output
  const std::size_t nose_part = 1;
  REQUIRE(db.masks[nose_part].name == "nose");
  const auto source = align::apply(expr.pose, db.meshes[db.find(ids[nose_part])]);
  const auto nose = retrieval::find_part(db.masks, "nose").dense(db.generic.vertices.size());
  std::vector<double> interior(nose.size(), 0.0);
  for (std::size_t v = 0; v < nose.size(); ++v) interior[v] = nose[v] >= 1.0 ? 1.0 : 0.0;
  TriangleMesh detail = out.mesh;
  detail.normals = out.field.normals;
  CHECK(mean_normal_error_deg(detail, source, interior) < 5.0);
}
