#include "pipeline/reconstruct.hpp"

#include "align/warp.hpp"
#include "common/error.hpp"
#include "fairing/smooth.hpp"
#include "features/descriptor.hpp"
#include "geometry/spatial.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

namespace facehal::pipeline {
namespace fs = std::filesystem;

namespace {

constexpr double kUnmatchedWeight = 0.1;

class StageClock {
 public:
  explicit StageClock(double& slot) : slot_(slot), start_(std::chrono::steady_clock::now()) {}
  ~StageClock() { slot_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  double& slot_;
  std::chrono::steady_clock::time_point start_;
};

template <typename F>
auto in_stage(std::string_view stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), "stage '" + std::string(stage) + "': " + e.detail());
  }
}

std::vector<Vec3> present_coords(const depthio::LandmarkSet& set, const depthio::LandmarkSet& other,
                                 std::vector<Vec3>* other_coords, bool internal_only) {
  std::vector<Vec3> out;
  for (const auto& l : set.points) {
    if (!l.present) continue;
    if (internal_only && l.group != depthio::LandmarkGroup::Internal) continue;
    const auto* o = other.find(l.name);
    if (o == nullptr || !o->present) continue;
    out.push_back(l.coord);
    if (other_coords != nullptr) other_coords->push_back(o->coord);
  }
  return out;
}

depthio::LandmarkSet transform_landmarks(const depthio::LandmarkSet& set, const align::RigidTransform& xf) {
  depthio::LandmarkSet out = set;
  for (auto& l : out.points) {
    if (l.present) l.coord = xf.apply(l.coord);
  }
  return out;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << text << '\n';
}

}  // namespace

Preprocessed preprocess(const depthio::DepthFrame& frame, const depthio::LandmarkSet& pixel_landmarks,
                        const PipelineConfig& cfg) {
  if (!pixel_landmarks.pixel_coordinates) {
    throw Error(ErrorCode::InvalidArgument, "query landmarks must be in pixel coordinates");
  }
  depthio::validate_fiducials(pixel_landmarks);
  depthio::DepthFrame f = frame;
  const auto rect = depthio::face_rect_from_landmarks(f, pixel_landmarks);
  depthio::fill_small_holes(f, rect);
  auto bp = depthio::backproject(f, rect, cfg.discontinuity_mm);
  geometry::drop_degenerate_triangles(bp.mesh);
  if (bp.mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "no valid depth inside the face crop");

  Preprocessed out;
  out.landmarks = depthio::lift_landmarks(f, pixel_landmarks);
  out.raw = std::move(bp.mesh);
  out.smoothed = fairing::smooth(out.raw, cfg.smoothing());

  const geometry::PointIndex index(out.raw.vertices);
  for (auto& l : out.landmarks.points) {
    if (!l.present) continue;
    const auto [v, d2] = index.nearest(l.coord);
    if (v >= 0) l.coord = out.smoothed.vertices[static_cast<std::size_t>(v)];
  }
  return out;
}

RegisteredQuery register_query(const dataset::Database& db, const Preprocessed& pre, const PipelineConfig& cfg) {
  const auto generic_lm = db.generic_landmarks();
  std::vector<Vec3> generic_pts;
  const auto input_pts = present_coords(pre.landmarks, generic_lm, &generic_pts, true);
  if (input_pts.size() < 3) {
    throw Error(ErrorCode::InsufficientLandmarks, "rigid alignment needs 3 internal landmarks");
  }

  RegisteredQuery q;
  q.to_generic = align::procrustes(input_pts, generic_pts, cfg.with_scale);
  q.input = align::apply(q.to_generic, pre.smoothed);
  q.landmarks = transform_landmarks(pre.landmarks, q.to_generic);
  q.correspondence = align::dense_correspond(db.generic, q.input, generic_lm, q.landmarks, cfg.registration());
  q.input_masks = align::transfer_part_masks(db.masks, q.correspondence, q.input, cfg.unmatched_mm);

  const auto& gp = q.correspondence.deformed;
  const auto* s = q.landmarks.find(depthio::kSellion);
  const auto* c = q.landmarks.find(depthio::kChinTip);
  q.sellion = s != nullptr && s->present ? s->coord : geometry::point_at(gp, db.anchors.sellion);
  q.chin = c != nullptr && c->present ? c->coord : geometry::point_at(gp, db.anchors.chin);
  return q;
}

TriangleMesh warp_entry(const dataset::Database& db, std::size_t entry, const depthio::LandmarkSet& target) {
  const auto& mesh = db.meshes[entry];
  const auto own = dataset::landmarks_at(mesh, db.fiducials);
  std::vector<Vec3> dst;
  const auto src = present_coords(own, target, &dst, false);
  return align::landmark_warp(mesh, src, dst).mesh;
}

std::vector<TriangleMesh> warp_database(const dataset::Database& db, const depthio::LandmarkSet& target) {
  std::vector<TriangleMesh> out;
  out.reserve(db.meshes.size());
  for (std::size_t e = 0; e < db.meshes.size(); ++e) out.push_back(warp_entry(db, e, target));
  return out;
}

std::vector<TriangleMesh> align_database(const dataset::Database& db, const depthio::LandmarkSet& target,
                                         bool with_scale) {
  std::vector<TriangleMesh> out;
  out.reserve(db.meshes.size());
  for (const auto& mesh : db.meshes) {
    const auto own = dataset::landmarks_at(mesh, db.fiducials);
    std::vector<Vec3> dst;
    const auto src = present_coords(own, target, &dst, true);
    if (src.size() < 3) throw Error(ErrorCode::InsufficientLandmarks, "database alignment needs 3 internal landmarks");
    out.push_back(align::apply(align::procrustes(src, dst, with_scale), mesh));
  }
  return out;
}

QueryDescriptors describe_query(const dataset::Database& db, const RegisteredQuery& query,
                                const std::vector<TriangleMesh>& aligned, const PipelineConfig& cfg,
                                const retrieval::DescriptorIndex* index) {
  const auto params = cfg.descriptor_params();
  QueryDescriptors d;
  const auto areas = geometry::vertex_areas(query.input);
  for (const auto& m : query.input_masks) {
    d.input.push_back(features::describe_part(query.input, m, query.sellion, query.chin, params, areas));
  }
  if (cfg.no_warp) {
    if (index == nullptr) throw Error(ErrorCode::InvalidArgument, "no-warp retrieval needs a descriptor index");
    if (index->params.m != params.m || index->params.n != params.n) {
      throw Error(ErrorCode::ParamMismatch, "index was built with other (m, n)");
    }
    if (index->ids != db.ids) throw Error(ErrorCode::ParamMismatch, "index ids differ from the database");
    for (const auto& row : index->descriptors) {
      std::vector<features::PartDescriptor> parts;
      for (const auto& m : db.masks) parts.push_back(row[index->part_column(m.name)]);
      d.database.push_back(std::move(parts));
    }
    return d;
  }
  for (const auto& mesh : aligned) {
    d.database.push_back(retrieval::describe_mesh(mesh, db.masks, db.anchors, params));
  }
  return d;
}

std::vector<retrieval::RetrievalResult> rank_parts(const dataset::Database& db, const QueryDescriptors& d,
                                                   const PipelineConfig& cfg, retrieval::DistanceMode mode) {
  const auto alpha = cfg.alpha();
  std::vector<retrieval::RetrievalResult> out;
  for (std::size_t p = 0; p < db.masks.size(); ++p) {
    std::vector<features::PartDescriptor> column;
    column.reserve(d.database.size());
    for (const auto& row : d.database) column.push_back(row[p]);
    const auto& name = db.masks[p].name;
    out.push_back(retrieval::rank_part(name, d.input[p], db.ids, column, features::alpha_for(alpha, name), mode));
  }
  return out;
}

MergeResult merge(const dataset::Database& db, const RegisteredQuery& query,
                  const std::vector<const TriangleMesh*>& sources, const std::vector<std::string>& source_ids,
                  const PipelineConfig& cfg) {
  const auto& gp = query.correspondence.deformed;
  MergeResult out;
  if (sources.empty()) {
    out.field.normals = gp.normals;
    out.field.tags.assign(gp.vertices.size(), fusion::kOriginalTag);
  } else {
    out.field = fusion::transfer_normals(gp, sources, db.masks, cfg.unmatched_mm);
  }

  for (std::size_t p = 0; p < db.masks.size(); ++p) {
    PartSource s;
    s.part = db.masks[p].name;
    s.id = p < source_ids.size() ? source_ids[p] : std::string();
    double sum = 0.0;
    std::size_t count = 0;
    for (int v : db.masks[p].vertices) {
      const auto i = static_cast<std::size_t>(v);
      if (out.field.tags[i] != static_cast<int>(p)) continue;
      sum += angle_deg(gp.normals[i], out.field.normals[i]);
      ++count;
    }
    s.mean_normal_change_deg = count > 0 ? sum / static_cast<double>(count) : 0.0;
    out.sources.push_back(std::move(s));
  }

  std::vector<Vec3> targets(gp.vertices.size());
  std::vector<double> weights(gp.vertices.size());
  for (std::size_t i = 0; i < gp.vertices.size(); ++i) {
    const auto& m = query.correspondence.matches[i];
    if (m.matched) {
      targets[i] = geometry::point_at(query.input, m.location);
      weights[i] = 1.0;
      ++out.matched_vertices;
    } else {
      targets[i] = gp.vertices[i];
      weights[i] = kUnmatchedWeight;
    }
  }
  TriangleMesh fused = gp;
  fused.vertices = fusion::fuse_positions(gp, targets, weights, out.field.normals, cfg.fusion_weights());
  fused = geometry::compute_vertex_normals(std::move(fused));
  const auto to_camera = query.to_generic.inverse();
  out.mesh = align::apply(to_camera, fused);
  for (auto& n : out.field.normals) n = to_camera.rotation * n;
  return out;
}

Reconstruction reconstruct(const dataset::Database& db, const depthio::DepthFrame& frame,
                           const depthio::LandmarkSet& pixel_landmarks, const PipelineConfig& cfg,
                           const retrieval::DescriptorIndex* index) {
  validate(cfg);
  Reconstruction r;
  auto& t = r.timing.seconds;
  Preprocessed pre;
  {
    StageClock clock(t[0]);
    pre = in_stage("preprocess", [&] { return preprocess(frame, pixel_landmarks, cfg); });
  }
  {
    StageClock clock(t[1]);
    r.query = in_stage("registration", [&] { return register_query(db, pre, cfg); });
  }
  {
    StageClock clock(t[2]);
    in_stage("retrieval", [&] {
      std::vector<TriangleMesh> aligned;
      if (!cfg.no_warp) {
        aligned = cfg.retrieval_warp == "tps" ? warp_database(db, r.query.landmarks)
                                              : align_database(db, r.query.landmarks, cfg.with_scale);
      }
      const auto d = describe_query(db, r.query, aligned, cfg, index);
      r.rankings = rank_parts(db, d, cfg, cfg.distance_mode());
      return 0;
    });
  }
  {
    StageClock clock(t[3]);
    r.merged = in_stage("merging", [&] {
      std::map<std::string, TriangleMesh> warped;
      std::vector<std::string> ids;
      for (const auto& res : r.rankings) {
        if (!warped.contains(res.best)) warped.emplace(res.best, warp_entry(db, db.find(res.best), r.query.landmarks));
        ids.push_back(res.best);
      }
      std::vector<const TriangleMesh*> sources;
      for (const auto& id : ids) sources.push_back(&warped.at(id));
      return merge(db, r.query, sources, ids, cfg);
    });
  }
  return r;
}

MergeResult merge_expression(const dataset::Database& db, const std::vector<std::string>& neutral_ids,
                             const depthio::DepthFrame& frame, const depthio::LandmarkSet& pixel_landmarks,
                             const PipelineConfig& cfg, Timing* timing) {
  Timing local;
  auto& t = (timing != nullptr ? *timing : local).seconds;
  if (neutral_ids.size() != db.masks.size()) {
    throw Error(ErrorCode::MissingSource, "expression merging needs one neutral match per part");
  }
  Preprocessed pre;
  {
    StageClock clock(t[0]);
    pre = in_stage("preprocess", [&] { return preprocess(frame, pixel_landmarks, cfg); });
  }
  RegisteredQuery q;
  {
    StageClock clock(t[1]);
    q = in_stage("registration", [&] { return register_query(db, pre, cfg); });
  }
  StageClock clock(t[3]);
  return in_stage("merging", [&] {
    std::vector<TriangleMesh> warped;
    for (const auto& id : neutral_ids) {
      const std::size_t e = db.find(id);
      const auto own = dataset::landmarks_at(db.meshes[e], db.fiducials);
      std::vector<Vec3> dst;
      const auto src = present_coords(own, q.landmarks, &dst, false);
      warped.push_back(align::landmark_warp(db.meshes[e], src, dst).mesh);
    }
    std::vector<const TriangleMesh*> sources;
    for (const auto& w : warped) sources.push_back(&w);
    return merge(db, q, sources, neutral_ids, cfg);
  });
}

std::string merge_report_json(const Reconstruction& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json parts = nlohmann::ordered_json::array();
  for (std::size_t p = 0; p < r.merged.sources.size(); ++p) {
    const auto& s = r.merged.sources[p];
    nlohmann::ordered_json e;
    e["part"] = s.part;
    e["source_id"] = s.id;
    e["mean_normal_change_deg"] = s.mean_normal_change_deg;
    if (p < r.rankings.size() && !r.rankings[p].ranking.empty()) {
      const auto& d = r.rankings[p].ranking.front().distance;
      e["d_pts"] = d.d_pts;
      e["d_normals"] = d.d_normals;
      e["combined"] = d.combined;
    }
    parts.push_back(e);
  }
  j["parts"] = parts;
  const auto& c = r.query.correspondence;
  nlohmann::ordered_json reg;
  reg["scale"] = r.query.to_generic.scale;
  reg["iterations"] = c.iterations;
  reg["converged"] = c.converged;
  reg["final_energy"] = c.energy_trace.empty() ? 0.0 : c.energy_trace.back();
  reg["matched_vertices"] = r.merged.matched_vertices;
  reg["vertex_count"] = c.deformed.vertices.size();
  j["registration"] = reg;
  return j.dump(2);
}

std::string timing_json(const Timing& t) {
  nlohmann::ordered_json j;
  double total = 0.0;
  for (std::size_t s = 0; s < kStageNames.size(); ++s) {
    j[std::string(kStageNames[s])] = t.seconds[s];
    total += t.seconds[s];
  }
  j["total"] = total;
  return j.dump(2);
}

void run_reconstruct(const ReconstructPaths& paths, const PipelineConfig& cfg) {
  validate(cfg);
  if (cfg.database.empty()) throw Error(ErrorCode::InvalidConfig, "reconstruct needs a database manifest");
  const bool expression = !paths.expression_depth.empty() || !paths.expression_landmarks.empty();
  if (expression && (paths.expression_depth.empty() || paths.expression_landmarks.empty())) {
    throw Error(ErrorCode::InvalidConfig, "an expression frame needs both depth and landmarks");
  }
  struct Frame {
    depthio::DepthFrame depth;
    depthio::LandmarkSet landmarks;
  };
  auto ingest = [](const fs::path& depth, const fs::path& lm) {
    return in_stage("ingest", [&] { return Frame{depthio::load_depth(depth), depthio::load_landmarks(lm)}; });
  };
  const Frame neutral = ingest(paths.depth, paths.landmarks);
  Frame expr;
  if (expression) expr = ingest(paths.expression_depth, paths.expression_landmarks);

  const auto db = in_stage("ingest", [&] { return dataset::load_database(cfg.database); });
  retrieval::DescriptorIndex index;
  if (cfg.no_warp) {
    index = in_stage("ingest", [&] {
      if (!cfg.index.empty()) return retrieval::load_index(cfg.index);
      return retrieval::build_index(db.ids, db.meshes, db.masks, db.anchors, cfg.descriptor_params(), cfg.alpha());
    });
  }

  auto r = reconstruct(db, neutral.depth, neutral.landmarks, cfg, cfg.no_warp ? &index : nullptr);
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  geometry::save_mesh(r.merged.mesh, out / "reconstruction.ply");
  write_text(out / "merge_report.json", merge_report_json(r));
  if (expression) {
    std::vector<std::string> ids;
    for (const auto& s : r.merged.sources) ids.push_back(s.id);
    const auto e = merge_expression(db, ids, expr.depth, expr.landmarks, cfg, &r.timing);
    geometry::save_mesh(e.mesh, out / "expression.ply");
  }
  write_text(out / "timing.json", timing_json(r.timing));
}

void run_build_index(const PipelineConfig& cfg, const fs::path& out) {
  validate(cfg);
  if (cfg.database.empty()) throw Error(ErrorCode::InvalidConfig, "build-index needs a database manifest");
  const auto db = dataset::load_database(cfg.database);
  const auto index =
      retrieval::build_index(db.ids, db.meshes, db.masks, db.anchors, cfg.descriptor_params(), cfg.alpha());
  fs::path cache = out;
  cache.replace_extension(".bin");
  retrieval::save_index(index, cache, out);
}

double mean_normal_error_deg(const TriangleMesh& mesh, const TriangleMesh& reference,
                             const std::vector<double>& weights, double max_distance_mm) {
  if (mesh.normals.size() != mesh.vertices.size() || reference.normals.size() != reference.vertices.size()) {
    throw Error(ErrorCode::MissingNormals, "normal error needs normals on both meshes");
  }
  const geometry::TriangleBvh bvh(reference);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (!(weights[v] > 0.0)) continue;
    const auto hit = bvh.nearest(mesh.vertices[v]);
    if (hit.distance > max_distance_mm) continue;
    sum += angle_deg(mesh.normals[v], geometry::interpolate_normal(reference, hit.location));
    ++count;
  }
  if (count == 0) throw Error(ErrorCode::EmptyRegion, "no vertex within reach of the reference");
  return sum / static_cast<double>(count);
}

}  // namespace facehal::pipeline
