#include "pipeline/evaluate.hpp"

#include "common/error.hpp"
#include "common/hash.hpp"
#include "pipeline/reconstruct.hpp"

#include <fstream>
#include <sstream>

namespace facehal::pipeline {
namespace {

using retrieval::DistanceMode;

std::size_t mask_column(const dataset::Database& db, std::string_view name) {
  for (std::size_t p = 0; p < db.masks.size(); ++p) {
    if (db.masks[p].name == name) return p;
  }
  throw Error(ErrorCode::EmptyPart, "database has no part '" + std::string(name) + "'");
}

struct Described {
  std::vector<features::PartDescriptor> input;
  std::vector<std::vector<features::PartDescriptor>> database;
};

Described describe(const dataset::Database& db, const RegisteredQuery& q, const std::vector<TriangleMesh>& meshes,
                   const features::DescriptorParams& params) {
  Described d;
  const auto areas = geometry::vertex_areas(q.input);
  for (const auto& m : q.input_masks) {
    d.input.push_back(features::describe_part(q.input, m, q.sellion, q.chin, params, areas));
  }
  for (const auto& mesh : meshes) d.database.push_back(retrieval::describe_mesh(mesh, db.masks, db.anchors, params));
  return d;
}

// Rank of entry `self` when entries are ordered by the summed key over
// `parts`, ties by id.
std::size_t summed_rank(const dataset::Database& db, const Described& d, std::span<const std::size_t> parts,
                        const features::AlphaMap& alpha, DistanceMode mode, std::size_t self) {
  std::vector<double> key(db.ids.size(), 0.0);
  for (std::size_t e = 0; e < db.ids.size(); ++e) {
    for (std::size_t p : parts) {
      const double a = features::alpha_for(alpha, db.masks[p].name);
      key[e] += retrieval::ranking_key(features::combined_distance(d.input[p], d.database[e][p], a), mode);
    }
  }
  std::size_t rank = 1;
  for (std::size_t e = 0; e < db.ids.size(); ++e) {
    if (key[e] < key[self] || (key[e] == key[self] && db.ids[e] < db.ids[self])) ++rank;
  }
  return rank;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::uint64_t subject_seed(std::uint64_t seed, std::string_view id) { return fnv1a(id, fnv1a(exact_text(seed))); }

RankingTables evaluate_rankings(const dataset::Database& db, std::span<const std::string> heldout,
                                const PipelineConfig& cfg, const RenderOptions& render, std::uint64_t seed) {
  validate(cfg);
  const std::array<std::vector<std::size_t>, 4> parts = {
      std::vector<std::size_t>{mask_column(db, "nose")},
      std::vector<std::size_t>{mask_column(db, "left_cheek"), mask_column(db, "right_cheek")},
      std::vector<std::size_t>{mask_column(db, "mouth")},
      std::vector<std::size_t>{mask_column(db, "eyes")},
  };
  const auto alpha = cfg.alpha();
  const features::DescriptorParams coarse{33, 35};
  const features::DescriptorParams fine{63, 65};

  RankingTables t;
  for (const auto& id : heldout) {
    const std::size_t self = db.find(id);
    RenderOptions ro = render;
    ro.seed = subject_seed(seed, id);
    const auto frame = render_depth(db.meshes[self], dataset::landmarks_at(db.meshes[self], db.fiducials), ro);
    const auto pre = preprocess(frame.frame, frame.pixel_landmarks, cfg);
    const auto q = register_query(db, pre, cfg);
    std::vector<TriangleMesh> aligned;
    if (cfg.no_warp) {
      aligned = db.meshes;
    } else if (cfg.retrieval_warp == "tps") {
      aligned = warp_database(db, q.landmarks);
    } else {
      aligned = align_database(db, q.landmarks, cfg.with_scale);
    }
    const auto d35 = describe(db, q, aligned, coarse);
    const auto d65 = describe(db, q, aligned, fine);
    const auto own = cfg.descriptor_params();
    const bool same = own.m == coarse.m && own.n == coarse.n;
    const auto dcfg = same ? Described{} : describe(db, q, aligned, own);
    const Described& dc = same ? d35 : dcfg;

    t.subjects.push_back(id);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      t.ranks[k][0].push_back(summed_rank(db, d35, parts[k], alpha, DistanceMode::PtsOnly, self));
      t.ranks[k][1].push_back(summed_rank(db, d65, parts[k], alpha, DistanceMode::PtsOnly, self));
      t.ranks[k][2].push_back(summed_rank(db, d35, parts[k], alpha, DistanceMode::NormalsOnly, self));
      t.ranks[k][3].push_back(summed_rank(db, dc, parts[k], alpha, DistanceMode::Combined, self));
    }
  }
  return t;
}

std::string table_csv(const RankingTables& tables, std::size_t table) {
  std::ostringstream out;
  out << "variant";
  for (const auto& s : tables.subjects) out << ',' << s;
  out << '\n';
  for (std::size_t r = 0; r < kEvaluationRows.size(); ++r) {
    out << kEvaluationRows[r];
    for (std::size_t rank : tables.ranks[table][r]) out << ',' << rank;
    out << '\n';
  }
  return out.str();
}

void run_evaluate(const PipelineConfig& cfg, std::span<const std::string> heldout, const RenderOptions& render,
                  std::uint64_t seed) {
  validate(cfg);
  if (cfg.database.empty()) throw Error(ErrorCode::InvalidConfig, "evaluate needs a database manifest");
  const auto db = dataset::load_database(cfg.database);
  const auto tables = evaluate_rankings(db, heldout, cfg, render, seed);
  const std::filesystem::path out = cfg.output_dir;
  std::filesystem::create_directories(out);
  for (std::size_t k = 0; k < kEvaluationTables.size(); ++k) {
    write_file(out / ("ranking_" + std::string(kEvaluationTables[k]) + ".csv"), table_csv(tables, k));
  }
}

void run_render_depth(const TriangleMesh& mesh, const depthio::LandmarkSet& landmarks, const RenderOptions& render,
                      const RenderPaths& out) {
  if (std::filesystem::absolute(out.landmarks).lexically_normal() ==
      std::filesystem::absolute(depthio::sidecar_path(out.depth)).lexically_normal()) {
    throw Error(ErrorCode::InvalidArgument, "landmark output would overwrite the intrinsics sidecar " +
                                                depthio::sidecar_path(out.depth).string());
  }
  const auto r = render_depth(mesh, landmarks, render);
  for (const auto& p : {out.depth, out.landmarks}) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  }
  depthio::save_depth(r.frame, out.depth);
  depthio::save_landmarks(r.pixel_landmarks, out.landmarks);
}

}  // namespace facehal::pipeline
