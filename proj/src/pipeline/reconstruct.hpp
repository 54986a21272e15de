#pragma once

#include "align/dense_correspond.hpp"
#include "align/procrustes.hpp"
#include "dataset/database.hpp"
#include "depthio/depth_frame.hpp"
#include "depthio/landmarks.hpp"
#include "fusion/fusion.hpp"
#include "pipeline/config.hpp"
#include "retrieval/index.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace facehal::pipeline {

inline constexpr std::array<std::string_view, 4> kStageNames = {"preprocess", "registration", "retrieval", "merging"};

/// Wall-clock seconds per stage, in kStageNames order.
struct Timing {
  std::array<double, 4> seconds{};
};

struct Preprocessed {
  /// Back-projected face crop in camera coordinates.
  TriangleMesh raw;
  /// `raw` after curvature flow.
  TriangleMesh smoothed;
  /// Lifted fiducials snapped to the smoothed surface, camera coordinates.
  depthio::LandmarkSet landmarks;
};

/// Hole filling, back-projection of the landmark crop, landmark lifting and
/// curvature-flow smoothing.
Preprocessed preprocess(const depthio::DepthFrame& frame, const depthio::LandmarkSet& pixel_landmarks,
                        const PipelineConfig& cfg);

struct RegisteredQuery {
  /// Camera to generic-mesh coordinates.
  align::RigidTransform to_generic;
  /// Smoothed input and its landmarks in generic coordinates.
  TriangleMesh input;
  depthio::LandmarkSet landmarks;
  align::DenseCorrespondence correspondence;
  /// Part masks carried onto `input` vertices.
  retrieval::PartMasks input_masks;
  Vec3 sellion = Vec3::Zero();
  Vec3 chin = Vec3::Zero();
};

/// Similarity alignment from the internal landmarks, then dense
/// correspondence of the generic mesh onto the input.
RegisteredQuery register_query(const dataset::Database& db, const Preprocessed& pre, const PipelineConfig& cfg);

/// Database mesh `entry` warped so its fiducials land on `target`.
TriangleMesh warp_entry(const dataset::Database& db, std::size_t entry, const depthio::LandmarkSet& target);

/// Every database mesh warped so its fiducials land on the query's.
std::vector<TriangleMesh> warp_database(const dataset::Database& db, const depthio::LandmarkSet& target);

/// Every database mesh moved by the similarity (rigid without scale) that
/// best maps its internal fiducials onto `target`.
std::vector<TriangleMesh> align_database(const dataset::Database& db, const depthio::LandmarkSet& target,
                                         bool with_scale);

struct QueryDescriptors {
  std::vector<features::PartDescriptor> input;
  /// [entry][part], parts in mask order.
  std::vector<std::vector<features::PartDescriptor>> database;
};

/// Input descriptors plus database descriptors, either from `aligned`
/// (one mesh per entry, from warp_database or align_database) or (no_warp)
/// from the index.
QueryDescriptors describe_query(const dataset::Database& db, const RegisteredQuery& query,
                                const std::vector<TriangleMesh>& aligned, const PipelineConfig& cfg,
                                const retrieval::DescriptorIndex* index = nullptr);

/// One ranking per part in mask order.
std::vector<retrieval::RetrievalResult> rank_parts(const dataset::Database& db, const QueryDescriptors& d,
                                                   const PipelineConfig& cfg, retrieval::DistanceMode mode);

struct PartSource {
  std::string part;
  std::string id;
  double mean_normal_change_deg = 0.0;
};

struct MergeResult {
  /// Output mesh in camera coordinates.
  TriangleMesh mesh;
  /// Transferred target normals per output vertex, in the output frame.
  fusion::NormalField field;
  std::vector<PartSource> sources;
  std::size_t matched_vertices = 0;
};

/// Normal transfer from the chosen sources onto G', then position/normal
/// fusion against the input. `sources` holds one mesh per part (generic
/// coordinates); an empty list keeps the G' normals (generic-only baseline).
MergeResult merge(const dataset::Database& db, const RegisteredQuery& query,
                  const std::vector<const TriangleMesh*>& sources, const std::vector<std::string>& source_ids,
                  const PipelineConfig& cfg);

struct Reconstruction {
  MergeResult merged;
  RegisteredQuery query;
  std::vector<retrieval::RetrievalResult> rankings;
  Timing timing;
};

/// The full neutral pipeline on an in-memory frame.
Reconstruction reconstruct(const dataset::Database& db, const depthio::DepthFrame& frame,
                           const depthio::LandmarkSet& pixel_landmarks, const PipelineConfig& cfg,
                           const retrieval::DescriptorIndex* index = nullptr);

/// Reuses the neutral matches: the matched meshes are warped toward the
/// expression frame, which gets its own G'.
MergeResult merge_expression(const dataset::Database& db, const std::vector<std::string>& neutral_ids,
                             const depthio::DepthFrame& frame, const depthio::LandmarkSet& pixel_landmarks,
                             const PipelineConfig& cfg, Timing* timing = nullptr);

/// Merge report as canonical JSON.
std::string merge_report_json(const Reconstruction& r);
std::string timing_json(const Timing& t);

struct ReconstructPaths {
  std::filesystem::path depth;
  std::filesystem::path landmarks;
  std::filesystem::path expression_depth;
  std::filesystem::path expression_landmarks;
};

/// File-level reconstruct: writes reconstruction.ply, merge_report.json and
/// timing.json (plus expression.ply when an expression pair is given) into
/// cfg.output_dir. Errors carry the failing stage name.
void run_reconstruct(const ReconstructPaths& paths, const PipelineConfig& cfg);

/// Descriptor index for the database at cfg.database, written to `out`.
void run_build_index(const PipelineConfig& cfg, const std::filesystem::path& out);

/// Mean angle in degrees between `mesh` normals and the normals of the
/// closest points on `reference`, over vertices with positive `weights`
/// and within `max_distance_mm` of the reference.
double mean_normal_error_deg(const TriangleMesh& mesh, const TriangleMesh& reference,
                             const std::vector<double>& weights, double max_distance_mm = 15.0);

}  // namespace facehal::pipeline
