#pragma once

#include "geometry/mesh.hpp"
#include "retrieval/part_mask.hpp"

#include <vector>

namespace facehal::fusion {

inline constexpr int kOriginalTag = -1;

/// Target normal per vertex plus where it came from: an index into the
/// part list, or kOriginalTag.
struct NormalField {
  std::vector<Vec3> normals;
  std::vector<int> tags;
};

/// Spherical interpolation between unit vectors; t = 0 gives `a`.
Vec3 slerp(const Vec3& a, const Vec3& b, double t);

/// Copies part normals from `sources[p]` (one per mask, already in the
/// target frame) onto `target` via nearest-triangle interpolation. Interior
/// vertices (weight 1) take the part normal; feathered vertices slerp from
/// their own normal toward the weighted part normal by the summed weight.
/// Sources farther than `max_distance_mm` are ignored for that vertex.
/// Throws MissingSource when a part lacks a source, MissingNormals when the
/// target or a source has none.
NormalField transfer_normals(const TriangleMesh& target, const std::vector<const TriangleMesh*>& sources,
                             const retrieval::PartMasks& masks, double max_distance_mm = 15.0);

struct FusionWeights {
  double lambda_pos = 1.0;
  double lambda_norm = 20.0;
};

/// Minimizes
///   lambda_pos * sum_v w_v |x_v - p_v|^2 + lambda_norm * sum_(u,v) ((x_u - x_v) . n_uv)^2
/// where n_uv is the normalized mean of the two endpoint normals. Solved by
/// CG to relative residual 1e-8; vertex count and order follow `targets`.
/// Throws InvalidArgument for bad weights, SingularSystem when lambda_pos is
/// 0 (translations along the normals are free), SolverFailure.
std::vector<Vec3> fuse_positions(const TriangleMesh& mesh, const std::vector<Vec3>& targets,
                                 const std::vector<double>& point_weights, const std::vector<Vec3>& normals,
                                 const FusionWeights& w);

/// Unit point weights with targets at the current positions; the result gets
/// recomputed normals.
TriangleMesh fuse(const TriangleMesh& positions, const NormalField& normals, const FusionWeights& w = {});

double fusion_objective(const TriangleMesh& mesh, const std::vector<Vec3>& x, const std::vector<Vec3>& targets,
                        const std::vector<double>& point_weights, const std::vector<Vec3>& normals,
                        const FusionWeights& w);

}  // namespace facehal::fusion
