#pragma once

#include "geometry/mesh.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace facehal::align {

/// Scattered-data interpolant p -> p + sum_i w_i |p - c_i| + A^T [1, p].
/// The kernel |r| is the 3D biharmonic (thin-plate) radial basis, so the
/// field has no bandwidth parameter.
struct WarpField {
  std::vector<Vec3> control_points;
  Eigen::MatrixX3d kernel_weights;
  Eigen::Matrix<double, 4, 3> affine = Eigen::Matrix<double, 4, 3>::Zero();
  /// Set when the control set was coplanar (or had fewer than 4 points) and
  /// only a minimum-norm affine map was fitted.
  bool affine_only = false;

  Vec3 displacement(const Vec3& p) const;
  Vec3 operator()(const Vec3& p) const { return p + displacement(p); }
};

/// Fits the field moving each `source` point onto its `target`. Control
/// points closer than 1e-6 mm to an earlier one are dropped.
WarpField fit_warp(std::span<const Vec3> source, std::span<const Vec3> target);

struct WarpResult {
  TriangleMesh mesh;
  bool affine_only = false;
};

/// Deforms every vertex by the fitted field. Topology is unchanged; normals,
/// when present, are recomputed.
WarpResult landmark_warp(const TriangleMesh& mesh, std::span<const Vec3> source, std::span<const Vec3> target);

}  // namespace facehal::align
