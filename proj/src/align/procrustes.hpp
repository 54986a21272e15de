#pragma once

#include "geometry/mesh.hpp"

#include <span>
#include <vector>

namespace facehal::align {

/// p -> scale * rotation * p + translation, with det(rotation) = +1.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  RigidTransform inverse() const;
};

/// Least-squares similarity (or rigid when `with_scale` is false) mapping
/// `source` onto `target`, from the SVD of the cross-covariance with the
/// reflection case excluded. Throws DegenerateConfiguration for fewer than
/// three points or a collinear source.
RigidTransform procrustes(std::span<const Vec3> source, std::span<const Vec3> target, bool with_scale = true);

/// Sum of squared residuals of `xf` applied to `source` against `target`.
double procrustes_residual(const RigidTransform& xf, std::span<const Vec3> source, std::span<const Vec3> target);

TriangleMesh apply(const RigidTransform& xf, const TriangleMesh& mesh);

}  // namespace facehal::align
