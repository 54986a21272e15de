#include "align/warp.hpp"

#include "common/error.hpp"

#include <Eigen/Dense>

namespace facehal::align {

Vec3 WarpField::displacement(const Vec3& p) const {
  Vec3 d = affine.row(0).transpose() + affine.bottomRows<3>().transpose() * p;
  if (!affine_only) {
    for (std::size_t i = 0; i < control_points.size(); ++i) {
      d += (p - control_points[i]).norm() * kernel_weights.row(static_cast<Eigen::Index>(i)).transpose();
    }
  }
  return d;
}

WarpField fit_warp(std::span<const Vec3> source, std::span<const Vec3> target) {
  if (source.size() != target.size()) {
    throw Error(ErrorCode::InvalidArgument, "warp needs equal landmark counts");
  }
  if (source.empty()) throw Error(ErrorCode::DegenerateConfiguration, "warp needs landmarks");

  WarpField field;
  std::vector<Vec3> disp;
  for (std::size_t i = 0; i < source.size(); ++i) {
    bool duplicate = false;
    for (const auto& c : field.control_points) {
      if ((c - source[i]).norm() < 1e-6) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    field.control_points.push_back(source[i]);
    disp.push_back(target[i] - source[i]);
  }
  const auto n = static_cast<Eigen::Index>(field.control_points.size());

  Eigen::MatrixXd poly(n, 4);
  Eigen::MatrixX3d rhs(n, 3);
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : field.control_points) centroid += c;
  centroid /= static_cast<double>(n);
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3& c = field.control_points[static_cast<std::size_t>(i)];
    poly.row(i) << 1.0, c.x(), c.y(), c.z();
    rhs.row(i) = disp[static_cast<std::size_t>(i)].transpose();
    scatter += (c - centroid) * (c - centroid).transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const bool coplanar = n < 4 || eig.eigenvalues()(0) <= 1e-12 * eig.eigenvalues()(2);

  if (coplanar) {
    field.affine_only = true;
    field.affine = poly.completeOrthogonalDecomposition().solve(rhs);
    field.kernel_weights = Eigen::MatrixX3d::Zero(n, 3);
    return field;
  }

  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(n + 4, n + 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = (field.control_points[static_cast<std::size_t>(i)] -
                        field.control_points[static_cast<std::size_t>(j)]).norm();
      system(i, j) = r;
      system(j, i) = r;
    }
  }
  system.topRightCorner(n, 4) = poly;
  system.bottomLeftCorner(4, n) = poly.transpose();
  Eigen::MatrixX3d full_rhs = Eigen::MatrixX3d::Zero(n + 4, 3);
  full_rhs.topRows(n) = rhs;
  const Eigen::MatrixX3d sol = system.fullPivLu().solve(full_rhs);
  field.kernel_weights = sol.topRows(n);
  field.affine = sol.bottomRows<4>();
  return field;
}

WarpResult landmark_warp(const TriangleMesh& mesh, std::span<const Vec3> source, std::span<const Vec3> target) {
  for (const auto& v : mesh.vertices) {
    if (!v.allFinite()) throw Error(ErrorCode::InvalidArgument, "mesh has non-finite vertices");
  }
  const WarpField field = fit_warp(source, target);
  WarpResult out;
  out.affine_only = field.affine_only;
  out.mesh = mesh;
  for (auto& v : out.mesh.vertices) v = field(v);
  if (mesh.has_normals() && !mesh.triangles.empty()) out.mesh = geometry::compute_vertex_normals(std::move(out.mesh));
  return out;
}

}  // namespace facehal::align
