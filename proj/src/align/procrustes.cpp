#include "align/procrustes.hpp"

#include "common/error.hpp"

#include <Eigen/SVD>

namespace facehal::align {

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.scale = 1.0 / scale;
  inv.translation = -inv.scale * (inv.rotation * translation);
  return inv;
}

RigidTransform procrustes(std::span<const Vec3> source, std::span<const Vec3> target, bool with_scale) {
  if (source.size() != target.size()) {
    throw Error(ErrorCode::InvalidArgument, "procrustes needs equal point counts");
  }
  const std::size_t n = source.size();
  if (n < 3) throw Error(ErrorCode::DegenerateConfiguration, "procrustes needs at least 3 points");

  Vec3 mu_s = Vec3::Zero(), mu_t = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_s += source[i];
    mu_t += target[i];
  }
  mu_s /= static_cast<double>(n);
  mu_t /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  Mat3 src_scatter = Mat3::Zero();
  double src_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 s = source[i] - mu_s;
    const Vec3 t = target[i] - mu_t;
    cov += t * s.transpose();
    src_scatter += s * s.transpose();
    src_var += s.squaredNorm();
  }

  // Collinear (or coincident) sources leave the rotation about the line free.
  const Eigen::JacobiSVD<Mat3> scatter_svd(src_scatter);
  const Vec3 sv = scatter_svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw Error(ErrorCode::DegenerateConfiguration, "source points are collinear");
  }

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 s_diag = Vec3::Ones();
  if (u.determinant() * v.determinant() < 0.0) s_diag(2) = -1.0;

  RigidTransform xf;
  xf.rotation = u * s_diag.asDiagonal() * v.transpose();
  xf.scale = with_scale ? svd.singularValues().dot(s_diag) / src_var : 1.0;
  xf.translation = mu_t - xf.scale * (xf.rotation * mu_s);
  return xf;
}

double procrustes_residual(const RigidTransform& xf, std::span<const Vec3> source, std::span<const Vec3> target) {
  double sum = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) sum += (xf.apply(source[i]) - target[i]).squaredNorm();
  return sum;
}

TriangleMesh apply(const RigidTransform& xf, const TriangleMesh& mesh) {
  return geometry::transformed(mesh, xf.rotation, xf.translation, xf.scale);
}

}  // namespace facehal::align
