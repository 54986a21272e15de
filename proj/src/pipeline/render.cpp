#include "pipeline/render.hpp"

#include "common/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace facehal::pipeline {

align::RigidTransform render_pose(const RenderOptions& o) {
  const double deg = std::numbers::pi / 180.0;
  const Mat3 flip = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  const Mat3 head = (Eigen::AngleAxisd(o.yaw_deg * deg, Vec3::UnitY()) *
                     Eigen::AngleAxisd(o.pitch_deg * deg, Vec3::UnitX())).toRotationMatrix();
  align::RigidTransform xf;
  xf.rotation = flip * head;
  xf.translation = Vec3(0.0, 0.0, o.distance_mm) - xf.rotation * o.center;
  return xf;
}

RenderedFrame render_depth(const TriangleMesh& mesh, const depthio::LandmarkSet& landmarks,
                           const RenderOptions& o) {
  if (o.width <= 0 || o.height <= 0) throw Error(ErrorCode::InvalidArgument, "render size must be positive");
  if (!(o.noise_mm >= 0.0) || !(o.dropout >= 0.0 && o.dropout <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "render noise must be >= 0 and dropout in [0, 1]");
  }
  RenderedFrame out;
  out.pose = render_pose(o);
  auto& f = out.frame;
  f.width = o.width;
  f.height = o.height;
  f.intrinsics = o.intrinsics;
  f.depth.assign(static_cast<std::size_t>(o.width) * static_cast<std::size_t>(o.height), 0.0);

  std::vector<Vec3> cam(mesh.vertices.size());
  std::vector<Eigen::Vector2d> px(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    cam[i] = out.pose.apply(mesh.vertices[i]);
    px[i] = depthio::project(o.intrinsics, cam[i]);
  }
  for (const auto& t : mesh.triangles) {
    const auto& a = px[static_cast<std::size_t>(t[0])];
    const auto& b = px[static_cast<std::size_t>(t[1])];
    const auto& c = px[static_cast<std::size_t>(t[2])];
    const double za = cam[static_cast<std::size_t>(t[0])].z();
    const double zb = cam[static_cast<std::size_t>(t[1])].z();
    const double zc = cam[static_cast<std::size_t>(t[2])].z();
    if (za <= 0.0 || zb <= 0.0 || zc <= 0.0) continue;
    const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (std::abs(area) < 1e-12) continue;
    const int u0 = std::max(0, static_cast<int>(std::ceil(std::min({a.x(), b.x(), c.x()}))));
    const int u1 = std::min(o.width - 1, static_cast<int>(std::floor(std::max({a.x(), b.x(), c.x()}))));
    const int v0 = std::max(0, static_cast<int>(std::ceil(std::min({a.y(), b.y(), c.y()}))));
    const int v1 = std::min(o.height - 1, static_cast<int>(std::floor(std::max({a.y(), b.y(), c.y()}))));
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const Eigen::Vector2d p(u, v);
        const double wa = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
        const double wb = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
        const double wc = 1.0 - wa - wb;
        if (wa < -1e-12 || wb < -1e-12 || wc < -1e-12) continue;
        const double z = 1.0 / (wa / za + wb / zb + wc / zc);
        double& d = f.at(u, v);
        if (d == 0.0 || z < d) d = z;
      }
    }
  }

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (auto& d : f.depth) {
    if (d == 0.0) continue;
    const double n = noise(rng);
    const double c = coin(rng);
    if (c < o.dropout) {
      d = 0.0;
      continue;
    }
    d = std::round((d + o.noise_mm * n) * 10.0) / 10.0;
  }
  depthio::clamp_to_valid_range(f);

  out.pixel_landmarks.pixel_coordinates = true;
  for (const auto& l : landmarks.points) {
    const auto p = depthio::project(o.intrinsics, out.pose.apply(l.coord));
    out.pixel_landmarks.points.push_back({l.name, Vec3(p.x(), p.y(), 0.0), l.group, l.present});
  }
  return out;
}

}  // namespace facehal::pipeline
