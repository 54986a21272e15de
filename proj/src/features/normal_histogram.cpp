#include "features/normal_histogram.hpp"

#include "common/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace facehal::features {

std::pair<double, double> azimuth_elevation(const Vec3& normal) {
  const double len = normal.norm();
  if (!(len > 0.0) || !std::isfinite(len)) throw Error(ErrorCode::ZeroVector, "normal has zero or non-finite length");
  const Vec3 u = normal / len;
  const double horizontal = std::hypot(u.x(), u.z());
  const double theta = horizontal == 0.0 ? 0.0 : std::atan2(u.z(), u.x());
  const double phi = horizontal == 0.0 ? std::copysign(std::numbers::pi / 2, u.y()) : std::atan(u.y() / horizontal);
  return {theta, phi};
}

std::pair<int, int> ae_bin(double theta, double phi, int theta_bins, int phi_bins) {
  using std::numbers::pi;
  const int t = static_cast<int>(std::floor((theta + pi) / (2.0 * pi) * theta_bins));
  const int p = static_cast<int>(std::floor((phi + pi / 2) / pi * phi_bins));
  return {std::clamp(t, 0, theta_bins - 1), std::clamp(p, 0, phi_bins - 1)};
}

AEHistogram ae_histogram(const TriangleMesh& mesh, const retrieval::PartMask& mask) {
  return ae_histogram(mesh, mask, geometry::vertex_areas(mesh));
}

AEHistogram ae_histogram(const TriangleMesh& mesh, const retrieval::PartMask& mask,
                         const std::vector<double>& vertex_areas) {
  if (mask.vertices.empty()) throw Error(ErrorCode::EmptyPart, "mask '" + mask.name + "' has no vertices");
  if (!mesh.has_normals()) throw Error(ErrorCode::MissingNormals, "histogram needs vertex normals");
  AEHistogram h;
  double total = 0.0;
  for (std::size_t i = 0; i < mask.vertices.size(); ++i) {
    const auto v = static_cast<std::size_t>(mask.vertices[i]);
    if (v >= mesh.vertices.size()) {
      throw Error(ErrorCode::TopologyMismatch, "mask '" + mask.name + "' indexes vertex " + std::to_string(v));
    }
    const Vec3& n = mesh.normals[v];
    if (n.squaredNorm() == 0.0) continue;
    const double w = mask.weights[i] * vertex_areas[v];
    if (!(w > 0.0)) continue;
    const auto [theta, phi] = azimuth_elevation(n);
    const auto [tb, pb] = ae_bin(theta, phi, h.theta_bins, h.phi_bins);
    h.bins[static_cast<std::size_t>(tb * h.phi_bins + pb)] += w;
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyPart, "mask '" + mask.name + "' carries no weight");
  for (auto& b : h.bins) b /= total;
  return h;
}

double chi_square(const AEHistogram& h, const AEHistogram& g) {
  if (h.theta_bins != g.theta_bins || h.phi_bins != g.phi_bins || h.bins.size() != g.bins.size()) {
    throw Error(ErrorCode::ShapeMismatch, "histograms differ in shape");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < h.bins.size(); ++i) {
    const double s = h.bins[i] + g.bins[i];
    if (s == 0.0) continue;
    const double d = h.bins[i] - g.bins[i];
    sum += d * d / s;
  }
  return std::min(sum, 2.0);
}

}  // namespace facehal::features
