#include "geometry/mesh.hpp"

#include "common/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace facehal::geometry {

void validate(const TriangleMesh& mesh) {
  const auto n = static_cast<long long>(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    if (!mesh.vertices[i].allFinite()) {
      throw Error(ErrorCode::MalformedMesh, "non-finite coordinate at vertex " + std::to_string(i));
    }
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (int idx : mesh.triangles[t]) {
      if (idx < 0 || idx >= n) {
        throw Error(ErrorCode::MalformedMesh, "triangle " + std::to_string(t) +
                                                  " references vertex " + std::to_string(idx) +
                                                  " of a " + std::to_string(n) + "-vertex mesh");
      }
    }
  }
  if (!mesh.normals.empty()) {
    if (mesh.normals.size() != mesh.vertices.size()) {
      throw Error(ErrorCode::MalformedMesh, "normal count differs from vertex count");
    }
    for (std::size_t i = 0; i < mesh.normals.size(); ++i) {
      const double len = mesh.normals[i].norm();
      if (!mesh.normals[i].allFinite() || (len != 0.0 && std::abs(len - 1.0) > 1e-6)) {
        throw Error(ErrorCode::MalformedMesh, "normal " + std::to_string(i) + " is not unit length");
      }
    }
  }
}

double triangle_area(const TriangleMesh& mesh, int tri) {
  const auto& t = mesh.triangles[static_cast<std::size_t>(tri)];
  const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
  const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
  const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
  return 0.5 * (b - a).cross(c - a).norm();
}

Vec3 face_normal(const TriangleMesh& mesh, int tri) {
  const auto& t = mesh.triangles[static_cast<std::size_t>(tri)];
  const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
  const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
  const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
  const Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

std::size_t drop_degenerate_triangles(TriangleMesh& mesh) {
  const std::size_t before = mesh.triangles.size();
  std::vector<Triangle> kept;
  kept.reserve(before);
  for (std::size_t t = 0; t < before; ++t) {
    const auto& tri = mesh.triangles[t];
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
    if (triangle_area(mesh, static_cast<int>(t)) <= kDegenerateAreaMm2) continue;
    kept.push_back(tri);
  }
  mesh.triangles = std::move(kept);
  return before - mesh.triangles.size();
}

AxisAlignedBox bounding_box(const TriangleMesh& mesh) {
  AxisAlignedBox box;
  for (const auto& v : mesh.vertices) box.extend(v);
  return box;
}

TriangleMesh compute_vertex_normals(TriangleMesh mesh) {
  if (mesh.triangles.empty()) {
    throw Error(ErrorCode::EmptyMesh, "cannot compute normals of a mesh without triangles");
  }
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
    // Cross product length is twice the area, so this is area weighting.
    const Vec3 n = (b - a).cross(c - a);
    for (int idx : t) acc[static_cast<std::size_t>(idx)] += n;
  }
  for (auto& n : acc) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }
  mesh.normals = std::move(acc);
  return mesh;
}

std::vector<double> vertex_areas(const TriangleMesh& mesh) {
  std::vector<double> area(mesh.vertices.size(), 0.0);
  for (const auto& t : mesh.triangles) {
    std::array<Vec3, 3> p;
    for (int k = 0; k < 3; ++k) p[static_cast<std::size_t>(k)] = mesh.vertices[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])];
    const double tri_area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
    if (tri_area <= 0.0) continue;
    std::array<double, 3> dots{};
    bool obtuse = false;
    for (int k = 0; k < 3; ++k) {
      const Vec3& o = p[static_cast<std::size_t>(k)];
      const Vec3 e1 = p[static_cast<std::size_t>((k + 1) % 3)] - o;
      const Vec3 e2 = p[static_cast<std::size_t>((k + 2) % 3)] - o;
      dots[static_cast<std::size_t>(k)] = e1.dot(e2);
      if (dots[static_cast<std::size_t>(k)] < 0.0) obtuse = true;
    }
    for (int k = 0; k < 3; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      double share = 0.0;
      if (obtuse) {
        share = dots[ku] < 0.0 ? tri_area / 2.0 : tri_area / 4.0;
      } else {
        // Voronoi region: 1/8 * (|e_kj|^2 cot(angle at i) + |e_ki|^2 cot(angle at j)).
        const auto j = static_cast<std::size_t>((k + 1) % 3);
        const auto i = static_cast<std::size_t>((k + 2) % 3);
        const double cot_i = dots[i] / (2.0 * tri_area);
        const double cot_j = dots[j] / (2.0 * tri_area);
        share = ((p[ku] - p[j]).squaredNorm() * cot_i + (p[ku] - p[i]).squaredNorm() * cot_j) / 8.0;
      }
      area[static_cast<std::size_t>(t[ku])] += share;
    }
  }
  return area;
}

Vec3 point_at(const TriangleMesh& mesh, const BarycentricLocation& loc) {
  const auto& t = mesh.triangles.at(static_cast<std::size_t>(loc.triangle));
  return loc.weights[0] * mesh.vertices[static_cast<std::size_t>(t[0])] +
         loc.weights[1] * mesh.vertices[static_cast<std::size_t>(t[1])] +
         loc.weights[2] * mesh.vertices[static_cast<std::size_t>(t[2])];
}

Vec3 interpolate_normal(const TriangleMesh& mesh, const BarycentricLocation& loc) {
  if (!mesh.has_normals()) {
    throw Error(ErrorCode::MissingNormals, "mesh has no per-vertex normals");
  }
  if (loc.triangle < 0 || static_cast<std::size_t>(loc.triangle) >= mesh.triangles.size()) {
    throw Error(ErrorCode::InvalidArgument, "barycentric location outside mesh");
  }
  const auto& t = mesh.triangles[static_cast<std::size_t>(loc.triangle)];
  const Vec3 n = loc.weights[0] * mesh.normals[static_cast<std::size_t>(t[0])] +
                 loc.weights[1] * mesh.normals[static_cast<std::size_t>(t[1])] +
                 loc.weights[2] * mesh.normals[static_cast<std::size_t>(t[2])];
  const double len = n.norm();
  if (!(len >= 1e-9)) {
    throw Error(ErrorCode::DegenerateResult, "interpolated normal vanishes");
  }
  return n / len;
}

std::vector<std::array<int, 2>> unique_edges(const TriangleMesh& mesh) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)];
      const int b = t[static_cast<std::size_t>((k + 1) % 3)];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<bool> boundary_vertices(const TriangleMesh& mesh) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)];
      const int b = t[static_cast<std::size_t>((k + 1) % 3)];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  std::vector<bool> boundary(mesh.vertices.size(), false);
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i;
    while (j < edges.size() && edges[j] == edges[i]) ++j;
    if (j - i == 1) {
      boundary[static_cast<std::size_t>(edges[i][0])] = true;
      boundary[static_cast<std::size_t>(edges[i][1])] = true;
    }
    i = j;
  }
  return boundary;
}

std::vector<std::vector<int>> vertex_neighbors(const TriangleMesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.vertices.size());
  for (const auto& e : unique_edges(mesh)) {
    adj[static_cast<std::size_t>(e[0])].push_back(e[1]);
    adj[static_cast<std::size_t>(e[1])].push_back(e[0]);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

TriangleMesh transformed(const TriangleMesh& mesh, const Mat3& rotation, const Vec3& translation,
                         double scale) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = scale * (rotation * v) + translation;
  for (auto& n : out.normals) n = rotation * n;
  return out;
}

}  // namespace facehal::geometry
