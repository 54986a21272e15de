#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace facehal::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Triangle = std::array<int, 3>;

/// Indexed triangle mesh in millimeters. `normals` is either empty or holds
/// one entry per vertex; a zero vector marks a vertex with no incident
/// triangle.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec3> normals;

  bool has_normals() const { return !normals.empty() && normals.size() == vertices.size(); }
  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
};

struct BarycentricLocation {
  int triangle = -1;
  std::array<double, 3> weights{1.0, 0.0, 0.0};
};

struct AxisAlignedBox {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const AxisAlignedBox& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  bool empty() const { return (min.array() > max.array()).any(); }
  double squared_distance(const Vec3& p) const {
    return (min - p).cwiseMax(p - max).cwiseMax(0.0).squaredNorm();
  }
};

inline constexpr double kDegenerateAreaMm2 = 1e-12;

/// Checks index range, finiteness, and normal length. Throws MalformedMesh.
void validate(const TriangleMesh& mesh);

/// Removes triangles with repeated indices or area below `kDegenerateAreaMm2`.
/// Returns how many were removed.
std::size_t drop_degenerate_triangles(TriangleMesh& mesh);

double triangle_area(const TriangleMesh& mesh, int tri);
Vec3 face_normal(const TriangleMesh& mesh, int tri);
AxisAlignedBox bounding_box(const TriangleMesh& mesh);

/// Area-weighted vertex normals. Vertices with no incident triangle get the
/// zero vector.
TriangleMesh compute_vertex_normals(TriangleMesh mesh);

/// Mixed Voronoi area per vertex (obtuse triangles split per Meyer et al.).
std::vector<double> vertex_areas(const TriangleMesh& mesh);

Vec3 point_at(const TriangleMesh& mesh, const BarycentricLocation& loc);

/// Barycentric blend of the three corner normals, renormalized.
Vec3 interpolate_normal(const TriangleMesh& mesh, const BarycentricLocation& loc);

/// Undirected edges, each as (lo, hi), sorted.
std::vector<std::array<int, 2>> unique_edges(const TriangleMesh& mesh);

/// Per-vertex flag: vertex lies on an edge used by exactly one triangle.
std::vector<bool> boundary_vertices(const TriangleMesh& mesh);

/// Vertex adjacency lists (sorted, unique).
std::vector<std::vector<int>> vertex_neighbors(const TriangleMesh& mesh);

/// Applies p -> s * R * p + t to positions and R to normals.
TriangleMesh transformed(const TriangleMesh& mesh, const Mat3& rotation, const Vec3& translation,
                         double scale = 1.0);

struct MeshLoadStats {
  std::size_t dropped_degenerate = 0;
};

/// Loads OBJ (text) or binary little-endian PLY by extension.
TriangleMesh load_mesh(const std::filesystem::path& path, MeshLoadStats* stats = nullptr);

/// Saves OBJ or binary PLY by extension; PLY stores doubles.
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace facehal::geometry

namespace facehal {
using geometry::BarycentricLocation;
using geometry::Mat3;
using geometry::TriangleMesh;
using geometry::Vec3;
}  // namespace facehal
