#pragma once

#include "geometry/mesh.hpp"

#include <memory>
#include <vector>

namespace facehal::geometry {

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  std::array<double, 3> weights{1.0, 0.0, 0.0};
  double squared_distance = 0.0;
};

/// Closest point on triangle (a, b, c) to p, with barycentric weights that
/// are non-negative and sum to one.
ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct NearestTriangle {
  BarycentricLocation location;
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
};

/// Axis-aligned bounding-volume hierarchy over the triangles of a mesh.
/// Queries return exactly what an exhaustive scan ordered by
/// (squared distance, triangle index) returns.
class TriangleBvh {
 public:
  explicit TriangleBvh(const TriangleMesh& mesh);

  NearestTriangle nearest(const Vec3& query) const;
  std::size_t triangle_count() const { return tri_vertices_.size(); }

 private:
  struct Node {
    AxisAlignedBox box;
    int left = -1;   // child index, or -1 for a leaf
    int right = -1;
    int first = 0;   // leaf range into order_
    int count = 0;
  };

  int build(int first, int count, std::vector<Vec3>& centroids);

  std::vector<std::array<Vec3, 3>> tri_vertices_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// One-shot convenience wrapper; prefer a reused TriangleBvh for many queries.
NearestTriangle nearest_triangle(const TriangleMesh& mesh, const Vec3& query);

/// Kd-tree over a point set for nearest-vertex queries. Ties resolve to the
/// lowest point index.
class PointIndex {
 public:
  explicit PointIndex(std::vector<Vec3> points);

  /// Returns (index, squared distance); index -1 when empty.
  std::pair<int, double> nearest(const Vec3& query) const;

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };
  int build(std::vector<int>::iterator begin, std::vector<int>::iterator end, int depth);
  void search(int node, const Vec3& q, int& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace facehal::geometry
