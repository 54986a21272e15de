#include "geometry/spatial.hpp"

#include "common/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace facehal::geometry {

ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  ClosestPoint out;
  auto finish = [&](double u, double v, double w) {
    out.weights = {u, v, w};
    out.point = u * a + v * b + w * c;
    out.squared_distance = (p - out.point).squaredNorm();
    return out;
  };
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return finish(1.0, 0.0, 0.0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return finish(0.0, 1.0, 0.0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return finish(1.0 - v, v, 0.0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return finish(0.0, 0.0, 1.0);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return finish(1.0 - w, 0.0, w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(0.0, 1.0 - w, w);
  }

  const double denom = 1.0 / (va + vb + vc);
  double v = std::max(0.0, vb * denom);
  double w = std::max(0.0, vc * denom);
  double u = std::max(0.0, 1.0 - v - w);
  const double s = u + v + w;
  return finish(u / s, v / s, w / s);
}

TriangleBvh::TriangleBvh(const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) throw Error(ErrorCode::EmptyMesh, "BVH over empty mesh");
  const std::size_t n = mesh.triangles.size();
  tri_vertices_.resize(n);
  std::vector<Vec3> centroids(n);
  for (std::size_t t = 0; t < n; ++t) {
    for (int k = 0; k < 3; ++k) {
      tri_vertices_[t][static_cast<std::size_t>(k)] =
          mesh.vertices[static_cast<std::size_t>(mesh.triangles[t][static_cast<std::size_t>(k)])];
    }
    centroids[t] = (tri_vertices_[t][0] + tri_vertices_[t][1] + tri_vertices_[t][2]) / 3.0;
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * n);
  build(0, static_cast<int>(n), centroids);
}

int TriangleBvh::build(int first, int count, std::vector<Vec3>& centroids) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  AxisAlignedBox centroid_box;
  for (int i = first; i < first + count; ++i) {
    const auto t = static_cast<std::size_t>(order_[static_cast<std::size_t>(i)]);
    for (const auto& v : tri_vertices_[t]) node.box.extend(v);
    centroid_box.extend(centroids[t]);
  }
  constexpr int kLeafSize = 4;
  if (count <= kLeafSize) {
    node.first = first;
    node.count = count;
    nodes_[static_cast<std::size_t>(index)] = node;
    return index;
  }
  int axis = 0;
  const Vec3 extent = centroid_box.max - centroid_box.min;
  if (extent.y() > extent.x()) axis = 1;
  if (extent.z() > extent[axis]) axis = 2;
  const int mid = first + count / 2;
  auto begin = order_.begin() + first;
  std::nth_element(begin, order_.begin() + mid, begin + count, [&](int a, int b) {
    const double ca = centroids[static_cast<std::size_t>(a)][axis];
    const double cb = centroids[static_cast<std::size_t>(b)][axis];
    return ca < cb || (ca == cb && a < b);
  });
  node.left = build(first, mid - first, centroids);
  node.right = build(mid, first + count - mid, centroids);
  nodes_[static_cast<std::size_t>(index)] = node;
  return index;
}

NearestTriangle TriangleBvh::nearest(const Vec3& query) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_tri = std::numeric_limits<int>::max();
  ClosestPoint best_cp;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
    if (node.box.squared_distance(query) > best_d2) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int t = order_[static_cast<std::size_t>(i)];
        const auto& tv = tri_vertices_[static_cast<std::size_t>(t)];
        const ClosestPoint cp = closest_point_on_triangle(query, tv[0], tv[1], tv[2]);
        if (cp.squared_distance < best_d2 || (cp.squared_distance == best_d2 && t < best_tri)) {
          best_d2 = cp.squared_distance;
          best_tri = t;
          best_cp = cp;
        }
      }
      continue;
    }
    const double dl = nodes_[static_cast<std::size_t>(node.left)].box.squared_distance(query);
    const double dr = nodes_[static_cast<std::size_t>(node.right)].box.squared_distance(query);
    // Push the farther child first so the nearer one is popped next.
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  NearestTriangle out;
  out.location.triangle = best_tri;
  out.location.weights = best_cp.weights;
  out.point = best_cp.point;
  out.distance = std::sqrt(best_d2);
  return out;
}

NearestTriangle nearest_triangle(const TriangleMesh& mesh, const Vec3& query) {
  return TriangleBvh(mesh).nearest(query);
}

PointIndex::PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  std::vector<int> ids(points_.size());
  std::iota(ids.begin(), ids.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(ids.begin(), ids.end(), 0);
}

int PointIndex::build(std::vector<int>::iterator begin, std::vector<int>::iterator end, int depth) {
  if (begin == end) return -1;
  const int axis = depth % 3;
  auto mid = begin + (end - begin) / 2;
  std::nth_element(begin, mid, end, [&](int a, int b) {
    const double ca = points_[static_cast<std::size_t>(a)][axis];
    const double cb = points_[static_cast<std::size_t>(b)][axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back({*mid, axis, -1, -1});
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid + 1, end, depth + 1);
  nodes_[static_cast<std::size_t>(index)].left = left;
  nodes_[static_cast<std::size_t>(index)].right = right;
  return index;
}

void PointIndex::search(int node_index, const Vec3& q, int& best, double& best_d2) const {
  if (node_index < 0) return;
  const Node& node = nodes_[static_cast<std::size_t>(node_index)];
  const Vec3& p = points_[static_cast<std::size_t>(node.point)];
  const double d2 = (p - q).squaredNorm();
  if (d2 < best_d2 || (d2 == best_d2 && node.point < best)) {
    best_d2 = d2;
    best = node.point;
  }
  const double diff = q[node.axis] - p[node.axis];
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, best, best_d2);
  if (diff * diff <= best_d2) search(far, q, best, best_d2);
}

std::pair<int, double> PointIndex::nearest(const Vec3& query) const {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, query, best, best_d2);
  return {best, best_d2};
}

}  // namespace facehal::geometry
