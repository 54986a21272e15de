#include "features/pseudo_landmarks.hpp"

#include "common/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace facehal::features {
namespace {

// Section vertices are either an original mesh vertex lying on the plane or
// an interior crossing of an edge. Keys make shared crossings coincide.
using NodeKey = std::pair<int, int>;

NodeKey vertex_node(int v) { return {v, -1}; }
NodeKey edge_node(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

struct Section {
  std::vector<NodeKey> keys;
  std::vector<Vec3> points;
  std::vector<std::vector<int>> adj;

  int node(const NodeKey& key, const Vec3& p, std::map<NodeKey, int>& ids) {
    auto [it, inserted] = ids.emplace(key, static_cast<int>(points.size()));
    if (inserted) {
      keys.push_back(key);
      points.push_back(p);
      adj.emplace_back();
    }
    return it->second;
  }

  void link(int a, int b) {
    if (a == b) return;
    auto& la = adj[static_cast<std::size_t>(a)];
    if (std::find(la.begin(), la.end(), b) != la.end()) return;
    la.push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
};

Section slice(const TriangleMesh& mesh, const std::vector<double>& height, double level) {
  Section s;
  std::map<NodeKey, int> ids;
  for (const auto& t : mesh.triangles) {
    std::array<double, 3> d{};
    for (std::size_t k = 0; k < 3; ++k) d[k] = height[static_cast<std::size_t>(t[k])] - level;
    // Vertices on the plane count as the non-negative side, so every edge
    // crossing is half-open and each section segment comes from one triangle.
    std::vector<int> hits;
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t j = (k + 1) % 3;
      const int a = t[k];
      const int b = t[j];
      const bool na = d[k] < 0.0;
      const bool nb = d[j] < 0.0;
      if (na == nb) continue;
      const double da = d[k];
      const double db = d[j];
      const Vec3& pa = mesh.vertices[static_cast<std::size_t>(a)];
      const Vec3& pb = mesh.vertices[static_cast<std::size_t>(b)];
      if (da == 0.0) {
        hits.push_back(s.node(vertex_node(a), pa, ids));
      } else if (db == 0.0) {
        hits.push_back(s.node(vertex_node(b), pb, ids));
      } else {
        const double u = da / (da - db);
        hits.push_back(s.node(edge_node(a, b), pa + u * (pb - pa), ids));
      }
    }
    if (hits.size() == 2) s.link(hits[0], hits[1]);
  }
  return s;
}

// Connected pieces of the section graph as ordered polylines; `closed` marks
// loops (first point repeated implicitly).
struct Piece {
  std::vector<Vec3> points;
  bool closed = false;
};

std::vector<Piece> pieces(const Section& s) {
  const std::size_t count = s.points.size();
  std::vector<bool> seen(count, false);
  std::vector<Piece> out;
  auto walk = [&](int start) {
    Piece p;
    int prev = -1;
    int cur = start;
    while (true) {
      seen[static_cast<std::size_t>(cur)] = true;
      p.points.push_back(s.points[static_cast<std::size_t>(cur)]);
      int next = -1;
      for (int nb : s.adj[static_cast<std::size_t>(cur)]) {
        if (nb == prev) continue;
        if (nb == start && p.points.size() > 2) {
          p.closed = true;
          break;
        }
        if (!seen[static_cast<std::size_t>(nb)]) {
          next = nb;
          break;
        }
      }
      if (next < 0) break;
      prev = cur;
      cur = next;
    }
    return p;
  };
  // Open chains first, started from an endpoint; what remains are loops.
  for (std::size_t i = 0; i < count; ++i) {
    if (!seen[i] && s.adj[i].size() == 1) out.push_back(walk(static_cast<int>(i)));
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!seen[i]) out.push_back(walk(static_cast<int>(i)));
  }
  return out;
}

double polyline_length(const std::vector<Vec3>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

double mean_z(const std::vector<Vec3>& pts) {
  double len = 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double l = (pts[i] - pts[i - 1]).norm();
    acc += l * 0.5 * (pts[i].z() + pts[i - 1].z());
    len += l;
  }
  return len > 0.0 ? acc / len : pts.front().z();
}

// Front-facing polyline of a piece, ordered by increasing x.
std::vector<Vec3> front_contour(const Piece& piece) {
  std::vector<Vec3> line;
  if (!piece.closed) {
    line = piece.points;
  } else {
    const auto& p = piece.points;
    const std::size_t k = p.size();
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (std::size_t i = 1; i < k; ++i) {
      if (p[i].x() < p[lo].x()) lo = i;
      if (p[i].x() > p[hi].x()) hi = i;
    }
    std::vector<Vec3> forward;
    std::vector<Vec3> backward;
    for (std::size_t i = lo;; i = (i + 1) % k) {
      forward.push_back(p[i]);
      if (i == hi) break;
    }
    for (std::size_t i = lo;; i = (i + k - 1) % k) {
      backward.push_back(p[i]);
      if (i == hi) break;
    }
    line = mean_z(forward) >= mean_z(backward) ? std::move(forward) : std::move(backward);
  }
  if (line.front().x() > line.back().x()) std::reverse(line.begin(), line.end());
  return line;
}

// n points at uniform arc length along `line`.
std::vector<Vec3> resample(const std::vector<Vec3>& line, int n) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  const double total = polyline_length(line);
  if (total <= 0.0 || line.size() == 1) {
    out.assign(static_cast<std::size_t>(n), line.front());
    return out;
  }
  std::size_t seg = 1;
  double walked = 0.0;
  for (int i = 0; i < n; ++i) {
    const double target = n == 1 ? 0.5 * total : total * static_cast<double>(i) / static_cast<double>(n - 1);
    while (seg + 1 < line.size() && walked + (line[seg] - line[seg - 1]).norm() < target) {
      walked += (line[seg] - line[seg - 1]).norm();
      ++seg;
    }
    const double l = (line[seg] - line[seg - 1]).norm();
    const double u = l > 0.0 ? std::clamp((target - walked) / l, 0.0, 1.0) : 0.0;
    out.push_back(line[seg - 1] + u * (line[seg] - line[seg - 1]));
  }
  return out;
}

double mean_x(const std::vector<Vec3>& pts) {
  double acc = 0.0;
  for (const auto& p : pts) acc += p.x();
  return acc / static_cast<double>(pts.size());
}

}  // namespace

PseudoLandmarkGrid sample_pseudo_landmarks(const TriangleMesh& mesh, const Vec3& sellion, const Vec3& chin, int m,
                                           int n) {
  if (m < 0 || n < 1) throw Error(ErrorCode::InvalidArgument, "pseudo-landmark grid needs m >= 0 and n >= 1");
  const Vec3 axis = chin - sellion;
  const double length = axis.norm();
  if (!(length > 0.0)) throw Error(ErrorCode::InvalidArgument, "sellion and chin coincide");
  const Vec3 dir = axis / length;

  std::vector<double> height(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) height[v] = dir.dot(mesh.vertices[v] - sellion);

  PseudoLandmarkGrid grid;
  grid.m = m;
  grid.n = n;
  const int rows = m + 2;
  grid.points.resize(static_cast<std::size_t>(rows * n));
  grid.filled_rows.assign(static_cast<std::size_t>(rows), true);
  std::vector<double> level(static_cast<std::size_t>(rows));

  for (int r = 0; r < rows; ++r) {
    level[static_cast<std::size_t>(r)] = length * static_cast<double>(r) / static_cast<double>(rows - 1);
    const auto parts = pieces(slice(mesh, height, level[static_cast<std::size_t>(r)]));
    if (parts.empty()) continue;
    std::vector<std::vector<Vec3>> lines;
    for (const auto& p : parts) lines.push_back(front_contour(p));
    std::stable_sort(lines.begin(), lines.end(),
                     [](const auto& a, const auto& b) { return mean_x(a) < mean_x(b); });
    std::vector<Vec3> chain;
    for (const auto& l : lines) chain.insert(chain.end(), l.begin(), l.end());
    const auto samples = resample(chain, n);
    std::copy(samples.begin(), samples.end(), grid.points.begin() + r * n);
    grid.filled_rows[static_cast<std::size_t>(r)] = false;
  }

  for (int r = 0; r < rows; ++r) {
    if (!grid.filled_rows[static_cast<std::size_t>(r)]) continue;
    int source = -1;
    for (int d = 1; d < rows && source < 0; ++d) {
      for (int cand : {r - d, r + d}) {
        if (cand >= 0 && cand < rows && !grid.filled_rows[static_cast<std::size_t>(cand)]) {
          source = cand;
          break;
        }
      }
    }
    if (source < 0) throw Error(ErrorCode::EmptySection, "no slicing plane meets the mesh");
    const Vec3 shift = (level[static_cast<std::size_t>(r)] - level[static_cast<std::size_t>(source)]) * dir;
    for (int c = 0; c < n; ++c) {
      grid.points[static_cast<std::size_t>(r * n + c)] = grid.points[static_cast<std::size_t>(source * n + c)] + shift;
    }
  }
  return grid;
}

double pts_distance(const PseudoLandmarkGrid& a, const PseudoLandmarkGrid& b) {
  if (a.m != b.m || a.n != b.n || a.points.size() != b.points.size()) {
    throw Error(ErrorCode::ShapeMismatch, "pseudo-landmark grids differ in shape");
  }
  double sum = 0.0;
  int common = 0;
  for (int r = 0; r < a.rows(); ++r) {
    if (a.filled_rows[static_cast<std::size_t>(r)] || b.filled_rows[static_cast<std::size_t>(r)]) continue;
    ++common;
    for (int c = 0; c < a.n; ++c) sum += (a.at(r, c) - b.at(r, c)).squaredNorm();
  }
  if (common == 0) return std::numeric_limits<double>::infinity();
  return sum * static_cast<double>(a.rows()) / static_cast<double>(common);
}

}  // namespace facehal::features
