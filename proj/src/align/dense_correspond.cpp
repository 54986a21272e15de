#include "align/dense_correspond.hpp"

#include "align/warp.hpp"
#include "common/error.hpp"
#include "geometry/spatial.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace facehal::align {
namespace {

constexpr std::size_t kMinTargetVertices = 500;
constexpr std::size_t kMinLandmarkPairs = 4;
constexpr double kStallStepMm = 1e-6;
constexpr double kMinLineStep = 1.0 / 256.0;
constexpr int kDampingLadder = 8;
constexpr double kEdgeSlackMm = 1e-6;

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct LandmarkTerm {
  std::array<int, 3> vertices{};
  std::array<double, 3> weights{};
  Vec3 target = Vec3::Zero();
};

struct Closest {
  bool inlier = false;
  bool boundary = false;
  Vec3 point = Vec3::Zero();
  // Gradient direction of the data cost; the model step penalizes motion
  // along it only.
  Vec3 direction = Vec3::Zero();
  double distance = 0.0;
  double cost = 0.0;
};

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

// Target surface with closest-point queries that know where the surface ends.
class TargetSurface {
 public:
  explicit TargetSurface(const TriangleMesh& mesh) : mesh_(mesh), bvh_(mesh) {
    std::unordered_map<std::uint64_t, int> edge_use;
    for (const auto& t : mesh.triangles) {
      for (std::size_t k = 0; k < 3; ++k) ++edge_use[edge_key(t[k], t[(k + 1) % 3])];
    }
    boundary_vertex_.assign(mesh.vertices.size(), false);
    for (const auto& [key, count] : edge_use) {
      if (count != 1) continue;
      boundary_edges_.insert(key);
      boundary_vertex_[static_cast<std::size_t>(key >> 32)] = true;
      boundary_vertex_[static_cast<std::size_t>(key & 0xffffffffu)] = true;
    }
  }

  geometry::NearestTriangle nearest(const Vec3& p) const { return bvh_.nearest(p); }

  // Closest point and truncated point-to-plane cost. The plane normal is
  // interpolated from vertex normals, so the cost stays continuous when the
  // closest point crosses an edge or slides along the open boundary.
  Closest closest(const Vec3& p, double truncation) const {
    const auto hit = bvh_.nearest(p);
    Closest c;
    c.point = hit.point;
    c.distance = hit.distance;
    c.boundary = on_boundary(hit.location);
    c.direction = geometry::interpolate_normal(mesh_, hit.location);
    const double plane = c.direction.dot(p - hit.point);
    const double tau2 = truncation * truncation;
    c.inlier = plane * plane < tau2;
    c.cost = std::min(plane * plane, tau2);
    return c;
  }

  // Closest point on the open boundary with the offset leaving the face
  // plane: p hangs past the edge of the surface.
  bool beyond_edge(const Vec3& p, const geometry::NearestTriangle& hit) const {
    if (!on_boundary(hit.location)) return false;
    const Vec3 offset = p - hit.point;
    const Vec3 n = geometry::face_normal(mesh_, hit.location.triangle);
    return (offset - offset.dot(n) * n).norm() > kEdgeSlackMm + 1e-6 * hit.distance;
  }

  bool on_boundary(const BarycentricLocation& loc) const {
    const auto& t = mesh_.triangles[static_cast<std::size_t>(loc.triangle)];
    int zeros = 0;
    std::size_t zero_at = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      if (loc.weights[k] <= 1e-12) {
        ++zeros;
        zero_at = k;
      }
    }
    if (zeros == 0) return false;
    if (zeros >= 2) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (loc.weights[k] > 1e-12) return boundary_vertex_[static_cast<std::size_t>(t[k])];
      }
      return false;
    }
    return boundary_edges_.count(edge_key(t[(zero_at + 1) % 3], t[(zero_at + 2) % 3])) > 0;
  }

 private:
  const TriangleMesh& mesh_;
  geometry::TriangleBvh bvh_;
  std::unordered_set<std::uint64_t> boundary_edges_;
  std::vector<bool> boundary_vertex_;
};

struct Weights {
  double data;
  double smooth;
  double landmark;
};

class Registration {
 public:
  Registration(const TargetSurface& surface, std::vector<std::array<int, 2>> edges, std::vector<Vec3> rest,
               std::vector<LandmarkTerm> landmarks, double truncation)
      : surface_(surface),
        edges_(std::move(edges)),
        rest_(std::move(rest)),
        landmarks_(std::move(landmarks)),
        truncation_(truncation) {
    build_pattern();
  }

  std::vector<Closest> closest(const std::vector<Vec3>& x) const {
    std::vector<Closest> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = surface_.closest(x[i], truncation_);
    return out;
  }

  double energy(const std::vector<Vec3>& x, const Weights& w) const {
    double data = 0.0;
    for (const auto& c : closest(x)) data += c.cost;
    double smooth = 0.0;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [a, b] = edges_[e];
      smooth += ((x[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(b)]) - rest_[e]).squaredNorm();
    }
    double lm = 0.0;
    for (const auto& l : landmarks_) lm += (blend(x, l) - l.target).squaredNorm();
    return w.data * data + w.smooth * smooth + w.landmark * lm;
  }

  // Minimizer of the quadratic model around `x` (point-to-plane along each
  // cost gradient) with a proximal term `damping * |y - x|^2`.
  struct Step {
    std::vector<Vec3> y;
    // Decrease of the quadratic model from x to y.
    double predicted = 0.0;
  };

  Step model_step(const std::vector<Vec3>& x, const Weights& w, double damping) {
    const auto n = static_cast<Eigen::Index>(x.size());
    std::vector<Triplet> trip = pattern_zeros_;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
    auto add_block = [&](int i, int j, const Mat3& m) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) trip.emplace_back(3 * i + r, 3 * j + c, m(r, c));
      }
    };

    const double reg = damping + 1e-6 * std::max(w.smooth, 1.0);
    const auto corr = closest(x);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& c = corr[static_cast<std::size_t>(i)];
      Mat3 block = reg * Mat3::Identity();
      Vec3 b = reg * x[static_cast<std::size_t>(i)];
      if (c.inlier) {
        const Mat3 nn = c.direction * c.direction.transpose();
        block += w.data * nn;
        b += w.data * nn * c.point;
      }
      add_block(static_cast<int>(i), static_cast<int>(i), block);
      rhs.segment<3>(3 * i) += b;
    }
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [a, b] = edges_[e];
      const Mat3 s = w.smooth * Mat3::Identity();
      add_block(a, a, s);
      add_block(b, b, s);
      add_block(a, b, -s);
      add_block(b, a, -s);
      rhs.segment<3>(3 * a) += w.smooth * rest_[e];
      rhs.segment<3>(3 * b) -= w.smooth * rest_[e];
    }
    for (const auto& l : landmarks_) {
      for (std::size_t p = 0; p < 3; ++p) {
        rhs.segment<3>(3 * l.vertices[p]) += w.landmark * l.weights[p] * l.target;
        for (std::size_t q = 0; q < 3; ++q) {
          add_block(l.vertices[p], l.vertices[q], w.landmark * l.weights[p] * l.weights[q] * Mat3::Identity());
        }
      }
    }

    SparseMatrix a(3 * n, 3 * n);
    a.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed_) {
      solver_.analyzePattern(a);
      analyzed_ = true;
    }
    solver_.factorize(a);
    if (solver_.info() != Eigen::Success) throw Error(ErrorCode::SolverFailure, "registration system factorization failed");
    const Eigen::VectorXd sol = solver_.solve(rhs);
    if (solver_.info() != Eigen::Success || !sol.allFinite()) {
      throw Error(ErrorCode::SolverFailure, "registration system solve failed");
    }
    Step step;
    step.y.resize(x.size());
    Eigen::VectorXd delta(3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      step.y[static_cast<std::size_t>(i)] = sol.segment<3>(3 * i);
      delta.segment<3>(3 * i) = sol.segment<3>(3 * i) - x[static_cast<std::size_t>(i)];
    }
    step.predicted = delta.dot(a * delta);
    return step;
  }

 private:
  static Vec3 blend(const std::vector<Vec3>& x, const LandmarkTerm& l) {
    return l.weights[0] * x[static_cast<std::size_t>(l.vertices[0])] +
           l.weights[1] * x[static_cast<std::size_t>(l.vertices[1])] +
           l.weights[2] * x[static_cast<std::size_t>(l.vertices[2])];
  }

  // Explicit zeros over every block the system can touch keep the sparsity
  // pattern identical between iterations, so symbolic analysis runs once.
  void build_pattern() {
    auto zero_block = [&](int i, int j) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pattern_zeros_.emplace_back(3 * i + r, 3 * j + c, 0.0);
      }
    };
    for (const auto& [a, b] : edges_) {
      zero_block(a, b);
      zero_block(b, a);
    }
    for (const auto& l : landmarks_) {
      for (int p : l.vertices) {
        for (int q : l.vertices) zero_block(p, q);
      }
    }
  }

  const TargetSurface& surface_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<Vec3> rest_;
  std::vector<LandmarkTerm> landmarks_;
  double truncation_;
  std::vector<Triplet> pattern_zeros_;
  Eigen::SimplicialLDLT<SparseMatrix> solver_;
  bool analyzed_ = false;
};

double max_displacement(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).norm());
  return m;
}

}  // namespace

DenseCorrespondence dense_correspond(const TriangleMesh& generic, const TriangleMesh& target,
                                     const depthio::LandmarkSet& generic_landmarks,
                                     const depthio::LandmarkSet& target_landmarks,
                                     const RegistrationOptions& options) {
  if (target.vertices.size() < kMinTargetVertices) {
    throw Error(ErrorCode::InvalidArgument, "registration target needs at least 500 vertices, got " +
                                                std::to_string(target.vertices.size()));
  }
  if (generic.triangles.empty() || target.triangles.empty()) {
    throw Error(ErrorCode::EmptyMesh, "registration needs triangulated meshes");
  }
  if (generic_landmarks.pixel_coordinates || target_landmarks.pixel_coordinates) {
    throw Error(ErrorCode::InvalidArgument, "registration landmarks must be 3D");
  }

  const geometry::TriangleBvh generic_bvh(generic);
  std::vector<LandmarkTerm> terms;
  std::vector<Vec3> warp_src;
  std::vector<Vec3> warp_dst;
  for (const auto& g : generic_landmarks.points) {
    if (!g.present) continue;
    const auto* t = target_landmarks.find(g.name);
    if (t == nullptr || !t->present) continue;
    const auto hit = generic_bvh.nearest(g.coord);
    LandmarkTerm term;
    const auto& tri = generic.triangles[static_cast<std::size_t>(hit.location.triangle)];
    term.vertices = tri;
    term.weights = hit.location.weights;
    term.target = t->coord;
    terms.push_back(term);
    warp_src.push_back(hit.point);
    warp_dst.push_back(t->coord);
  }
  if (terms.size() < kMinLandmarkPairs) {
    throw Error(ErrorCode::InsufficientLandmarks,
                "registration needs 4 shared landmarks, found " + std::to_string(terms.size()));
  }

  std::vector<Vec3> x = landmark_warp(generic, warp_src, warp_dst).mesh.vertices;
  const auto edges = geometry::unique_edges(generic);
  std::vector<Vec3> rest;
  rest.reserve(edges.size());
  for (const auto& [a, b] : edges) rest.push_back(x[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(b)]);

  const TriangleMesh target_n =
      target.normals.size() == target.vertices.size() ? target : geometry::compute_vertex_normals(target);
  const TargetSurface surface(target_n);
  Registration reg(surface, edges, std::move(rest), std::move(terms), options.unmatched_mm);

  const auto& rw = options.weights;
  auto weights_at = [&](int iteration) {
    const int every = std::max(rw.decay_every, 1);
    return Weights{rw.data, rw.smooth, rw.landmark * std::pow(rw.landmark_decay, iteration / every)};
  };

  DenseCorrespondence out;
  out.energy_trace.push_back(reg.energy(x, weights_at(0)));
  double damping = 0.0;
  int strikes = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Weights w = weights_at(out.iterations);
    const double e0 = reg.energy(x, w);
    std::vector<Vec3> trial(x.size());
    double e1 = e0;
    bool accepted = false;
    bool stationary = false;
    // Rejected steps are retried with a stiffer proximal term; the data cost
    // jumps where a closest point leaves the open boundary, and a damped step
    // can avoid the crossing.
    for (int attempt = 0; attempt < kDampingLadder && !accepted && !stationary; ++attempt) {
      const auto step = reg.model_step(x, w, damping);
      const auto& y = step.y;
      if (max_displacement(x, y) < kStallStepMm || step.predicted < options.relative_tolerance * e0) {
        stationary = true;
        break;
      }
      for (double t = 1.0; t >= kMinLineStep; t *= 0.5) {
        for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + t * (y[i] - x[i]);
        e1 = reg.energy(trial, w);
        if (e1 <= e0) {
          accepted = true;
          break;
        }
      }
      if (!accepted) damping = std::max(10.0 * damping, 1.0);
    }
    if (stationary) {
      out.converged = true;
      break;
    }
    if (!accepted) {
      if (++strikes >= 2) {
        throw Error(ErrorCode::NoConvergence, "registration energy increased on two consecutive iterations");
      }
      continue;
    }
    strikes = 0;
    damping *= 0.1;
    x = std::move(trial);
    ++out.iterations;
    out.energy_trace.push_back(e1);
    if (e0 <= 0.0 || (e0 - e1) / e0 < options.relative_tolerance) {
      out.converged = true;
      break;
    }
  }

  out.deformed = generic;
  out.deformed.vertices = std::move(x);
  out.deformed = geometry::compute_vertex_normals(std::move(out.deformed));
  out.matches.resize(out.deformed.vertices.size());
  for (std::size_t i = 0; i < out.matches.size(); ++i) {
    const auto hit = surface.nearest(out.deformed.vertices[i]);
    out.matches[i].location = hit.location;
    out.matches[i].distance = hit.distance;
    out.matches[i].matched = hit.distance <= options.unmatched_mm && !surface.beyond_edge(out.deformed.vertices[i], hit);
  }
  return out;
}

retrieval::PartMasks transfer_part_masks(const retrieval::PartMasks& generic_masks,
                                         const DenseCorrespondence& correspondence,
                                         const TriangleMesh& target, double unmatched_mm) {
  const auto& gp = correspondence.deformed;
  std::vector<std::vector<double>> dense;
  dense.reserve(generic_masks.size());
  for (const auto& m : generic_masks) dense.push_back(m.dense(gp.vertices.size()));

  retrieval::PartMasks out;
  for (const auto& m : generic_masks) out.push_back(retrieval::PartMask{m.name, {}, {}});

  const geometry::PointIndex index(gp.vertices);
  const double limit2 = unmatched_mm * unmatched_mm;
  for (std::size_t v = 0; v < target.vertices.size(); ++v) {
    const auto [g, d2] = index.nearest(target.vertices[v]);
    if (g < 0 || d2 > limit2 || !correspondence.matches[static_cast<std::size_t>(g)].matched) continue;
    for (std::size_t p = 0; p < dense.size(); ++p) {
      const double w = dense[p][static_cast<std::size_t>(g)];
      if (w <= 0.0) continue;
      out[p].vertices.push_back(static_cast<int>(v));
      out[p].weights.push_back(w);
    }
  }
  return out;
}

}  // namespace facehal::align
