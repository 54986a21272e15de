#include "fusion/fusion.hpp"

#include "common/error.hpp"
#include "geometry/spatial.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

namespace facehal::fusion {
namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct EdgeTerm {
  int u;
  int v;
  Vec3 n;
};

std::vector<EdgeTerm> edge_terms(const TriangleMesh& mesh, const std::vector<Vec3>& normals) {
  std::vector<EdgeTerm> out;
  for (const auto& [u, v] : geometry::unique_edges(mesh)) {
    const Vec3 s = normals[static_cast<std::size_t>(u)] + normals[static_cast<std::size_t>(v)];
    const double len = s.norm();
    if (len < 1e-12) continue;
    out.push_back({u, v, s / len});
  }
  return out;
}

void check_weights(const FusionWeights& w) {
  if (!(w.lambda_pos >= 0.0) || !(w.lambda_norm >= 0.0) || (w.lambda_pos == 0.0 && w.lambda_norm == 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "fusion weights must be non-negative and not both zero");
  }
}

}  // namespace

Vec3 slerp(const Vec3& a, const Vec3& b, double t) {
  const double c = std::clamp(a.dot(b), -1.0, 1.0);
  const double omega = std::acos(c);
  const double s = std::sin(omega);
  if (s < 1e-9) {
    const Vec3 lin = (1.0 - t) * a + t * b;
    return lin.norm() > 1e-12 ? Vec3(lin.normalized()) : (t < 0.5 ? a : b);
  }
  const Vec3 r = (std::sin((1.0 - t) * omega) / s) * a + (std::sin(t * omega) / s) * b;
  return r.normalized();
}

NormalField transfer_normals(const TriangleMesh& target, const std::vector<const TriangleMesh*>& sources,
                             const retrieval::PartMasks& masks, double max_distance_mm) {
  if (!target.has_normals()) throw Error(ErrorCode::MissingNormals, "normal transfer target has no normals");
  if (sources.size() != masks.size()) {
    throw Error(ErrorCode::MissingSource, "expected " + std::to_string(masks.size()) + " part sources, got " +
                                              std::to_string(sources.size()));
  }
  std::map<const TriangleMesh*, std::shared_ptr<geometry::TriangleBvh>> trees;
  for (std::size_t p = 0; p < sources.size(); ++p) {
    const auto* s = sources[p];
    if (s == nullptr) throw Error(ErrorCode::MissingSource, "part '" + masks[p].name + "' has no retrieved mesh");
    if (!s->has_normals()) throw Error(ErrorCode::MissingNormals, "source for '" + masks[p].name + "' has no normals");
    if (!trees.count(s)) trees[s] = std::make_shared<geometry::TriangleBvh>(*s);
  }

  const std::size_t n = target.vertices.size();
  std::vector<std::vector<double>> dense;
  for (const auto& m : masks) dense.push_back(m.dense(n));

  NormalField field;
  field.normals = target.normals;
  field.tags.assign(n, kOriginalTag);
  for (std::size_t v = 0; v < n; ++v) {
    const Vec3& own = target.normals[v];
    Vec3 blended = Vec3::Zero();
    double total = 0.0;
    double strongest = 0.0;
    int tag = kOriginalTag;
    int interior = -1;
    Vec3 interior_normal = Vec3::Zero();
    for (std::size_t p = 0; p < masks.size(); ++p) {
      const double w = dense[p][v];
      if (w <= 0.0) continue;
      const auto hit = trees.at(sources[p])->nearest(target.vertices[v]);
      if (hit.distance > max_distance_mm) continue;
      const Vec3 np = geometry::interpolate_normal(*sources[p], hit.location);
      if (w >= 1.0 && interior < 0) {
        interior = static_cast<int>(p);
        interior_normal = np;
      }
      blended += w * np;
      total += w;
      if (w > strongest) {
        strongest = w;
        tag = static_cast<int>(p);
      }
    }
    if (interior >= 0) {
      field.normals[v] = interior_normal;
      field.tags[v] = interior;
      continue;
    }
    if (tag == kOriginalTag || blended.norm() < 1e-12) continue;
    if (own.squaredNorm() == 0.0) {
      field.normals[v] = blended.normalized();
    } else {
      field.normals[v] = slerp(own, blended.normalized(), std::min(total, 1.0));
    }
    field.tags[v] = tag;
  }
  return field;
}

std::vector<Vec3> fuse_positions(const TriangleMesh& mesh, const std::vector<Vec3>& targets,
                                 const std::vector<double>& point_weights, const std::vector<Vec3>& normals,
                                 const FusionWeights& w) {
  check_weights(w);
  const std::size_t n = mesh.vertices.size();
  if (targets.size() != n || point_weights.size() != n || normals.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "fusion inputs must have one entry per vertex");
  }
  if (w.lambda_norm == 0.0) return targets;
  if (w.lambda_pos == 0.0) {
    throw Error(ErrorCode::SingularSystem, "lambda_pos = 0 leaves positions undetermined along the normals");
  }
  for (double pw : point_weights) {
    if (!(pw > 0.0)) throw Error(ErrorCode::SingularSystem, "every vertex needs a positive positional weight");
  }

  const auto edges = edge_terms(mesh, normals);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(3 * n + edges.size() * 36);
  const auto dim = static_cast<Eigen::Index>(3 * n);
  Eigen::VectorXd rhs(dim);
  Eigen::VectorXd guess(dim);
  for (std::size_t v = 0; v < n; ++v) {
    const double a = w.lambda_pos * point_weights[v];
    for (int c = 0; c < 3; ++c) {
      const auto r = static_cast<Eigen::Index>(3 * v) + c;
      trip.emplace_back(r, r, a);
      rhs(r) = a * targets[v](c);
      guess(r) = targets[v](c);
    }
  }
  for (const auto& e : edges) {
    const Mat3 nn = w.lambda_norm * e.n * e.n.transpose();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        trip.emplace_back(3 * e.u + r, 3 * e.u + c, nn(r, c));
        trip.emplace_back(3 * e.v + r, 3 * e.v + c, nn(r, c));
        trip.emplace_back(3 * e.u + r, 3 * e.v + c, -nn(r, c));
        trip.emplace_back(3 * e.v + r, 3 * e.u + c, -nn(r, c));
      }
    }
  }
  SparseMatrix a(dim, dim);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-8);
  cg.setMaxIterations(std::max<Eigen::Index>(10 * dim, 100));
  cg.compute(a);
  const Eigen::VectorXd x = cg.solveWithGuess(rhs, guess);
  if (cg.info() != Eigen::Success || !x.allFinite()) {
    throw Error(ErrorCode::SolverFailure, "fusion CG did not reach 1e-8");
  }
  std::vector<Vec3> out(n);
  for (std::size_t v = 0; v < n; ++v) out[v] = x.segment<3>(static_cast<Eigen::Index>(3 * v));
  return out;
}

TriangleMesh fuse(const TriangleMesh& positions, const NormalField& normals, const FusionWeights& w) {
  TriangleMesh out = positions;
  out.vertices = fuse_positions(positions, positions.vertices, std::vector<double>(positions.vertices.size(), 1.0),
                                normals.normals, w);
  if (!out.triangles.empty()) out = geometry::compute_vertex_normals(std::move(out));
  return out;
}

double fusion_objective(const TriangleMesh& mesh, const std::vector<Vec3>& x, const std::vector<Vec3>& targets,
                        const std::vector<double>& point_weights, const std::vector<Vec3>& normals,
                        const FusionWeights& w) {
  double pos = 0.0;
  for (std::size_t v = 0; v < x.size(); ++v) pos += point_weights[v] * (x[v] - targets[v]).squaredNorm();
  double nrm = 0.0;
  for (const auto& e : edge_terms(mesh, normals)) {
    const double d = (x[static_cast<std::size_t>(e.u)] - x[static_cast<std::size_t>(e.v)]).dot(e.n);
    nrm += d * d;
  }
  return w.lambda_pos * pos + w.lambda_norm * nrm;
}

}  // namespace facehal::fusion
