#include "fairing/smooth.hpp"

#include "common/error.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <map>

namespace facehal::fairing {
namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

double cot(const Vec3& a, const Vec3& b) {
  const double s = a.cross(b).norm();
  if (s <= 0.0) return kMaxCotWeight;
  return a.dot(b) / s;
}

}  // namespace

SparseMatrix cotangent_laplacian(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, std::pair<int, double>> edges;
  for (const auto& t : mesh.triangles) {
    for (std::size_t k = 0; k < 3; ++k) {
      const int i = t[(k + 1) % 3];
      const int j = t[(k + 2) % 3];
      const Vec3& o = mesh.vertices[static_cast<std::size_t>(t[k])];
      const double c = cot(mesh.vertices[static_cast<std::size_t>(i)] - o, mesh.vertices[static_cast<std::size_t>(j)] - o);
      auto& e = edges[{std::min(i, j), std::max(i, j)}];
      if (++e.first > 2) {
        throw Error(ErrorCode::NonManifoldEdge,
                    "edge (" + std::to_string(std::min(i, j)) + ", " + std::to_string(std::max(i, j)) +
                        ") has more than two triangles");
      }
      e.second += 0.5 * c;
    }
  }
  const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(edges.size() * 4);
  for (const auto& [key, e] : edges) {
    const double w = std::clamp(e.second, kMinCotWeight, kMaxCotWeight);
    trip.emplace_back(key.first, key.second, -w);
    trip.emplace_back(key.second, key.first, -w);
    trip.emplace_back(key.first, key.first, w);
    trip.emplace_back(key.second, key.second, w);
  }
  SparseMatrix l(n, n);
  l.setFromTriplets(trip.begin(), trip.end());
  return l;
}

double dirichlet_energy(const SparseMatrix& laplacian, const std::vector<Vec3>& x) {
  Eigen::MatrixX3d p(static_cast<Eigen::Index>(x.size()), 3);
  for (std::size_t i = 0; i < x.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = x[i].transpose();
  return 0.5 * (p.transpose() * (laplacian * p)).trace();
}

SmoothResult smooth_with_trace(const TriangleMesh& mesh, const SmoothingConfig& cfg) {
  if (!(cfg.step > 0.0) || cfg.iterations < 1) {
    throw Error(ErrorCode::InvalidArgument, "smoothing needs step > 0 and at least one iteration");
  }
  SmoothResult out;
  out.mesh = mesh;
  const std::size_t n = mesh.vertices.size();
  const auto boundary = geometry::boundary_vertices(mesh);
  std::vector<int> free_index(n, -1);
  std::vector<int> free_vertices;
  for (std::size_t v = 0; v < n; ++v) {
    if (!boundary[v]) {
      free_index[v] = static_cast<int>(free_vertices.size());
      free_vertices.push_back(static_cast<int>(v));
    }
  }
  const auto nf = static_cast<Eigen::Index>(free_vertices.size());

  for (int it = 0; it < cfg.iterations; ++it) {
    auto& x = out.mesh.vertices;
    const SparseMatrix l = cotangent_laplacian(out.mesh);
    out.energy_before.push_back(dirichlet_energy(l, x));
    if (nf == 0) {
      out.energy_after.push_back(out.energy_before.back());
      continue;
    }

    if (cfg.scheme == Scheme::Explicit) {
      std::vector<Vec3> next = x;
      for (int v : free_vertices) {
        Vec3 lx = Vec3::Zero();
        double diag = 0.0;
        for (SparseMatrix::InnerIterator e(l, v); e; ++e) {
          lx += e.value() * x[static_cast<std::size_t>(e.row())];
          if (e.row() == v) diag = e.value();
        }
        if (diag > 0.0) next[static_cast<std::size_t>(v)] -= cfg.step * lx / diag;
      }
      x = std::move(next);
    } else {
      // (I + step L_ff) x_f' = x_f - step L_fb x_b
      std::vector<Eigen::Triplet<double>> trip;
      Eigen::MatrixX3d rhs(nf, 3);
      for (Eigen::Index r = 0; r < nf; ++r) {
        rhs.row(r) = x[static_cast<std::size_t>(free_vertices[static_cast<std::size_t>(r)])].transpose();
        trip.emplace_back(r, r, 1.0);
      }
      for (Eigen::Index col = 0; col < l.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator e(l, col); e; ++e) {
          const int fr = free_index[static_cast<std::size_t>(e.row())];
          if (fr < 0) continue;
          const int fc = free_index[static_cast<std::size_t>(e.col())];
          if (fc >= 0) {
            trip.emplace_back(fr, fc, cfg.step * e.value());
          } else {
            rhs.row(fr) -= cfg.step * e.value() * x[static_cast<std::size_t>(e.col())].transpose();
          }
        }
      }
      SparseMatrix a(nf, nf);
      a.setFromTriplets(trip.begin(), trip.end());
      Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
      cg.setTolerance(1e-8);
      cg.setMaxIterations(10 * nf);
      cg.compute(a);
      Eigen::MatrixX3d sol(nf, 3);
      for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd guess = rhs.col(c);
        sol.col(c) = cg.solveWithGuess(rhs.col(c), guess);
        if (cg.info() != Eigen::Success) {
          throw Error(ErrorCode::SolverFailure, "smoothing CG did not reach 1e-8 within " +
                                                    std::to_string(10 * nf) + " iterations");
        }
      }
      for (Eigen::Index r = 0; r < nf; ++r) {
        x[static_cast<std::size_t>(free_vertices[static_cast<std::size_t>(r)])] = sol.row(r).transpose();
      }
    }
    out.energy_after.push_back(dirichlet_energy(l, x));
  }
  if (!mesh.triangles.empty()) {
    out.mesh = geometry::compute_vertex_normals(std::move(out.mesh));
  }
  return out;
}

TriangleMesh smooth(const TriangleMesh& mesh, const SmoothingConfig& cfg) {
  return smooth_with_trace(mesh, cfg).mesh;
}

}  // namespace facehal::fairing
