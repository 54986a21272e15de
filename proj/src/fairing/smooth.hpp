#pragma once

#include "geometry/mesh.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace facehal::fairing {

enum class Scheme { Explicit, Implicit };

struct SmoothingConfig {
  /// Dimensionless lambda * dt.
  double step = 0.5;
  int iterations = 3;
  Scheme scheme = Scheme::Implicit;
};

struct SmoothResult {
  TriangleMesh mesh;
  /// Per step: Dirichlet energy before and after, both measured with the
  /// Laplacian assembled at the start of that step.
  std::vector<double> energy_before;
  std::vector<double> energy_after;
};

inline constexpr double kMinCotWeight = 1e-6;
inline constexpr double kMaxCotWeight = 1e6;

/// Symmetric positive semidefinite cotangent Laplacian (stiffness form):
/// L_ij = -w_ij, L_ii = sum_j w_ij, w_ij = (cot a + cot b) / 2 clamped.
/// Throws NonManifoldEdge when an edge has more than two triangles.
Eigen::SparseMatrix<double> cotangent_laplacian(const TriangleMesh& mesh);

/// 1/2 * sum over coordinates of x^T L x.
double dirichlet_energy(const Eigen::SparseMatrix<double>& laplacian, const std::vector<Vec3>& x);

/// Mean-curvature flow with boundary vertices pinned. Throws InvalidArgument
/// for a bad config, SolverFailure when CG misses 1e-8 in 10n iterations.
SmoothResult smooth_with_trace(const TriangleMesh& mesh, const SmoothingConfig& cfg = {});
TriangleMesh smooth(const TriangleMesh& mesh, const SmoothingConfig& cfg = {});

}  // namespace facehal::fairing
