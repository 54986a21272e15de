#pragma once

#include "geometry/mesh.hpp"

#include <vector>

namespace facehal::features {

/// (m + 2) x n surface samples, row-major by plane from sellion to chin.
struct PseudoLandmarkGrid {
  int m = 0;
  int n = 0;
  std::vector<Vec3> points;
  /// One flag per row; set when the plane missed the mesh and the row was
  /// copied from the nearest sampled row.
  std::vector<bool> filled_rows;

  int rows() const { return m + 2; }
  const Vec3& at(int row, int col) const { return points[static_cast<std::size_t>(row * n + col)]; }
};

/// Slices `mesh` with m + 2 evenly spaced planes perpendicular to the
/// sellion -> chin axis (both base planes included). Every section piece is
/// reduced to its front polyline (a closed loop is cut at its x extremes and
/// its +z half kept), oriented by increasing x, and the pieces are chained
/// by mean x with straight bridges across the gaps. The chain is resampled
/// to n points at uniform arc length.
///
/// Throws InvalidArgument for coincident anchors or n < 1, EmptySection when
/// no plane meets the mesh.
PseudoLandmarkGrid sample_pseudo_landmarks(const TriangleMesh& mesh, const Vec3& sellion, const Vec3& chin,
                                           int m, int n);

/// Sum of squared point distances (mm^2) over the rows sampled in both
/// grids, scaled up to the full row count; infinite when no row is shared.
/// Throws ShapeMismatch.
double pts_distance(const PseudoLandmarkGrid& a, const PseudoLandmarkGrid& b);

}  // namespace facehal::features
