#pragma once

#include "geometry/mesh.hpp"
#include "retrieval/part_mask.hpp"

#include <utility>
#include <vector>

namespace facehal::features {

inline constexpr int kHistogramBins = 32;

/// (theta, phi): theta = atan2(n_z, n_x) in [-pi, pi], phi =
/// atan(n_y / sqrt(n_x^2 + n_z^2)) in [-pi/2, pi/2]. At the poles
/// (n_x = n_z = 0) theta is 0. Throws ZeroVector.
std::pair<double, double> azimuth_elevation(const Vec3& normal);

/// 2D histogram over (theta, phi); bins are stored theta-major:
/// bins[theta_bin * phi_bins + phi_bin].
struct AEHistogram {
  int theta_bins = kHistogramBins;
  int phi_bins = kHistogramBins;
  std::vector<double> bins = std::vector<double>(kHistogramBins * kHistogramBins, 0.0);

  double at(int theta_bin, int phi_bin) const {
    return bins[static_cast<std::size_t>(theta_bin * phi_bins + phi_bin)];
  }
};

/// Bin index pair for an angle pair; the upper edges fold into the last bin.
std::pair<int, int> ae_bin(double theta, double phi, int theta_bins = kHistogramBins,
                           int phi_bins = kHistogramBins);

/// Normals of masked vertices, weighted by feather weight times Voronoi
/// area, normalized to unit sum. Vertices with a zero normal are skipped.
/// Throws EmptyPart when nothing carries weight, MissingNormals without
/// normals.
AEHistogram ae_histogram(const TriangleMesh& mesh, const retrieval::PartMask& mask);

/// Same, with Voronoi areas precomputed for `mesh`.
AEHistogram ae_histogram(const TriangleMesh& mesh, const retrieval::PartMask& mask,
                         const std::vector<double>& vertex_areas);

/// sum (h_i - g_i)^2 / (h_i + g_i) over bins with a nonzero denominator,
/// capped at 2, the bound for unit-sum histograms. Throws ShapeMismatch.
double chi_square(const AEHistogram& h, const AEHistogram& g);

}  // namespace facehal::features
