#pragma once

#include "features/normal_histogram.hpp"
#include "features/pseudo_landmarks.hpp"
#include "retrieval/part_mask.hpp"

#include <functional>
#include <map>
#include <string>

namespace facehal::features {

struct PartDescriptor {
  PseudoLandmarkGrid grid;
  AEHistogram histogram;
};

struct PartDistance {
  double d_pts = 0.0;
  double d_normals = 0.0;
  double alpha = 0.0;
  double combined = 0.0;
};

using AlphaMap = std::map<std::string, double, std::less<>>;

/// cheeks 1, nose 2, eyes 4, mouth 10.
AlphaMap default_alpha_map();

/// Looks up `part`; throws InvalidArgument when absent.
double alpha_for(const AlphaMap& alpha, std::string_view part);

/// d_pts + alpha * d_normals. Throws ShapeMismatch.
PartDistance combined_distance(const PartDescriptor& a, const PartDescriptor& b, double alpha);

struct DescriptorParams {
  int m = 33;
  int n = 35;
};

/// Feather weight at or above which a vertex belongs to the sliced region.
inline constexpr double kRegionWeight = 0.5;

/// Triangles whose three corners all reach `kRegionWeight` in `mask`;
/// vertices are kept as-is.
TriangleMesh mask_region(const TriangleMesh& mesh, const retrieval::PartMask& mask);

/// Grid sliced from the part region, histogram over the whole feathered
/// mask. `vertex_areas` are the mixed Voronoi areas of `mesh`.
PartDescriptor describe_part(const TriangleMesh& mesh, const retrieval::PartMask& mask, const Vec3& sellion,
                             const Vec3& chin, const DescriptorParams& params,
                             const std::vector<double>& vertex_areas);

}  // namespace facehal::features
