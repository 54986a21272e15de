#include "features/descriptor.hpp"

#include "common/error.hpp"

namespace facehal::features {

AlphaMap default_alpha_map() {
  return {{"eyes", 4.0}, {"nose", 2.0}, {"mouth", 10.0}, {"left_cheek", 1.0}, {"right_cheek", 1.0}};
}

double alpha_for(const AlphaMap& alpha, std::string_view part) {
  const auto it = alpha.find(part);
  if (it == alpha.end()) throw Error(ErrorCode::InvalidArgument, "no alpha for part '" + std::string(part) + "'");
  return it->second;
}

PartDistance combined_distance(const PartDescriptor& a, const PartDescriptor& b, double alpha) {
  PartDistance d;
  d.d_pts = pts_distance(a.grid, b.grid);
  d.d_normals = chi_square(a.histogram, b.histogram);
  d.alpha = alpha;
  d.combined = d.d_pts + alpha * d.d_normals;
  return d;
}

TriangleMesh mask_region(const TriangleMesh& mesh, const retrieval::PartMask& mask) {
  const auto w = mask.dense(mesh.vertices.size());
  TriangleMesh region;
  region.vertices = mesh.vertices;
  for (const auto& t : mesh.triangles) {
    if (w[static_cast<std::size_t>(t[0])] >= kRegionWeight && w[static_cast<std::size_t>(t[1])] >= kRegionWeight &&
        w[static_cast<std::size_t>(t[2])] >= kRegionWeight) {
      region.triangles.push_back(t);
    }
  }
  return region;
}

PartDescriptor describe_part(const TriangleMesh& mesh, const retrieval::PartMask& mask, const Vec3& sellion,
                             const Vec3& chin, const DescriptorParams& params,
                             const std::vector<double>& vertex_areas) {
  PartDescriptor d;
  const TriangleMesh region = mask_region(mesh, mask);
  if (region.triangles.empty()) throw Error(ErrorCode::EmptyPart, "part '" + mask.name + "' has no region triangles");
  d.grid = sample_pseudo_landmarks(region, sellion, chin, params.m, params.n);
  d.histogram = ae_histogram(mesh, mask, vertex_areas);
  return d;
}

}  // namespace facehal::features
