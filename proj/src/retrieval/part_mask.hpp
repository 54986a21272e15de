#pragma once

#include "geometry/mesh.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace facehal::retrieval {

inline constexpr std::array<std::string_view, 5> kPartNames = {"eyes", "nose", "mouth", "left_cheek",
                                                                "right_cheek"};

/// Vertex subset of a mesh with feather weights in [0, 1]; weight 1 marks the
/// part interior, smaller weights the blending band around it.
struct PartMask {
  std::string name;
  std::vector<int> vertices;
  std::vector<double> weights;

  std::size_t size() const { return vertices.size(); }
  /// Dense per-vertex weights for a mesh with `vertex_count` vertices.
  std::vector<double> dense(std::size_t vertex_count) const;
};

using PartMasks = std::vector<PartMask>;

const PartMask& find_part(const PartMasks& masks, std::string_view name);

/// Builds a mask from an interior vertex set, adding a feather band whose
/// weight falls linearly from 1 to 0 over `band_mm` of edge-graph distance.
PartMask feathered_mask(const TriangleMesh& mesh, std::string name, const std::vector<int>& interior,
                        double band_mm);

/// Throws InvalidArgument when weights leave [0, 1] or two interiors overlap.
void validate_masks(const PartMasks& masks, std::size_t vertex_count);

PartMasks load_part_masks(const std::filesystem::path& path);
void save_part_masks(const PartMasks& masks, const std::filesystem::path& path);

}  // namespace facehal::retrieval
