#pragma once

#include "features/descriptor.hpp"
#include "retrieval/part_mask.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace facehal::retrieval {

using features::DescriptorParams;
using features::PartDescriptor;
using features::PartDistance;

enum class DistanceMode { Combined, PtsOnly, NormalsOnly };

/// Where the two slicing anchors sit on the shared database topology.
struct AnchorLocations {
  BarycentricLocation sellion;
  BarycentricLocation chin;
};

/// Immutable table of descriptors, one row per database entry, one column per
/// part (in `part_names` order).
struct DescriptorIndex {
  DescriptorParams params;
  features::AlphaMap alpha;
  std::vector<std::string> part_names;
  std::vector<std::string> ids;
  std::vector<std::vector<PartDescriptor>> descriptors;

  std::size_t part_column(std::string_view part) const;
};

/// Descriptors of every part of one registered mesh.
std::vector<PartDescriptor> describe_mesh(const TriangleMesh& mesh, const PartMasks& masks,
                                          const AnchorLocations& anchors, const DescriptorParams& params);

/// Throws TopologyMismatch when a mesh does not share the masks' topology,
/// InvalidArgument on duplicate ids.
DescriptorIndex build_index(const std::vector<std::string>& ids, const std::vector<TriangleMesh>& meshes,
                            const PartMasks& masks, const AnchorLocations& anchors, const DescriptorParams& params,
                            const features::AlphaMap& alpha = features::default_alpha_map());

/// The distance a ranking under `mode` sorts by.
double ranking_key(const PartDistance& d, DistanceMode mode);

struct RankedEntry {
  std::string id;
  PartDistance distance;
};

struct RetrievalResult {
  std::string part;
  /// Ascending by the mode's key, ties by ascending id.
  std::vector<RankedEntry> ranking;
  std::string best;
};

/// Ranks `candidates` (parallel to `ids`) against `input` for one part.
RetrievalResult rank_part(std::string part, const PartDescriptor& input, std::span<const std::string> ids,
                          std::span<const PartDescriptor> candidates, double alpha,
                          DistanceMode mode = DistanceMode::Combined);

/// One result per index part. `input` follows `index.part_names`. Throws
/// ParamMismatch when the input grids were sampled with other (m, n).
std::vector<RetrievalResult> query(const DescriptorIndex& index, std::span<const PartDescriptor> input,
                                   DistanceMode mode = DistanceMode::Combined);

/// 1-based position of `id`. Throws UnknownId.
std::size_t rank_of(const RetrievalResult& result, std::string_view id);

/// FNV-1a over the canonical parameter text; stable across runs.
std::uint64_t parameter_hash(const DescriptorParams& params, const features::AlphaMap& alpha,
                             std::span<const std::string> part_names);
std::string hash_hex(std::uint64_t hash);

/// Writes the binary descriptor cache plus a JSON manifest naming it.
void save_index(const DescriptorIndex& index, const std::filesystem::path& cache_path,
                const std::filesystem::path& manifest_path);
/// Reads the manifest and its cache; ParamMismatch when the cache header or
/// hash disagrees with the manifest.
DescriptorIndex load_index(const std::filesystem::path& manifest_path);

}  // namespace facehal::retrieval
