#pragma once

#include "align/dense_correspond.hpp"
#include "dataset/synthetic.hpp"
#include "depthio/landmarks.hpp"
#include "retrieval/index.hpp"
#include "retrieval/part_mask.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace facehal::dataset {

inline constexpr std::size_t kAnatomicalCount = 15;
inline constexpr double kDefaultFeatherMm = 5.0;

/// The five part masks on a template lift, from parameter-plane regions,
/// feathered over `feather_mm` of edge-graph distance on `mesh`.
retrieval::PartMasks default_part_masks(const FaceTemplate& tmpl, const TriangleMesh& mesh,
                                        double feather_mm = kDefaultFeatherMm);

struct RawEntry {
  std::string id;
  TriangleMesh mesh;
  depthio::LandmarkSet landmarks;
};

struct RegisteredMesh {
  TriangleMesh mesh;
  /// Root mean square distance from matched vertices to the raw surface.
  double rms_mm = 0.0;
};

/// Re-expresses each raw mesh on the template topology with dense
/// correspondence seeded by the 15 anatomical landmarks. Errors name the
/// offending id.
std::vector<RegisteredMesh> register_database(const std::vector<RawEntry>& raw, const TriangleMesh& tmpl,
                                              const depthio::LandmarkSet& template_landmarks,
                                              const align::RegistrationOptions& options = {});

/// Per-vertex mean with recomputed normals. Throws TopologyMismatch.
TriangleMesh generic_mean(const std::vector<TriangleMesh>& meshes);

struct NamedLocation {
  std::string name;
  depthio::LandmarkGroup group = depthio::LandmarkGroup::Internal;
  BarycentricLocation location;
};

/// Landmark set read off `mesh` at fixed topology locations.
depthio::LandmarkSet landmarks_at(const TriangleMesh& mesh, const std::vector<NamedLocation>& locations);

struct ManifestEntry {
  std::string id;
  std::filesystem::path mesh;
  std::filesystem::path landmarks;
  int age = 0;
  std::string sex;
  double registration_rms_mm = 0.0;
};

/// On-disk database description. Paths are relative to the manifest's
/// directory.
struct DatabaseManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path generic;
  std::filesystem::path fiducials;
  std::filesystem::path part_masks;
  std::string param_hash;
};

void save_manifest(const DatabaseManifest& manifest, const std::filesystem::path& path);
DatabaseManifest load_manifest(const std::filesystem::path& path);

void save_locations(const std::vector<NamedLocation>& locations, const std::filesystem::path& path);
std::vector<NamedLocation> load_locations(const std::filesystem::path& path);

/// Everything a query needs, loaded in memory.
struct Database {
  std::filesystem::path root;
  DatabaseManifest manifest;
  TriangleMesh generic;
  std::vector<NamedLocation> fiducials;
  retrieval::PartMasks masks;
  retrieval::AnchorLocations anchors;
  std::vector<std::string> ids;
  std::vector<TriangleMesh> meshes;

  depthio::LandmarkSet generic_landmarks() const { return landmarks_at(generic, fiducials); }
  std::size_t find(std::string_view id) const;
};

/// Loads manifest, generic, fiducial locations, masks and every entry mesh.
/// Throws TopologyMismatch when an entry leaves the generic topology.
Database load_database(const std::filesystem::path& manifest_path);

/// Sellion and chin locations among `fiducials`; throws MissingAnchor.
retrieval::AnchorLocations anchors_from(const std::vector<NamedLocation>& fiducials);

struct SyntheticBuildOptions {
  int count = 50;
  std::uint64_t seed = 7;
  double spacing = 2.0;
  double feather_mm = kDefaultFeatherMm;
  align::RegistrationOptions registration;
};

/// Generates, registers and writes a synthetic database under `dir`.
/// Returns the manifest path.
std::filesystem::path build_synthetic_database(const SyntheticBuildOptions& options,
                                               const std::filesystem::path& dir);

/// Registers externally supplied meshes (one `<id>.obj|.ply` plus
/// `<id>.json` with 15 landmarks each) against the synthetic template.
std::filesystem::path build_database_from_dir(const std::filesystem::path& input_dir, const std::filesystem::path& dir,
                                              const SyntheticBuildOptions& options);

}  // namespace facehal::dataset
