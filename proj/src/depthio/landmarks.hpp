#pragma once

#include "depthio/depth_frame.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace facehal::depthio {

enum class LandmarkGroup { Silhouette, Internal };

struct Landmark {
  std::string name;
  /// Pixel coordinates in x/y (z unused) or a 3D point in mm.
  Vec3 coord = Vec3::Zero();
  LandmarkGroup group = LandmarkGroup::Internal;
  bool present = true;
};

struct LandmarkSet {
  std::vector<Landmark> points;
  bool pixel_coordinates = false;

  const Landmark* find(std::string_view name) const;
  std::size_t present_count(std::optional<LandmarkGroup> group = std::nullopt) const;
};

inline constexpr std::size_t kFiducialCount = 83;
inline constexpr std::size_t kSilhouetteCount = 19;
inline constexpr std::string_view kSellion = "sellion";
inline constexpr std::string_view kChinTip = "chin_tip";

/// Parses the JSON landmark array (2D `u`/`v` or 3D `x`/`y`/`z` entries)
/// without enforcing a schema size. Names must be unique.
LandmarkSet load_landmark_file(const std::filesystem::path& path);
LandmarkSet parse_landmarks(const std::string& json_text);

/// Loads and validates the 83-point fiducial schema.
LandmarkSet load_landmarks(const std::filesystem::path& path);

/// Throws WrongCount, MissingAnchor or DuplicateName.
void validate_fiducials(const LandmarkSet& set);

void save_landmarks(const LandmarkSet& set, const std::filesystem::path& path);
std::string landmarks_to_json(const LandmarkSet& set);

/// Lifts 2D fiducials to camera-space 3D using the nearest valid depth within
/// a 3-pixel disk. Landmarks without depth are kept but flagged absent.
LandmarkSet lift_landmarks(const DepthFrame& frame, const LandmarkSet& pixel_landmarks);

inline constexpr int kLiftRadiusPx = 3;
inline constexpr std::size_t kMinLiftedInternal = 6;

/// Landmark bounding box inflated by 15%, clamped to the frame.
PixelRect face_rect_from_landmarks(const DepthFrame& frame, const LandmarkSet& pixel_landmarks,
                                   double inflate = 0.15);

}  // namespace facehal::depthio
