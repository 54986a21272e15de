#pragma once

#include "geometry/mesh.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace facehal::depthio {

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

inline constexpr double kMinValidDepthMm = 100.0;
inline constexpr double kMaxValidDepthMm = 5000.0;

/// Row-major metric depth in millimeters; 0 marks an invalid sample.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  Intrinsics intrinsics;

  double at(int u, int v) const { return depth[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
  double& at(int u, int v) { return depth[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)]; }
  bool valid(int u, int v) const { return at(u, v) > 0.0; }
  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  std::size_t valid_count() const;
};

/// Sets samples outside (100, 5000) mm or non-finite to 0.
void clamp_to_valid_range(DepthFrame& frame);

/// Pixel (u, v) with depth d in camera coordinates.
Vec3 unproject(const Intrinsics& k, double u, double v, double depth_mm);

/// Pinhole projection to continuous pixel coordinates (u, v).
Eigen::Vector2d project(const Intrinsics& k, const Vec3& p);

/// Reads a 16-bit little-endian PGM (tenths of mm) plus the JSON intrinsics
/// sidecar sharing its basename.
DepthFrame load_depth(const std::filesystem::path& path);

/// Writes the PGM and its sidecar. Depths are rounded to 0.1 mm.
void save_depth(const DepthFrame& frame, const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& depth_path);

struct PixelRect {
  int u0 = 0;
  int v0 = 0;
  int u1 = 0;  // exclusive
  int v1 = 0;  // exclusive

  bool contains(int u, int v) const { return u >= u0 && u < u1 && v >= v0 && v < v1; }
  int width() const { return u1 - u0; }
  int height() const { return v1 - v0; }
};

inline PixelRect full_frame(const DepthFrame& f) { return {0, 0, f.width, f.height}; }

struct BackprojectedMesh {
  TriangleMesh mesh;
  /// Frame-sized; vertex index of each valid pixel inside the rect, else -1.
  std::vector<int> pixel_to_vertex;
  /// Source pixel (u, v) of each vertex.
  std::vector<std::array<int, 2>> vertex_to_pixel;
};

inline constexpr double kDefaultDiscontinuityMm = 10.0;

/// Each valid pixel becomes a vertex; grid-adjacent valid pixels are
/// triangulated facing the camera, and triangles with an edge longer than
/// `discontinuity_mm` are dropped.
BackprojectedMesh backproject(const DepthFrame& frame, const PixelRect& face_rect,
                              double discontinuity_mm = kDefaultDiscontinuityMm);

/// Fills invalid pixels inside `rect` that have at least `min_neighbors`
/// valid 8-neighbors with their mean, repeated `passes` times. Large holes
/// (occlusions) survive; single-pixel dropout does not.
void fill_small_holes(DepthFrame& frame, const PixelRect& rect, int passes = 2, int min_neighbors = 4);

}  // namespace facehal::depthio
