#pragma once

#include "align/procrustes.hpp"
#include "depthio/depth_frame.hpp"
#include "depthio/landmarks.hpp"

#include <cstdint>

namespace facehal::pipeline {

struct RenderOptions {
  int width = 640;
  int height = 480;
  depthio::Intrinsics intrinsics{525.0, 525.0, 319.5, 239.5};
  /// Camera-to-face distance along the optical axis.
  double distance_mm = 750.0;
  /// Head rotation about the vertical and horizontal axes.
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
  /// Point of the face placed on the optical axis.
  Vec3 center{0.0, -10.0, 0.0};
  double noise_mm = 2.0;
  double dropout = 0.05;
  std::uint64_t seed = 1;
};

struct RenderedFrame {
  depthio::DepthFrame frame;
  depthio::LandmarkSet pixel_landmarks;
  /// Maps face coordinates (y up, z toward the viewer) to camera
  /// coordinates (y down, z forward).
  align::RigidTransform pose;
};

/// Face-to-camera transform used by `render_depth`.
align::RigidTransform render_pose(const RenderOptions& options);

/// Z-buffered rasterization of `mesh` with Gaussian depth noise, random
/// pixel dropout and 0.1 mm quantization. Landmarks are projected to pixel
/// coordinates.
RenderedFrame render_depth(const TriangleMesh& mesh, const depthio::LandmarkSet& landmarks,
                           const RenderOptions& options = {});

}  // namespace facehal::pipeline
