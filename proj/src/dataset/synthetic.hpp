#pragma once

#include "depthio/landmarks.hpp"
#include "geometry/mesh.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace facehal::dataset {

/// Shape parameters of a procedural face. Lengths in mm, widths and sizes as
/// scale factors around 1.
struct FaceParams {
  double nose_length = 45.0;
  double nose_width = 1.0;
  double nose_height = 21.0;
  double eye_depth = 11.0;
  double eye_size = 1.0;
  double brow_height = 0.0;
  double mouth_width = 50.0;
  double lip_fullness = 3.5;
  double cheek_fullness = 5.0;
  double cheekbone = 3.0;
  double jaw_taper = 0.12;
  double chin_protrusion = 6.0;
};

inline constexpr std::size_t kFaceParamCount = 12;

/// Gaussian bump in parameter coordinates.
struct Bump {
  double x = 0.0;
  double y = 0.0;
  double radius = 1.0;
  double amplitude = 0.0;
};

struct FaceShape {
  FaceParams params;
  std::vector<Bump> bumps;
};

/// Flat parameter-plane grid the faces are lifted from. Vertices sit on a
/// square lattice inside an ellipse; every lattice cell fully inside is split
/// into two counterclockwise triangles.
struct FaceTemplate {
  double spacing = 2.0;
  std::vector<std::array<double, 2>> coords;
  std::vector<geometry::Triangle> triangles;

  /// Triangle and barycentric weights of a parameter-plane point. Throws
  /// InvalidArgument outside the triangulated domain.
  BarycentricLocation locate(double x0, double y0) const;

 private:
  friend FaceTemplate make_template(double spacing);
  int min_i_ = 0;
  int min_j_ = 0;
  int cols_ = 0;
  int rows_ = 0;
  /// Lower-left triangle index per lattice cell, -1 when the cell is absent.
  std::vector<int> cell_triangle_;
};

FaceTemplate make_template(double spacing = 2.0);

struct NamedPosition {
  std::string name;
  depthio::LandmarkGroup group = depthio::LandmarkGroup::Internal;
  double x0 = 0.0;
  double y0 = 0.0;
};

/// The 83-point fiducial layout (19 silhouette + 64 internal) in parameter
/// coordinates. Shared by every face.
std::vector<NamedPosition> fiducial_layout();

/// The 15 registration landmarks in parameter coordinates.
std::vector<NamedPosition> anatomical_layout();

/// Names of the 15 registration landmarks, in layout order.
std::vector<std::string> anatomical_names();

/// Surface point of `shape` at parameter coordinates (x0, y0).
Vec3 face_point(const FaceShape& shape, double x0, double y0);

/// Lifts the template to a mesh with normals.
TriangleMesh face_mesh(const FaceShape& shape, const FaceTemplate& tmpl);

/// Landmarks placed exactly on `mesh` (a lift of `tmpl`) at the layout's
/// parameter positions.
depthio::LandmarkSet place_landmarks(const TriangleMesh& mesh, const FaceTemplate& tmpl,
                                     const std::vector<NamedPosition>& layout);

/// Barycentric locations of a layout on the template topology.
std::vector<BarycentricLocation> locate_layout(const FaceTemplate& tmpl, const std::vector<NamedPosition>& layout);

struct SyntheticFace {
  FaceShape shape;
  TriangleMesh mesh;
  depthio::LandmarkSet fiducials;
  depthio::LandmarkSet anatomical;
  int age = 0;
  char sex = 'F';
};

/// Parameters and bumps drawn from a seeded generator.
FaceShape random_shape(std::uint64_t seed);

/// `count` faces on one shared template; face i uses a seed derived from
/// (seed, i), so prefixes of the list agree across counts.
std::vector<SyntheticFace> generate_synthetic(std::uint64_t seed, int count, double spacing = 2.0);

SyntheticFace make_face(const FaceShape& shape, const FaceTemplate& tmpl);

}  // namespace facehal::dataset
