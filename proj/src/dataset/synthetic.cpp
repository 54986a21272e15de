#include "dataset/synthetic.hpp"

#include "common/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace facehal::dataset {
namespace {

using depthio::LandmarkGroup;

// Parameter-plane domain: ellipse centered at (0, kDomainCenterY).
constexpr double kDomainRx = 72.0;
constexpr double kDomainRy = 100.0;
constexpr double kDomainCenterY = -10.0;

// Head ellipsoid the features sit on.
constexpr double kHeadRx = 95.0;
constexpr double kHeadRy = 140.0;
constexpr double kHeadDepth = 80.0;

constexpr double kSellionY = 30.0;
constexpr double kEyeX = 32.0;
constexpr double kEyeY = 24.0;

bool in_domain(double x, double y) {
  const double u = x / kDomainRx;
  const double v = (y - kDomainCenterY) / kDomainRy;
  return u * u + v * v <= 1.0;
}

double gauss(double dx, double dy, double sx, double sy) {
  return std::exp(-0.5 * ((dx / sx) * (dx / sx) + (dy / sy) * (dy / sy)));
}

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Feature positions in parameter coordinates are fixed; the length and
// width parameters act through `planar_map` instead, so equal parameter
// coordinates mean the same anatomical point on every face.
constexpr double kNoseLength = 45.0;
constexpr double kTipY = kSellionY - kNoseLength;
constexpr double kMouthY = kTipY - 25.0;
constexpr double kMouthHalfWidth = 25.0;
constexpr double kChinY = -82.0;

double nose_profile(const FaceParams& p, double x0, double y0) {
  const double h = p.nose_height;
  const double t = (kSellionY - y0) / kNoseLength;
  double a = 0.0;
  if (t < 0.0) {
    a = 0.3 * h * std::exp(-0.5 * ((y0 - kSellionY) / 8.0) * ((y0 - kSellionY) / 8.0));
  } else if (t <= 1.0) {
    a = h * (0.3 + 0.7 * std::pow(t, 1.5));
  } else {
    const double d = (kTipY - y0) / 5.0;
    a = h * std::exp(-0.5 * d * d);
  }
  const double sigma = 5.0 + 2.0 * std::clamp(t, 0.0, 1.0);
  double z = a * std::exp(-0.5 * (x0 / sigma) * (x0 / sigma));
  for (double side : {-1.0, 1.0}) z += 0.3 * h * gauss(x0 - side * 11.0, y0 - (kTipY - 2.0), 5.0, 4.0);
  return z;
}

double feature_height(const FaceShape& s, double x0, double y0) {
  const FaceParams& p = s.params;
  double z = nose_profile(p, x0, y0);
  for (double side : {-1.0, 1.0}) {
    const double ex = x0 - side * kEyeX;
    const double ey = y0 - kEyeY;
    z -= p.eye_depth * gauss(ex, ey, 13.0, 10.0);
    z += 0.45 * p.eye_depth * gauss(ex, ey, 7.0, 5.0);
    z += 4.0 * gauss(x0 - side * 30.0, y0 - 40.0, 16.0, 5.0);
    z += p.cheek_fullness * gauss(x0 - side * 42.0, y0 + 8.0, 17.0, 20.0);
    z += p.cheekbone * gauss(x0 - side * 50.0, y0 - 8.0, 10.0, 7.0);
  }
  const double lip = 2.0 + p.lip_fullness;
  z += lip * gauss(x0, y0 - (kMouthY + 4.0), 2.0 * kMouthHalfWidth / 2.8, 3.2);
  z += lip * gauss(x0, y0 - (kMouthY - 5.0), 2.0 * kMouthHalfWidth / 3.0, 3.8);
  const double window = 1.0 / (1.0 + std::exp((std::abs(x0) - kMouthHalfWidth) / 2.5));
  z -= 2.5 * window * std::exp(-0.5 * ((y0 - kMouthY) / 1.1) * ((y0 - kMouthY) / 1.1));
  z += p.chin_protrusion * gauss(x0, y0 - kChinY, 15.0, 10.0);
  for (const auto& b : s.bumps) z += b.amplitude * gauss(x0 - b.x, y0 - b.y, b.radius, b.radius);
  return z;
}

// Smooth in-plane deformation carrying the length and width parameters.
std::array<double, 2> planar_map(const FaceParams& p, double x0, double y0) {
  const double ramp = smoothstep((kSellionY - y0) / 45.0) * (1.0 - smoothstep((kMouthY - y0) / 42.0)) *
                      std::exp(-0.5 * (x0 / 24.0) * (x0 / 24.0));
  double y = y0 - (p.nose_length - kNoseLength) * ramp;
  double x = x0 * (1.0 + (p.nose_width - 1.0) * gauss(x0, y0 - (kTipY + 10.0), 14.0, 22.0));
  x += (p.mouth_width / (2.0 * kMouthHalfWidth) - 1.0) * x0 * gauss(x0, y0 - kMouthY, 30.0, 12.0);
  for (double side : {-1.0, 1.0}) {
    y += p.brow_height * gauss(x0 - side * 30.0, y0 - 40.0, 16.0, 7.0);
    const double ex = x0 - side * kEyeX;
    const double g = (p.eye_size - 1.0) * gauss(ex, y0 - kEyeY, 14.0, 10.0);
    x += g * ex;
    y += g * (y0 - kEyeY);
  }
  x *= 1.0 - p.jaw_taper * smoothstep((-15.0 - y0) / 80.0);
  return {x, y};
}

double clamped_normal(std::mt19937_64& rng, double mean, double sd) {
  std::normal_distribution<double> n(0.0, 1.0);
  return mean + sd * std::clamp(n(rng), -2.5, 2.5);
}

void add_bumps(std::mt19937_64& rng, std::vector<Bump>& out, int count, double rmin, double rmax, double amp_sd) {
  std::uniform_real_distribution<double> ux(-66.0, 66.0);
  std::uniform_real_distribution<double> uy(-104.0, 84.0);
  std::uniform_real_distribution<double> ur(rmin, rmax);
  std::normal_distribution<double> ua(0.0, amp_sd);
  for (int i = 0; i < count;) {
    Bump b{ux(rng), uy(rng), ur(rng), ua(rng)};
    if (!in_domain(b.x / 0.92, (b.y - kDomainCenterY) / 0.94 + kDomainCenterY)) continue;
    out.push_back(b);
    ++i;
  }
}

}  // namespace

BarycentricLocation FaceTemplate::locate(double x0, double y0) const {
  const double fi = x0 / spacing;
  const double fj = y0 / spacing;
  const int i = static_cast<int>(std::floor(fi));
  const int j = static_cast<int>(std::floor(fj));
  const int ci = i - min_i_;
  const int cj = j - min_j_;
  if (ci < 0 || cj < 0 || ci >= cols_ || cj >= rows_ || cell_triangle_[static_cast<std::size_t>(cj * cols_ + ci)] < 0) {
    throw Error(ErrorCode::InvalidArgument, "parameter point outside the face template");
  }
  const int lower = cell_triangle_[static_cast<std::size_t>(cj * cols_ + ci)];
  const double u = fi - i;
  const double v = fj - j;
  // Lower triangle (p00, p10, p11) holds u >= v; upper (p00, p11, p01).
  BarycentricLocation loc;
  if (u >= v) {
    loc.triangle = lower;
    loc.weights = {1.0 - u, u - v, v};
  } else {
    loc.triangle = lower + 1;
    loc.weights = {1.0 - v, u, v - u};
  }
  return loc;
}

FaceTemplate make_template(double spacing) {
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "template spacing must be positive");
  FaceTemplate t;
  t.spacing = spacing;
  const int imax = static_cast<int>(std::ceil(kDomainRx / spacing));
  const int jmin = static_cast<int>(std::floor((kDomainCenterY - kDomainRy) / spacing));
  const int jmax = static_cast<int>(std::ceil((kDomainCenterY + kDomainRy) / spacing));
  t.min_i_ = -imax;
  t.min_j_ = jmin;
  t.cols_ = 2 * imax + 1;
  t.rows_ = jmax - jmin + 1;
  std::vector<int> vid(static_cast<std::size_t>(t.cols_ * t.rows_), -1);
  auto lattice = [&](int i, int j) -> int& {
    return vid[static_cast<std::size_t>((j - t.min_j_) * t.cols_ + (i - t.min_i_))];
  };
  for (int j = jmin; j <= jmax; ++j) {
    for (int i = -imax; i <= imax; ++i) {
      if (!in_domain(i * spacing, j * spacing)) continue;
      lattice(i, j) = static_cast<int>(t.coords.size());
      t.coords.push_back({i * spacing, j * spacing});
    }
  }
  t.cell_triangle_.assign(static_cast<std::size_t>(t.cols_ * t.rows_), -1);
  for (int j = jmin; j < jmax; ++j) {
    for (int i = -imax; i < imax; ++i) {
      const int a = lattice(i, j);
      const int b = lattice(i + 1, j);
      const int c = lattice(i + 1, j + 1);
      const int d = lattice(i, j + 1);
      if (a < 0 || b < 0 || c < 0 || d < 0) continue;
      t.cell_triangle_[static_cast<std::size_t>((j - t.min_j_) * t.cols_ + (i - t.min_i_))] =
          static_cast<int>(t.triangles.size());
      t.triangles.push_back({a, b, c});
      t.triangles.push_back({a, c, d});
    }
  }
  // Drop lattice points no cell uses, keeping the vertex order.
  std::vector<int> used(t.coords.size(), 0);
  for (const auto& tri : t.triangles) {
    for (int v : tri) used[static_cast<std::size_t>(v)] = 1;
  }
  std::vector<int> remap(t.coords.size(), -1);
  std::vector<std::array<double, 2>> kept;
  for (std::size_t v = 0; v < t.coords.size(); ++v) {
    if (!used[v]) continue;
    remap[v] = static_cast<int>(kept.size());
    kept.push_back(t.coords[v]);
  }
  t.coords = std::move(kept);
  for (auto& tri : t.triangles) {
    for (int& v : tri) v = remap[static_cast<std::size_t>(v)];
  }
  return t;
}

std::vector<NamedPosition> fiducial_layout() {
  std::vector<NamedPosition> out;
  auto add = [&](std::string name, double x, double y, LandmarkGroup g = LandmarkGroup::Internal) {
    out.push_back({std::move(name), g, x, y});
  };

  // Jaw contour on an inset ellipse, ear to ear through the chin.
  const double step = 105.0 / 9.0;
  auto contour = [&](double deg) {
    const double r = deg * std::numbers::pi / 180.0;
    return std::array<double, 2>{64.0 * std::cos(r), kDomainCenterY + 90.0 * std::sin(r)};
  };
  const auto chin = contour(270.0);
  add(std::string(depthio::kChinTip), chin[0], chin[1], LandmarkGroup::Silhouette);
  for (int k = 1; k <= 9; ++k) {
    const auto l = contour(270.0 + k * step);
    const auto r = contour(270.0 - k * step);
    add("contour_l" + std::to_string(k), l[0], l[1], LandmarkGroup::Silhouette);
    add("contour_r" + std::to_string(k), r[0], r[1], LandmarkGroup::Silhouette);
  }

  for (double side : {1.0, -1.0}) {
    const std::string s = side > 0 ? "_l" : "_r";
    const double by = 40.0;
    const double offsets[5] = {-16.0, -8.0, 0.0, 8.0, 16.0};
    for (int k = 0; k < 5; ++k) {
      const double dx = offsets[k];
      add("brow_upper" + s + std::to_string(k + 1), side * (30.0 + dx), by + 2.5 * (1.0 - (dx / 18.0) * (dx / 18.0)));
    }
    for (int k = 0; k < 3; ++k) {
      const double dx = offsets[k + 1];
      add("brow_lower" + s + std::to_string(k + 1), side * (30.0 + dx), by - 2.0);
    }
  }

  for (double side : {1.0, -1.0}) {
    const std::string s = side > 0 ? "_l" : "_r";
    const double rx = 10.0;
    const double ry = 4.0;
    add("endocanthion" + s, side * (kEyeX - rx), kEyeY);
    add("exocanthion" + s, side * (kEyeX + rx), kEyeY);
    add("eye_top" + s, side * kEyeX, kEyeY + ry);
    add("eye_bottom" + s, side * kEyeX, kEyeY - ry);
    add("eye_upper_inner" + s, side * (kEyeX - 0.6 * rx), kEyeY + 0.75 * ry);
    add("eye_upper_outer" + s, side * (kEyeX + 0.6 * rx), kEyeY + 0.75 * ry);
    add("eye_lower_inner" + s, side * (kEyeX - 0.6 * rx), kEyeY - 0.75 * ry);
    add("eye_lower_outer" + s, side * (kEyeX + 0.6 * rx), kEyeY - 0.75 * ry);
    add("pupil" + s, side * kEyeX, kEyeY);
  }

  const double ty = kTipY;
  add(std::string(depthio::kSellion), 0.0, kSellionY);
  add("nasal_bridge", 0.0, kSellionY - 0.5 * kNoseLength);
  add("nose_tip", 0.0, ty);
  add("subnasale", 0.0, ty - 8.0);
  for (double side : {1.0, -1.0}) {
    const std::string s = side > 0 ? "_l" : "_r";
    add("alare" + s, side * 15.0, ty - 2.0);
    add("nostril" + s, side * 5.0, ty - 6.0);
    add("nose_contour" + s, side * 7.0, ty + 10.0);
  }

  const double ym = kMouthY;
  const double half = kMouthHalfWidth;
  add("cheilion_l", half, ym);
  add("cheilion_r", -half, ym);
  add("mouth_center", 0.0, ym);
  add("philtrum", 0.0, ym + 12.0);
  const double outer[3] = {0.0, half / 3.0, 2.0 * half / 3.0};
  for (int k = 0; k < 3; ++k) {
    const double x = outer[k];
    const double q = (x / half) * (x / half);
    if (k == 0) {
      add("lip_upper_outer", 0.0, ym + 6.5);
      add("lip_lower_outer", 0.0, ym - 8.0);
      continue;
    }
    add("lip_upper_outer_l" + std::to_string(k), x, ym + 6.5 - 2.0 * q);
    add("lip_upper_outer_r" + std::to_string(k), -x, ym + 6.5 - 2.0 * q);
    add("lip_lower_outer_l" + std::to_string(k), x, ym - 8.0 + 3.0 * q);
    add("lip_lower_outer_r" + std::to_string(k), -x, ym - 8.0 + 3.0 * q);
  }
  add("lip_upper_inner", 0.0, ym + 0.8);
  add("lip_upper_inner_l", 0.5 * half, ym + 0.8);
  add("lip_upper_inner_r", -0.5 * half, ym + 0.8);
  add("lip_lower_inner", 0.0, ym - 0.8);
  add("lip_lower_inner_l", 0.5 * half, ym - 0.8);
  add("lip_lower_inner_r", -0.5 * half, ym - 0.8);
  return out;
}

std::vector<std::string> anatomical_names() {
  return {"sellion",        "chin_tip",      "nose_tip",       "exocanthion_l", "exocanthion_r",
          "endocanthion_l", "endocanthion_r", "alare_l",        "alare_r",       "cheilion_l",
          "cheilion_r",     "zygion_l",      "zygion_r",       "tragion_l",     "tragion_r"};
}

std::vector<NamedPosition> anatomical_layout() {
  const auto all = fiducial_layout();
  std::vector<NamedPosition> out;
  for (const auto& name : anatomical_names()) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const NamedPosition& n) { return n.name == name; });
    if (it != all.end()) {
      out.push_back(*it);
      out.back().group = LandmarkGroup::Internal;
    }
  }
  out.push_back({"zygion_l", LandmarkGroup::Internal, 56.0, 10.0});
  out.push_back({"zygion_r", LandmarkGroup::Internal, -56.0, 10.0});
  out.push_back({"tragion_l", LandmarkGroup::Internal, 64.0, 16.0});
  out.push_back({"tragion_r", LandmarkGroup::Internal, -64.0, 16.0});
  return out;
}

Vec3 face_point(const FaceShape& shape, double x0, double y0) {
  const auto [x, y] = planar_map(shape.params, x0, y0);
  const double q = 1.0 - (x / kHeadRx) * (x / kHeadRx) - (y / kHeadRy) * (y / kHeadRy);
  const double base = kHeadDepth * std::sqrt(std::max(q, 0.05));
  return {x, y, base + feature_height(shape, x0, y0)};
}

TriangleMesh face_mesh(const FaceShape& shape, const FaceTemplate& tmpl) {
  TriangleMesh mesh;
  mesh.vertices.reserve(tmpl.coords.size());
  for (const auto& c : tmpl.coords) mesh.vertices.push_back(face_point(shape, c[0], c[1]));
  mesh.triangles = tmpl.triangles;
  return geometry::compute_vertex_normals(std::move(mesh));
}

std::vector<BarycentricLocation> locate_layout(const FaceTemplate& tmpl, const std::vector<NamedPosition>& layout) {
  std::vector<BarycentricLocation> out;
  out.reserve(layout.size());
  for (const auto& l : layout) out.push_back(tmpl.locate(l.x0, l.y0));
  return out;
}

depthio::LandmarkSet place_landmarks(const TriangleMesh& mesh, const FaceTemplate& tmpl,
                                     const std::vector<NamedPosition>& layout) {
  depthio::LandmarkSet set;
  for (const auto& l : layout) {
    set.points.push_back({l.name, geometry::point_at(mesh, tmpl.locate(l.x0, l.y0)), l.group, true});
  }
  return set;
}

FaceShape random_shape(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FaceShape s;
  FaceParams& p = s.params;
  p.nose_length = clamped_normal(rng, 45.0, 4.0);
  p.nose_width = clamped_normal(rng, 1.0, 0.12);
  p.nose_height = clamped_normal(rng, 21.0, 2.5);
  p.eye_depth = clamped_normal(rng, 11.0, 2.0);
  p.eye_size = clamped_normal(rng, 1.0, 0.1);
  p.brow_height = clamped_normal(rng, 0.0, 2.0);
  p.mouth_width = clamped_normal(rng, 50.0, 4.0);
  p.lip_fullness = clamped_normal(rng, 3.5, 0.8);
  p.cheek_fullness = clamped_normal(rng, 5.0, 1.5);
  p.cheekbone = clamped_normal(rng, 3.0, 1.0);
  p.jaw_taper = clamped_normal(rng, 0.12, 0.04);
  p.chin_protrusion = clamped_normal(rng, 6.0, 1.5);
  add_bumps(rng, s.bumps, 12, 6.0, 14.0, 1.5);
  add_bumps(rng, s.bumps, 40, 2.5, 5.0, 0.5);
  return s;
}

SyntheticFace make_face(const FaceShape& shape, const FaceTemplate& tmpl) {
  SyntheticFace f;
  f.shape = shape;
  f.mesh = face_mesh(shape, tmpl);
  f.fiducials = place_landmarks(f.mesh, tmpl, fiducial_layout());
  f.anatomical = place_landmarks(f.mesh, tmpl, anatomical_layout());
  return f;
}

std::vector<SyntheticFace> generate_synthetic(std::uint64_t seed, int count, double spacing) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "synthetic count must be at least 1");
  const FaceTemplate tmpl = make_template(spacing);
  std::vector<SyntheticFace> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    // splitmix64 of (seed, i) keeps per-face streams independent.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(i + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    SyntheticFace f = make_face(random_shape(z), tmpl);
    std::mt19937_64 meta(z ^ 0x5bd1e995ull);
    f.age = std::uniform_int_distribution<int>(18, 70)(meta);
    f.sex = std::uniform_int_distribution<int>(0, 1)(meta) == 0 ? 'F' : 'M';
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace facehal::dataset
