#include "common/error.hpp"
#include "dataset/database.hpp"
#include "dataset/synthetic.hpp"
#include "features/descriptor.hpp"
#include "generators.hpp"
#include "geometry/spatial.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace facehal;
using namespace facehal::dataset;
using facehal::testing::Gen;

namespace {

const FaceTemplate& tmpl() {
  static const FaceTemplate t = make_template(2.0);
  return t;
}

Vec3 landmark(const depthio::LandmarkSet& s, std::string_view name) {
  const auto* p = s.find(name);
  REQUIRE(p != nullptr);
  return p->coord;
}

double rms(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(a.size()));
}

}  // namespace

TEST_CASE("synthetic faces are deterministic and share one topology") {
  const auto a = generate_synthetic(11, 4);
  const auto b = generate_synthetic(11, 4);
  const auto prefix = generate_synthetic(11, 2);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mesh.vertices == b[i].mesh.vertices);
    CHECK(a[i].mesh.triangles == a[0].mesh.triangles);
    CHECK(a[i].fiducials.points.size() == depthio::kFiducialCount);
    CHECK(a[i].anatomical.points.size() == kAnatomicalCount);
  }
  for (std::size_t i = 0; i < prefix.size(); ++i) CHECK(prefix[i].mesh.vertices == a[i].mesh.vertices);
  CHECK(a[0].mesh.vertices != a[1].mesh.vertices);
}

TEST_CASE("fiducial layout has 19 silhouette and 64 internal points with both anchors") {
  const auto layout = fiducial_layout();
  CHECK(layout.size() == 83);
  CHECK(std::count_if(layout.begin(), layout.end(), [](const auto& p) { return p.group == depthio::LandmarkGroup::Silhouette; }) == 19);
  const auto face = generate_synthetic(1, 1)[0];
  CHECK_NOTHROW(depthio::validate_fiducials(face.fiducials));
  CHECK(anatomical_names().size() == 15);
}

TEST_CASE("synthetic landmarks lie on the mesh surface") {
  for (const auto& face : generate_synthetic(2, 3)) {
    const geometry::TriangleBvh bvh(face.mesh);
    for (const auto* set : {&face.fiducials, &face.anatomical})
      for (const auto& p : set->points) CHECK(bvh.nearest(p.coord).distance < 1e-6);
  }
}

TEST_CASE("changing only the nose moves the nose descriptor more than the cheeks") {
  FaceShape a = random_shape(4);
  FaceShape b = a;
  b.params.nose_length += 8.0;
  const auto fa = make_face(a, tmpl());
  const auto fb = make_face(b, tmpl());
  const auto masks = default_part_masks(tmpl(), fa.mesh);
  const auto areas_a = geometry::vertex_areas(fa.mesh);
  const auto areas_b = geometry::vertex_areas(fb.mesh);
  auto distance = [&](std::string_view part) {
    const auto& mask = retrieval::find_part(masks, part);
    const auto da = features::describe_part(fa.mesh, mask, landmark(fa.fiducials, "sellion"),
                                            landmark(fa.fiducials, "chin_tip"), {33, 35}, areas_a);
    const auto db = features::describe_part(fb.mesh, mask, landmark(fb.fiducials, "sellion"),
                                            landmark(fb.fiducials, "chin_tip"), {33, 35}, areas_b);
    return features::pts_distance(da.grid, db.grid);
  };
  const double nose = distance("nose");
  CHECK(nose > distance("left_cheek"));
  CHECK(nose > distance("right_cheek"));
}

TEST_CASE("registering the template onto itself is the identity") {
  const auto mesh = face_mesh(FaceShape{}, tmpl());
  const auto lm = place_landmarks(mesh, tmpl(), anatomical_layout());
  const auto out = register_database({{"self", mesh, lm}}, mesh, lm);
  REQUIRE(out.size() == 1);
  CHECK(out[0].mesh.triangles == mesh.triangles);
  CHECK(rms(out[0].mesh.vertices, mesh.vertices) < 1e-3);
}

TEST_CASE("ten synthetic faces register close to their surfaces and ground truth") {
  const auto faces = generate_synthetic(5, 10);
  const auto mesh = face_mesh(FaceShape{}, tmpl());
  const auto lm = place_landmarks(mesh, tmpl(), anatomical_layout());
  std::vector<RawEntry> raw;
  for (std::size_t i = 0; i < faces.size(); ++i) raw.push_back({"f" + std::to_string(i), faces[i].mesh, faces[i].anatomical});
  const auto out = register_database(raw, mesh, lm);
  REQUIRE(out.size() == 10);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].mesh.triangles == mesh.triangles);
    CHECK(out[i].rms_mm < 1.0);
    // the generator lifts one template, so vertex i of face k is the ground truth for vertex i
    CHECK(rms(out[i].mesh.vertices, faces[i].mesh.vertices) < 2.0);
  }
}

TEST_CASE("a 14-landmark entry is rejected by id") {
  const auto face = generate_synthetic(6, 1)[0];
  const auto mesh = face_mesh(FaceShape{}, tmpl());
  const auto lm = place_landmarks(mesh, tmpl(), anatomical_layout());
  auto short_set = face.anatomical;
  short_set.points.pop_back();
  try {
    register_database({{"subject_x", face.mesh, short_set}}, mesh, lm);
    FAIL("expected WrongCount");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WrongCount);
    CHECK(std::string(e.what()).find("subject_x") != std::string::npos);
  }
}

TEST_CASE("generic mean cases") {
  const auto faces = generate_synthetic(8, 10);
  std::vector<TriangleMesh> meshes;
  for (const auto& f : faces) meshes.push_back(f.mesh);
  CHECK(generic_mean({meshes[0]}).vertices == meshes[0].vertices);

  const auto mean = generic_mean(meshes);
  for (std::size_t v = 0; v < mean.vertices.size(); ++v) {
    Vec3 lo = meshes[0].vertices[v], hi = lo;
    for (const auto& m : meshes) {
      lo = lo.cwiseMin(m.vertices[v]);
      hi = hi.cwiseMax(m.vertices[v]);
    }
    CHECK((mean.vertices[v].array() >= lo.array() - 1e-9).all());
    CHECK((mean.vertices[v].array() <= hi.array() + 1e-9).all());
  }
  CHECK(mean.has_normals());

  auto reversed = meshes;
  std::reverse(reversed.begin(), reversed.end());
  const auto mean_rev = generic_mean(reversed);
  for (std::size_t v = 0; v < mean.vertices.size(); ++v) CHECK((mean.vertices[v] - mean_rev.vertices[v]).norm() < 1e-12);

  TriangleMesh mirrored = meshes[0];
  for (auto& p : mirrored.vertices) p.x() = -p.x();
  const auto sym = generic_mean({meshes[0], mirrored});
  for (const auto& p : sym.vertices) CHECK(p.x() == 0.0);

  auto broken = meshes;
  broken[2].vertices.pop_back();
  CHECK_THROWS_AS(generic_mean(broken), Error);
}

TEST_CASE("single-entry synthetic database builds and loads") {
  const auto dir = std::filesystem::temp_directory_path() / "facehal_db_one";
  std::filesystem::remove_all(dir);
  SyntheticBuildOptions options;
  options.count = 1;
  const auto manifest_path = build_synthetic_database(options, dir);
  const auto db = load_database(manifest_path);
  CHECK(db.ids.size() == 1);
  CHECK(db.meshes[0].triangles == db.generic.triangles);
  CHECK(db.masks.size() == 5);
  CHECK(db.fiducials.size() == 83);
  CHECK(db.generic_landmarks().points.size() == 83);
  CHECK(db.find(db.ids[0]) == 0);
  CHECK_THROWS_AS(db.find("nobody"), Error);

  const auto manifest = load_manifest(manifest_path);
  save_manifest(manifest, dir / "copy.json");
  const auto copy = load_manifest(dir / "copy.json");
  CHECK(copy.param_hash == manifest.param_hash);
  REQUIRE(copy.entries.size() == 1);
  CHECK(copy.entries[0].id == manifest.entries[0].id);
  CHECK(copy.entries[0].registration_rms_mm == manifest.entries[0].registration_rms_mm);
  std::filesystem::remove_all(dir);
}
