#include "common/error.hpp"
#include "fusion/fusion.hpp"
#include "generators.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace facehal;
using namespace facehal::fusion;
using facehal::testing::Gen;

namespace {

retrieval::PartMask full_mask(const TriangleMesh& m, double weight = 1.0) {
  retrieval::PartMask mask{"nose", {}, {}};
  for (int i = 0; i < static_cast<int>(m.vertices.size()); ++i) {
    mask.vertices.push_back(i);
    mask.weights.push_back(weight);
  }
  return mask;
}

NormalField own_normals(const TriangleMesh& m) {
  return {m.normals, std::vector<int>(m.normals.size(), kOriginalTag)};
}

double max_move(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, (a[i] - b[i]).norm());
  return d;
}

double z_variance(const std::vector<Vec3>& pts) {
  double mean = 0.0, sq = 0.0;
  for (const auto& p : pts) mean += p.z();
  mean /= static_cast<double>(pts.size());
  for (const auto& p : pts) sq += (p.z() - mean) * (p.z() - mean);
  return sq / static_cast<double>(pts.size());
}

TriangleMesh noisy_plane(Gen& g, double sigma) {
  return testing::grid_mesh(30, 30, 2.0, [&](double, double) { return g.normal(sigma); });
}

}  // namespace

TEST_CASE("slerp endpoints and midpoint") {
  const Vec3 a(1, 0, 0), b(0, 1, 0);
  CHECK((slerp(a, b, 0.0) - a).norm() < 1e-15);
  CHECK((slerp(a, b, 1.0) - b).norm() < 1e-15);
  CHECK((slerp(a, b, 0.5) - Vec3(1, 1, 0).normalized()).norm() < 1e-12);
  Gen g(1);
  for (int i = 0; i < 200; ++i) {
    const Vec3 u = g.unit(), v = g.unit();
    const double t = g.uniform(0, 1);
    const Vec3 s = slerp(u, v, t);
    CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const double total = std::acos(std::clamp(u.dot(v), -1.0, 1.0));
    CHECK(std::acos(std::clamp(u.dot(s), -1.0, 1.0)) == doctest::Approx(t * total).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("transferring from the target itself returns its own normals") {
  const auto s = testing::icosphere(3, 20.0);
  const auto field = transfer_normals(s, {&s}, {full_mask(s)});
  for (std::size_t i = 0; i < s.vertices.size(); ++i) {
    CHECK((field.normals[i] - s.normals[i]).norm() < 1e-6);
    CHECK(field.tags[i] == 0);
  }
}

TEST_CASE("constant source normals are copied to interior vertices") {
  Gen g(2);
  const auto target = testing::grid_mesh(10, 10, 1.0, [&](double, double) { return g.normal(0.3); });
  const auto source = testing::flat_grid(10, 10, 1.0);
  const auto field = transfer_normals(target, {&source}, {full_mask(target)});
  for (const auto& n : field.normals) CHECK((n - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("half-weight feather vertex takes the slerp midpoint") {
  auto target = testing::flat_grid(2, 2, 1.0);
  target.normals.assign(target.vertices.size(), Vec3(0, 1, 0));
  auto source = testing::flat_grid(2, 2, 1.0);
  source.normals.assign(source.vertices.size(), Vec3(1, 0, 0));
  const auto field = transfer_normals(target, {&source}, {full_mask(target, 0.5)});
  for (const auto& n : field.normals) CHECK((n - Vec3(1, 1, 0).normalized()).norm() < 1e-12);
}

TEST_CASE("distant sources and unmasked vertices keep the original normal") {
  auto target = testing::flat_grid(4, 4, 1.0);
  const auto far = geometry::transformed(testing::flat_grid(4, 4, 1.0), Eigen::AngleAxisd(1.0, Vec3::UnitX()).toRotationMatrix(),
                                         Vec3(0, 0, 40));
  auto mask = full_mask(target);
  const auto field = transfer_normals(target, {&far}, {mask});
  for (std::size_t i = 0; i < field.normals.size(); ++i) {
    CHECK(field.tags[i] == kOriginalTag);
    CHECK(field.normals[i] == target.normals[i]);
  }
  CHECK_THROWS_AS(transfer_normals(target, {}, {mask}), Error);
}

TEST_CASE("transfer does not depend on source vertex order") {
  Gen g(3);
  const auto target = testing::grid_mesh(12, 12, 1.0, [](double x, double y) { return 0.1 * x * y / 12.0; });
  const auto source = testing::grid_mesh(12, 12, 1.0, [](double x, double y) { return std::sin(x / 3.0) + 0.05 * y; });
  TriangleMesh shuffled = source;
  std::vector<int> perm(source.vertices.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), g.engine());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.vertices[static_cast<std::size_t>(perm[i])] = source.vertices[i];
    shuffled.normals[static_cast<std::size_t>(perm[i])] = source.normals[i];
  }
  for (auto& t : shuffled.triangles)
    for (auto& v : t) v = perm[static_cast<std::size_t>(v)];
  const auto a = transfer_normals(target, {&source}, {full_mask(target)});
  const auto b = transfer_normals(target, {&shuffled}, {full_mask(target)});
  for (std::size_t i = 0; i < a.normals.size(); ++i) CHECK((a.normals[i] - b.normals[i]).norm() < 1e-12);
}

TEST_CASE("fusing a plane or a sphere with its own normals is a fixed point") {
  const auto plane = testing::flat_grid(15, 15, 2.0);
  CHECK(max_move(fuse(plane, own_normals(plane)).vertices, plane.vertices) < 1e-6);
  auto sphere = testing::icosphere(3, 30.0);
  for (std::size_t i = 0; i < sphere.vertices.size(); ++i) sphere.normals[i] = sphere.vertices[i].normalized();
  CHECK(max_move(fuse(sphere, own_normals(sphere)).vertices, sphere.vertices) < 1e-6);
}

TEST_CASE("zero normal weight returns the input exactly") {
  Gen g(4);
  const auto p = noisy_plane(g, 1.0);
  NormalField up{std::vector<Vec3>(p.vertices.size(), Vec3(0, 0, 1)), std::vector<int>(p.vertices.size(), 0)};
  CHECK(fuse(p, up, {1.0, 0.0}).vertices == p.vertices);
}

TEST_CASE("noisy plane is flattened by upward normals") {
  for (double lambda_norm : {100.0, 20.0}) {
    Gen g(5);
    const auto p = noisy_plane(g, 1.0);
    NormalField up{std::vector<Vec3>(p.vertices.size(), Vec3(0, 0, 1)), std::vector<int>(p.vertices.size(), 0)};
    const auto out = fuse(p, up, {1.0, lambda_norm});
    CHECK(z_variance(out.vertices) <= 0.1 * z_variance(p.vertices));
    for (std::size_t i = 0; i < p.vertices.size(); ++i) CHECK((out.vertices[i] - p.vertices[i]).head<2>().norm() < 0.1);
  }
}

TEST_CASE("fused positions do not raise the objective") {
  Gen g(6);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = noisy_plane(g, 0.5);
    std::vector<Vec3> normals;
    std::vector<double> weights;
    for (std::size_t i = 0; i < p.vertices.size(); ++i) {
      normals.push_back((Vec3(0, 0, 1) + 0.3 * g.unit()).normalized());
      weights.push_back(g.uniform(0.1, 1.0));
    }
    const FusionWeights w{1.0, 20.0};
    const auto x = fuse_positions(p, p.vertices, weights, normals, w);
    CHECK(fusion_objective(p, x, p.vertices, weights, normals, w) <=
          fusion_objective(p, p.vertices, p.vertices, weights, normals, w));
  }
}

TEST_CASE("fusion is rotation equivariant") {
  Gen g(7);
  const auto p = noisy_plane(g, 1.0);
  NormalField up{std::vector<Vec3>(p.vertices.size(), Vec3(0, 0, 1)), std::vector<int>(p.vertices.size(), 0)};
  const Mat3 r = g.rotation();
  NormalField turned = up;
  for (auto& n : turned.normals) n = r * n;
  const auto a = fuse(geometry::transformed(p, r, Vec3::Zero()), turned);
  const auto b = fuse(p, up);
  for (std::size_t i = 0; i < a.vertices.size(); ++i) CHECK((a.vertices[i] - r * b.vertices[i]).norm() < 1e-6);
}

TEST_CASE("original-tagged vertices move less than part interiors") {
  Gen g(8);
  const auto p = noisy_plane(g, 1.0);
  NormalField field = own_normals(p);
  for (std::size_t i = 0; i < p.vertices.size(); ++i) {
    if (p.vertices[i].x() < 30.0) {
      field.normals[i] = Vec3(0, 0, 1);
      field.tags[i] = 0;
    }
  }
  const auto out = fuse(p, field);
  double part = 0.0, hair = 0.0;
  int np = 0, nh = 0;
  for (std::size_t i = 0; i < p.vertices.size(); ++i) {
    const double d = (out.vertices[i] - p.vertices[i]).norm();
    if (field.tags[i] == 0) part += d, ++np;
    else hair += d, ++nh;
  }
  CHECK(hair / nh < part / np);
}

TEST_CASE("fusion weight errors") {
  const auto p = testing::flat_grid(3, 3, 1.0);
  try {
    fuse(p, own_normals(p), {0.0, 20.0});
    FAIL("expected SingularSystem");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularSystem);
  }
  CHECK_THROWS_AS(fuse(p, own_normals(p), {-1.0, 20.0}), Error);
  CHECK_THROWS_AS(fuse(p, own_normals(p), {0.0, 0.0}), Error);
}
