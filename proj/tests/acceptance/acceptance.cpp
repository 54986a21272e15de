// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every selected criterion passes.
//
//   acceptance [--work DIR] [--only N ...]

#include "align/dense_correspond.hpp"
#include "align/procrustes.hpp"
#include "align/warp.hpp"
#include "dataset/database.hpp"
#include "dataset/synthetic.hpp"
#include "fairing/smooth.hpp"
#include "features/descriptor.hpp"
#include "features/normal_histogram.hpp"
#include "features/pseudo_landmarks.hpp"
#include "fusion/fusion.hpp"
#include "generators.hpp"
#include "pipeline/config.hpp"
#include "pipeline/evaluate.hpp"
#include "pipeline/reconstruct.hpp"
#include "pipeline/render.hpp"
#include "retrieval/index.hpp"

#include <CLI11.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace facehal;
using facehal::testing::Gen;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? static_cast<double>(v[n / 2]) : 0.5 * static_cast<double>(v[n / 2 - 1] + v[n / 2]);
}

std::vector<Vec3> positions(const depthio::LandmarkSet& set) {
  std::vector<Vec3> out;
  for (const auto& p : set.points) out.push_back(p.coord);
  return out;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Synthetic databases shared by several criteria, built on first use.
class Fixtures {
 public:
  explicit Fixtures(fs::path work) : work_(std::move(work)) {}

  // 50 + 7 faces: entries s050..s056 are the held-out subjects.
  const dataset::Database& db57() { return get(db57_, "db57", 57); }
  // First 50 of the same faces; s050..s056 stay outside it.
  const dataset::Database& db50() { return get(db50_, "db50", 50); }
  const fs::path& work() const { return work_; }
  double build_seconds() const { return build_seconds_; }

  static constexpr std::uint64_t kSeed = 7;

 private:
  const dataset::Database& get(std::optional<dataset::Database>& slot, const char* name, int count) {
    if (!slot) {
      const auto t0 = std::chrono::steady_clock::now();
      dataset::SyntheticBuildOptions o;
      o.count = count;
      o.seed = kSeed;
      const auto manifest = dataset::build_synthetic_database(o, work_ / name);
      slot = dataset::load_database(manifest);
      build_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return *slot;
  }

  fs::path work_;
  std::optional<dataset::Database> db57_;
  std::optional<dataset::Database> db50_;
  double build_seconds_ = 0.0;
};

const std::vector<std::string> kHeldout = {"s050", "s051", "s052", "s053", "s054", "s055", "s056"};

Outcome c1_pseudo_landmark_count(Fixtures&) {
  const auto face = dataset::generate_synthetic(1, 1).front();
  const auto grid = features::sample_pseudo_landmarks(face.mesh, face.fiducials.find(depthio::kSellion)->coord,
                                                      face.fiducials.find(depthio::kChinTip)->coord, 33, 35);
  return {grid.points.size() == 1225, fmt("%zu points", grid.points.size())};
}

Outcome c2_alpha_map(Fixtures&) {
  const features::AlphaMap expected = {
      {"eyes", 4.0}, {"nose", 2.0}, {"mouth", 10.0}, {"left_cheek", 1.0}, {"right_cheek", 1.0}};
  const auto got = features::default_alpha_map();
  std::string text;
  for (const auto& [k, v] : got) text += fmt(text.empty() ? "%s=%g" : " %s=%g", k.c_str(), v);
  return {got == expected, text};
}

Outcome c3_self_retrieval(Fixtures& fx) {
  const auto& db = fx.db50();
  const features::DescriptorParams params{33, 35};
  const auto index = retrieval::build_index(db.ids, db.meshes, db.masks, db.anchors, params);
  std::size_t failures = 0;
  for (std::size_t k = 0; k < db.meshes.size(); ++k) {
    const auto own = retrieval::describe_mesh(db.meshes[k], db.masks, db.anchors, params);
    for (const auto& r : retrieval::query(index, own)) {
      const auto& top = r.ranking.front();
      const bool unique = r.ranking.size() < 2 || r.ranking[1].distance.combined > 0.0;
      if (top.id != db.ids[k] || top.distance.combined != 0.0 || !unique) ++failures;
    }
  }
  return {failures == 0, fmt("%zu queries x %zu parts, %zu not ranked first at distance 0", db.meshes.size(),
                             db.masks.size(), failures)};
}

Outcome c4_noisy_ranking(Fixtures& fx) {
  const auto& db = fx.db57();
  const pipeline::PipelineConfig cfg;
  pipeline::RenderOptions render;
  render.noise_mm = 2.0;
  render.dropout = 0.05;
  std::array<std::array<std::vector<std::size_t>, 4>, 4> pooled;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto t = pipeline::evaluate_rankings(db, kHeldout, cfg, render, seed);
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) pooled[a][b].insert(pooled[a][b].end(), t.ranks[a][b].begin(), t.ranks[a][b].end());
  }
  const double limit = 0.1 * static_cast<double>(db.meshes.size());
  bool pass = true;
  std::string detail;
  for (std::size_t table = 0; table < 4; ++table) {
    const double pts = median(pooled[table][0]);
    const double hist = median(pooled[table][2]);
    const double comb = median(pooled[table][3]);
    const bool top = table > 1 || comb <= limit;
    const bool ratio = comb <= 2.0 * pts && comb <= 2.0 * hist;
    pass = pass && top && ratio;
    detail += fmt("%s median comb %.1f pts %.1f hist %.1f; ", std::string(pipeline::kEvaluationTables[table]).c_str(),
                  comb, pts, hist);
  }
  detail += fmt("top-10%% limit %.1f, %zu queries", limit, pooled[0][3].size());
  return {pass, detail};
}

Outcome c5_procrustes(Fixtures&) {
  Gen g(5);
  double worst_r = 0.0, worst_t = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    align::RigidTransform truth;
    truth.rotation = g.rotation();
    truth.translation = g.vec(-100, 100);
    truth.scale = g.uniform(0.5, 2.0);
    std::vector<Vec3> src, dst;
    const int n = g.integer(4, 83);
    for (int i = 0; i < n; ++i) {
      src.push_back(g.vec(-100, 100));
      dst.push_back(truth.apply(src.back()));
    }
    const auto est = align::procrustes(src, dst, true);
    worst_r = std::max(worst_r, (est.rotation - truth.rotation).norm());
    worst_t = std::max(worst_t, (est.translation - truth.translation).norm());
  }
  return {worst_r <= 1e-9 && worst_t <= 1e-9,
          fmt("worst rotation Frobenius %.2e, translation %.2e mm over 100 trials", worst_r, worst_t)};
}

Outcome c6_chi_square(Fixtures&) {
  Gen g(6);
  double worst = 0.0;
  bool in_range = true;
  for (int trial = 0; trial < 1000; ++trial) {
    features::AEHistogram h, k;
    h.bins = g.histogram(features::kHistogramBins * features::kHistogramBins, g.uniform(0.0, 0.99));
    k.bins = trial % 10 == 0 ? h.bins : g.histogram(features::kHistogramBins * features::kHistogramBins, g.uniform(0.0, 0.99));
    long double brute = 0.0L;
    for (std::size_t i = 0; i < h.bins.size(); ++i) {
      const long double a = h.bins[i], b = k.bins[i];
      if (a + b > 0.0L) brute += (a - b) * (a - b) / (a + b);
    }
    const double x = features::chi_square(h, k);
    worst = std::max(worst, static_cast<double>(std::fabs(static_cast<long double>(x) - brute)));
    in_range = in_range && x >= 0.0 && x <= 2.0;
  }
  return {worst <= 1e-12 && in_range, fmt("worst deviation %.2e, all in [0, 2]: %s", worst, in_range ? "yes" : "no")};
}

Outcome c7_azimuth_elevation(Fixtures&) {
  const auto [theta, phi] = features::azimuth_elevation(Vec3(1, 1, 1) / std::sqrt(3.0));
  const double et = std::fabs(theta - std::numbers::pi / 4);
  const double ep = std::fabs(phi - std::atan(1.0 / std::sqrt(2.0)));
  Gen g(7);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 v = g.vec(-10, 10);
    const double s = std::ldexp(1.0, g.integer(-20, 20));
    if (features::azimuth_elevation(v) != features::azimuth_elevation(s * v)) ++mismatches;
  }
  return {et <= 1e-12 && ep <= 1e-12 && mismatches == 0,
          fmt("theta error %.1e, phi error %.1e, %d of 1000 scaled vectors differ", et, ep, mismatches)};
}

struct SphereFit {
  Vec3 center;
  double radius;
};

SphereFit fit_sphere(const std::vector<Vec3>& pts) {
  Eigen::MatrixXd a(pts.size(), 4);
  Eigen::VectorXd b(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    a.row(static_cast<Eigen::Index>(i)) << 2 * pts[i].x(), 2 * pts[i].y(), 2 * pts[i].z(), 1.0;
    b(static_cast<Eigen::Index>(i)) = pts[i].squaredNorm();
  }
  const Eigen::Vector4d s = a.colPivHouseholderQr().solve(b);
  const Vec3 c = s.head<3>();
  return {c, std::sqrt(s(3) + c.squaredNorm())};
}

double radial_rms(const std::vector<Vec3>& pts) {
  const auto s = fit_sphere(pts);
  double sum = 0.0;
  for (const auto& p : pts) sum += std::pow((p - s.center).norm() - s.radius, 2);
  return std::sqrt(sum / static_cast<double>(pts.size()));
}

Outcome c8_smoothing(Fixtures&) {
  double worst_ratio = 0.0;
  bool monotone = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Gen g(seed);
    auto s = testing::icosphere(3);
    for (auto& v : s.vertices) v *= 1.0 + g.normal(0.02);
    s = geometry::compute_vertex_normals(std::move(s));
    const auto r = fairing::smooth_with_trace(s);
    worst_ratio = std::max(worst_ratio, radial_rms(r.mesh.vertices) / radial_rms(s.vertices));
    for (std::size_t i = 0; i < r.energy_before.size(); ++i) {
      monotone = monotone && r.energy_after[i] <= r.energy_before[i];
      if (i > 0) monotone = monotone && r.energy_before[i] <= r.energy_after[i - 1];
    }
  }
  return {worst_ratio <= 0.5 && monotone, fmt("worst radial RMS reduction %.1f%% over 5 seeds, energy non-increasing: %s",
                                              100.0 * (1.0 - worst_ratio), monotone ? "yes" : "no")};
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

Outcome c9_fusion(Fixtures&) {
  auto own = [](const TriangleMesh& m) {
    return fusion::NormalField{m.normals, std::vector<int>(m.normals.size(), fusion::kOriginalTag)};
  };
  const auto plane = testing::flat_grid(15, 15, 2.0);
  const double plane_move = max_move(fusion::fuse(plane, own(plane)).vertices, plane.vertices);
  auto sphere = testing::icosphere(3, 30.0);
  for (std::size_t i = 0; i < sphere.vertices.size(); ++i) sphere.normals[i] = sphere.vertices[i].normalized();
  const double sphere_move = max_move(fusion::fuse(sphere, own(sphere)).vertices, sphere.vertices);

  Gen g(9);
  const auto noisy = testing::grid_mesh(30, 30, 2.0, [&](double, double) { return g.normal(1.0); });
  const fusion::NormalField up{std::vector<Vec3>(noisy.vertices.size(), Vec3(0, 0, 1)),
                               std::vector<int>(noisy.vertices.size(), 0)};
  const auto flat = fusion::fuse(noisy, up);
  const double reduction = 1.0 - z_variance(flat.vertices) / z_variance(noisy.vertices);
  return {plane_move <= 1e-6 && sphere_move <= 1e-6 && reduction >= 0.9,
          fmt("fixed point moves plane %.1e mm, sphere %.1e mm; plane z-variance reduced %.1f%%", plane_move,
              sphere_move, 100.0 * reduction)};
}

std::vector<double> part_weights(const dataset::Database& db) {
  std::vector<double> w(db.generic.vertices.size(), 0.0);
  for (const auto& m : db.masks) {
    const auto d = m.dense(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::max(w[i], d[i]);
  }
  return w;
}

Outcome c10_detail_transfer(Fixtures& fx) {
  const auto& db = fx.db50();
  const auto faces = dataset::generate_synthetic(Fixtures::kSeed, 57);
  const pipeline::PipelineConfig cfg;
  const auto weights = part_weights(db);
  int better = 0;
  std::string detail;
  for (std::size_t s = 50; s < faces.size(); ++s) {
    pipeline::RenderOptions ro;
    ro.seed = pipeline::subject_seed(1, kHeldout[s - 50]);
    const auto frame = pipeline::render_depth(faces[s].mesh, faces[s].fiducials, ro);
    const auto truth = align::apply(frame.pose, faces[s].mesh);
    const auto r = pipeline::reconstruct(db, frame.frame, frame.pixel_landmarks, cfg);
    const auto generic_only = pipeline::merge(db, r.query, {}, {}, cfg);
    const double e_ret = pipeline::mean_normal_error_deg(r.merged.mesh, truth, weights);
    const double e_gen = pipeline::mean_normal_error_deg(generic_only.mesh, truth, weights);
    if (e_ret < e_gen) ++better;
    detail += fmt("%.2f/%.2f ", e_ret, e_gen);
  }
  return {better >= 6, fmt("retrieval lower on %d of 7 (deg retrieval/generic-only: %s)", better, detail.c_str())};
}

Outcome c11_registration(Fixtures& fx) {
  const auto& db = fx.db50();
  const auto generic_landmarks = db.generic_landmarks();
  Gen g(11);
  const auto src = positions(generic_landmarks);
  auto dst = src;
  for (auto& p : dst) p += g.vec(-3, 3);
  const auto target = align::landmark_warp(db.generic, src, dst).mesh;
  auto target_landmarks = generic_landmarks;
  for (std::size_t i = 0; i < dst.size(); ++i) target_landmarks.points[i].coord = dst[i];
  const auto c = align::dense_correspond(db.generic, target, generic_landmarks, target_landmarks,
                                         pipeline::PipelineConfig{}.registration());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.matches.size(); ++i) {
    if (!c.matches[i].matched) continue;
    sum += (c.deformed.vertices[i] - target.vertices[i]).squaredNorm();
    ++n;
  }
  const double rms = n > 0 ? std::sqrt(sum / static_cast<double>(n)) : INFINITY;
  bool monotone = !c.energy_trace.empty();
  for (std::size_t i = 1; i < c.energy_trace.size(); ++i) monotone = monotone && c.energy_trace[i] <= c.energy_trace[i - 1];
  return {rms <= 0.5 && monotone, fmt("RMS %.3f mm over %zu matched vertices, %zu-step energy trace non-increasing: %s",
                                      rms, n, c.energy_trace.size(), monotone ? "yes" : "no")};
}

Outcome c12_determinism(Fixtures& fx) {
  const auto& db = fx.db57();
  const auto dir = fx.work() / "determinism";
  fs::remove_all(dir);
  const std::size_t k = db.find("s053");
  pipeline::RenderOptions ro;
  ro.seed = 12;
  pipeline::run_render_depth(db.meshes[k], dataset::landmarks_at(db.meshes[k], db.fiducials), ro,
                             {dir / "in" / "depth.pgm", dir / "in" / "landmarks.json"});
  pipeline::PipelineConfig cfg;
  cfg.database = (db.root / "manifest.json").string();
  const std::vector<std::string> files = {"reconstruction.ply", "merge_report.json"};
  std::vector<std::string> runs[2];
  for (int run = 0; run < 2; ++run) {
    cfg.output_dir = (dir / ("run" + std::to_string(run))).string();
    pipeline::run_reconstruct({dir / "in" / "depth.pgm", dir / "in" / "landmarks.json", {}, {}}, cfg);
    for (const auto& f : files) runs[run].push_back(read_bytes(fs::path(cfg.output_dir) / f));
  }
  bool same = true;
  for (std::size_t i = 0; i < files.size(); ++i) same = same && !runs[0][i].empty() && runs[0][i] == runs[1][i];
  return {same, fmt("%zu + %zu bytes, identical: %s", runs[0][0].size(), runs[0][1].size(), same ? "yes" : "no")};
}

struct Criterion {
  int number;
  const char* name;
  double budget_s;
  Outcome (*run)(Fixtures&);
};

const Criterion kCriteria[] = {
    {1, "pseudo-landmark count", 1.0, c1_pseudo_landmark_count},
    {2, "alpha configuration", 1.0, c2_alpha_map},
    {3, "self-retrieval", 30.0, c3_self_retrieval},
    {4, "noisy ground-truth-in-database ranking", 600.0, c4_noisy_ranking},
    {5, "Procrustes recovery", 1.0, c5_procrustes},
    {6, "chi-square oracle", 1.0, c6_chi_square},
    {7, "azimuth-elevation", 1.0, c7_azimuth_elevation},
    {8, "smoothing", 10.0, c8_smoothing},
    {9, "fusion fixed point and plane denoising", 10.0, c9_fusion},
    {10, "end-to-end detail transfer", 900.0, c10_detail_transfer},
    {11, "dense registration recovery", 120.0, c11_registration},
    {12, "determinism", 300.0, c12_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "facehal_acceptance").string();
  std::vector<int> only;
  app.add_option("--work", work, "scratch directory")->capture_default_str();
  app.add_option("--only", only, "criterion numbers to run");
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(work);
  fs::create_directories(work);
  Fixtures fx(work);
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.contains(c.number)) continue;
    const double built_before = fx.build_seconds();
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(fx);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double seconds = total - (fx.build_seconds() - built_before);
    const bool in_time = seconds <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("[%s] %2d %s: %s (%.2f s of %.0f s)\n", pass ? "PASS" : "FAIL", c.number, c.name, o.detail.c_str(),
                seconds, c.budget_s);
    std::fflush(stdout);
  }
  std::printf("database builds: %.1f s\n", fx.build_seconds());
  return failed == 0 ? 0 : 1;
}
