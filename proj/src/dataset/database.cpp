#include "dataset/database.hpp"

#include "common/error.hpp"
#include "common/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace facehal::dataset {
namespace {

namespace fs = std::filesystem;
using depthio::LandmarkGroup;

double nose_half_width(double y) {
  const double t = std::clamp((5.0 - y) / 20.0, 0.0, 1.0);
  return 10.0 + 9.0 * t * t * (3.0 - 2.0 * t);
}

bool nose_zone(double x, double y) { return y >= -25.0 && y < 20.0 && std::abs(x) < nose_half_width(y); }

bool eyes_zone(double x, double y) { return y >= 14.0 && y <= 40.0 && std::abs(x) <= 54.0 && !nose_zone(x, y); }

bool mouth_zone(double x, double y) {
  const double u = x / 30.0;
  const double v = (y + 41.0) / 15.0;
  return u * u + v * v <= 1.0;
}

bool cheek_zone(double x, double y, double side) {
  if (side * x <= 0.0) return false;
  const double u = (std::abs(x) - 40.0) / 22.0;
  const double v = (y + 10.0) / 26.0;
  return u * u + v * v <= 1.0 && !nose_zone(x, y) && !mouth_zone(x, y) && !eyes_zone(x, y);
}

std::string entry_id(int i, int count) {
  const int width = std::max(3, static_cast<int>(std::to_string(std::max(count - 1, 0)).size()));
  std::string s = std::to_string(i);
  return "s" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

nlohmann::ordered_json location_json(const BarycentricLocation& loc) {
  return {{"triangle", loc.triangle}, {"weights", {loc.weights[0], loc.weights[1], loc.weights[2]}}};
}

fs::path resolve(const fs::path& root, const fs::path& p) { return p.is_absolute() ? p : root / p; }

void write_database(const fs::path& dir, const FaceTemplate& tmpl, const TriangleMesh& template_mesh,
                    const std::vector<RawEntry>& raw, const std::vector<std::pair<int, std::string>>& meta,
                    const SyntheticBuildOptions& options, const std::string& provenance) {
  const auto template_lm = place_landmarks(template_mesh, tmpl, anatomical_layout());
  const auto registered = register_database(raw, template_mesh, template_lm, options.registration);

  fs::create_directories(dir / "meshes");
  fs::create_directories(dir / "landmarks");
  DatabaseManifest manifest;
  std::vector<TriangleMesh> meshes;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    ManifestEntry e;
    e.id = raw[i].id;
    e.mesh = fs::path("meshes") / (e.id + ".ply");
    e.landmarks = fs::path("landmarks") / (e.id + ".json");
    e.age = meta[i].first;
    e.sex = meta[i].second;
    e.registration_rms_mm = registered[i].rms_mm;
    geometry::save_mesh(registered[i].mesh, dir / e.mesh);
    depthio::save_landmarks(raw[i].landmarks, dir / e.landmarks);
    manifest.entries.push_back(e);
    meshes.push_back(registered[i].mesh);
  }

  const TriangleMesh generic = generic_mean(meshes);
  std::vector<NamedLocation> fiducials;
  const auto layout = fiducial_layout();
  const auto locs = locate_layout(tmpl, layout);
  for (std::size_t i = 0; i < layout.size(); ++i) fiducials.push_back({layout[i].name, layout[i].group, locs[i]});
  const auto masks = default_part_masks(tmpl, generic, options.feather_mm);

  manifest.generic = "generic.ply";
  manifest.fiducials = "fiducials.json";
  manifest.part_masks = "part_masks.json";
  const auto& w = options.registration.weights;
  const std::string params = provenance + ";spacing=" + exact_text(options.spacing) +
                             ";feather=" + exact_text(options.feather_mm) + ";w=" + exact_text(w.data) + "," +
                             exact_text(w.smooth) + "," + exact_text(w.landmark) + ";iters=" +
                             std::to_string(options.registration.max_iterations);
  manifest.param_hash = hex64(fnv1a(params));
  geometry::save_mesh(generic, dir / manifest.generic);
  save_locations(fiducials, dir / manifest.fiducials);
  retrieval::save_part_masks(masks, dir / manifest.part_masks);
  save_manifest(manifest, dir / "manifest.json");
}

}  // namespace

retrieval::PartMasks default_part_masks(const FaceTemplate& tmpl, const TriangleMesh& mesh, double feather_mm) {
  if (mesh.vertices.size() != tmpl.coords.size()) {
    throw Error(ErrorCode::TopologyMismatch, "mask mesh is not a lift of the template");
  }
  std::array<std::vector<int>, 5> interior;
  for (std::size_t v = 0; v < tmpl.coords.size(); ++v) {
    const double x = tmpl.coords[v][0];
    const double y = tmpl.coords[v][1];
    const int id = static_cast<int>(v);
    if (eyes_zone(x, y)) interior[0].push_back(id);
    else if (nose_zone(x, y)) interior[1].push_back(id);
    else if (mouth_zone(x, y)) interior[2].push_back(id);
    else if (cheek_zone(x, y, 1.0)) interior[3].push_back(id);
    else if (cheek_zone(x, y, -1.0)) interior[4].push_back(id);
  }
  retrieval::PartMasks masks;
  for (std::size_t p = 0; p < retrieval::kPartNames.size(); ++p) {
    masks.push_back(retrieval::feathered_mask(mesh, std::string(retrieval::kPartNames[p]), interior[p], feather_mm));
  }
  return masks;
}

std::vector<RegisteredMesh> register_database(const std::vector<RawEntry>& raw, const TriangleMesh& tmpl,
                                              const depthio::LandmarkSet& template_landmarks,
                                              const align::RegistrationOptions& options) {
  std::vector<RegisteredMesh> out;
  out.reserve(raw.size());
  for (const auto& entry : raw) {
    if (entry.landmarks.points.size() != kAnatomicalCount) {
      throw Error(ErrorCode::WrongCount, "entry '" + entry.id + "': expected 15 landmarks, got " +
                                             std::to_string(entry.landmarks.points.size()));
    }
    try {
      const auto dc = align::dense_correspond(tmpl, entry.mesh, template_landmarks, entry.landmarks, options);
      RegisteredMesh r;
      r.mesh = dc.deformed;
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& m : dc.matches) {
        if (!m.matched) continue;
        sum += m.distance * m.distance;
        ++n;
      }
      r.rms_mm = n > 0 ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
      out.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(e.code(), "entry '" + entry.id + "': " + e.detail());
    }
  }
  return out;
}

TriangleMesh generic_mean(const std::vector<TriangleMesh>& meshes) {
  if (meshes.empty()) throw Error(ErrorCode::InvalidArgument, "mean of no meshes");
  TriangleMesh mean;
  mean.triangles = meshes.front().triangles;
  mean.vertices.assign(meshes.front().vertices.size(), Vec3::Zero());
  for (const auto& m : meshes) {
    if (m.vertices.size() != mean.vertices.size() || m.triangles != mean.triangles) {
      throw Error(ErrorCode::TopologyMismatch, "meshes do not share one topology");
    }
    for (std::size_t v = 0; v < m.vertices.size(); ++v) mean.vertices[v] += m.vertices[v];
  }
  const double inv = 1.0 / static_cast<double>(meshes.size());
  for (auto& v : mean.vertices) v *= inv;
  if (mean.triangles.empty()) return mean;
  return geometry::compute_vertex_normals(std::move(mean));
}

depthio::LandmarkSet landmarks_at(const TriangleMesh& mesh, const std::vector<NamedLocation>& locations) {
  depthio::LandmarkSet set;
  for (const auto& l : locations) {
    if (l.location.triangle < 0 || static_cast<std::size_t>(l.location.triangle) >= mesh.triangles.size()) {
      throw Error(ErrorCode::TopologyMismatch, "landmark '" + l.name + "' references a missing triangle");
    }
    set.points.push_back({l.name, geometry::point_at(mesh, l.location), l.group, true});
  }
  return set;
}

void save_manifest(const DatabaseManifest& manifest, const fs::path& path) {
  nlohmann::ordered_json j;
  j["generic"] = manifest.generic.generic_string();
  j["fiducials"] = manifest.fiducials.generic_string();
  j["part_masks"] = manifest.part_masks.generic_string();
  j["param_hash"] = manifest.param_hash;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"id", e.id},
                       {"mesh", e.mesh.generic_string()},
                       {"landmarks", e.landmarks.generic_string()},
                       {"metadata", {{"age", e.age}, {"sex", e.sex}}},
                       {"registration_rms_mm", e.registration_rms_mm}});
  }
  j["entries"] = entries;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

DatabaseManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
  DatabaseManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.generic = j.at("generic").get<std::string>();
    m.fiducials = j.at("fiducials").get<std::string>();
    m.part_masks = j.at("part_masks").get<std::string>();
    m.param_hash = j.value("param_hash", "");
    std::set<std::string> seen;
    for (const auto& e : j.at("entries")) {
      ManifestEntry me;
      me.id = e.at("id").get<std::string>();
      if (!seen.insert(me.id).second) throw Error(ErrorCode::DuplicateName, "duplicate database id '" + me.id + "'");
      me.mesh = e.at("mesh").get<std::string>();
      me.landmarks = e.at("landmarks").get<std::string>();
      if (e.contains("metadata")) {
        me.age = e["metadata"].value("age", 0);
        me.sex = e["metadata"].value("sex", "");
      }
      me.registration_rms_mm = e.value("registration_rms_mm", 0.0);
      m.entries.push_back(me);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableFile, path.string() + ": " + e.what());
  }
  return m;
}

void save_locations(const std::vector<NamedLocation>& locations, const fs::path& path) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& l : locations) {
    auto item = location_json(l.location);
    j.push_back({{"name", l.name},
                 {"group", l.group == LandmarkGroup::Silhouette ? "silhouette" : "internal"},
                 {"triangle", item["triangle"]},
                 {"weights", item["weights"]}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

std::vector<NamedLocation> load_locations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
  std::vector<NamedLocation> out;
  try {
    for (const auto& item : nlohmann::json::parse(in)) {
      NamedLocation l;
      l.name = item.at("name").get<std::string>();
      l.group = item.value("group", "internal") == "silhouette" ? LandmarkGroup::Silhouette : LandmarkGroup::Internal;
      l.location.triangle = item.at("triangle").get<int>();
      const auto w = item.at("weights").get<std::vector<double>>();
      if (w.size() != 3) throw Error(ErrorCode::UnreadableFile, "location '" + l.name + "' needs three weights");
      l.location.weights = {w[0], w[1], w[2]};
      out.push_back(l);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableFile, path.string() + ": " + e.what());
  }
  return out;
}

std::size_t Database::find(std::string_view id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return i;
  }
  throw Error(ErrorCode::UnknownId, "database has no entry '" + std::string(id) + "'");
}

retrieval::AnchorLocations anchors_from(const std::vector<NamedLocation>& fiducials) {
  retrieval::AnchorLocations a;
  bool have_sellion = false;
  bool have_chin = false;
  for (const auto& f : fiducials) {
    if (f.name == depthio::kSellion) {
      a.sellion = f.location;
      have_sellion = true;
    } else if (f.name == depthio::kChinTip) {
      a.chin = f.location;
      have_chin = true;
    }
  }
  if (!have_sellion || !have_chin) throw Error(ErrorCode::MissingAnchor, "fiducial locations lack sellion or chin_tip");
  return a;
}

Database load_database(const fs::path& manifest_path) {
  Database db;
  db.root = manifest_path.parent_path();
  db.manifest = load_manifest(manifest_path);
  db.generic = geometry::load_mesh(resolve(db.root, db.manifest.generic));
  if (!db.generic.has_normals()) db.generic = geometry::compute_vertex_normals(std::move(db.generic));
  db.fiducials = load_locations(resolve(db.root, db.manifest.fiducials));
  db.masks = retrieval::load_part_masks(resolve(db.root, db.manifest.part_masks));
  retrieval::validate_masks(db.masks, db.generic.vertices.size());
  db.anchors = anchors_from(db.fiducials);
  for (const auto& e : db.manifest.entries) {
    TriangleMesh m = geometry::load_mesh(resolve(db.root, e.mesh));
    if (m.vertices.size() != db.generic.vertices.size() || m.triangles != db.generic.triangles) {
      throw Error(ErrorCode::TopologyMismatch, "database entry '" + e.id + "' is not on the generic topology");
    }
    if (!m.has_normals()) m = geometry::compute_vertex_normals(std::move(m));
    db.ids.push_back(e.id);
    db.meshes.push_back(std::move(m));
  }
  return db;
}

fs::path build_synthetic_database(const SyntheticBuildOptions& options, const fs::path& dir) {
  const auto faces = generate_synthetic(options.seed, options.count, options.spacing);
  const FaceTemplate tmpl = make_template(options.spacing);
  const TriangleMesh template_mesh = face_mesh(FaceShape{}, tmpl);
  std::vector<RawEntry> raw;
  std::vector<std::pair<int, std::string>> meta;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    raw.push_back({entry_id(static_cast<int>(i), options.count), faces[i].mesh, faces[i].anatomical});
    meta.emplace_back(faces[i].age, std::string(1, faces[i].sex));
  }
  write_database(dir, tmpl, template_mesh, raw, meta, options,
                 "synthetic;seed=" + std::to_string(options.seed) + ";count=" + std::to_string(options.count));
  return dir / "manifest.json";
}

fs::path build_database_from_dir(const fs::path& input_dir, const fs::path& dir, const SyntheticBuildOptions& options) {
  if (!fs::is_directory(input_dir)) throw Error(ErrorCode::UnreadableFile, input_dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& f : fs::directory_iterator(input_dir)) {
    const auto ext = f.path().extension().string();
    if (ext == ".obj" || ext == ".ply") files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::EmptyMesh, "no .obj or .ply meshes in " + input_dir.string());
  std::vector<RawEntry> raw;
  std::vector<std::pair<int, std::string>> meta;
  std::string provenance = "dir";
  for (const auto& f : files) {
    RawEntry e;
    e.id = f.stem().string();
    try {
      e.mesh = geometry::load_mesh(f);
      e.landmarks = depthio::load_landmark_file(f.parent_path() / (e.id + ".json"));
    } catch (const Error& err) {
      throw Error(err.code(), "entry '" + e.id + "': " + err.detail());
    }
    provenance += ";" + e.id;
    raw.push_back(std::move(e));
    meta.emplace_back(0, "");
  }
  const FaceTemplate tmpl = make_template(options.spacing);
  write_database(dir, tmpl, face_mesh(FaceShape{}, tmpl), raw, meta, options, provenance);
  return dir / "manifest.json";
}

}  // namespace facehal::dataset
