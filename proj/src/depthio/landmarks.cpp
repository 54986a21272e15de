#include "depthio/landmarks.hpp"

#include "common/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace facehal::depthio {

const Landmark* LandmarkSet::find(std::string_view name) const {
  for (const auto& p : points) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t LandmarkSet::present_count(std::optional<LandmarkGroup> group) const {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [&](const Landmark& l) {
    return l.present && (!group || l.group == *group);
  }));
}

LandmarkSet parse_landmarks(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableFile, std::string("landmark JSON: ") + e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::UnreadableFile, "landmark file must be a JSON array");
  LandmarkSet set;
  std::set<std::string> seen;
  bool any_2d = false;
  bool any_3d = false;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("name") || !e["name"].is_string()) {
      throw Error(ErrorCode::UnreadableFile, "landmark entry without a name");
    }
    Landmark lm;
    lm.name = e["name"].get<std::string>();
    if (!seen.insert(lm.name).second) {
      throw Error(ErrorCode::DuplicateName, "landmark '" + lm.name + "' appears twice");
    }
    const std::string group = e.value("group", std::string("internal"));
    if (group == "silhouette") {
      lm.group = LandmarkGroup::Silhouette;
    } else if (group == "internal") {
      lm.group = LandmarkGroup::Internal;
    } else {
      throw Error(ErrorCode::UnreadableFile, "landmark '" + lm.name + "' has unknown group '" + group + "'");
    }
    auto num = [&](const char* key) {
      if (!e[key].is_number()) throw Error(ErrorCode::UnreadableFile, "landmark '" + lm.name + "' field " + key);
      return e[key].get<double>();
    };
    if (e.contains("u") && e.contains("v")) {
      lm.coord = Vec3(num("u"), num("v"), 0.0);
      any_2d = true;
    } else if (e.contains("x") && e.contains("y") && e.contains("z")) {
      lm.coord = Vec3(num("x"), num("y"), num("z"));
      any_3d = true;
    } else {
      throw Error(ErrorCode::UnreadableFile, "landmark '" + lm.name + "' has no coordinates");
    }
    lm.present = e.value("present", true);
    set.points.push_back(std::move(lm));
  }
  if (any_2d && any_3d) throw Error(ErrorCode::UnreadableFile, "landmark file mixes 2D and 3D entries");
  set.pixel_coordinates = any_2d;
  return set;
}

LandmarkSet load_landmark_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_landmarks(ss.str());
}

void validate_fiducials(const LandmarkSet& set) {
  if (set.points.size() != kFiducialCount) {
    throw Error(ErrorCode::WrongCount, "expected 83 landmarks, got " + std::to_string(set.points.size()));
  }
  std::set<std::string> names;
  std::size_t silhouette = 0;
  for (const auto& p : set.points) {
    if (!names.insert(p.name).second) throw Error(ErrorCode::DuplicateName, p.name);
    if (p.group == LandmarkGroup::Silhouette) ++silhouette;
  }
  if (silhouette != kSilhouetteCount) {
    throw Error(ErrorCode::WrongCount, "expected 19 silhouette landmarks, got " + std::to_string(silhouette));
  }
  for (auto anchor : {kSellion, kChinTip}) {
    if (!set.find(anchor)) throw Error(ErrorCode::MissingAnchor, "no '" + std::string(anchor) + "' landmark");
  }
}

LandmarkSet load_landmarks(const std::filesystem::path& path) {
  LandmarkSet set = load_landmark_file(path);
  validate_fiducials(set);
  return set;
}

std::string landmarks_to_json(const LandmarkSet& set) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& p : set.points) {
    nlohmann::ordered_json e;
    e["name"] = p.name;
    if (set.pixel_coordinates) {
      e["u"] = p.coord.x();
      e["v"] = p.coord.y();
    } else {
      e["x"] = p.coord.x();
      e["y"] = p.coord.y();
      e["z"] = p.coord.z();
    }
    e["group"] = p.group == LandmarkGroup::Silhouette ? "silhouette" : "internal";
    if (!p.present) e["present"] = false;
    arr.push_back(std::move(e));
  }
  return arr.dump(1);
}

void save_landmarks(const LandmarkSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << landmarks_to_json(set) << '\n';
}

LandmarkSet lift_landmarks(const DepthFrame& frame, const LandmarkSet& pixel_landmarks) {
  LandmarkSet out;
  out.pixel_coordinates = false;
  for (const auto& lm : pixel_landmarks.points) {
    Landmark lifted = lm;
    lifted.present = false;
    const int u = static_cast<int>(std::lround(lm.coord.x()));
    const int v = static_cast<int>(std::lround(lm.coord.y()));
    if (lm.present) {
      int best_d2 = std::numeric_limits<int>::max();
      int bu = -1, bv = -1;
      // Scan order (row-major) breaks ties between equidistant pixels.
      for (int dv = -kLiftRadiusPx; dv <= kLiftRadiusPx; ++dv) {
        for (int du = -kLiftRadiusPx; du <= kLiftRadiusPx; ++du) {
          const int d2 = du * du + dv * dv;
          if (d2 > kLiftRadiusPx * kLiftRadiusPx || d2 >= best_d2) continue;
          if (!frame.contains(u + du, v + dv) || !frame.valid(u + du, v + dv)) continue;
          best_d2 = d2;
          bu = u + du;
          bv = v + dv;
        }
      }
      if (bu >= 0) {
        lifted.coord = unproject(frame.intrinsics, bu, bv, frame.at(bu, bv));
        lifted.present = true;
      }
    }
    if (!lifted.present) lifted.coord = Vec3::Zero();
    out.points.push_back(std::move(lifted));
  }
  const std::size_t internal = out.present_count(LandmarkGroup::Internal);
  if (internal < kMinLiftedInternal) {
    throw Error(ErrorCode::TooFewValid,
                "only " + std::to_string(internal) + " internal landmarks have valid depth");
  }
  return out;
}

PixelRect face_rect_from_landmarks(const DepthFrame& frame, const LandmarkSet& pixel_landmarks, double inflate) {
  double umin = std::numeric_limits<double>::infinity(), vmin = umin;
  double umax = -umin, vmax = -umin;
  for (const auto& lm : pixel_landmarks.points) {
    if (!lm.present) continue;
    umin = std::min(umin, lm.coord.x());
    umax = std::max(umax, lm.coord.x());
    vmin = std::min(vmin, lm.coord.y());
    vmax = std::max(vmax, lm.coord.y());
  }
  if (!(umax >= umin)) throw Error(ErrorCode::EmptyRegion, "no landmarks to bound the face");
  const double pad_u = 0.5 * inflate * (umax - umin);
  const double pad_v = 0.5 * inflate * (vmax - vmin);
  PixelRect r;
  r.u0 = std::clamp(static_cast<int>(std::floor(umin - pad_u)), 0, frame.width);
  r.v0 = std::clamp(static_cast<int>(std::floor(vmin - pad_v)), 0, frame.height);
  r.u1 = std::clamp(static_cast<int>(std::ceil(umax + pad_u)) + 1, 0, frame.width);
  r.v1 = std::clamp(static_cast<int>(std::ceil(vmax + pad_v)) + 1, 0, frame.height);
  return r;
}

}  // namespace facehal::depthio
