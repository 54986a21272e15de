#include "depthio/depth_frame.hpp"

#include "common/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>

namespace facehal::depthio {
namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& data, std::size_t& pos) {
  while (pos < data.size()) {
    if (data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
  return data.substr(start, pos - start);
}

long parse_header_int(const std::string& token, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const long v = std::stol(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::UnreadableFile, "bad PGM header in " + path.string());
  }
}

Intrinsics load_intrinsics(const std::filesystem::path& depth_path) {
  const auto side = sidecar_path(depth_path);
  std::ifstream in(side);
  if (!in) throw Error(ErrorCode::MissingIntrinsics, "no sidecar " + side.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MissingIntrinsics, side.string() + ": " + e.what());
  }
  Intrinsics k;
  for (const char* key : {"fx", "fy", "cx", "cy"}) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_number()) {
      throw Error(ErrorCode::MissingIntrinsics, side.string() + " lacks '" + key + "'");
    }
  }
  k.fx = j["fx"].get<double>();
  k.fy = j["fy"].get<double>();
  k.cx = j["cx"].get<double>();
  k.cy = j["cy"].get<double>();
  if (!(k.fx > 0.0) || !(k.fy > 0.0) || !std::isfinite(k.cx) || !std::isfinite(k.cy)) {
    throw Error(ErrorCode::MissingIntrinsics, side.string() + " has invalid focal lengths");
  }
  return k;
}

}  // namespace

std::size_t DepthFrame::valid_count() const {
  return static_cast<std::size_t>(std::count_if(depth.begin(), depth.end(), [](double d) { return d > 0.0; }));
}

void clamp_to_valid_range(DepthFrame& frame) {
  for (auto& d : frame.depth) {
    if (!std::isfinite(d) || d <= kMinValidDepthMm || d >= kMaxValidDepthMm) d = 0.0;
  }
}

Vec3 unproject(const Intrinsics& k, double u, double v, double depth_mm) {
  return {(u - k.cx) * depth_mm / k.fx, (v - k.cy) * depth_mm / k.fy, depth_mm};
}

Eigen::Vector2d project(const Intrinsics& k, const Vec3& p) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

std::filesystem::path sidecar_path(const std::filesystem::path& depth_path) {
  auto side = depth_path;
  side.replace_extension(".json");
  return side;
}

DepthFrame load_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (next_token(data, pos) != "P5") {
    throw Error(ErrorCode::UnreadableFile, path.string() + " is not a binary PGM");
  }
  const long width = parse_header_int(next_token(data, pos), path);
  const long height = parse_header_int(next_token(data, pos), path);
  const long maxval = parse_header_int(next_token(data, pos), path);
  if (width <= 0 || height <= 0 || maxval <= 255 || maxval > 65535) {
    throw Error(ErrorCode::UnreadableFile, path.string() + " is not a 16-bit PGM");
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 2;
  const std::size_t payload = pos <= data.size() ? data.size() - pos : 0;
  if (payload != expected) {
    throw Error(ErrorCode::DimensionMismatch,
                path.string() + ": header declares " + std::to_string(width) + "x" +
                    std::to_string(height) + " but payload has " + std::to_string(payload) + " bytes");
  }

  DepthFrame frame;
  frame.intrinsics = load_intrinsics(path);
  frame.width = static_cast<int>(width);
  frame.height = static_cast<int>(height);
  frame.depth.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  const auto* raw = reinterpret_cast<const unsigned char*>(data.data() + pos);
  for (std::size_t i = 0; i < frame.depth.size(); ++i) {
    const std::uint16_t tenths = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
    frame.depth[i] = tenths / 10.0;
  }
  clamp_to_valid_range(frame);
  return frame;
}

void save_depth(const DepthFrame& frame, const std::filesystem::path& path) {
  if (frame.depth.size() != static_cast<std::size_t>(frame.width) * static_cast<std::size_t>(frame.height)) {
    throw Error(ErrorCode::DimensionMismatch, "frame size disagrees with sample count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << "P5\n" << frame.width << ' ' << frame.height << "\n65535\n";
  for (double d : frame.depth) {
    const double tenths = std::clamp(std::round(d * 10.0), 0.0, 65535.0);
    const auto v = static_cast<std::uint16_t>(tenths);
    const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(bytes, 2);
  }
  nlohmann::json j = {{"fx", frame.intrinsics.fx},
                      {"fy", frame.intrinsics.fy},
                      {"cx", frame.intrinsics.cx},
                      {"cy", frame.intrinsics.cy}};
  std::ofstream side(sidecar_path(path));
  side << j.dump(2) << '\n';
  if (!out || !side) throw Error(ErrorCode::UnreadableFile, "write failed for " + path.string());
}

BackprojectedMesh backproject(const DepthFrame& frame, const PixelRect& face_rect, double discontinuity_mm) {
  const PixelRect r{std::max(0, face_rect.u0), std::max(0, face_rect.v0),
                    std::min(frame.width, face_rect.u1), std::min(frame.height, face_rect.v1)};
  if (r.u0 != face_rect.u0 || r.v0 != face_rect.v0 || r.u1 != face_rect.u1 || r.v1 != face_rect.v1 ||
      r.width() <= 0 || r.height() <= 0) {
    throw Error(ErrorCode::InvalidArgument, "face rectangle outside frame bounds");
  }
  BackprojectedMesh out;
  out.pixel_to_vertex.assign(frame.depth.size(), -1);
  auto& mesh = out.mesh;
  for (int v = r.v0; v < r.v1; ++v) {
    for (int u = r.u0; u < r.u1; ++u) {
      if (!frame.valid(u, v)) continue;
      out.pixel_to_vertex[static_cast<std::size_t>(v) * static_cast<std::size_t>(frame.width) + static_cast<std::size_t>(u)] =
          static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(unproject(frame.intrinsics, u, v, frame.at(u, v)));
      out.vertex_to_pixel.push_back({u, v});
    }
  }
  if (mesh.vertices.size() < 3) {
    throw Error(ErrorCode::EmptyRegion, "fewer than 3 valid depth pixels in face region");
  }
  auto vid = [&](int u, int v) {
    return out.pixel_to_vertex[static_cast<std::size_t>(v) * static_cast<std::size_t>(frame.width) + static_cast<std::size_t>(u)];
  };
  const double max_edge2 = discontinuity_mm * discontinuity_mm;
  auto emit = [&](int a, int b, int c) {
    const Vec3& pa = mesh.vertices[static_cast<std::size_t>(a)];
    const Vec3& pb = mesh.vertices[static_cast<std::size_t>(b)];
    const Vec3& pc = mesh.vertices[static_cast<std::size_t>(c)];
    const double longest = std::max({(pa - pb).squaredNorm(), (pb - pc).squaredNorm(), (pc - pa).squaredNorm()});
    if (longest > max_edge2) return;
    mesh.triangles.push_back({a, b, c});
  };
  // Winding (p00, p01, p10) yields normals toward the camera (-z).
  for (int v = r.v0; v + 1 < r.v1; ++v) {
    for (int u = r.u0; u + 1 < r.u1; ++u) {
      const int p00 = vid(u, v), p10 = vid(u + 1, v), p01 = vid(u, v + 1), p11 = vid(u + 1, v + 1);
      const int valid = (p00 >= 0) + (p10 >= 0) + (p01 >= 0) + (p11 >= 0);
      if (valid == 4) {
        emit(p00, p01, p10);
        emit(p10, p01, p11);
      } else if (valid == 3) {
        if (p00 < 0) emit(p10, p01, p11);
        else if (p11 < 0) emit(p00, p01, p10);
        else if (p10 < 0) emit(p00, p01, p11);
        else emit(p00, p11, p10);
      }
    }
  }
  geometry::drop_degenerate_triangles(mesh);
  if (mesh.triangles.empty()) {
    throw Error(ErrorCode::DegenerateGeometry, "no triangle survived the discontinuity test");
  }
  mesh = geometry::compute_vertex_normals(std::move(mesh));
  return out;
}

void fill_small_holes(DepthFrame& frame, const PixelRect& rect, int passes, int min_neighbors) {
  for (int pass = 0; pass < passes; ++pass) {
    std::vector<std::pair<std::size_t, double>> fills;
    for (int v = std::max(0, rect.v0); v < std::min(frame.height, rect.v1); ++v) {
      for (int u = std::max(0, rect.u0); u < std::min(frame.width, rect.u1); ++u) {
        if (frame.valid(u, v)) continue;
        double sum = 0.0;
        int count = 0;
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            if ((du || dv) && frame.contains(u + du, v + dv) && frame.valid(u + du, v + dv)) {
              sum += frame.at(u + du, v + dv);
              ++count;
            }
          }
        }
        if (count >= min_neighbors) {
          fills.emplace_back(static_cast<std::size_t>(v) * static_cast<std::size_t>(frame.width) + static_cast<std::size_t>(u),
                             sum / count);
        }
      }
    }
    if (fills.empty()) break;
    for (const auto& [idx, d] : fills) frame.depth[idx] = d;
  }
}

}  // namespace facehal::depthio
