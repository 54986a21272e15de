#include "retrieval/part_mask.hpp"

#include "common/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <queue>

namespace facehal::retrieval {

std::vector<double> PartMask::dense(std::size_t vertex_count) const {
  std::vector<double> w(vertex_count, 0.0);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    w[static_cast<std::size_t>(vertices[i])] = weights[i];
  }
  return w;
}

const PartMask& find_part(const PartMasks& masks, std::string_view name) {
  for (const auto& m : masks) {
    if (m.name == name) return m;
  }
  throw Error(ErrorCode::EmptyPart, "no mask named '" + std::string(name) + "'");
}

PartMask feathered_mask(const TriangleMesh& mesh, std::string name, const std::vector<int>& interior,
                        double band_mm) {
  const std::size_t n = mesh.vertices.size();
  const auto adj = geometry::vertex_neighbors(mesh);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (int v : interior) {
    dist[static_cast<std::size_t>(v)] = 0.0;
    heap.emplace(0.0, v);
  }
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(v)] || d >= band_mm) continue;
    for (int w : adj[static_cast<std::size_t>(v)]) {
      const double nd = d + (mesh.vertices[static_cast<std::size_t>(v)] - mesh.vertices[static_cast<std::size_t>(w)]).norm();
      if (nd < dist[static_cast<std::size_t>(w)]) {
        dist[static_cast<std::size_t>(w)] = nd;
        heap.emplace(nd, w);
      }
    }
  }
  PartMask mask;
  mask.name = std::move(name);
  for (std::size_t v = 0; v < n; ++v) {
    if (dist[v] == 0.0) {
      mask.vertices.push_back(static_cast<int>(v));
      mask.weights.push_back(1.0);
    } else if (band_mm > 0.0 && dist[v] < band_mm) {
      mask.vertices.push_back(static_cast<int>(v));
      mask.weights.push_back(1.0 - dist[v] / band_mm);
    }
  }
  return mask;
}

void validate_masks(const PartMasks& masks, std::size_t vertex_count) {
  std::vector<int> owner(vertex_count, -1);
  for (std::size_t p = 0; p < masks.size(); ++p) {
    const auto& m = masks[p];
    if (m.vertices.size() != m.weights.size()) {
      throw Error(ErrorCode::InvalidArgument, "mask '" + m.name + "' has mismatched weights");
    }
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      const int v = m.vertices[i];
      if (v < 0 || static_cast<std::size_t>(v) >= vertex_count) {
        throw Error(ErrorCode::TopologyMismatch, "mask '" + m.name + "' indexes vertex " + std::to_string(v));
      }
      if (!(m.weights[i] >= 0.0 && m.weights[i] <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "mask '" + m.name + "' weight outside [0, 1]");
      }
      if (m.weights[i] == 1.0) {
        auto& o = owner[static_cast<std::size_t>(v)];
        if (o >= 0 && o != static_cast<int>(p)) {
          throw Error(ErrorCode::InvalidArgument,
                      "interiors of '" + masks[static_cast<std::size_t>(o)].name + "' and '" + m.name + "' overlap");
        }
        o = static_cast<int>(p);
      }
    }
  }
}

PartMasks load_part_masks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableFile, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::UnreadableFile, "part mask file must be a JSON object");
  PartMasks masks;
  for (const auto& [name, body] : j.items()) {
    PartMask m;
    m.name = name;
    try {
      m.vertices = body.at("vertices").get<std::vector<int>>();
      m.weights = body.at("weights").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::UnreadableFile, "mask '" + name + "': " + e.what());
    }
    if (m.vertices.size() != m.weights.size()) {
      throw Error(ErrorCode::UnreadableFile, "mask '" + name + "' has mismatched weights");
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

void save_part_masks(const PartMasks& masks, const std::filesystem::path& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& m : masks) {
    j[m.name] = {{"vertices", m.vertices}, {"weights", m.weights}};
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << j.dump() << '\n';
}

}  // namespace facehal::retrieval
