#include "geometry/mesh.hpp"

#include "common/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace facehal::geometry {
namespace {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// OBJ face tokens look like "7", "7/3", "7//2" or "7/3/2"; only the position
// index matters here.
int parse_obj_index(const std::string& token, std::size_t vertex_count) {
  const std::string head = token.substr(0, token.find('/'));
  long value = 0;
  const auto* begin = head.data();
  const auto* end = head.data() + head.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || value == 0) {
    throw Error(ErrorCode::MalformedMesh, "bad OBJ face index '" + token + "'");
  }
  if (value < 0) value += static_cast<long>(vertex_count) + 1;
  return static_cast<int>(value - 1);
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
  TriangleMesh mesh;
  std::vector<Vec3> normals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v" || tag == "vn") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        throw Error(ErrorCode::MalformedMesh, path.string() + ":" + std::to_string(line_no));
      }
      (tag == "v" ? mesh.vertices : normals).push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_obj_index(tok, mesh.vertices.size()));
      if (poly.size() < 3) {
        throw Error(ErrorCode::MalformedMesh, "face with fewer than 3 vertices at line " +
                                                  std::to_string(line_no));
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  if (!normals.empty() && normals.size() == mesh.vertices.size()) {
    mesh.normals = std::move(normals);
  }
  return mesh;
}

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType parse_ply_type(const std::string& name) {
  if (name == "char" || name == "int8") return PlyType::Int8;
  if (name == "uchar" || name == "uint8") return PlyType::UInt8;
  if (name == "short" || name == "int16") return PlyType::Int16;
  if (name == "ushort" || name == "uint16") return PlyType::UInt16;
  if (name == "int" || name == "int32") return PlyType::Int32;
  if (name == "uint" || name == "uint32") return PlyType::UInt32;
  if (name == "float" || name == "float32") return PlyType::Float32;
  if (name == "double" || name == "float64") return PlyType::Float64;
  throw Error(ErrorCode::MalformedMesh, "unknown PLY type '" + name + "'");
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

template <typename T>
T read_raw(const char*& p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

double read_ply_value(const char*& p, PlyType t) {
  switch (t) {
    case PlyType::Int8: return read_raw<std::int8_t>(p);
    case PlyType::UInt8: return read_raw<std::uint8_t>(p);
    case PlyType::Int16: return read_raw<std::int16_t>(p);
    case PlyType::UInt16: return read_raw<std::uint16_t>(p);
    case PlyType::Int32: return read_raw<std::int32_t>(p);
    case PlyType::UInt32: return read_raw<std::uint32_t>(p);
    case PlyType::Float32: return read_raw<float>(p);
    case PlyType::Float64: return read_raw<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

TriangleMesh load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw Error(ErrorCode::MalformedMesh, "missing PLY magic");
  std::vector<PlyElement> elements;
  bool binary_le = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (kw == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) throw Error(ErrorCode::MalformedMesh, "property before element");
      PlyProperty prop;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> prop.name;
        prop.is_list = true;
        prop.count_type = parse_ply_type(count_type);
        prop.type = parse_ply_type(item_type);
      } else {
        prop.type = parse_ply_type(type);
        ls >> prop.name;
      }
      elements.back().properties.push_back(prop);
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!binary_le) {
    throw Error(ErrorCode::MalformedMesh, "only binary_little_endian PLY is supported");
  }
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const char* p = payload.data();
  const char* end = payload.data() + payload.size();
  auto need = [&](std::size_t bytes) {
    if (static_cast<std::size_t>(end - p) < bytes) {
      throw Error(ErrorCode::MalformedMesh, "PLY payload truncated");
    }
  };

  TriangleMesh mesh;
  std::vector<Vec3> normals;
  for (const auto& e : elements) {
    for (std::size_t r = 0; r < e.count; ++r) {
      Vec3 pos = Vec3::Zero();
      Vec3 nrm = Vec3::Zero();
      int have_nrm = 0;
      for (const auto& prop : e.properties) {
        if (prop.is_list) {
          need(ply_size(prop.count_type));
          const auto cnt = static_cast<std::size_t>(read_ply_value(p, prop.count_type));
          need(cnt * ply_size(prop.type));
          std::vector<int> poly(cnt);
          for (auto& idx : poly) idx = static_cast<int>(read_ply_value(p, prop.type));
          if (e.name == "face" && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
            if (cnt < 3) throw Error(ErrorCode::MalformedMesh, "face with fewer than 3 vertices");
            for (std::size_t k = 1; k + 1 < cnt; ++k) {
              mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
            }
          }
          continue;
        }
        need(ply_size(prop.type));
        const double v = read_ply_value(p, prop.type);
        if (e.name != "vertex") continue;
        if (prop.name == "x") pos.x() = v;
        else if (prop.name == "y") pos.y() = v;
        else if (prop.name == "z") pos.z() = v;
        else if (prop.name == "nx") { nrm.x() = v; ++have_nrm; }
        else if (prop.name == "ny") { nrm.y() = v; ++have_nrm; }
        else if (prop.name == "nz") { nrm.z() = v; ++have_nrm; }
      }
      if (e.name == "vertex") {
        mesh.vertices.push_back(pos);
        if (have_nrm == 3) normals.push_back(nrm);
      }
    }
  }
  if (!normals.empty() && normals.size() == mesh.vertices.size()) mesh.normals = std::move(normals);
  return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  const bool nrm = mesh.has_normals();
  if (nrm) {
    for (const auto& n : mesh.normals) out << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
  }
  for (const auto& t : mesh.triangles) {
    out << 'f';
    for (int idx : t) {
      out << ' ' << idx + 1;
      if (nrm) out << "//" << idx + 1;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::UnreadableFile, "write failed for " + path.string());
}

void save_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
  const bool nrm = mesh.has_normals();
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  if (nrm) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "element face " << mesh.triangles.size() << '\n'
      << "property list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    out.write(reinterpret_cast<const char*>(mesh.vertices[i].data()), 3 * sizeof(double));
    if (nrm) out.write(reinterpret_cast<const char*>(mesh.normals[i].data()), 3 * sizeof(double));
  }
  for (const auto& t : mesh.triangles) {
    const std::uint8_t three = 3;
    out.write(reinterpret_cast<const char*>(&three), 1);
    const std::int32_t idx[3] = {t[0], t[1], t[2]};
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
  if (!out) throw Error(ErrorCode::UnreadableFile, "write failed for " + path.string());
}

}  // namespace

TriangleMesh load_mesh(const std::filesystem::path& path, MeshLoadStats* stats) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::UnreadableFile, "no such file: " + path.string());
  }
  const std::string ext = lower_extension(path);
  TriangleMesh mesh;
  if (ext == ".obj") {
    mesh = load_obj(path);
  } else if (ext == ".ply") {
    mesh = load_ply(path);
  } else {
    throw Error(ErrorCode::UnreadableFile, "unsupported mesh format: " + path.string());
  }
  validate(mesh);
  const std::size_t dropped = drop_degenerate_triangles(mesh);
  if (stats) stats->dropped_degenerate = dropped;
  return mesh;
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") {
    save_obj(mesh, path);
  } else if (ext == ".ply") {
    save_ply(mesh, path);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unsupported mesh extension: " + path.string());
  }
}

}  // namespace facehal::geometry
