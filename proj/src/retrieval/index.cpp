#include "retrieval/index.hpp"

#include "common/error.hpp"
#include "common/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

namespace facehal::retrieval {
namespace {

constexpr char kMagic[4] = {'F', 'H', 'D', 'X'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::UnreadableFile, "descriptor cache truncated");
  return value;
}

std::string get_string(std::istream& in) {
  const auto len = get<std::uint32_t>(in);
  if (len > (1u << 20)) throw Error(ErrorCode::UnreadableFile, "descriptor cache string too long");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw Error(ErrorCode::UnreadableFile, "descriptor cache truncated");
  return s;
}

}  // namespace

std::size_t DescriptorIndex::part_column(std::string_view part) const {
  for (std::size_t i = 0; i < part_names.size(); ++i) {
    if (part_names[i] == part) return i;
  }
  throw Error(ErrorCode::EmptyPart, "index has no part '" + std::string(part) + "'");
}

std::vector<PartDescriptor> describe_mesh(const TriangleMesh& mesh, const PartMasks& masks,
                                          const AnchorLocations& anchors, const DescriptorParams& params) {
  const Vec3 sellion = geometry::point_at(mesh, anchors.sellion);
  const Vec3 chin = geometry::point_at(mesh, anchors.chin);
  const TriangleMesh with_normals = mesh.has_normals() ? mesh : geometry::compute_vertex_normals(mesh);
  const auto areas = geometry::vertex_areas(with_normals);
  std::vector<PartDescriptor> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(features::describe_part(with_normals, m, sellion, chin, params, areas));
  return out;
}

DescriptorIndex build_index(const std::vector<std::string>& ids, const std::vector<TriangleMesh>& meshes,
                            const PartMasks& masks, const AnchorLocations& anchors, const DescriptorParams& params,
                            const features::AlphaMap& alpha) {
  if (ids.size() != meshes.size()) throw Error(ErrorCode::InvalidArgument, "one id per mesh required");
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
    throw Error(ErrorCode::InvalidArgument, "database ids must be unique");
  }
  DescriptorIndex index;
  index.params = params;
  index.alpha = alpha;
  for (const auto& m : masks) {
    features::alpha_for(alpha, m.name);
    index.part_names.push_back(m.name);
  }
  if (meshes.empty()) return index;
  const std::size_t vertex_count = meshes.front().vertices.size();
  const auto& triangles = meshes.front().triangles;
  validate_masks(masks, vertex_count);
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (meshes[i].vertices.size() != vertex_count || meshes[i].triangles != triangles) {
      throw Error(ErrorCode::TopologyMismatch, "database entry '" + ids[i] + "' is not on the shared topology");
    }
  }
  index.ids = ids;
  for (const auto& mesh : meshes) index.descriptors.push_back(describe_mesh(mesh, masks, anchors, params));
  return index;
}

double ranking_key(const PartDistance& d, DistanceMode mode) {
  switch (mode) {
    case DistanceMode::PtsOnly: return d.d_pts;
    case DistanceMode::NormalsOnly: return d.d_normals;
    case DistanceMode::Combined: break;
  }
  return d.combined;
}

RetrievalResult rank_part(std::string part, const PartDescriptor& input, std::span<const std::string> ids,
                          std::span<const PartDescriptor> candidates, double alpha, DistanceMode mode) {
  if (ids.size() != candidates.size()) throw Error(ErrorCode::InvalidArgument, "one id per candidate required");
  RetrievalResult result;
  result.part = std::move(part);
  result.ranking.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    result.ranking.push_back({ids[i], features::combined_distance(input, candidates[i], alpha)});
  }
  std::sort(result.ranking.begin(), result.ranking.end(), [mode](const RankedEntry& a, const RankedEntry& b) {
    const double ka = ranking_key(a.distance, mode);
    const double kb = ranking_key(b.distance, mode);
    if (ka != kb) return ka < kb;
    return a.id < b.id;
  });
  if (!result.ranking.empty()) result.best = result.ranking.front().id;
  return result;
}

std::vector<RetrievalResult> query(const DescriptorIndex& index, std::span<const PartDescriptor> input,
                                   DistanceMode mode) {
  if (input.size() != index.part_names.size()) {
    throw Error(ErrorCode::ParamMismatch, "query has " + std::to_string(input.size()) + " parts, index has " +
                                              std::to_string(index.part_names.size()));
  }
  for (const auto& d : input) {
    if (d.grid.m != index.params.m || d.grid.n != index.params.n) {
      throw Error(ErrorCode::ParamMismatch, "query grid (" + std::to_string(d.grid.m) + ", " +
                                                std::to_string(d.grid.n) + ") differs from index (" +
                                                std::to_string(index.params.m) + ", " +
                                                std::to_string(index.params.n) + ")");
    }
  }
  std::vector<RetrievalResult> out;
  std::vector<PartDescriptor> column(index.ids.size());
  for (std::size_t p = 0; p < index.part_names.size(); ++p) {
    for (std::size_t e = 0; e < index.ids.size(); ++e) column[e] = index.descriptors[e][p];
    out.push_back(rank_part(index.part_names[p], input[p], index.ids, column,
                            features::alpha_for(index.alpha, index.part_names[p]), mode));
  }
  return out;
}

std::size_t rank_of(const RetrievalResult& result, std::string_view id) {
  for (std::size_t i = 0; i < result.ranking.size(); ++i) {
    if (result.ranking[i].id == id) return i + 1;
  }
  throw Error(ErrorCode::UnknownId, "id '" + std::string(id) + "' not in the " + result.part + " ranking");
}

std::uint64_t parameter_hash(const DescriptorParams& params, const features::AlphaMap& alpha,
                             std::span<const std::string> part_names) {
  std::string text = "m=" + std::to_string(params.m) + ";n=" + std::to_string(params.n) + ";bins=" +
                     std::to_string(features::kHistogramBins) + "x" + std::to_string(features::kHistogramBins) +
                     ";parts=";
  for (const auto& p : part_names) text += p + ",";
  text += ";alpha=";
  for (const auto& [k, v] : alpha) text += k + ":" + exact_text(v) + ",";
  return fnv1a(text);
}

std::string hash_hex(std::uint64_t hash) { return hex64(hash); }

void save_index(const DescriptorIndex& index, const std::filesystem::path& cache_path,
                const std::filesystem::path& manifest_path) {
  for (const auto& p : {cache_path, manifest_path})
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(cache_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + cache_path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kFormatVersion);
  put<std::int32_t>(out, index.params.m);
  put<std::int32_t>(out, index.params.n);
  put<std::int32_t>(out, features::kHistogramBins);
  put<std::int32_t>(out, features::kHistogramBins);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(index.part_names.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(index.ids.size()));
  for (const auto& p : index.part_names) put_string(out, p);
  for (std::size_t e = 0; e < index.ids.size(); ++e) {
    put_string(out, index.ids[e]);
    for (const auto& d : index.descriptors[e]) {
      for (const auto& p : d.grid.points) {
        put<double>(out, p.x());
        put<double>(out, p.y());
        put<double>(out, p.z());
      }
      for (bool f : d.grid.filled_rows) put<std::uint8_t>(out, f ? 1 : 0);
      for (double b : d.histogram.bins) put<double>(out, b);
    }
  }
  if (!out) throw Error(ErrorCode::UnreadableFile, "failed writing " + cache_path.string());

  nlohmann::ordered_json j;
  j["cache"] = std::filesystem::relative(std::filesystem::absolute(cache_path),
                                         std::filesystem::absolute(manifest_path).parent_path())
                   .generic_string();
  j["m"] = index.params.m;
  j["n"] = index.params.n;
  j["bins"] = {features::kHistogramBins, features::kHistogramBins};
  j["parts"] = index.part_names;
  nlohmann::ordered_json alpha = nlohmann::ordered_json::object();
  for (const auto& [k, v] : index.alpha) alpha[k] = v;
  j["alpha"] = alpha;
  j["param_hash"] = hash_hex(parameter_hash(index.params, index.alpha, index.part_names));
  j["ids"] = index.ids;
  std::ofstream mf(manifest_path);
  if (!mf) throw Error(ErrorCode::UnreadableFile, "cannot write " + manifest_path.string());
  mf << j.dump(2) << '\n';
}

DescriptorIndex load_index(const std::filesystem::path& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw Error(ErrorCode::UnreadableFile, "cannot open " + manifest_path.string());
  DescriptorIndex index;
  std::filesystem::path cache_path;
  std::string expected_hash;
  try {
    const auto j = nlohmann::json::parse(mf);
    index.params.m = j.at("m").get<int>();
    index.params.n = j.at("n").get<int>();
    index.part_names = j.at("parts").get<std::vector<std::string>>();
    index.ids = j.at("ids").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("alpha").items()) index.alpha[k] = v.get<double>();
    expected_hash = j.at("param_hash").get<std::string>();
    cache_path = manifest_path.parent_path() / j.at("cache").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnreadableFile, manifest_path.string() + ": " + e.what());
  }
  if (hash_hex(parameter_hash(index.params, index.alpha, index.part_names)) != expected_hash) {
    throw Error(ErrorCode::ParamMismatch, "index manifest parameters do not match its hash");
  }

  std::ifstream in(cache_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableFile, "cannot open " + cache_path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) {
    throw Error(ErrorCode::UnreadableFile, cache_path.string() + " is not a descriptor cache");
  }
  if (get<std::uint32_t>(in) != kFormatVersion) throw Error(ErrorCode::ParamMismatch, "descriptor cache version");
  const auto m = get<std::int32_t>(in);
  const auto n = get<std::int32_t>(in);
  const auto tb = get<std::int32_t>(in);
  const auto pb = get<std::int32_t>(in);
  const auto parts = get<std::uint32_t>(in);
  const auto entries = get<std::uint32_t>(in);
  if (m != index.params.m || n != index.params.n || tb != features::kHistogramBins ||
      pb != features::kHistogramBins || parts != index.part_names.size() || entries != index.ids.size()) {
    throw Error(ErrorCode::ParamMismatch, "descriptor cache header disagrees with manifest");
  }
  for (const auto& p : index.part_names) {
    if (get_string(in) != p) throw Error(ErrorCode::ParamMismatch, "descriptor cache part order differs");
  }
  const int rows = m + 2;
  for (std::size_t e = 0; e < entries; ++e) {
    if (get_string(in) != index.ids[e]) throw Error(ErrorCode::ParamMismatch, "descriptor cache id order differs");
    std::vector<PartDescriptor> row(parts);
    for (auto& d : row) {
      d.grid.m = m;
      d.grid.n = n;
      d.grid.points.resize(static_cast<std::size_t>(rows * n));
      for (auto& p : d.grid.points) {
        const double x = get<double>(in);
        const double y = get<double>(in);
        const double z = get<double>(in);
        p = Vec3(x, y, z);
      }
      d.grid.filled_rows.resize(static_cast<std::size_t>(rows));
      for (std::size_t r = 0; r < d.grid.filled_rows.size(); ++r) d.grid.filled_rows[r] = get<std::uint8_t>(in) != 0;
      for (auto& b : d.histogram.bins) b = get<double>(in);
    }
    index.descriptors.push_back(std::move(row));
  }
  return index;
}

}  // namespace facehal::retrieval
