#pragma once

#include "dataset/database.hpp"
#include "pipeline/config.hpp"
#include "pipeline/render.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace facehal::pipeline {

inline constexpr std::array<std::string_view, 4> kEvaluationTables = {"nose", "cheeks", "mouth", "eyes"};
inline constexpr std::array<std::string_view, 4> kEvaluationRows = {"Pts 35x35", "Pts 65x65", "A-E hist",
                                                                    "Combined"};

/// ranks[table][row][subject]: 1-based rank of the subject's own database
/// entry. The cheeks table ranks by the summed left and right distances.
struct RankingTables {
  std::vector<std::string> subjects;
  std::array<std::array<std::vector<std::size_t>, 4>, 4> ranks;
};

/// Render seed for `id` under Monte Carlo seed `seed`; independent of the
/// order of the held-out list.
std::uint64_t subject_seed(std::uint64_t seed, std::string_view id);

/// Renders every held-out entry (which must be in `db`) with `render`
/// (seed replaced by subject_seed), runs preprocessing and registration, and
/// ranks the entry under the four distance variants. Throws UnknownId.
RankingTables evaluate_rankings(const dataset::Database& db, std::span<const std::string> heldout,
                                const PipelineConfig& cfg, const RenderOptions& render, std::uint64_t seed);

/// One table as CSV: header "variant,<subjects>", then one line per row.
std::string table_csv(const RankingTables& tables, std::size_t table);

/// Writes ranking_<table>.csv for the four tables into cfg.output_dir.
void run_evaluate(const PipelineConfig& cfg, std::span<const std::string> heldout, const RenderOptions& render,
                  std::uint64_t seed);

struct RenderPaths {
  std::filesystem::path depth;
  std::filesystem::path landmarks;
};

/// Renders `mesh` with its 3D fiducials and writes the 16-bit depth image,
/// its intrinsics sidecar and the pixel landmarks.
void run_render_depth(const TriangleMesh& mesh, const depthio::LandmarkSet& landmarks, const RenderOptions& render,
                      const RenderPaths& out);

}  // namespace facehal::pipeline
