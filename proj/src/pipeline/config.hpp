#pragma once

#include "align/dense_correspond.hpp"
#include "fairing/smooth.hpp"
#include "features/descriptor.hpp"
#include "fusion/fusion.hpp"
#include "retrieval/index.hpp"

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace facehal::pipeline {

/// Every tunable of the pipeline. Serialized as a flat JSON object whose
/// keys are the field names below; the CLI exposes each as --<name>.
struct PipelineConfig {
  std::string database;
  std::string index;
  std::string output_dir = "out";

  int m = 33;
  int n = 35;
  double alpha_eyes = 4.0;
  double alpha_nose = 2.0;
  double alpha_mouth = 10.0;
  double alpha_left_cheek = 1.0;
  double alpha_right_cheek = 1.0;

  double smoothing_step = 0.5;
  int smoothing_iterations = 3;
  std::string smoothing_scheme = "implicit";

  double lambda_pos = 1.0;
  double lambda_norm = 20.0;

  double w_data = 1.0;
  double w_smooth = 50.0;
  double w_landmark = 10.0;
  int registration_iterations = 50;
  double unmatched_mm = 15.0;
  bool with_scale = true;

  double discontinuity_mm = 10.0;
  double feather_mm = 5.0;

  bool no_warp = false;
  std::string retrieval_warp = "similarity";
  bool normals_only = false;
  bool pts_only = false;

  features::AlphaMap alpha() const;
  features::DescriptorParams descriptor_params() const { return {m, n}; }
  fairing::SmoothingConfig smoothing() const;
  fusion::FusionWeights fusion_weights() const { return {lambda_pos, lambda_norm}; }
  align::RegistrationOptions registration() const;
  retrieval::DistanceMode distance_mode() const;
};

using FieldMember = std::variant<std::string PipelineConfig::*, int PipelineConfig::*, double PipelineConfig::*,
                                 bool PipelineConfig::*>;

struct ConfigField {
  std::string_view name;
  FieldMember member;
  std::string_view help;
};

/// Field table in canonical order.
const std::vector<ConfigField>& config_fields();

/// Throws InvalidConfig on range violations or contradictory flags.
void validate(const PipelineConfig& cfg);

/// Parses a JSON object; unknown keys and wrong types raise InvalidConfig.
/// Missing keys keep their defaults.
PipelineConfig parse_config(std::string_view json_text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical JSON: every field, table order, two-space indent.
std::string config_to_json(const PipelineConfig& cfg);

/// Sets one field from its textual value. Throws InvalidConfig.
void set_config_field(PipelineConfig& cfg, std::string_view name, std::string_view value);

}  // namespace facehal::pipeline
