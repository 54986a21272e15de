#include "pipeline/config.hpp"

#include "common/error.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace facehal::pipeline {
namespace {

using P = PipelineConfig;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

const ConfigField* find_field(std::string_view name) {
  for (const auto& f : config_fields()) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

template <typename T>
T parse_number(std::string_view name, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) invalid("'" + std::string(name) + "' expects a number, got '" + std::string(text) + "'");
  return value;
}

}  // namespace

features::AlphaMap PipelineConfig::alpha() const {
  return {{"eyes", alpha_eyes},
          {"nose", alpha_nose},
          {"mouth", alpha_mouth},
          {"left_cheek", alpha_left_cheek},
          {"right_cheek", alpha_right_cheek}};
}

fairing::SmoothingConfig PipelineConfig::smoothing() const {
  fairing::SmoothingConfig s;
  s.step = smoothing_step;
  s.iterations = smoothing_iterations;
  s.scheme = smoothing_scheme == "explicit" ? fairing::Scheme::Explicit : fairing::Scheme::Implicit;
  return s;
}

align::RegistrationOptions PipelineConfig::registration() const {
  align::RegistrationOptions r;
  r.weights.data = w_data;
  r.weights.smooth = w_smooth;
  r.weights.landmark = w_landmark;
  r.max_iterations = registration_iterations;
  r.unmatched_mm = unmatched_mm;
  return r;
}

retrieval::DistanceMode PipelineConfig::distance_mode() const {
  if (pts_only) return retrieval::DistanceMode::PtsOnly;
  if (normals_only) return retrieval::DistanceMode::NormalsOnly;
  return retrieval::DistanceMode::Combined;
}

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      {"database", &P::database, "database manifest path"},
      {"index", &P::index, "descriptor index manifest path"},
      {"output_dir", &P::output_dir, "directory for outputs"},
      {"m", &P::m, "slicing planes between the two base planes"},
      {"n", &P::n, "samples per slicing plane"},
      {"alpha_eyes", &P::alpha_eyes, "normal-histogram weight, eyes"},
      {"alpha_nose", &P::alpha_nose, "normal-histogram weight, nose"},
      {"alpha_mouth", &P::alpha_mouth, "normal-histogram weight, mouth"},
      {"alpha_left_cheek", &P::alpha_left_cheek, "normal-histogram weight, left cheek"},
      {"alpha_right_cheek", &P::alpha_right_cheek, "normal-histogram weight, right cheek"},
      {"smoothing_step", &P::smoothing_step, "curvature-flow step (lambda * dt)"},
      {"smoothing_iterations", &P::smoothing_iterations, "curvature-flow steps"},
      {"smoothing_scheme", &P::smoothing_scheme, "implicit or explicit"},
      {"lambda_pos", &P::lambda_pos, "fusion positional weight"},
      {"lambda_norm", &P::lambda_norm, "fusion normal weight"},
      {"w_data", &P::w_data, "registration data weight"},
      {"w_smooth", &P::w_smooth, "registration smoothness weight"},
      {"w_landmark", &P::w_landmark, "registration landmark weight"},
      {"registration_iterations", &P::registration_iterations, "registration outer iteration cap"},
      {"unmatched_mm", &P::unmatched_mm, "distance beyond which a vertex is unmatched"},
      {"with_scale", &P::with_scale, "estimate scale in rigid alignment"},
      {"discontinuity_mm", &P::discontinuity_mm, "back-projection edge length limit"},
      {"feather_mm", &P::feather_mm, "part-mask feather band width"},
      {"no_warp", &P::no_warp, "rank unwarped database descriptors from the index"},
      {"retrieval_warp", &P::retrieval_warp, "database alignment before ranking: similarity or tps"},
      {"normals_only", &P::normals_only, "rank by histogram distance only"},
      {"pts_only", &P::pts_only, "rank by pseudo-landmark distance only"},
  };
  return fields;
}

void validate(const PipelineConfig& c) {
  if (c.m < 0) invalid("m must be >= 0");
  if (c.n < 1) invalid("n must be >= 1");
  for (const auto& [k, v] : c.alpha()) {
    if (!(v >= 0.0)) invalid("alpha_" + k + " must be >= 0");
  }
  if (!(c.smoothing_step > 0.0)) invalid("smoothing_step must be > 0");
  if (c.smoothing_iterations < 1) invalid("smoothing_iterations must be >= 1");
  if (c.smoothing_scheme != "implicit" && c.smoothing_scheme != "explicit") {
    invalid("smoothing_scheme must be 'implicit' or 'explicit'");
  }
  if (c.retrieval_warp != "similarity" && c.retrieval_warp != "tps") {
    invalid("retrieval_warp must be 'similarity' or 'tps'");
  }
  if (!(c.lambda_pos > 0.0)) invalid("lambda_pos must be > 0");
  if (!(c.lambda_norm >= 0.0)) invalid("lambda_norm must be >= 0");
  if (!(c.w_data >= 0.0) || !(c.w_smooth > 0.0) || !(c.w_landmark >= 0.0)) {
    invalid("registration weights must be >= 0 with w_smooth > 0");
  }
  if (c.registration_iterations < 1) invalid("registration_iterations must be >= 1");
  if (!(c.unmatched_mm > 0.0)) invalid("unmatched_mm must be > 0");
  if (!(c.discontinuity_mm > 0.0)) invalid("discontinuity_mm must be > 0");
  if (!(c.feather_mm >= 0.0)) invalid("feather_mm must be >= 0");
  if (c.normals_only && c.pts_only) invalid("normals_only and pts_only are exclusive");
}

PipelineConfig parse_config(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) invalid("config must be a JSON object");
  PipelineConfig cfg;
  for (const auto& [key, value] : j.items()) {
    const auto* f = find_field(key);
    if (f == nullptr) invalid("unknown config key '" + key + "'");
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          if constexpr (std::is_same_v<T, std::string>) {
            if (!value.is_string()) invalid("'" + key + "' must be a string");
          } else if constexpr (std::is_same_v<T, bool>) {
            if (!value.is_boolean()) invalid("'" + key + "' must be a boolean");
          } else if constexpr (std::is_same_v<T, int>) {
            if (!value.is_number_integer()) invalid("'" + key + "' must be an integer");
          } else {
            if (!value.is_number()) invalid("'" + key + "' must be a number");
          }
          cfg.*member = value.get<T>();
        },
        f->member);
  }
  validate(cfg);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : config_fields()) {
    std::visit([&](auto member) { j[std::string(f.name)] = cfg.*member; }, f.member);
  }
  return j.dump(2);
}

void set_config_field(PipelineConfig& cfg, std::string_view name, std::string_view value) {
  const auto* f = find_field(name);
  if (f == nullptr) invalid("unknown config key '" + std::string(name) + "'");
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          cfg.*member = std::string(value);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") {
            cfg.*member = true;
          } else if (value == "false" || value == "0") {
            cfg.*member = false;
          } else {
            invalid("'" + std::string(name) + "' expects true or false");
          }
        } else {
          cfg.*member = parse_number<T>(name, value);
        }
      },
      f->member);
}

}  // namespace facehal::pipeline
