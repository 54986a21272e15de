#include "facehal/facehal.h"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Config {
  fh_config* ptr = nullptr;
  Config() { REQUIRE(fh_config_create(&ptr) == FH_OK); }
  ~Config() { fh_config_destroy(ptr); }
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("facehal_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("version matches the project version") { CHECK(std::string(fh_version()) == "0.1.0"); }

TEST_CASE("status codes are the process exit codes") {
  CHECK(FH_OK == 0);
  CHECK(FH_ERR_USAGE == 1);
  CHECK(FH_ERR_DATA == 2);
  CHECK(FH_ERR_NUMERICAL == 3);
}

TEST_CASE("null arguments are usage errors") {
  CHECK(fh_config_create(nullptr) == FH_ERR_USAGE);
  CHECK(std::string(fh_last_error_code()) == "InvalidArgument");
  CHECK(std::string(fh_last_error_message()).find("out") != std::string::npos);
  CHECK(fh_config_set(nullptr, "m", "33") == FH_ERR_USAGE);
  CHECK(fh_build_index(nullptr, "x") == FH_ERR_USAGE);
  CHECK(fh_reconstruct(nullptr, "a", "b", nullptr, nullptr) == FH_ERR_USAGE);
  CHECK(fh_evaluate(nullptr, nullptr, 0, nullptr, 1) == FH_ERR_USAGE);
  CHECK(fh_render_depth(nullptr, "b", nullptr, "c", "d") == FH_ERR_USAGE);
  CHECK(fh_config_get(nullptr, "m") == nullptr);
  CHECK(fh_config_json(nullptr) == nullptr);
  fh_config_destroy(nullptr);
}

TEST_CASE("config fields round trip through set, get and json") {
  Config cfg;
  const size_t count = fh_config_field_count();
  REQUIRE(count > 0);
  CHECK(fh_config_field_name(count) == nullptr);
  CHECK(fh_config_field_help(count) == nullptr);

  const auto j = nlohmann::json::parse(fh_config_json(cfg.ptr));
  for (size_t i = 0; i < count; ++i) {
    const std::string name = fh_config_field_name(i);
    CHECK(j.contains(name));
    CHECK(fh_config_get(cfg.ptr, name.c_str()) != nullptr);
    CHECK(std::string(fh_config_field_help(i)).size() > 0);
  }
  CHECK(std::string(fh_config_get(cfg.ptr, "m")) == "33");
  CHECK(std::string(fh_config_get(cfg.ptr, "alpha_mouth")) == "10.0");
  CHECK(fh_config_get(cfg.ptr, "no_such_field") == nullptr);

  REQUIRE(fh_config_set(cfg.ptr, "lambda_norm", "5") == FH_OK);
  CHECK(nlohmann::json::parse(fh_config_json(cfg.ptr))["lambda_norm"] == 5.0);
  REQUIRE(fh_config_set(cfg.ptr, "output_dir", "some/where") == FH_OK);
  CHECK(std::string(fh_config_get(cfg.ptr, "output_dir")) == "some/where");
}

TEST_CASE("rejected config values leave the config unchanged") {
  Config cfg;
  const std::string before = fh_config_json(cfg.ptr);
  CHECK(fh_config_set(cfg.ptr, "lambda_pos", "0") == FH_ERR_USAGE);
  CHECK(std::string(fh_last_error_code()) == "InvalidConfig");
  CHECK(fh_config_set(cfg.ptr, "m", "many") == FH_ERR_USAGE);
  CHECK(fh_config_set(cfg.ptr, "bogus", "1") == FH_ERR_USAGE);
  CHECK(std::string(fh_config_json(cfg.ptr)) == before);
}

TEST_CASE("config files load and reject unknown keys") {
  const auto dir = scratch("config");
  {
    std::ofstream(dir / "good.json") << R"({"m": 63, "n": 65})";
    std::ofstream(dir / "bad.json") << R"({"m": 63, "colour": "red"})";
  }
  fh_config* cfg = nullptr;
  REQUIRE(fh_config_load((dir / "good.json").c_str(), &cfg) == FH_OK);
  CHECK(std::string(fh_config_get(cfg, "n")) == "65");
  fh_config_destroy(cfg);

  cfg = nullptr;
  CHECK(fh_config_load((dir / "bad.json").c_str(), &cfg) == FH_ERR_USAGE);
  CHECK(cfg == nullptr);
  CHECK(fh_config_load((dir / "absent.json").c_str(), &cfg) != FH_OK);
}

TEST_CASE("render options validate before any file is touched") {
  auto o = fh_render_options_default();
  CHECK(o.width > 0);
  CHECK(o.height > 0);
  CHECK(o.distance_mm > 0.0);
  const auto dir = scratch("render");
  o.dropout = 1.0;
  CHECK(fh_render_database_entry("absent.json", "s000", &o, (dir / "d.pgm").c_str(), (dir / "l.json").c_str()) ==
        FH_ERR_USAGE);
  CHECK(!fs::exists(dir / "d.pgm"));
}

TEST_CASE("missing inputs are data errors") {
  Config cfg;
  const auto dir = scratch("missing");
  REQUIRE(fh_config_set(cfg.ptr, "output_dir", (dir / "out").c_str()) == FH_OK);
  REQUIRE(fh_config_set(cfg.ptr, "database", (dir / "absent.json").c_str()) == FH_OK);
  CHECK(fh_build_index(cfg.ptr, (dir / "index.json").c_str()) == FH_ERR_DATA);
  CHECK(std::string(fh_last_error_message()).size() > 0);
}

TEST_CASE("database, index, render and reconstruct through the C interface") {
  const auto dir = scratch("pipeline");
  Config cfg;
  REQUIRE(fh_build_db_synthetic(cfg.ptr, (dir / "db").c_str(), 4, 11) == FH_OK);
  const auto manifest = dir / "db" / "manifest.json";
  REQUIRE(fs::exists(manifest));
  REQUIRE(fh_config_set(cfg.ptr, "database", manifest.c_str()) == FH_OK);
  REQUIRE_MESSAGE(fh_build_index(cfg.ptr, (dir / "index" / "index.json").c_str()) == FH_OK, std::string(fh_last_error_message()));
  REQUIRE(fh_config_set(cfg.ptr, "index", (dir / "index" / "index.json").c_str()) == FH_OK);

  const auto db = nlohmann::json::parse(std::ifstream(manifest));
  const std::string id = db["entries"][1]["id"];
  auto o = fh_render_options_default();
  o.noise_mm = 0.5;
  o.seed = 3;
  const auto depth = dir / "frame" / "q.pgm";
  const auto lm = dir / "frame" / "q_landmarks.json";
  REQUIRE(fh_render_database_entry(manifest.c_str(), id.c_str(), &o, depth.c_str(), lm.c_str()) == FH_OK);
  CHECK(fh_render_database_entry(manifest.c_str(), "nobody", &o, depth.c_str(), lm.c_str()) == FH_ERR_DATA);

  REQUIRE(fh_config_set(cfg.ptr, "output_dir", (dir / "out").c_str()) == FH_OK);
  REQUIRE(fh_reconstruct(cfg.ptr, depth.c_str(), lm.c_str(), nullptr, nullptr) == FH_OK);
  CHECK(fs::exists(dir / "out" / "reconstruction.ply"));
  CHECK(fs::exists(dir / "out" / "timing.json"));
  const auto report = nlohmann::json::parse(std::ifstream(dir / "out" / "merge_report.json"));
  CHECK(report.is_object());
}
