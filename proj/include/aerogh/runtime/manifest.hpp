#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "aerogh/common.hpp"
#include "aerogh/sim/config.hpp"

namespace aerogh::runtime {

namespace fs = std::filesystem;

/// What a `sim run` / `serve` invocation needs:
///
///   {"config": "default.json" | {...inline SimConfig...},
///    "seed": 42, "duration": 3600, "acceleration": 60, "output_dir": "out/run"}
///
/// A relative config path resolves against the manifest's directory, a
/// relative output_dir against the working directory. `seed`
/// and `acceleration` override the config's values when present.
struct RunManifest {
  sim::SimConfig config;
  std::string config_source;
  std::uint64_t seed = 42;
  SimTime duration = 0;
  double acceleration = 1.0;
  fs::path output_dir;
};

inline void validate(const RunManifest& m) {
  if (m.duration <= 0) throw ValidationError("duration must be > 0");
  if (m.output_dir.empty()) throw ValidationError("output_dir is required");
  if (m.duration % m.config.timestep != 0)
    throw ValidationError("duration must be a multiple of the timestep");
}

inline RunManifest manifest_from_json(const nlohmann::json& j, const fs::path& base_dir = ".") {
  if (!j.is_object()) throw ConfigError("manifest must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (key != "config" && key != "seed" && key != "duration" && key != "acceleration" && key != "output_dir")
      throw ConfigError("unknown manifest key '" + key + "'");
  RunManifest m;
  try {
    if (!j.contains("config")) {
      m.config_source = "defaults";
    } else if (j["config"].is_string()) {
      fs::path p = j["config"].get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      m.config = sim::load_config(p.string());
      m.config_source = p.string();
    } else {
      m.config = sim::config_from_json(j["config"]);
      m.config_source = "inline";
    }
    m.seed = j.value("seed", m.config.seed);
    m.duration = j.value("duration", SimTime{0});
    m.acceleration = j.value("acceleration", m.config.time_acceleration);
    m.output_dir = j.value("output_dir", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  m.config.seed = m.seed;
  m.config.time_acceleration = m.acceleration;
  sim::validate(m.config);
  validate(m);
  return m;
}

inline RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return manifest_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

}  // namespace aerogh::runtime
