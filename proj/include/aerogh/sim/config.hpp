#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "aerogh/common.hpp"

namespace aerogh::sim {

/// Physical and numerical parameters of the simulated greenhouse.
///
/// Field names double as keys in the JSON config document, so renaming a
/// field is a file-format change.
struct SimConfig {
  // structure
  double floor_area = 9.0;  // m^2
  double height = 2.0;      // m
  int n_boxes = 9;
  std::array<double, 3> box_dims{0.53, 0.33, 0.28};  // m
  int n_tanks = 3;
  double tank_cross_section = 0.25;  // m^2
  double tank_height = 0.8;          // m
  double initial_tank_fill = 1.0;    // fraction of capacity
  int n_plants = 144;

  // device ratings, kW
  double pump_power = 0.25;
  double heater_power = 2.0;
  double fan_power = 0.1;
  double humidifier_power = 0.05;
  double led_power = 0.4;
  double uv_power = 0.03;

  // lumped thermal / moisture model
  double thermal_capacitance = 65.0;  // kJ/degC
  double envelope_UA = 0.02;          // kW/degC
  double vent_exchange_rate = 10.0;   // air changes per hour, fan on
  double infiltration_rate = 0.5;     // air changes per hour, always
  double humidifier_rate = 0.3;       // g water / s
  double mist_rate = 0.01;            // g water / s per misting box
  double nozzle_flow = 1.2;           // L/min per box
  double return_fraction = 0.98;
  double led_lux = 8000.0;
  std::array<double, 3> led_spectrum{0.30, 0.45, 0.25};  // relative R, G, B

  // outside air, sinusoidal diurnal profile
  double ambient_temp_mean = 15.0;
  double ambient_temp_amp = 5.0;
  double ambient_rh_mean = 50.0;
  double ambient_rh_amp = 10.0;
  double initial_temp = 20.0;
  double initial_rh = 60.0;

  // numerics
  std::int64_t timestep = 1;  // s
  std::uint64_t seed = 42;
  double time_acceleration = 1.0;
  std::string wall_epoch = "2021-06-01T00:00:00Z";

  double volume() const { return floor_area * height; }
  double tank_capacity() const { return tank_cross_section * tank_height * 1000.0; }
  int boxes_per_tank() const { return n_boxes / n_tanks; }
  int tank_of_box(int box) const { return box / boxes_per_tank(); }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    SimConfig, floor_area, height, n_boxes, box_dims, n_tanks, tank_cross_section, tank_height,
    initial_tank_fill, n_plants, pump_power, heater_power, fan_power, humidifier_power,
    led_power, uv_power, thermal_capacitance, envelope_UA, vent_exchange_rate,
    infiltration_rate, humidifier_rate, mist_rate, nozzle_flow, return_fraction, led_lux,
    led_spectrum, ambient_temp_mean, ambient_temp_amp, ambient_rh_mean, ambient_rh_amp,
    initial_temp, initial_rh, timestep, seed, time_acceleration, wall_epoch)

inline void validate(const SimConfig& c) {
  auto positive = [](double v, const char* name) {
    require(v > 0.0, std::string(name) + " must be > 0");
  };
  positive(c.floor_area, "floor_area");
  positive(c.height, "height");
  for (double d : c.box_dims) positive(d, "box_dims");
  positive(c.tank_cross_section, "tank_cross_section");
  positive(c.tank_height, "tank_height");
  positive(c.pump_power, "pump_power");
  positive(c.heater_power, "heater_power");
  positive(c.fan_power, "fan_power");
  positive(c.humidifier_power, "humidifier_power");
  positive(c.led_power, "led_power");
  positive(c.uv_power, "uv_power");
  positive(c.thermal_capacitance, "thermal_capacitance");
  positive(c.envelope_UA, "envelope_UA");
  positive(c.vent_exchange_rate, "vent_exchange_rate");
  positive(c.humidifier_rate, "humidifier_rate");
  positive(c.nozzle_flow, "nozzle_flow");
  positive(c.led_lux, "led_lux");
  require(c.infiltration_rate >= 0.0, "infiltration_rate must be >= 0");
  require(c.mist_rate >= 0.0, "mist_rate must be >= 0");
  require(c.n_boxes > 0 && c.n_tanks > 0, "n_boxes and n_tanks must be > 0");
  require(c.n_boxes % c.n_tanks == 0, "n_boxes must be a multiple of n_tanks");
  require(c.n_plants >= 0, "n_plants must be >= 0");
  require(c.return_fraction >= 0.0 && c.return_fraction <= 1.0,
          "return_fraction must lie in [0, 1]");
  require(c.initial_tank_fill >= 0.0 && c.initial_tank_fill <= 1.0,
          "initial_tank_fill must lie in [0, 1]");
  require(c.initial_rh >= 0.0 && c.initial_rh <= 100.0, "initial_rh must lie in [0, 100]");
  require(c.timestep > 0, "timestep must be > 0");
  require(c.time_acceleration >= 1.0, "time_acceleration must be >= 1");
  parse_iso8601(c.wall_epoch);
}

inline SimConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const nlohmann::json known = SimConfig{};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  SimConfig c;
  try {
    c = j.get<SimConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace aerogh::sim
