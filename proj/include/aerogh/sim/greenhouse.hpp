#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "aerogh/common.hpp"
#include "aerogh/sim/config.hpp"

namespace aerogh::sim {

enum class LeafClass : int { healthy = 0, drought = 1, rust = 2 };

inline constexpr int kNumLeafClasses = 3;

inline std::string_view to_string(LeafClass c) {
  switch (c) {
    case LeafClass::healthy: return "healthy";
    case LeafClass::drought: return "drought";
    case LeafClass::rust: return "rust";
  }
  return "?";
}

inline LeafClass leaf_class_from_string(std::string_view s) {
  if (s == "healthy") return LeafClass::healthy;
  if (s == "drought") return LeafClass::drought;
  if (s == "rust") return LeafClass::rust;
  throw ValidationError("unknown leaf class '" + std::string(s) + "'");
}

struct ActuatorBank {
  bool heater = false;
  bool fan = false;
  bool humidifier = false;
  bool led = false;
  bool uv = false;
  std::vector<bool> supply_pump;
  std::vector<bool> return_pump;

  static ActuatorBank all_off(const SimConfig& cfg) {
    ActuatorBank a;
    a.supply_pump.assign(static_cast<std::size_t>(cfg.n_boxes), false);
    a.return_pump.assign(static_cast<std::size_t>(cfg.n_boxes), false);
    return a;
  }

  bool operator==(const ActuatorBank&) const = default;
};

/// Device table shared by the energy meters and the actuation log.
/// Order: heater, fan, humidifier, led, uv, supply_pump0.., return_pump0..
inline std::vector<std::string> device_names(const SimConfig& cfg) {
  std::vector<std::string> names{"heater", "fan", "humidifier", "led", "uv"};
  for (int b = 0; b < cfg.n_boxes; ++b) names.push_back("supply_pump" + std::to_string(b));
  for (int b = 0; b < cfg.n_boxes; ++b) names.push_back("return_pump" + std::to_string(b));
  return names;
}

/// Rated power of each device in whole watts, aligned with device_names().
inline std::vector<std::int64_t> device_watts(const SimConfig& cfg) {
  auto w = [](double kw) { return static_cast<std::int64_t>(std::llround(kw * 1000.0)); };
  std::vector<std::int64_t> out{w(cfg.heater_power), w(cfg.fan_power), w(cfg.humidifier_power),
                                w(cfg.led_power), w(cfg.uv_power)};
  for (int i = 0; i < 2 * cfg.n_boxes; ++i) out.push_back(w(cfg.pump_power));
  return out;
}

/// On/off flags aligned with device_names().
inline std::vector<bool> device_states(const ActuatorBank& a) {
  std::vector<bool> s{a.heater, a.fan, a.humidifier, a.led, a.uv};
  s.insert(s.end(), a.supply_pump.begin(), a.supply_pump.end());
  s.insert(s.end(), a.return_pump.begin(), a.return_pump.end());
  return s;
}

inline constexpr double kJoulesPerKwh = 3.6e6;

struct GreenhouseState {
  SimTime sim_time = 0;
  double air_temp = 20.0;      // degC
  double rel_humidity = 60.0;  // %
  double lux = 0.0;
  std::vector<double> tank_volume;  // L
  std::vector<double> box_flow;     // L/min dispensed during the last step
  std::vector<double> box_dispensed;  // L, cumulative per box
  ActuatorBank actuators;
  // Energy is metered in integer joules so per-device sums are exact.
  std::vector<std::int64_t> energy_joules;
  std::vector<LeafClass> plant_health;
  // cumulative water accounting, L
  double water_dispensed = 0.0;
  double water_returned = 0.0;
  double water_recharged = 0.0;

  std::int64_t energy_total_joules() const {
    std::int64_t sum = 0;
    for (auto j : energy_joules) sum += j;
    return sum;
  }
  double energy_total() const { return static_cast<double>(energy_total_joules()) / kJoulesPerKwh; }

  std::map<std::string, double> energy_by_device(const SimConfig& cfg) const {
    std::map<std::string, double> out;
    auto names = device_names(cfg);
    for (std::size_t i = 0; i < names.size(); ++i)
      out[names[i]] = static_cast<double>(energy_joules[i]) / kJoulesPerKwh;
    return out;
  }

  static GreenhouseState initial(const SimConfig& cfg) {
    GreenhouseState s;
    s.air_temp = cfg.initial_temp;
    s.rel_humidity = cfg.initial_rh;
    s.tank_volume.assign(static_cast<std::size_t>(cfg.n_tanks),
                         cfg.tank_capacity() * cfg.initial_tank_fill);
    s.box_flow.assign(static_cast<std::size_t>(cfg.n_boxes), 0.0);
    s.box_dispensed.assign(static_cast<std::size_t>(cfg.n_boxes), 0.0);
    s.actuators = ActuatorBank::all_off(cfg);
    s.energy_joules.assign(device_names(cfg).size(), 0);
    s.plant_health.assign(static_cast<std::size_t>(cfg.n_plants), LeafClass::healthy);
    return s;
  }
};

/// Something noteworthy that happened inside one step.
struct SimEvent {
  enum class Kind { dry_run, recharge };
  Kind kind;
  SimTime sim_time;
  int index;        // box for dry_run, tank for recharge
  double amount;    // L short of demand, or L added
  double overflow;  // recharge only
};

inline std::string_view to_string(SimEvent::Kind k) {
  return k == SimEvent::Kind::dry_run ? "dry_run" : "recharge";
}

struct StepOutcome {
  GreenhouseState state;
  std::vector<SimEvent> events;
};

struct Ambient {
  double temp;
  double rh;
};

/// Sinusoidal diurnal outside-air profile, exactly periodic in whole days.
inline Ambient ambient_profile(SimTime t, const SimConfig& cfg) {
  const double phase =
      2.0 * std::numbers::pi * static_cast<double>(t % kSecondsPerDay) / kSecondsPerDay;
  const double s = std::sin(phase);
  return {cfg.ambient_temp_mean + cfg.ambient_temp_amp * s,
          cfg.ambient_rh_mean + cfg.ambient_rh_amp * s};
}

/// Saturation vapour density in g/m^3 (Magnus formula).
inline double saturation_vapour_density(double temp_c) {
  const double es_pa = 611.2 * std::exp(17.62 * temp_c / (243.12 + temp_c));
  return 1000.0 * es_pa / (461.5 * (temp_c + 273.15));
}

inline constexpr double kAirHeatCapacity = 1.2 * 1.005;  // kJ/(m^3 degC)

/// Advances the greenhouse by one fixed timestep with forward Euler.
inline StepOutcome step(const GreenhouseState& in, const ActuatorBank& act, const SimConfig& cfg) {
  const auto dt = static_cast<double>(cfg.timestep);
  StepOutcome out{in, {}};
  GreenhouseState& s = out.state;
  s.actuators = act;

  const Ambient amb = ambient_profile(in.sim_time, cfg);
  const double volume = cfg.volume();

  // thermal balance, kW
  const double dtemp = in.air_temp - amb.temp;
  const double heat_in = act.heater ? cfg.heater_power : 0.0;
  const double envelope_loss = cfg.envelope_UA * dtemp;
  const double vent_loss =
      act.fan ? cfg.vent_exchange_rate * volume / 3600.0 * kAirHeatCapacity * dtemp : 0.0;
  s.air_temp = in.air_temp + (heat_in - envelope_loss - vent_loss) * dt / cfg.thermal_capacitance;

  // moisture balance in %RH
  int misting = 0;
  for (int b = 0; b < cfg.n_boxes; ++b) misting += act.supply_pump[b] ? 1 : 0;
  const double water_g =
      ((act.humidifier ? cfg.humidifier_rate : 0.0) + cfg.mist_rate * misting) * dt;
  const double added_rh = 100.0 * water_g / (volume * saturation_vapour_density(in.air_temp));
  const double exchange_per_s =
      (cfg.infiltration_rate + (act.fan ? cfg.vent_exchange_rate : 0.0)) / 3600.0;
  const double exchanged_rh = exchange_per_s * dt * (in.rel_humidity - amb.rh);
  s.rel_humidity = std::clamp(in.rel_humidity + added_rh - exchanged_rh, 0.0, 100.0);

  s.lux = act.led ? cfg.led_lux : 0.0;

  // nutrient loop
  const double capacity = cfg.tank_capacity();
  const double demand = cfg.nozzle_flow * dt / 60.0;
  for (int b = 0; b < cfg.n_boxes; ++b) {
    double& tank = s.tank_volume[cfg.tank_of_box(b)];
    double delivered = 0.0;
    if (act.supply_pump[b]) {
      delivered = std::min(demand, tank);
      if (delivered < demand)
        out.events.push_back({SimEvent::Kind::dry_run, in.sim_time, b, demand - delivered, 0.0});
      tank -= delivered;
      s.water_dispensed += delivered;
      s.box_dispensed[b] += delivered;
    }
    s.box_flow[b] = delivered * 60.0 / dt;
    if (act.return_pump[b] && delivered > 0.0) {
      const double returned = cfg.return_fraction * delivered;
      tank = std::min(capacity, tank + returned);
      s.water_returned += returned;
    }
  }

  const auto watts = device_watts(cfg);
  const auto on = device_states(act);
  for (std::size_t i = 0; i < watts.size(); ++i)
    if (on[i]) s.energy_joules[i] += watts[i] * cfg.timestep;

  s.sim_time = in.sim_time + cfg.timestep;
  return out;
}

struct RechargeOutcome {
  GreenhouseState state;
  SimEvent event;
};

inline RechargeOutcome recharge_tank(const GreenhouseState& in, int tank, double volume,
                                     const SimConfig& cfg) {
  if (tank < 0 || tank >= cfg.n_tanks)
    throw CommandRejected("unknown tank " + std::to_string(tank));
  if (!(volume > 0.0)) throw CommandRejected("recharge volume must be > 0");
  RechargeOutcome out{in, {}};
  double& level = out.state.tank_volume[tank];
  const double room = cfg.tank_capacity() - level;
  const double added = std::min(room, volume);
  level += added;
  out.state.water_recharged += added;
  out.event = {SimEvent::Kind::recharge, in.sim_time, tank, added, volume - added};
  return out;
}

}  // namespace aerogh::sim
