#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aerogh/common.hpp"
#include "aerogh/sim/greenhouse.hpp"

namespace aerogh::sensors {

enum class SensorKind { sht75_temp, sht75_rh, srf05, yf_s201, gy302, tcs3200 };

inline std::string_view to_string(SensorKind k) {
  switch (k) {
    case SensorKind::sht75_temp: return "sht75_temp";
    case SensorKind::sht75_rh: return "sht75_rh";
    case SensorKind::srf05: return "srf05";
    case SensorKind::yf_s201: return "yf_s201";
    case SensorKind::gy302: return "gy302";
    case SensorKind::tcs3200: return "tcs3200";
  }
  return "?";
}

inline std::string_view unit_of(SensorKind k) {
  switch (k) {
    case SensorKind::sht75_temp: return "C";
    case SensorKind::sht75_rh: return "%";
    case SensorKind::srf05: return "cm";
    case SensorKind::yf_s201: return "pulses";
    case SensorKind::gy302: return "lx";
    case SensorKind::tcs3200: return "rgb";
  }
  return "";
}

struct Target {
  enum class Kind { zone, box, tank };
  Kind kind = Kind::zone;
  int index = 0;
};

struct SensorSpec {
  std::string id;
  SensorKind kind = SensorKind::sht75_temp;
  Target target;
  double noise_sigma = 0.0;
  double quantization = 0.0;
  double range_min = 0.0;
  double range_max = 1.0;
  SimTime sample_period = 10;
};

using Rgb = std::array<double, 3>;
using ReadingValue = std::variant<double, Rgb>;

struct SensorReading {
  std::string sensor_id;
  SensorKind kind;
  ReadingValue value;
  std::string unit;
  SimTime sim_time;
  std::uint64_t seq;

  double scalar() const { return std::get<double>(value); }
};

// YF-S201 nominal K-factor.
inline constexpr double kPulsesPerLitre = 450.0;

inline double srf05_distance(double tank_volume, const sim::SimConfig& cfg) {
  return (cfg.tank_height - tank_volume / (1000.0 * cfg.tank_cross_section)) * 100.0;
}

/// Inverse of srf05_distance. Distances outside the tank signal a sensor fault.
inline double volume_from_distance(double distance_cm, const sim::SimConfig& cfg) {
  if (!(distance_cm >= 0.0 && distance_cm <= cfg.tank_height * 100.0))
    throw std::out_of_range("srf05 distance " + std::to_string(distance_cm) +
                            " cm outside tank");
  return (cfg.tank_height - distance_cm / 100.0) * cfg.tank_cross_section * 1000.0;
}

inline std::int64_t yfs201_pulses(double flow_lpm, double window_s) {
  return std::llround(kPulsesPerLitre * flow_lpm * window_s / 60.0);
}

inline double flow_from_pulses(std::int64_t pulses, double window_s) {
  return static_cast<double>(pulses) / (kPulsesPerLitre * window_s / 60.0);
}

/// Rounds to a multiple of `step`, then snaps to the step's decimal grid so
/// 0.03 * 2002 reads back as 60.06 rather than 60.059999999999995.
inline double quantize(double v, double step) {
  if (step <= 0.0) return v;
  const double q = std::round(v / step) * step;
  for (int d = 0; d <= 9; ++d) {
    const double scale = std::pow(10.0, d);
    if (std::abs(step * scale - std::round(step * scale)) < 1e-9) return std::round(q * scale) / scale;
  }
  return q;
}

/// Noise-free quantity a sensor would observe.
inline ReadingValue true_value(const SensorSpec& spec, const sim::GreenhouseState& state,
                               const sim::SimConfig& cfg) {
  switch (spec.kind) {
    case SensorKind::sht75_temp: return state.air_temp;
    case SensorKind::sht75_rh: return state.rel_humidity;
    case SensorKind::srf05: return srf05_distance(state.tank_volume.at(spec.target.index), cfg);
    case SensorKind::yf_s201:
      // steady-flow estimate from the last step; Sensor::sample integrates instead
      return static_cast<double>(yfs201_pulses(state.box_flow.at(spec.target.index),
                                               static_cast<double>(spec.sample_period)));
    case SensorKind::gy302: return state.lux;
    case SensorKind::tcs3200: {
      Rgb rgb;
      for (int i = 0; i < 3; ++i) rgb[i] = state.lux * cfg.led_spectrum[i];
      return rgb;
    }
  }
  return 0.0;
}

inline void validate(const SensorSpec& spec, const sim::SimConfig& cfg) {
  require(!spec.id.empty(), "sensor id must not be empty");
  require(spec.sample_period > 0, spec.id + ": sample_period must be > 0");
  require(spec.quantization >= 0.0, spec.id + ": quantization must be >= 0");
  require(spec.noise_sigma >= 0.0, spec.id + ": noise_sigma must be >= 0");
  require(spec.range_min < spec.range_max, spec.id + ": range min must be < max");
  const auto& t = spec.target;
  switch (spec.kind) {
    case SensorKind::srf05:
      require(t.kind == Target::Kind::tank && t.index >= 0 && t.index < cfg.n_tanks,
              spec.id + ": srf05 must be bound to an existing tank");
      break;
    case SensorKind::yf_s201:
      require(t.kind == Target::Kind::box && t.index >= 0 && t.index < cfg.n_boxes,
              spec.id + ": yf_s201 must be bound to an existing box");
      break;
    default:
      require(t.kind == Target::Kind::zone && t.index >= 0,
              spec.id + ": climate and light sensors must be bound to a zone");
  }
}

/// One emulated sensor: spec, private RNG stream and sequence counter.
class Sensor {
 public:
  Sensor(SensorSpec spec, std::uint64_t master_seed)
      : spec_(std::move(spec)), rng_(mix_seed(master_seed, spec_.id)) {}

  const SensorSpec& spec() const { return spec_; }
  bool due(SimTime t) const { return t % spec_.sample_period == 0; }

  SensorReading sample(const sim::GreenhouseState& state, const sim::SimConfig& cfg) {
    auto observe = [&](double v) {
      if (spec_.noise_sigma > 0.0) v += std::normal_distribution<double>(0.0, spec_.noise_sigma)(rng_);
      return std::clamp(quantize(v, spec_.quantization), spec_.range_min, spec_.range_max);
    };
    ReadingValue truth = true_value(spec_, state, cfg);
    if (spec_.kind == SensorKind::yf_s201) {
      // pulses for the water that actually passed since the previous sample
      const double total = state.box_dispensed.at(spec_.target.index);
      truth = static_cast<double>(std::llround(kPulsesPerLitre * (total - last_total_.value_or(total))));
      last_total_ = total;
    }
    ReadingValue value;
    if (auto* rgb = std::get_if<Rgb>(&truth)) {
      Rgb noisy;
      for (int i = 0; i < 3; ++i) noisy[i] = observe((*rgb)[i]);
      value = noisy;
    } else {
      double v = observe(std::get<double>(truth));
      // pulse counters report whole pulses
      if (spec_.kind == SensorKind::yf_s201) v = std::round(v);
      value = v;
    }
    return {spec_.id, spec_.kind, value, std::string(unit_of(spec_.kind)), state.sim_time, seq_++};
  }

 private:
  SensorSpec spec_;
  std::mt19937_64 rng_;
  std::uint64_t seq_ = 0;
  std::optional<double> last_total_;
};

struct SamplingPeriods {
  SimTime climate = 1;  // SHT75; also the climate control period
  SimTime light = 10;   // GY-302, TCS3200
  SimTime flow = 10;    // YF-S201 pulse window
  SimTime level = 30;   // SRF05
};

/// Default sensor complement: three SHT75 probes (temperature and humidity
/// channels), one SRF05 per tank, one YF-S201 per box, one GY-302 and one TCS3200.
inline std::vector<SensorSpec> default_sensor_specs(const sim::SimConfig& cfg,
                                                    SamplingPeriods p = {}) {
  using K = SensorKind;
  using T = Target::Kind;
  std::vector<SensorSpec> specs;
  for (int z = 0; z < 3; ++z) {
    specs.push_back({"sht75_temp_zone" + std::to_string(z), K::sht75_temp, {T::zone, z}, 0.05,
                     0.01, -40.0, 123.8, p.climate});
    specs.push_back({"sht75_rh_zone" + std::to_string(z), K::sht75_rh, {T::zone, z}, 0.3, 0.03,
                     0.0, 100.0, p.climate});
  }
  for (int t = 0; t < cfg.n_tanks; ++t)
    specs.push_back({"srf05_tank" + std::to_string(t), K::srf05, {T::tank, t}, 0.0, 0.1, 0.0,
                     cfg.tank_height * 100.0, p.level});
  for (int b = 0; b < cfg.n_boxes; ++b)
    specs.push_back({"yf_s201_box" + std::to_string(b), K::yf_s201, {T::box, b}, 0.0, 1.0, 0.0,
                     1e9, p.flow});
  specs.push_back({"gy302_zone0", K::gy302, {T::zone, 0}, 5.0, 1.0, 0.0, 65535.0, p.light});
  specs.push_back({"tcs3200_zone0", K::tcs3200, {T::zone, 0}, 2.0, 1.0, 0.0, 1e5, p.light});
  return specs;
}

class SensorBank {
 public:
  SensorBank(std::vector<SensorSpec> specs, const sim::SimConfig& cfg) {
    for (auto& s : specs) {
      validate(s, cfg);
      sensors_.emplace_back(std::move(s), cfg.seed);
    }
  }

  std::vector<SensorReading> sample_due(const sim::GreenhouseState& state,
                                        const sim::SimConfig& cfg) {
    std::vector<SensorReading> out;
    for (auto& s : sensors_)
      if (s.due(state.sim_time)) out.push_back(s.sample(state, cfg));
    return out;
  }

  const std::vector<Sensor>& sensors() const { return sensors_; }

 private:
  std::vector<Sensor> sensors_;
};

}  // namespace aerogh::sensors
