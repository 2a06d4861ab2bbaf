#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerogh/common.hpp"
#include "aerogh/control/commands.hpp"
#include "aerogh/sensors/sensors.hpp"
#include "aerogh/sim/greenhouse.hpp"

namespace aerogh::control {

struct Setpoints {
  double temp_set = 24.0;
  double temp_deadband = 1.0;
  double rh_set = 70.0;
  double rh_deadband = 5.0;
  // LED photoperiod: on for the first photoperiod_on of every photoperiod_cycle
  SimTime photoperiod_on = 16 * 3600;
  SimTime photoperiod_cycle = 24 * 3600;

  bool operator==(const Setpoints&) const = default;
};

inline void validate(const Setpoints& s) {
  require(s.temp_deadband > 0, "temp_deadband must be > 0");
  require(s.rh_deadband > 0, "rh_deadband must be > 0");
  require(s.rh_set > 0 && s.rh_set < 100, "rh_set must lie in (0, 100)");
  require(s.photoperiod_cycle > 0 && s.photoperiod_on >= 0 &&
              s.photoperiod_on <= s.photoperiod_cycle,
          "photoperiod must satisfy 0 <= on <= cycle");
}

struct IrrigationSchedule {
  double on_minutes = 10.0;
  double off_minutes = 5.0;
  std::vector<bool> enabled;         // per box; missing entries count as enabled
  std::vector<SimTime> phase_offset;  // per box, s
  SimTime anchor = 0;                 // start of the first cycle under this schedule
  SimTime return_lag = 0;             // return pump trails supply by this much

  SimTime on_seconds() const { return std::llround(on_minutes * 60.0); }
  SimTime period_seconds() const { return std::llround((on_minutes + off_minutes) * 60.0); }
  bool box_enabled(int b) const {
    return b >= static_cast<int>(enabled.size()) || enabled[b];
  }
  SimTime box_offset(int b) const {
    return b < static_cast<int>(phase_offset.size()) ? phase_offset[b] : 0;
  }
};

inline void validate(const IrrigationSchedule& s) {
  require(s.on_minutes > 0, "on_minutes must be > 0");
  require(s.off_minutes >= 0, "off_minutes must be >= 0");
  require(s.return_lag >= 0, "return_lag must be >= 0");
}

struct UvConfig {
  SimTime period = 6 * 3600;
  SimTime duration = 30 * 60;
};

struct ClimateEstimate {
  double temp;
  double rh;
};

class StaleData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Median of the fresh SHT75 readings per quantity. A reading is fresh when it
/// is no older than three sample periods.
inline ClimateEstimate aggregate_climate(std::span<const sensors::SensorReading> readings,
                                         SimTime now, SimTime sample_period) {
  std::vector<double> temps, rhs;
  for (const auto& r : readings) {
    if (now - r.sim_time > 3 * sample_period || r.sim_time > now) continue;
    if (r.kind == sensors::SensorKind::sht75_temp) temps.push_back(r.scalar());
    if (r.kind == sensors::SensorKind::sht75_rh) rhs.push_back(r.scalar());
  }
  if (temps.empty() || rhs.empty()) throw StaleData("no fresh temperature/humidity readings");
  return {median(std::move(temps)), median(std::move(rhs))};
}

/// Hysteresis decisions for heater, fan and humidifier.
///
///   heater  on: T < set-db          off: T > set+db
///   fan     on: T > set+db or RH > rh+rdb
///          off: T < set-db and RH < rh-rdb
///   humid.  on: RH < rh-rdb         off: RH > rh+rdb
///
/// Otherwise each device keeps its previous state.
inline sim::ActuatorBank climate_decide(double temp, double rh, const Setpoints& sp,
                                        const sim::ActuatorBank& prev) {
  sim::ActuatorBank next = prev;
  const bool cold = temp < sp.temp_set - sp.temp_deadband;
  const bool hot = temp > sp.temp_set + sp.temp_deadband;
  const bool dry = rh < sp.rh_set - sp.rh_deadband;
  const bool humid = rh > sp.rh_set + sp.rh_deadband;

  if (cold) next.heater = true;
  if (hot) next.heater = false;

  if (hot || humid) next.fan = true;
  else if (cold && dry) next.fan = false;

  if (dry) next.humidifier = true;
  if (humid) next.humidifier = false;
  return next;
}

inline bool irrigation_on(SimTime t, const IrrigationSchedule& s, int box) {
  if (!s.box_enabled(box)) return false;
  const SimTime local = t - s.anchor - s.box_offset(box);
  if (local < 0) return false;
  return local % s.period_seconds() < s.on_seconds();
}

struct PumpCommands {
  std::vector<bool> supply;
  std::vector<bool> ret;
};

inline PumpCommands irrigation_tick(SimTime t, const IrrigationSchedule& s, int n_boxes) {
  PumpCommands out;
  out.supply.resize(static_cast<std::size_t>(n_boxes));
  out.ret.resize(static_cast<std::size_t>(n_boxes));
  for (int b = 0; b < n_boxes; ++b) {
    out.supply[b] = irrigation_on(t, s, b);
    out.ret[b] = irrigation_on(t - s.return_lag, s, b);
  }
  return out;
}

inline bool uv_tick(SimTime t, const UvConfig& uv) { return t % uv.period < uv.duration; }

inline bool led_tick(SimTime t, const Setpoints& sp) {
  return t % sp.photoperiod_cycle < sp.photoperiod_on;
}

// ---------------------------------------------------------------------------
// alerts

enum class AlertRule { tank_low, dry_run, sensor_fault, disease };

inline std::string_view to_string(AlertRule r) {
  switch (r) {
    case AlertRule::tank_low: return "tank_low";
    case AlertRule::dry_run: return "dry_run";
    case AlertRule::sensor_fault: return "sensor_fault";
    case AlertRule::disease: return "disease";
  }
  return "?";
}

struct Alert {
  std::string id;
  AlertRule rule;
  SimTime sim_time;
  std::string subject;  // tank0, box3, zone, plant17
  std::string detail;
  bool acked = false;
};

struct AlertRules {
  double tank_low_threshold;  // L
  double rearm_margin;        // L above threshold before tank_low re-arms

  static AlertRules defaults(const sim::SimConfig& cfg) {
    return {0.10 * cfg.tank_capacity(), 0.05 * cfg.tank_capacity()};
  }
};

/// Edge-triggered alert generation. Each condition fires once per excursion.
class AlertMonitor {
 public:
  AlertMonitor(const sim::SimConfig& cfg, AlertRules rules)
      : rules_(rules),
        tank_armed_(static_cast<std::size_t>(cfg.n_tanks), true),
        box_dry_(static_cast<std::size_t>(cfg.n_boxes), false),
        boxes_per_tank_(cfg.boxes_per_tank()) {}

  const AlertRules& rules() const { return rules_; }

  std::vector<Alert> check(const sim::GreenhouseState& state,
                           std::span<const sim::SimEvent> events) {
    std::vector<Alert> out;
    for (std::size_t t = 0; t < tank_armed_.size(); ++t) {
      const double v = state.tank_volume[t];
      if (tank_armed_[t] && v < rules_.tank_low_threshold) {
        tank_armed_[t] = false;
        out.push_back(make(AlertRule::tank_low, state.sim_time, "tank" + std::to_string(t),
                           "volume " + std::to_string(v) + " L"));
      } else if (!tank_armed_[t] && v >= rules_.tank_low_threshold + rules_.rearm_margin) {
        tank_armed_[t] = true;
      }
    }
    for (const auto& e : events) {
      if (e.kind == sim::SimEvent::Kind::dry_run && !box_dry_[e.index]) {
        box_dry_[e.index] = true;
        out.push_back(make(AlertRule::dry_run, e.sim_time, "box" + std::to_string(e.index),
                           "short " + std::to_string(e.amount) + " L"));
      } else if (e.kind == sim::SimEvent::Kind::recharge) {
        for (int b = 0; b < boxes_per_tank_; ++b) box_dry_[e.index * boxes_per_tank_ + b] = false;
      }
    }
    return out;
  }

  std::optional<Alert> sensor_status(bool stale, SimTime now) {
    if (stale && !sensor_fault_open_) {
      sensor_fault_open_ = true;
      return make(AlertRule::sensor_fault, now, "zone", "no fresh climate readings");
    }
    if (!stale) sensor_fault_open_ = false;
    return std::nullopt;
  }

  Alert make(AlertRule rule, SimTime t, std::string subject, std::string detail) {
    return {"a-" + std::to_string(next_id_++), rule, t, std::move(subject), std::move(detail),
            false};
  }

 private:
  AlertRules rules_;
  std::vector<bool> tank_armed_;
  std::vector<bool> box_dry_;
  int boxes_per_tank_;
  bool sensor_fault_open_ = false;
  std::uint64_t next_id_ = 0;
};

// ---------------------------------------------------------------------------
// the central processing unit

struct ControllerConfig {
  Setpoints setpoints;
  IrrigationSchedule schedule;
  UvConfig uv;
  SimTime control_period = 1;  // equals the SHT75 sample period
};

/// Result of one control tick.
struct TickOutput {
  sim::ActuatorBank actuators;
  std::vector<Alert> alerts;
  bool schedule_activated = false;
};

/// Outcome of applying an operator command.
struct CommandEffect {
  Ack ack;
  std::optional<sim::SimEvent> event;       // recharge
  bool setpoints_changed = false;
  bool schedule_staged = false;
};

class Controller {
 public:
  Controller(const sim::SimConfig& cfg, ControllerConfig cc)
      : cfg_(cfg),
        cc_(std::move(cc)),
        monitor_(cfg, AlertRules::defaults(cfg)),
        last_(sim::ActuatorBank::all_off(cfg)) {
    validate(cc_.setpoints);
    validate(cc_.schedule);
    require(cc_.control_period > 0, "control_period must be > 0");
    require(cc_.uv.period > 0 && cc_.uv.duration >= 0 && cc_.uv.duration <= cc_.uv.period,
            "uv schedule must satisfy 0 <= duration <= period");
  }

  const Setpoints& setpoints() const { return cc_.setpoints; }
  const IrrigationSchedule& schedule() const { return cc_.schedule; }
  const std::optional<IrrigationSchedule>& pending_schedule() const { return pending_; }
  const std::vector<Alert>& alerts() const { return alerts_; }
  AlertMonitor& monitor() { return monitor_; }

  /// Runs one control tick at state.sim_time. `recent` holds the latest
  /// reading of every sensor.
  TickOutput tick(const sim::GreenhouseState& state,
                  std::span<const sensors::SensorReading> recent,
                  std::span<const sim::SimEvent> events) {
    const SimTime t = state.sim_time;
    TickOutput out;

    if (pending_ && at_cycle_boundary(t)) {
      cc_.schedule = *pending_;
      cc_.schedule.anchor = t;
      pending_.reset();
      out.schedule_activated = true;
    }

    sim::ActuatorBank next = last_;
    if (t % cc_.control_period == 0) {
      try {
        auto est = aggregate_climate(recent, t, cc_.control_period);
        next = climate_decide(est.temp, est.rh, cc_.setpoints, last_);
        if (auto a = monitor_.sensor_status(false, t)) out.alerts.push_back(*a);
      } catch (const StaleData&) {
        if (auto a = monitor_.sensor_status(true, t)) out.alerts.push_back(*a);
      }
    }

    auto pumps = irrigation_tick(t, cc_.schedule, cfg_.n_boxes);
    next.supply_pump = std::move(pumps.supply);
    next.return_pump = std::move(pumps.ret);
    next.uv = uv_tick(t, cc_.uv);
    next.led = led_tick(t, cc_.setpoints);

    for (auto& a : monitor_.check(state, events)) out.alerts.push_back(std::move(a));
    for (const auto& a : out.alerts) alerts_.push_back(a);
    last_ = next;
    out.actuators = std::move(next);
    return out;
  }

  /// Applies a validated command. Setpoints take effect at the next tick; a new
  /// irrigation schedule is held until the current cycle completes.
  CommandEffect apply(const OperatorCommand& cmd, sim::GreenhouseState& state) {
    CommandEffect eff{Ack::success(cmd.command_id), std::nullopt, false, false};
    try {
      validate_payload(cmd.kind, cmd.payload);
      const auto& p = cmd.payload;
      switch (cmd.kind) {
        case CommandKind::set_setpoints: {
          Setpoints sp = cc_.setpoints;
          sp.temp_set = p.value("temp_set", sp.temp_set);
          sp.temp_deadband = p.value("temp_deadband", sp.temp_deadband);
          sp.rh_set = p.value("rh_set", sp.rh_set);
          sp.rh_deadband = p.value("rh_deadband", sp.rh_deadband);
          validate(sp);
          cc_.setpoints = sp;
          eff.setpoints_changed = true;
          break;
        }
        case CommandKind::set_schedule: {
          IrrigationSchedule s = pending_ ? *pending_ : cc_.schedule;
          s.on_minutes = p.at("on").get<double>();
          s.off_minutes = p.at("off").get<double>();
          if (p.contains("enabled")) s.enabled = p["enabled"].get<std::vector<bool>>();
          if (p.contains("phase_offset"))
            s.phase_offset = p["phase_offset"].get<std::vector<SimTime>>();
          validate(s);
          if (s.period_seconds() <= 0 || s.on_seconds() <= 0)
            throw ValidationError("schedule rounds to an empty cycle");
          pending_ = s;
          eff.schedule_staged = true;
          break;
        }
        case CommandKind::recharge_tank: {
          auto r = sim::recharge_tank(state, p.at("tank").get<int>(), p.at("volume").get<double>(),
                                      cfg_);
          state = std::move(r.state);
          // the caller feeds this event into the next tick so dry-run alerts re-arm
          eff.event = r.event;
          break;
        }
        case CommandKind::ack_alert: {
          const auto id = p.at("alert").get<std::string>();
          auto it = std::find_if(alerts_.begin(), alerts_.end(),
                                 [&](const Alert& a) { return a.id == id; });
          if (it == alerts_.end()) throw CommandRejected("unknown alert " + id);
          it->acked = true;
          break;
        }
      }
    } catch (const std::exception& e) {
      eff.ack = Ack::failure(cmd.command_id, e.what());
      eff.event.reset();
    }
    return eff;
  }

  void record_alert(const Alert& a) { alerts_.push_back(a); }

 private:
  bool at_cycle_boundary(SimTime t) const {
    const SimTime local = t - cc_.schedule.anchor;
    return local >= 0 && local % cc_.schedule.period_seconds() == 0;
  }

  sim::SimConfig cfg_;
  ControllerConfig cc_;
  AlertMonitor monitor_;
  sim::ActuatorBank last_;
  std::optional<IrrigationSchedule> pending_;
  std::vector<Alert> alerts_;
};

}  // namespace aerogh::control
