#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aerogh/common.hpp"
#include "aerogh/control/controller.hpp"
#include "aerogh/datalog/datalog.hpp"
#include "aerogh/sensors/sensors.hpp"
#include "aerogh/sim/greenhouse.hpp"
#include "aerogh/telemetry/broker.hpp"

namespace aerogh::runtime {

using telemetry::TelemetryFrame;

struct LoopOptions {
  sim::SimConfig sim;
  control::ControllerConfig control;
  sensors::SamplingPeriods periods;
  SimTime energy_period = 60;
  // period of the plant-truth topics gh/zone0/true_temp and true_rh; 0 disables
  SimTime truth_period = 1;
  std::size_t log_flush_every = 4096;
};

struct RunSummary {
  SimTime duration = 0;
  std::map<std::string, double> energy_kwh;
  double energy_total_kwh = 0.0;
  double water_dispensed = 0.0;
  double water_returned = 0.0;
  double water_consumed = 0.0;
  double water_recharged = 0.0;
  std::size_t alert_count = 0;
  std::uint64_t log_records = 0;
};

/// Closed loop of simulator, sensors and controller, publishing every reading,
/// actuation and alert through the broker into the datalog.
///
/// Tick order at time t: publish plant truth, sample due sensors, apply queued
/// operator commands, run the controller, publish actuator changes, snapshot
/// energy, then step the plant to t + timestep.
class ClosedLoop {
 public:
  ClosedLoop(LoopOptions opts, telemetry::Broker& broker, datalog::DatalogWriter& log,
             control::CommandQueue* commands = nullptr, control::AckRegistry* acks = nullptr)
      : opts_(std::move(opts)),
        broker_(broker),
        log_(log),
        commands_(commands),
        acks_(acks),
        sensors_(sensors::default_sensor_specs(opts_.sim, opts_.periods), opts_.sim),
        controller_(opts_.sim, opts_.control),
        state_(sim::GreenhouseState::initial(opts_.sim)),
        epoch_(parse_iso8601(opts_.sim.wall_epoch)),
        devices_(sim::device_names(opts_.sim)) {
    sim::validate(opts_.sim);
    require(opts_.energy_period > 0, "energy_period must be > 0");
    require(opts_.truth_period >= 0, "truth_period must be >= 0");
    require(opts_.control.control_period % opts_.sim.timestep == 0,
            "control_period must be a multiple of timestep");
    broker_.set_sink([this](const TelemetryFrame& f) { log_.append_frame(f); });
  }

  ~ClosedLoop() { broker_.set_sink(nullptr); }

  ClosedLoop(const ClosedLoop&) = delete;
  ClosedLoop& operator=(const ClosedLoop&) = delete;

  const sim::GreenhouseState& state() const { return state_; }
  const control::Controller& controller() const { return controller_; }
  const sim::SimConfig& config() const { return opts_.sim; }

  void tick() {
    const SimTime t = state_.sim_time;
    if (t == 0) publish_config();
    if (opts_.truth_period > 0 && t % opts_.truth_period == 0) {
      publish("gh/zone0/true_temp", state_.air_temp, "C");
      publish("gh/zone0/true_rh", state_.rel_humidity, "%");
    }

    for (auto& r : sensors_.sample_due(state_, opts_.sim)) {
      publish_reading(r);
      latest_[r.sensor_id] = std::move(r);
    }

    if (commands_) {
      for (auto& entry : commands_->drain()) {
        auto ack = apply_command(entry.command);
        if (acks_) acks_->record(ack);
        entry.done.set_value(ack);
      }
    }

    std::vector<sensors::SensorReading> recent;
    recent.reserve(latest_.size());
    for (const auto& [_, r] : latest_) recent.push_back(r);
    auto out = controller_.tick(state_, recent, pending_events_);
    pending_events_.clear();
    if (out.schedule_activated) publish_schedule();
    for (const auto& a : out.alerts) publish_alert(a);

    publish_actuation(out.actuators, t == 0);
    if (t % opts_.energy_period == 0) snapshot_energy();

    auto stepped = sim::step(state_, out.actuators, opts_.sim);
    state_ = std::move(stepped.state);
    for (const auto& e : stepped.events) log_event(e);
    pending_events_ = std::move(stepped.events);
  }

  void run_until(SimTime end) {
    while (state_.sim_time < end) tick();
  }

  /// Final energy snapshot and flush; the log is complete after this.
  RunSummary finish() {
    if (!finished_) {
      if (last_snapshot_ != state_.sim_time) snapshot_energy();
      log_.flush();
      finished_ = true;
    }
    RunSummary s;
    s.duration = state_.sim_time;
    s.energy_kwh = state_.energy_by_device(opts_.sim);
    s.energy_total_kwh = state_.energy_total();
    s.water_dispensed = state_.water_dispensed;
    s.water_returned = state_.water_returned;
    s.water_consumed = state_.water_dispensed - state_.water_returned;
    s.water_recharged = state_.water_recharged;
    s.alert_count = controller_.alerts().size();
    s.log_records = log_.next_seq();
    return s;
  }

  std::string wall(SimTime t) const { return format_iso8601(epoch_ + t); }

  void publish(const std::string& topic, telemetry::FrameValue v, std::string unit) {
    broker_.publish({topic, state_.sim_time, wall(state_.sim_time), std::move(v), std::move(unit)});
  }

  /// Records a disease alert raised outside the control tick.
  void raise_alert(control::Alert a) {
    controller_.record_alert(a);
    publish_alert(a);
  }
  control::AlertMonitor& alert_monitor() { return controller_.monitor(); }

 private:
  void publish_reading(const sensors::SensorReading& r) {
    using K = sensors::SensorKind;
    const std::string idx = std::to_string(target_index(r.sensor_id));
    switch (r.kind) {
      case K::sht75_temp: publish("gh/zone" + idx + "/temp", r.scalar(), r.unit); break;
      case K::sht75_rh: publish("gh/zone" + idx + "/rh", r.scalar(), r.unit); break;
      case K::srf05:
        publish("gh/tank" + idx + "/distance", r.scalar(), r.unit);
        publish("gh/tank" + idx + "/volume", sensors::volume_from_distance(r.scalar(), opts_.sim),
                "L");
        break;
      case K::yf_s201: {
        const auto pulses = static_cast<std::int64_t>(r.scalar());
        publish("gh/box" + idx + "/pulses", r.scalar(), r.unit);
        publish("gh/box" + idx + "/flow",
                sensors::flow_from_pulses(pulses, static_cast<double>(opts_.periods.flow)),
                "L/min");
        break;
      }
      case K::gy302: publish("gh/zone" + idx + "/lux", r.scalar(), r.unit); break;
      case K::tcs3200:
        publish("gh/zone" + idx + "/spectrum", std::get<sensors::Rgb>(r.value), r.unit);
        break;
    }
  }

  int target_index(const std::string& sensor_id) {
    auto it = target_cache_.find(sensor_id);
    if (it != target_cache_.end()) return it->second;
    for (const auto& s : sensors_.sensors())
      if (s.spec().id == sensor_id) return target_cache_[sensor_id] = s.spec().target.index;
    return 0;
  }

  void publish_config() {
    publish_setpoints();
    publish_schedule();
  }

  void publish_setpoints() {
    const auto& sp = controller_.setpoints();
    std::ostringstream ss;
    ss << "temp_set=" << sp.temp_set << ";temp_deadband=" << sp.temp_deadband
       << ";rh_set=" << sp.rh_set << ";rh_deadband=" << sp.rh_deadband;
    publish("gh/config/setpoints", ss.str(), "");
  }

  void publish_schedule() {
    const auto& s = controller_.schedule();
    std::ostringstream ss;
    ss << "on=" << s.on_minutes << ";off=" << s.off_minutes;
    publish("gh/config/schedule", ss.str(), "min");
  }

  void publish_alert(const control::Alert& a) {
    publish("gh/alert/" + std::string(control::to_string(a.rule)),
            a.id + " " + a.subject + ": " + a.detail, "");
  }

  void publish_actuation(const sim::ActuatorBank& next, bool force) {
    const auto now = sim::device_states(next);
    const auto before = sim::device_states(state_.actuators);
    const int n = opts_.sim.n_boxes;
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      if (!force && now[i] == before[i]) continue;
      std::string topic;
      if (i < 5) {
        topic = "gh/zone0/" + devices_[i];
      } else {
        const auto b = static_cast<int>(i - 5) % n;
        const bool supply = i < 5 + static_cast<std::size_t>(n);
        topic = "gh/box" + std::to_string(b) + (supply ? "/supply_pump" : "/return_pump");
      }
      publish(topic, now[i] ? 1.0 : 0.0, "bool");
    }
  }

  void snapshot_energy() {
    log_.append(datalog::RecordKind::energy, state_.sim_time,
                datalog::energy_snapshot_body(state_, opts_.sim));
    publish("gh/zone0/energy", state_.energy_total(), "kWh");
    last_snapshot_ = state_.sim_time;
  }

  void log_event(const sim::SimEvent& e) {
    datalog::Json body;
    body["t"] = "event";
    body["event"] = sim::to_string(e.kind);
    body[e.kind == sim::SimEvent::Kind::dry_run ? "box" : "tank"] = e.index;
    body["amount"] = e.amount;
    if (e.kind == sim::SimEvent::Kind::recharge) body["overflow"] = e.overflow;
    log_.append(datalog::RecordKind::event, e.sim_time, std::move(body));
  }

  control::Ack apply_command(const control::OperatorCommand& cmd) {
    auto eff = controller_.apply(cmd, state_);
    datalog::Json body;
    body["cmd"] = telemetry::command_record(cmd);
    body["ack"] = telemetry::ack_record(eff.ack);
    log_.append(datalog::RecordKind::command, state_.sim_time, std::move(body));
    if (eff.event) {
      log_event(*eff.event);
      pending_events_.push_back(*eff.event);
      const int tank = eff.event->index;
      publish("gh/tank" + std::to_string(tank) + "/volume", state_.tank_volume[tank], "L");
    }
    if (eff.setpoints_changed) publish_setpoints();
    return eff.ack;
  }

  LoopOptions opts_;
  telemetry::Broker& broker_;
  datalog::DatalogWriter& log_;
  control::CommandQueue* commands_;
  control::AckRegistry* acks_;
  sensors::SensorBank sensors_;
  control::Controller controller_;
  sim::GreenhouseState state_;
  std::int64_t epoch_;
  std::vector<std::string> devices_;
  std::map<std::string, sensors::SensorReading> latest_;
  std::map<std::string, int> target_cache_;
  std::vector<sim::SimEvent> pending_events_;
  SimTime last_snapshot_ = -1;
  bool finished_ = false;
};

}  // namespace aerogh::runtime
