#include <gtest/gtest.h>

#include <random>

#include "aerogh/control/controller.hpp"

using namespace aerogh;
using namespace aerogh::control;
using sensors::SensorKind;
using sensors::SensorReading;

namespace {

SensorReading reading(SensorKind k, double v, SimTime t, int i = 0) {
  return {"s" + std::to_string(i), k, v, "", t, 0};
}

std::vector<SensorReading> climate(std::initializer_list<double> temps, double rh, SimTime t) {
  std::vector<SensorReading> out;
  int i = 0;
  for (double v : temps) out.push_back(reading(SensorKind::sht75_temp, v, t, i++));
  out.push_back(reading(SensorKind::sht75_rh, rh, t, i));
  return out;
}

}  // namespace

TEST(Aggregate, MedianOfFreshReadings) {
  EXPECT_DOUBLE_EQ(aggregate_climate(climate({24.0, 24.2, 23.8}, 70, 10), 10, 1).temp, 24.0);
  EXPECT_DOUBLE_EQ(aggregate_climate(climate({24.0}, 70, 10), 10, 1).temp, 24.0);
  EXPECT_DOUBLE_EQ(aggregate_climate(climate({24.0, 24.1, 40.0}, 70, 10), 10, 1).temp, 24.1);
  EXPECT_DOUBLE_EQ(aggregate_climate(climate({24.0, 25.0}, 70, 10), 10, 1).temp, 24.5);
}

TEST(Aggregate, StaleReadingsIgnored) {
  auto r = climate({24.0}, 70, 0);
  r.push_back(reading(SensorKind::sht75_temp, 30.0, 7));
  r.push_back(reading(SensorKind::sht75_rh, 70.0, 7));
  // period 2: fresh means age <= 6 s
  EXPECT_DOUBLE_EQ(aggregate_climate(r, 7, 2).temp, 30.0);
  EXPECT_THROW(aggregate_climate(climate({24.0}, 70, 0), 7, 2), StaleData);
  EXPECT_NO_THROW(aggregate_climate(climate({24.0}, 70, 0), 6, 2));
  std::vector<SensorReading> none;
  EXPECT_THROW(aggregate_climate(none, 0, 1), StaleData);
}

TEST(ClimateDecide, Examples) {
  Setpoints sp;
  sim::SimConfig cfg;
  auto off = sim::ActuatorBank::all_off(cfg);
  EXPECT_TRUE(climate_decide(22.9, 70, sp, off).heater);

  auto heating = off;
  heating.heater = true;
  EXPECT_TRUE(climate_decide(24.0, 70, sp, heating).heater);

  auto hot = climate_decide(25.1, 70, sp, heating);
  EXPECT_FALSE(hot.heater);
  EXPECT_TRUE(hot.fan);
}

TEST(ClimateDecide, FanAndHumidifierBands) {
  Setpoints sp;
  sim::SimConfig cfg;
  auto off = sim::ActuatorBank::all_off(cfg);
  EXPECT_TRUE(climate_decide(24.0, 75.1, sp, off).fan);
  EXPECT_FALSE(climate_decide(24.0, 75.1, sp, off).humidifier);
  EXPECT_TRUE(climate_decide(24.0, 64.9, sp, off).humidifier);

  auto fan = off;
  fan.fan = true;
  // fan turns off only when both quantities are below their bands
  EXPECT_TRUE(climate_decide(22.9, 70.0, sp, fan).fan);
  EXPECT_TRUE(climate_decide(24.0, 64.9, sp, fan).fan);
  EXPECT_FALSE(climate_decide(22.9, 64.9, sp, fan).fan);

  // humidity-driven ventilation may coexist with heating
  auto both = climate_decide(22.0, 80.0, sp, off);
  EXPECT_TRUE(both.heater);
  EXPECT_TRUE(both.fan);
  // temperature alone never asks for both
  for (double t = 20.0; t < 28.0; t += 0.05) {
    auto a = climate_decide(t, 70.0, sp, off);
    EXPECT_FALSE(a.heater && a.fan) << t;
  }
}

TEST(ClimateDecide, DecisionsInvariantUnderUnitChange) {
  // Celsius to Fahrenheit applied to setpoints, deadbands and readings
  auto f = [](double c) { return c * 9.0 / 5.0 + 32.0; };
  Setpoints c_sp, f_sp;
  f_sp.temp_set = f(c_sp.temp_set);
  f_sp.temp_deadband = c_sp.temp_deadband * 9.0 / 5.0;
  sim::SimConfig cfg;
  auto a = sim::ActuatorBank::all_off(cfg), b = a;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> walk(0.0, 0.4);
  double t = 24.0, rh = 70.0;
  for (int i = 0; i < 5000; ++i) {
    t += walk(rng);
    rh = std::clamp(rh + 2.0 * walk(rng), 1.0, 99.0);
    // quarter-degree grid keeps the conversion exact in binary
    const double tc = std::round(t * 4.0) / 4.0;
    a = climate_decide(tc, rh, c_sp, a);
    b = climate_decide(f(tc), rh, f_sp, b);
    ASSERT_EQ(a, b) << i;
  }
}

TEST(Irrigation, ModularSchedule) {
  IrrigationSchedule s;
  EXPECT_TRUE(irrigation_on(0, s, 0));
  EXPECT_TRUE(irrigation_on(599, s, 0));
  EXPECT_FALSE(irrigation_on(600, s, 0));
  EXPECT_FALSE(irrigation_on(899, s, 0));
  EXPECT_TRUE(irrigation_on(900, s, 0));

  s.enabled = {true, false};
  for (SimTime t = 0; t < 3600; t += 7) EXPECT_FALSE(irrigation_on(t, s, 1));
  EXPECT_TRUE(irrigation_on(0, s, 2));  // beyond the vector: enabled

  s.phase_offset = {0, 0, 300};
  EXPECT_FALSE(irrigation_on(0, s, 2));
  EXPECT_TRUE(irrigation_on(300, s, 2));
  EXPECT_FALSE(irrigation_on(900, s, 2));
}

TEST(Irrigation, ReturnPumpLags) {
  IrrigationSchedule s;
  s.return_lag = 30;
  auto at = [&](SimTime t) { return irrigation_tick(t, s, 3); };
  EXPECT_TRUE(at(0).supply[0]);
  EXPECT_FALSE(at(0).ret[0]);
  EXPECT_TRUE(at(30).ret[0]);
  EXPECT_FALSE(at(600).supply[0]);
  EXPECT_TRUE(at(629).ret[0]);
  EXPECT_FALSE(at(630).ret[0]);
  s.return_lag = 0;
  for (SimTime t = 0; t < 1800; ++t) EXPECT_EQ(at(t).supply, at(t).ret);
}

TEST(Irrigation, OnTimeOverWholeCyclesIsExact) {
  IrrigationSchedule s;
  for (int k : {1, 3, 8}) {
    SimTime on = 0;
    for (SimTime t = 0; t < k * s.period_seconds(); ++t) on += irrigation_on(t, s, 0);
    EXPECT_EQ(on, k * 600);
  }
}

TEST(Uv, FirstDurationOfEachPeriod) {
  UvConfig uv;
  EXPECT_TRUE(uv_tick(0, uv));
  EXPECT_FALSE(uv_tick(uv.duration, uv));
  SimTime on = 0;
  for (SimTime t = 0; t < uv.period; ++t) on += uv_tick(t, uv);
  EXPECT_EQ(on, uv.duration);
}

TEST(Led, Photoperiod) {
  Setpoints sp;
  EXPECT_TRUE(led_tick(0, sp));
  EXPECT_TRUE(led_tick(16 * 3600 - 1, sp));
  EXPECT_FALSE(led_tick(16 * 3600, sp));
  EXPECT_TRUE(led_tick(24 * 3600, sp));
}

TEST(Alerts, TankLowIsEdgeTriggered) {
  sim::SimConfig cfg;
  AlertMonitor m(cfg, AlertRules::defaults(cfg));
  EXPECT_DOUBLE_EQ(m.rules().tank_low_threshold, 20.0);
  auto st = sim::GreenhouseState::initial(cfg);
  st.tank_volume = {25.0, 100.0, 100.0};
  EXPECT_TRUE(m.check(st, {}).empty());
  st.tank_volume[0] = 19.9;
  auto a = m.check(st, {});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].rule, AlertRule::tank_low);
  EXPECT_EQ(a[0].subject, "tank0");
  // oscillating around the threshold stays silent until 20 + 10 L
  for (double v : {20.1, 19.0, 25.0, 29.9, 15.0}) {
    st.tank_volume[0] = v;
    EXPECT_TRUE(m.check(st, {}).empty()) << v;
  }
  st.tank_volume[0] = 30.0;
  EXPECT_TRUE(m.check(st, {}).empty());
  st.tank_volume[0] = 19.0;
  EXPECT_EQ(m.check(st, {}).size(), 1u);
}

TEST(Alerts, DryRunOncePerExcursionRearmedByRecharge) {
  sim::SimConfig cfg;
  AlertMonitor m(cfg, AlertRules::defaults(cfg));
  auto st = sim::GreenhouseState::initial(cfg);
  std::vector<sim::SimEvent> dry{{sim::SimEvent::Kind::dry_run, 5, 4, 0.01, 0.0}};
  EXPECT_EQ(m.check(st, dry).size(), 1u);
  EXPECT_TRUE(m.check(st, dry).empty());
  // box 4 belongs to tank 1
  std::vector<sim::SimEvent> refill{{sim::SimEvent::Kind::recharge, 6, 1, 50.0, 0.0}};
  EXPECT_TRUE(m.check(st, refill).empty());
  EXPECT_EQ(m.check(st, dry).size(), 1u);
}

TEST(Alerts, RandomTracesFireOncePerCrossing) {
  sim::SimConfig cfg;
  const auto rules = AlertRules::defaults(cfg);
  std::mt19937_64 rng(11);
  for (int trace = 0; trace < 100; ++trace) {
    AlertMonitor m(cfg, rules);
    auto st = sim::GreenhouseState::initial(cfg);
    std::uniform_real_distribution<double> jump(-15.0, 15.0);
    double v = 60.0;
    int expected = 0, got = 0;
    bool armed = true;
    for (int i = 0; i < 500; ++i) {
      v = std::clamp(v + jump(rng), 0.0, 200.0);
      st.tank_volume[1] = v;
      // independent oracle of the arm/fire state machine
      if (armed && v < rules.tank_low_threshold) {
        armed = false;
        ++expected;
      } else if (!armed && v >= rules.tank_low_threshold + rules.rearm_margin) {
        armed = true;
      }
      got += static_cast<int>(m.check(st, {}).size());
    }
    EXPECT_EQ(got, expected);
  }
}

TEST(Alerts, SensorFaultEdge) {
  sim::SimConfig cfg;
  AlertMonitor m(cfg, AlertRules::defaults(cfg));
  EXPECT_TRUE(m.sensor_status(true, 1).has_value());
  EXPECT_FALSE(m.sensor_status(true, 2).has_value());
  EXPECT_FALSE(m.sensor_status(false, 3).has_value());
  EXPECT_TRUE(m.sensor_status(true, 4).has_value());
}

TEST(Commands, PayloadValidation) {
  EXPECT_NO_THROW(make_command("set_setpoints", {{"temp_set", 22.0}}, "c1"));
  EXPECT_THROW(make_command("set_setpoints", nlohmann::json::object(), "c1"), ValidationError);
  EXPECT_THROW(make_command("set_setpoints", {{"rh_set", 100}}, "c1"), ValidationError);
  EXPECT_THROW(make_command("set_setpoints", {{"temp_deadband", 0}}, "c1"), ValidationError);
  EXPECT_THROW(make_command("set_setpoints", {{"colour", 1}}, "c1"), ValidationError);
  EXPECT_THROW(make_command("set_setpoints", {{"temp_set", "warm"}}, "c1"), ValidationError);
  EXPECT_NO_THROW(make_command("set_schedule", {{"on", 10}, {"off", 5}}, "c2"));
  EXPECT_THROW(make_command("set_schedule", {{"on", 0}, {"off", 5}}, "c2"), ValidationError);
  EXPECT_THROW(make_command("set_schedule", {{"on", 10}}, "c2"), ValidationError);
  EXPECT_THROW(make_command("set_schedule", {{"on", 10}, {"off", 5}, {"enabled", {1, 0}}}, "c2"),
               ValidationError);
  EXPECT_THROW(make_command("set_schedule", {{"on", 10}, {"off", 5}, {"phase_offset", {-1}}}, "c2"),
               ValidationError);
  EXPECT_NO_THROW(make_command("recharge_tank", {{"tank", 0}, {"volume", 10}}, "c3"));
  EXPECT_THROW(make_command("recharge_tank", {{"tank", 0.5}, {"volume", 10}}, "c3"), ValidationError);
  EXPECT_THROW(make_command("recharge_tank", {{"tank", 0}, {"volume", -1}}, "c3"), ValidationError);
  EXPECT_THROW(make_command("ack_alert", {{"alert", 3}}, "c4"), ValidationError);
  EXPECT_THROW(make_command("reboot", nlohmann::json::object(), "c5"), ValidationError);
  EXPECT_THROW(make_command("ack_alert", {{"alert", "a-0"}}, ""), ValidationError);
  EXPECT_THROW(make_command("set_setpoints", nlohmann::json::array(), "c6"), ValidationError);
}

TEST(CommandQueue, AbandonResolvesEveryFuture) {
  CommandQueue q;
  auto f1 = q.push(make_command("ack_alert", {{"alert", "x"}}, "c1"));
  auto f2 = q.push(make_command("ack_alert", {{"alert", "y"}}, "c2"));
  q.abandon("shutting down");
  EXPECT_EQ(f1.get().status, Ack::Status::error);
  auto a2 = f2.get();
  EXPECT_EQ(a2.command_id, "c2");
  EXPECT_EQ(a2.error, "shutting down");
}

namespace {

struct Rig {
  sim::SimConfig cfg;
  Controller ctl{cfg, ControllerConfig{}};
  sim::GreenhouseState st = sim::GreenhouseState::initial(cfg);
};

}  // namespace

TEST(Controller, StaleClimateHoldsActuatorsAndAlerts) {
  Rig r;
  r.st.sim_time = 0;
  auto out = r.ctl.tick(r.st, climate({20.0}, 70, 0), {});
  EXPECT_TRUE(out.actuators.heater);
  r.st.sim_time = 10;
  out = r.ctl.tick(r.st, climate({30.0}, 70, 0), {});  // readings 10 s old
  EXPECT_TRUE(out.actuators.heater);
  ASSERT_EQ(out.alerts.size(), 1u);
  EXPECT_EQ(out.alerts[0].rule, AlertRule::sensor_fault);
}

TEST(Controller, SetpointsApplyAtNextTick) {
  Rig r;
  auto eff = r.ctl.apply(make_command("set_setpoints", {{"temp_set", 30.0}}, "c1"), r.st);
  EXPECT_TRUE(eff.ack.ok());
  EXPECT_TRUE(eff.setpoints_changed);
  auto out = r.ctl.tick(r.st, climate({26.0}, 70, 0), {});
  EXPECT_TRUE(out.actuators.heater);
}

TEST(Controller, ScheduleChangeWaitsForCycleBoundary) {
  Rig r;
  auto act = [&](SimTime t) {
    r.st.sim_time = t;
    return r.ctl.tick(r.st, climate({24.0}, 70, t), {});
  };
  act(0);
  act(100);
  auto eff = r.ctl.apply(make_command("set_schedule", {{"on", 2}, {"off", 1}}, "c1"), r.st);
  EXPECT_TRUE(eff.schedule_staged);
  ASSERT_TRUE(r.ctl.pending_schedule().has_value());
  // remainder of the current 10/5 cycle is untouched
  EXPECT_TRUE(act(599).actuators.supply_pump[0]);
  EXPECT_FALSE(act(600).actuators.supply_pump[0]);
  EXPECT_FALSE(act(899).actuators.supply_pump[0]);
  auto boundary = act(900);
  EXPECT_TRUE(boundary.schedule_activated);
  EXPECT_TRUE(boundary.actuators.supply_pump[0]);
  EXPECT_TRUE(act(900 + 119).actuators.supply_pump[0]);
  EXPECT_FALSE(act(900 + 120).actuators.supply_pump[0]);
  EXPECT_TRUE(act(900 + 180).actuators.supply_pump[0]);
  EXPECT_DOUBLE_EQ(r.ctl.schedule().on_minutes, 2.0);
}

TEST(Controller, RechargeAndAckCommands) {
  Rig r;
  r.st.tank_volume[2] = 50.0;
  auto before = r.st;
  auto bad = r.ctl.apply(make_command("recharge_tank", {{"tank", 7}, {"volume", 10}}, "c1"), r.st);
  EXPECT_FALSE(bad.ack.ok());
  EXPECT_FALSE(bad.event.has_value());
  EXPECT_EQ(r.st.tank_volume, before.tank_volume);

  auto ok = r.ctl.apply(make_command("recharge_tank", {{"tank", 2}, {"volume", 10}}, "c2"), r.st);
  EXPECT_TRUE(ok.ack.ok());
  EXPECT_DOUBLE_EQ(r.st.tank_volume[2], 60.0);
  ASSERT_TRUE(ok.event.has_value());

  EXPECT_FALSE(r.ctl.apply(make_command("ack_alert", {{"alert", "a-0"}}, "c3"), r.st).ack.ok());
  r.st.tank_volume[0] = 5.0;
  auto out = r.ctl.tick(r.st, climate({24.0}, 70, 0), {});
  ASSERT_EQ(out.alerts.size(), 1u);
  const auto id = out.alerts[0].id;
  EXPECT_TRUE(r.ctl.apply(make_command("ack_alert", {{"alert", id}}, "c4"), r.st).ack.ok());
  EXPECT_TRUE(r.ctl.alerts().front().acked);
  // acking twice is fine and keeps it acked
  EXPECT_TRUE(r.ctl.apply(make_command("ack_alert", {{"alert", id}}, "c5"), r.st).ack.ok());
  EXPECT_TRUE(r.ctl.alerts().front().acked);
}

TEST(Controller, AlertIdsUnique) {
  Rig r;
  std::set<std::string> ids;
  for (int i = 0; i < 50; ++i) {
    r.st.sim_time = i;
    r.st.tank_volume[0] = i % 2 ? 5.0 : 100.0;
    r.ctl.tick(r.st, climate({24.0}, 70, i), {});
  }
  for (const auto& a : r.ctl.alerts()) EXPECT_TRUE(ids.insert(a.id).second);
  EXPECT_EQ(ids.size(), 25u);
}

TEST(Controller, RejectsInvalidConfig) {
  sim::SimConfig cfg;
  ControllerConfig cc;
  cc.setpoints.temp_deadband = 0;
  EXPECT_THROW(Controller(cfg, cc), ConfigError);
  cc = {};
  cc.uv.duration = cc.uv.period + 1;
  EXPECT_THROW(Controller(cfg, cc), ConfigError);
  cc = {};
  cc.schedule.on_minutes = 0;
  EXPECT_THROW(Controller(cfg, cc), ConfigError);
}
