#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aerogh/common.hpp"

namespace aerogh::control {

enum class CommandKind { set_setpoints, set_schedule, recharge_tank, ack_alert };

inline std::string_view to_string(CommandKind k) {
  switch (k) {
    case CommandKind::set_setpoints: return "set_setpoints";
    case CommandKind::set_schedule: return "set_schedule";
    case CommandKind::recharge_tank: return "recharge_tank";
    case CommandKind::ack_alert: return "ack_alert";
  }
  return "?";
}

struct OperatorCommand {
  CommandKind kind;
  nlohmann::json payload;  // validated against the kind's schema
  std::string command_id;
};

struct Ack {
  enum class Status { ok, error, pending };
  std::string command_id;
  Status status = Status::ok;
  std::string error;

  bool ok() const { return status == Status::ok; }

  static Ack success(std::string id) { return {std::move(id), Status::ok, {}}; }
  static Ack failure(std::string id, std::string why) {
    return {std::move(id), Status::error, std::move(why)};
  }
  static Ack pending(std::string id) { return {std::move(id), Status::pending, {}}; }
};

namespace detail {

inline void only_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> keys) {
  for (const auto& item : obj.items()) {
    bool found = false;
    for (auto k : keys) found = found || item.key() == k;
    if (!found) throw ValidationError("unexpected payload field '" + item.key() + "'");
  }
}

inline double number_field(const nlohmann::json& obj, const char* key) {
  if (!obj.contains(key)) throw ValidationError(std::string("missing payload field '") + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ValidationError(std::string("payload field '") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace detail

/// Checks a payload against its kind's schema. Range checks that depend on
/// controller state (tank exists, alert exists) happen when the command is applied.
inline void validate_payload(CommandKind kind, const nlohmann::json& p) {
  if (!p.is_object()) throw ValidationError("payload must be an object");
  switch (kind) {
    case CommandKind::set_setpoints: {
      detail::only_keys(p, {"temp_set", "temp_deadband", "rh_set", "rh_deadband"});
      if (p.empty()) throw ValidationError("set_setpoints needs at least one field");
      for (const auto& item : p.items())
        if (!item.value().is_number())
          throw ValidationError("payload field '" + item.key() + "' must be a number");
      if (p.contains("temp_deadband") && !(p["temp_deadband"].get<double>() > 0))
        throw ValidationError("temp_deadband must be > 0");
      if (p.contains("rh_deadband") && !(p["rh_deadband"].get<double>() > 0))
        throw ValidationError("rh_deadband must be > 0");
      if (p.contains("rh_set")) {
        double rh = p["rh_set"].get<double>();
        if (!(rh > 0 && rh < 100)) throw ValidationError("rh_set must lie in (0, 100)");
      }
      break;
    }
    case CommandKind::set_schedule: {
      detail::only_keys(p, {"on", "off", "enabled", "phase_offset"});
      if (!(detail::number_field(p, "on") > 0)) throw ValidationError("on must be > 0");
      if (!(detail::number_field(p, "off") >= 0)) throw ValidationError("off must be >= 0");
      if (p.contains("enabled")) {
        const auto& e = p["enabled"];
        if (!e.is_array()) throw ValidationError("enabled must be an array of booleans");
        for (const auto& v : e)
          if (!v.is_boolean()) throw ValidationError("enabled must be an array of booleans");
      }
      if (p.contains("phase_offset")) {
        const auto& o = p["phase_offset"];
        if (!o.is_array()) throw ValidationError("phase_offset must be an array of integers");
        for (const auto& v : o)
          if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
            throw ValidationError("phase_offset must be an array of integers >= 0");
      }
      break;
    }
    case CommandKind::recharge_tank: {
      detail::only_keys(p, {"tank", "volume"});
      if (!p.contains("tank") || !p["tank"].is_number_integer())
        throw ValidationError("recharge_tank needs an integer 'tank'");
      if (!(detail::number_field(p, "volume") > 0)) throw ValidationError("volume must be > 0");
      break;
    }
    case CommandKind::ack_alert: {
      detail::only_keys(p, {"alert"});
      if (!p.contains("alert") || !p["alert"].is_string())
        throw ValidationError("ack_alert needs a string 'alert'");
      break;
    }
  }
}

inline CommandKind command_kind_from_string(std::string_view s) {
  for (auto k : {CommandKind::set_setpoints, CommandKind::set_schedule,
                 CommandKind::recharge_tank, CommandKind::ack_alert})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown command kind '" + std::string(s) + "'");
}

inline OperatorCommand make_command(std::string_view kind, nlohmann::json payload, std::string id) {
  if (id.empty()) throw ValidationError("command id must not be empty");
  OperatorCommand cmd{command_kind_from_string(kind), std::move(payload), std::move(id)};
  validate_payload(cmd.kind, cmd.payload);
  return cmd;
}

/// Multi-producer, single-consumer handoff between the network threads and
/// the control tick. Producers get a future that resolves once applied.
class CommandQueue {
 public:
  std::future<Ack> push(OperatorCommand cmd) {
    std::promise<Ack> done;
    auto fut = done.get_future();
    std::lock_guard lock(mu_);
    queue_.push_back({std::move(cmd), std::move(done)});
    return fut;
  }

  struct Entry {
    OperatorCommand command;
    std::promise<Ack> done;
  };

  std::vector<Entry> drain() {
    std::lock_guard lock(mu_);
    std::vector<Entry> out(std::make_move_iterator(queue_.begin()),
                           std::make_move_iterator(queue_.end()));
    queue_.clear();
    return out;
  }

  /// Fails every queued command; used on shutdown so no caller waits forever.
  void abandon(const std::string& why) {
    for (auto& e : drain()) e.done.set_value(Ack::failure(e.command.command_id, why));
  }

 private:
  std::mutex mu_;
  std::deque<Entry> queue_;
};

/// Completed acknowledgments keyed by command id, for callers that timed out.
class AckRegistry {
 public:
  void record(const Ack& ack) {
    std::lock_guard lock(mu_);
    acks_[ack.command_id] = ack;
  }
  std::optional<Ack> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = acks_.find(id);
    if (it == acks_.end()) return std::nullopt;
    return it->second;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, Ack> acks_;
};

}  // namespace aerogh::control
