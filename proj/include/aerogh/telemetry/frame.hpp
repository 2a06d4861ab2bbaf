#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aerogh/common.hpp"
#include "aerogh/control/commands.hpp"

namespace aerogh::telemetry {

// Topic grammar:   gh/<subject>/<quantity>
//   subject  := zone<k> | box<k> | tank<k> | plant<k> | config | alert
//   quantity := [a-z][a-z0-9_]*
// Subscription patterns may replace any whole segment with '*'.

namespace detail {

inline std::vector<std::string_view> split_topic(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find('/', start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline bool is_indexed(std::string_view seg, std::string_view prefix) {
  if (seg.size() <= prefix.size() || seg.substr(0, prefix.size()) != prefix) return false;
  auto digits = seg.substr(prefix.size());
  if (digits.size() > 1 && digits[0] == '0') return false;
  for (char c : digits)
    if (c < '0' || c > '9') return false;
  return true;
}

inline bool valid_subject(std::string_view s) {
  return s == "config" || s == "alert" || is_indexed(s, "zone") || is_indexed(s, "box") ||
         is_indexed(s, "tank") || is_indexed(s, "plant");
}

inline bool valid_quantity(std::string_view q) {
  if (q.empty() || q[0] < 'a' || q[0] > 'z') return false;
  for (char c : q)
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  return true;
}

}  // namespace detail

inline bool valid_topic(std::string_view topic) {
  auto p = detail::split_topic(topic);
  return p.size() == 3 && p[0] == "gh" && detail::valid_subject(p[1]) &&
         detail::valid_quantity(p[2]);
}

inline bool valid_pattern(std::string_view pattern) {
  auto p = detail::split_topic(pattern);
  return p.size() == 3 && (p[0] == "gh" || p[0] == "*") &&
         (p[1] == "*" || detail::valid_subject(p[1])) &&
         (p[2] == "*" || detail::valid_quantity(p[2]));
}

/// Both arguments are assumed valid.
inline bool topic_matches(std::string_view pattern, std::string_view topic) {
  auto p = detail::split_topic(pattern);
  auto t = detail::split_topic(topic);
  if (p.size() != t.size()) return false;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] != "*" && p[i] != t[i]) return false;
  return true;
}

using Rgb = std::array<double, 3>;
using FrameValue = std::variant<double, std::string, Rgb>;

struct TelemetryFrame {
  std::string topic;
  SimTime sim_time = 0;
  std::string wall_time;
  FrameValue value;
  std::string unit;

  bool operator==(const TelemetryFrame&) const = default;
};

// ---------------------------------------------------------------------------
// wire records: one JSON object per line, keys in fixed order

using Record = nlohmann::ordered_json;

inline Record value_to_json(const FrameValue& v) {
  return std::visit(
      [](const auto& x) -> Record {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Rgb>) return Record::array({x[0], x[1], x[2]});
        else return Record(x);
      },
      v);
}

inline FrameValue value_from_json(const nlohmann::ordered_json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array() && j.size() == 3 && j[0].is_number() && j[1].is_number() && j[2].is_number())
    return Rgb{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  throw ValidationError("frame value must be a number, string or RGB triple");
}

inline Record to_record(const TelemetryFrame& f) {
  Record r;
  r["t"] = "pub";
  r["topic"] = f.topic;
  r["ts"] = f.sim_time;
  r["wall"] = f.wall_time;
  r["v"] = value_to_json(f.value);
  r["u"] = f.unit;
  return r;
}

inline std::string to_line(const Record& r) { return r.dump(); }

inline TelemetryFrame frame_from_record(const nlohmann::ordered_json& r) {
  if (!r.is_object() || r.value("t", "") != "pub") throw ValidationError("not a pub record");
  try {
    TelemetryFrame f;
    f.topic = r.at("topic").get<std::string>();
    f.sim_time = r.at("ts").get<SimTime>();
    f.wall_time = r.value("wall", "");
    f.value = value_from_json(r.at("v"));
    f.unit = r.value("u", "");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed pub record: ") + e.what());
  }
}

inline Record sub_record(std::string_view pattern) {
  Record r;
  r["t"] = "sub";
  r["pattern"] = pattern;
  return r;
}

inline Record command_record(const control::OperatorCommand& c) {
  Record r;
  r["t"] = "cmd";
  r["kind"] = to_string(c.kind);
  r["payload"] = Record::parse(c.payload.dump());
  r["id"] = c.command_id;
  return r;
}

/// Parses a {"t":"cmd",...} record into a validated command.
inline control::OperatorCommand command_from_record(const nlohmann::ordered_json& r) {
  if (!r.is_object() || r.value("t", "") != "cmd") throw ValidationError("not a cmd record");
  if (!r.contains("kind") || !r["kind"].is_string()) throw ValidationError("cmd needs a 'kind'");
  if (!r.contains("id") || !r["id"].is_string()) throw ValidationError("cmd needs an 'id'");
  nlohmann::json payload = r.contains("payload") ? nlohmann::json::parse(r["payload"].dump())
                                                 : nlohmann::json::object();
  return control::make_command(r["kind"].get<std::string>(), std::move(payload),
                               r["id"].get<std::string>());
}

inline Record ack_record(const control::Ack& a) {
  Record r;
  r["t"] = "ack";
  r["id"] = a.command_id;
  r["ok"] = a.ok();
  if (a.status == control::Ack::Status::pending) r["status"] = "pending";
  if (a.status == control::Ack::Status::error) r["error"] = a.error;
  return r;
}

inline Record error_record(std::string_view reason) {
  Record r;
  r["t"] = "err";
  r["reason"] = reason;
  return r;
}

inline Record overflow_record(std::string_view pattern) {
  Record r;
  r["t"] = "overflow";
  r["pattern"] = pattern;
  return r;
}

}  // namespace aerogh::telemetry
