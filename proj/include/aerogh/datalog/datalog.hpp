#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aerogh/common.hpp"
#include "aerogh/sim/greenhouse.hpp"
#include "aerogh/telemetry/frame.hpp"

namespace aerogh::datalog {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

enum class RecordKind { reading, actuation, alert, command, energy, event };

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::reading: return "reading";
    case RecordKind::actuation: return "actuation";
    case RecordKind::alert: return "alert";
    case RecordKind::command: return "command";
    case RecordKind::energy: return "energy";
    case RecordKind::event: return "event";
  }
  return "?";
}

inline RecordKind record_kind_from_string(std::string_view s) {
  for (auto k : {RecordKind::reading, RecordKind::actuation, RecordKind::alert,
                 RecordKind::command, RecordKind::energy, RecordKind::event})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown record kind '" + std::string(s) + "'");
}

struct LogRecord {
  std::uint64_t seq = 0;
  SimTime sim_time = 0;
  RecordKind kind = RecordKind::event;
  Json body;

  bool operator==(const LogRecord& o) const {
    return seq == o.seq && sim_time == o.sim_time && kind == o.kind && body == o.body;
  }
};

inline std::string to_line(const LogRecord& r) {
  Json j;
  j["seq"] = r.seq;
  j["ts"] = r.sim_time;
  j["kind"] = to_string(r.kind);
  j["body"] = r.body;
  return j.dump();
}

inline LogRecord record_from_line(std::string_view line) {
  Json j = Json::parse(line);  // throws on malformed text
  LogRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.sim_time = j.at("ts").get<SimTime>();
  r.kind = record_kind_from_string(j.at("kind").get<std::string>());
  r.body = j.at("body");
  return r;
}

/// Actuator quantities are logged as actuation records, alerts as alert
/// records, everything else published on the broker as readings.
inline RecordKind kind_for_topic(std::string_view topic) {
  if (topic.starts_with("gh/alert/")) return RecordKind::alert;
  if (topic.starts_with("gh/config/")) return RecordKind::event;
  for (std::string_view q : {"/heater", "/fan", "/humidifier", "/led", "/uv", "/supply_pump",
                             "/return_pump"})
    if (topic.ends_with(q)) return RecordKind::actuation;
  return RecordKind::reading;
}

inline std::string day_file_name(std::int64_t day) {
  return "ghlog-" + std::to_string(day) + ".ndjson";
}

class DatalogIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Single-writer append-only log, one file per simulated day.
class DatalogWriter {
 public:
  /// `flush_every` bounds how many records may sit in the stream buffer.
  explicit DatalogWriter(fs::path dir, std::size_t flush_every = 1)
      : dir_(std::move(dir)), flush_every_(std::max<std::size_t>(flush_every, 1)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DatalogIoError("cannot create log directory " + dir_.string() + ": " + ec.message());
    for (const auto& entry : fs::directory_iterator(dir_))
      if (entry.path().filename().string().starts_with("ghlog-"))
        throw DatalogIoError(dir_.string() + " already holds a log; refusing to append");
  }

  DatalogWriter(const DatalogWriter&) = delete;
  DatalogWriter& operator=(const DatalogWriter&) = delete;
  ~DatalogWriter() { close(); }

  /// Thread-safe. Files never move backwards in time: a record stamped
  /// earlier than the current day file goes into the current file.
  std::uint64_t append(RecordKind kind, SimTime t, Json body) {
    std::lock_guard lock(mu_);
    LogRecord r{next_seq_, t, kind, std::move(body)};
    open_day(std::max(day_, t / kSecondsPerDay));
    out_ << to_line(r) << '\n';
    if (++unflushed_ >= flush_every_) flush_locked();
    if (!out_) throw DatalogIoError("write failed on " + current_path().string());
    return next_seq_++;
  }

  std::uint64_t append_frame(const telemetry::TelemetryFrame& f) {
    return append(kind_for_topic(f.topic), f.sim_time, telemetry::to_record(f));
  }

  void flush() {
    std::lock_guard lock(mu_);
    flush_locked();
  }

  void close() {
    std::lock_guard lock(mu_);
    close_locked();
  }

  std::uint64_t next_seq() const {
    std::lock_guard lock(mu_);
    return next_seq_;
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path current_path() const { return dir_ / day_file_name(day_); }

  void flush_locked() {
    if (out_.is_open()) out_.flush();
    unflushed_ = 0;
  }

  void close_locked() {
    if (out_.is_open()) {
      out_.flush();
      out_.close();
    }
  }

  void open_day(std::int64_t day) {
    if (out_.is_open() && day == day_) return;
    close_locked();
    day_ = day;
    out_.open(current_path(), std::ios::binary | std::ios::app);
    if (!out_) throw DatalogIoError("cannot open " + current_path().string());
  }

  mutable std::mutex mu_;
  fs::path dir_;
  std::size_t flush_every_;
  std::size_t unflushed_ = 0;
  std::ofstream out_;
  std::int64_t day_ = -1;
  std::uint64_t next_seq_ = 0;
};

class ReplayError : public std::runtime_error {
 public:
  ReplayError(const std::string& what, std::optional<std::uint64_t> last_good)
      : std::runtime_error(what), last_good_seq(last_good) {}
  std::optional<std::uint64_t> last_good_seq;
};

struct ReplayResult {
  std::vector<LogRecord> records;
  std::vector<std::string> warnings;
};

namespace detail {

// With `any_start`, the first record may carry any seq (a lone day file).
inline void replay_text(const std::string& text, const std::string& name, ReplayResult& out,
                        bool is_last_file, bool any_start = false) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto last_good = out.records.empty() ? std::nullopt
                                               : std::optional(out.records.back().seq);
    if (nl == std::string::npos) {
      // no terminating newline: a record cut short by a crash
      if (!is_last_file) throw ReplayError(name + ": truncated record before end of log", last_good);
      out.warnings.push_back(name + ": dropped partial trailing record");
      return;
    }
    std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    LogRecord r;
    try {
      r = record_from_line(line);
    } catch (const std::exception& e) {
      throw ReplayError(name + ": corrupt record: " + e.what(), last_good);
    }
    const std::uint64_t expected = last_good ? *last_good + 1 : 0;
    if (r.seq != expected && !(any_start && !last_good))
      throw ReplayError(name + ": sequence gap, expected " + std::to_string(expected) + " got " +
                            std::to_string(r.seq),
                        last_good);
    out.records.push_back(std::move(r));
  }
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DatalogIoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Day files of a log directory in day order.
inline std::vector<fs::path> log_files(const fs::path& dir) {
  static const std::regex pattern(R"(ghlog-(\d+)\.ndjson)");
  std::vector<std::pair<std::int64_t, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern))
      found.emplace_back(std::stoll(m[1].str()), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [_, p] : found) out.push_back(p);
  return out;
}

/// Reads a whole log directory (seq from 0) or a single day file (seq from
/// wherever that day starts) in seq order.
inline ReplayResult replay(const fs::path& path) {
  ReplayResult out;
  const bool dir = fs::is_directory(path);
  std::vector<fs::path> files = dir ? log_files(path) : std::vector{path};
  for (std::size_t i = 0; i < files.size(); ++i)
    detail::replay_text(detail::read_file(files[i]), files[i].filename().string(), out,
                        i + 1 == files.size(), !dir);
  return out;
}

// ---------------------------------------------------------------------------
// energy

inline Json energy_snapshot_body(const sim::GreenhouseState& s, const sim::SimConfig& cfg) {
  Json body;
  body["t"] = "energy";
  body["total_j"] = s.energy_total_joules();
  Json per = Json::object();
  const auto names = sim::device_names(cfg);
  for (std::size_t i = 0; i < names.size(); ++i) per[names[i]] = s.energy_joules[i];
  body["j"] = per;
  return body;
}

struct EnergyReport {
  SimTime from = 0;
  SimTime to = 0;
  std::map<std::string, double> kwh_by_device;
  double total_kwh = 0.0;
  std::optional<std::string> notice;  // set when the range was clamped
};

/// Energy used per device between `from` and `to`, interpolating linearly
/// between the bracketing snapshots.
inline EnergyReport energy_report(const std::vector<LogRecord>& records, SimTime from, SimTime to) {
  if (from > to) throw ValidationError("energy_report range has from > to");
  std::vector<const LogRecord*> snaps;
  for (const auto& r : records)
    if (r.kind == RecordKind::energy && r.body.value("t", "") == "energy") snaps.push_back(&r);

  EnergyReport rep;
  rep.from = from;
  rep.to = to;
  if (snaps.empty()) {
    rep.notice = "log holds no energy snapshots";
    return rep;
  }
  const SimTime lo = snaps.front()->sim_time;
  const SimTime hi = snaps.back()->sim_time;
  if (from < lo || to > hi) {
    rep.from = std::clamp(from, lo, hi);
    rep.to = std::clamp(to, lo, hi);
    rep.notice = "range clamped to log extent [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
  }

  // joules of `device` accumulated by time t
  auto joules_at = [&](const std::string& device, SimTime t) -> double {
    auto it = std::lower_bound(snaps.begin(), snaps.end(), t,
                               [](const LogRecord* r, SimTime v) { return r->sim_time < v; });
    const LogRecord* after = *it;
    const double j1 = after->body["j"].value(device, 0.0);
    if (after->sim_time == t || it == snaps.begin()) return j1;
    const LogRecord* before = *(it - 1);
    const double j0 = before->body["j"].value(device, 0.0);
    const double w = static_cast<double>(t - before->sim_time) /
                     static_cast<double>(after->sim_time - before->sim_time);
    return j0 + w * (j1 - j0);
  };

  double total_j = 0.0;
  for (const auto& item : snaps.back()->body["j"].items()) {
    const double dj = joules_at(item.key(), rep.to) - joules_at(item.key(), rep.from);
    rep.kwh_by_device[item.key()] = dj / sim::kJoulesPerKwh;
    total_j += dj;
  }
  rep.total_kwh = total_j / sim::kJoulesPerKwh;
  return rep;
}

}  // namespace aerogh::datalog
