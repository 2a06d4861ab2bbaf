#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "aerogh/control/commands.hpp"
#include "aerogh/telemetry/frame.hpp"

namespace aerogh::telemetry {

inline constexpr std::size_t kDefaultSubscriberBuffer = 1024;

/// Bounded per-subscriber delivery queue. A subscriber that falls more than
/// `capacity` frames behind is cut off and marked overflowed.
class Subscription {
 public:
  Subscription(std::string pattern, std::size_t capacity)
      : pattern_(std::move(pattern)), capacity_(capacity) {}

  const std::string& pattern() const { return pattern_; }

  /// Waits up to `timeout` for the next frame. Returns nullopt on timeout or
  /// once the subscription is closed and drained.
  std::optional<TelemetryFrame> next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    auto f = std::move(queue_.front());
    queue_.pop_front();
    return f;
  }

  std::vector<TelemetryFrame> drain() {
    std::lock_guard lock(mu_);
    std::vector<TelemetryFrame> out(queue_.begin(), queue_.end());
    queue_.clear();
    return out;
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }
  bool overflowed() const {
    std::lock_guard lock(mu_);
    return overflowed_;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  friend class Broker;

  // false once the subscriber must be dropped
  bool offer(const TelemetryFrame& f) {
    bool keep = true;
    {
      std::lock_guard lock(mu_);
      if (closed_) return false;
      if (queue_.size() >= capacity_) {
        overflowed_ = true;
        closed_ = true;
        keep = false;
      } else {
        queue_.push_back(f);
      }
    }
    cv_.notify_all();
    return keep;
  }

  std::string pattern_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<TelemetryFrame> queue_;
  bool closed_ = false;
  bool overflowed_ = false;
};

/// Topic broker with retained last values, wildcard fan-out and per-topic
/// history. All publishes pass through one lock, which fixes a single global
/// order seen identically by the log sink and every subscriber.
class Broker {
 public:
  using Sink = std::function<void(const TelemetryFrame&)>;

  /// With `keep_history` false, history() only sees retained frames; batch
  /// runs that read history from the datalog use this to bound memory.
  explicit Broker(std::size_t subscriber_buffer = kDefaultSubscriberBuffer, bool keep_history = true)
      : buffer_(subscriber_buffer), keep_history_(keep_history) {}

  /// Called under the publish lock for every accepted frame.
  void set_sink(Sink sink) {
    std::lock_guard lock(mu_);
    sink_ = std::move(sink);
  }

  void publish(const TelemetryFrame& f) {
    if (!valid_topic(f.topic)) {
      rejected_.fetch_add(1);
      throw ValidationError("malformed topic '" + f.topic + "'");
    }
    std::lock_guard lock(mu_);
    auto [it, inserted] = retained_.try_emplace(f.topic, f);
    if (!inserted && f.sim_time >= it->second.sim_time) it->second = f;
    if (keep_history_) history_[f.topic].push_back(f);
    if (sink_) sink_(f);
    std::erase_if(subs_, [&](const std::shared_ptr<Subscription>& s) {
      if (!topic_matches(s->pattern(), f.topic)) return s->closed();
      return !s->offer(f);
    });
    published_ += 1;
  }

  /// Registers a subscriber; matching retained frames are queued first, then
  /// live frames follow in publish order.
  std::shared_ptr<Subscription> subscribe(const std::string& pattern,
                                          std::optional<std::size_t> capacity = std::nullopt) {
    if (!valid_pattern(pattern)) throw ValidationError("invalid pattern '" + pattern + "'");
    auto sub = std::make_shared<Subscription>(pattern, capacity.value_or(buffer_));
    std::lock_guard lock(mu_);
    for (const auto& [topic, frame] : retained_)
      if (topic_matches(pattern, topic)) sub->offer(frame);
    subs_.push_back(sub);
    return sub;
  }

  void unsubscribe(const std::shared_ptr<Subscription>& sub) {
    sub->close();
    std::lock_guard lock(mu_);
    std::erase(subs_, sub);
  }

  std::vector<TelemetryFrame> retained() const {
    std::lock_guard lock(mu_);
    std::vector<TelemetryFrame> out;
    for (const auto& [_, f] : retained_) out.push_back(f);
    return out;
  }

  std::optional<TelemetryFrame> retained(const std::string& topic) const {
    std::lock_guard lock(mu_);
    auto it = retained_.find(topic);
    if (it == retained_.end()) return std::nullopt;
    return it->second;
  }

  /// Every frame published on `topic` with from <= sim_time <= to, ascending.
  std::vector<TelemetryFrame> history(const std::string& topic, SimTime from, SimTime to) const {
    if (from > to) throw ValidationError("history range has from > to");
    std::vector<TelemetryFrame> out;
    std::lock_guard lock(mu_);
    if (!keep_history_) {
      auto r = retained_.find(topic);
      if (r != retained_.end() && r->second.sim_time >= from && r->second.sim_time <= to) out.push_back(r->second);
      return out;
    }
    auto it = history_.find(topic);
    if (it == history_.end()) return out;
    for (const auto& f : it->second)
      if (f.sim_time >= from && f.sim_time <= to) out.push_back(f);
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.sim_time < b.sim_time; });
    return out;
  }

  std::uint64_t rejected_frames() const { return rejected_.load(); }
  std::uint64_t published_frames() const {
    std::lock_guard lock(mu_);
    return published_;
  }
  std::size_t subscriber_count() const {
    std::lock_guard lock(mu_);
    return subs_.size();
  }

  /// Closes every subscriber; used on shutdown.
  void close_all() {
    std::lock_guard lock(mu_);
    for (auto& s : subs_) s->close();
    subs_.clear();
  }

 private:
  std::size_t buffer_;
  bool keep_history_;
  mutable std::mutex mu_;
  Sink sink_;
  std::map<std::string, TelemetryFrame> retained_;
  std::map<std::string, std::vector<TelemetryFrame>> history_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  std::atomic<std::uint64_t> rejected_{0};
  std::uint64_t published_ = 0;
};

/// Validates operator commands, hands them to the control loop and waits for
/// the acknowledgment.
class CommandGateway {
 public:
  explicit CommandGateway(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000))
      : timeout_(timeout) {}

  control::CommandQueue& queue() { return queue_; }
  control::AckRegistry& acks() { return acks_; }

  /// Synchronous from the caller's view: returns the controller's ack, or a
  /// pending ack when the control loop does not answer within the timeout.
  control::Ack submit(control::OperatorCommand cmd) {
    const auto id = cmd.command_id;
    auto fut = queue_.push(std::move(cmd));
    if (fut.wait_for(timeout_) != std::future_status::ready) return control::Ack::pending(id);
    return fut.get();
  }

  /// Parses and validates a cmd record; validation failures never reach the queue.
  control::Ack submit_record(const nlohmann::ordered_json& record) {
    std::string id = record.is_object() && record.contains("id") && record["id"].is_string()
                         ? record["id"].get<std::string>()
                         : "";
    try {
      return submit(command_from_record(record));
    } catch (const ValidationError& e) {
      return control::Ack::failure(id, e.what());
    }
  }

 private:
  std::chrono::milliseconds timeout_;
  control::CommandQueue queue_;
  control::AckRegistry acks_;
};

}  // namespace aerogh::telemetry
