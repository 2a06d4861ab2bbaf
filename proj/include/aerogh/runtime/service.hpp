#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "aerogh/runtime/closed_loop.hpp"
#include "aerogh/runtime/manifest.hpp"
#include "aerogh/telemetry/http_server.hpp"
#include "aerogh/telemetry/tcp_server.hpp"

namespace aerogh::runtime {

struct ServeOptions {
  std::optional<telemetry::ListenAddress> tcp;
  std::optional<telemetry::ListenAddress> http;
  std::chrono::milliseconds command_timeout{2000};
};

/// Live deployment: the closed loop paced at `acceleration` simulated seconds
/// per wall second, with the TCP and HTTP endpoints attached to its broker.
/// The loop stops at the manifest duration; the endpoints keep serving
/// retained values and history until stop().
class Service {
 public:
  Service(const RunManifest& m, ServeOptions opts)
      : manifest_(m),
        opts_(opts),
        gateway_(opts.command_timeout),
        log_(m.output_dir, 256) {
    LoopOptions lo;
    lo.sim = m.config;
    loop_ = std::make_unique<ClosedLoop>(lo, broker_, log_, &gateway_.queue(), &gateway_.acks());
  }

  ~Service() { stop(); }

  /// Binds the endpoints (throws telemetry::BindError) and starts the loop.
  void start() {
    if (opts_.tcp) {
      tcp_ = std::make_unique<telemetry::TcpServer>(broker_, gateway_);
      tcp_port_ = tcp_->start(*opts_.tcp);
    }
    if (opts_.http) {
      http_ = std::make_unique<telemetry::HttpServer>(broker_, gateway_);
      try {
        http_port_ = http_->start(*opts_.http);
      } catch (...) {
        if (tcp_) tcp_->stop();
        throw;
      }
    }
    runner_ = std::thread([this] { run(); });
  }

  int tcp_port() const { return tcp_port_; }
  int http_port() const { return http_port_; }
  telemetry::Broker& broker() { return broker_; }

  bool loop_finished() const { return loop_done_; }

  /// Stops the loop, flushes the datalog and closes every endpoint.
  void stop() {
    if (stopped_.exchange(true)) return;
    {
      std::lock_guard lock(mu_);
      stop_requested_ = true;
    }
    cv_.notify_all();
    if (runner_.joinable()) runner_.join();
    gateway_.queue().abandon("service stopped");
    broker_.close_all();
    if (http_) http_->stop();
    if (tcp_) tcp_->stop();
    log_.close();
  }

  RunSummary summary() const { return summary_; }

 private:
  void run() {
    using clock = std::chrono::steady_clock;
    const auto tick = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(static_cast<double>(manifest_.config.timestep) / manifest_.acceleration));
    auto next = clock::now();
    std::unique_lock lock(mu_);
    while (!stop_requested_ && loop_->state().sim_time < manifest_.duration) {
      lock.unlock();
      loop_->tick();
      lock.lock();
      next += tick;
      cv_.wait_until(lock, next, [&] { return stop_requested_; });
    }
    lock.unlock();
    summary_ = loop_->finish();
    loop_done_ = true;
  }

  RunManifest manifest_;
  ServeOptions opts_;
  telemetry::Broker broker_;
  telemetry::CommandGateway gateway_;
  datalog::DatalogWriter log_;
  std::unique_ptr<ClosedLoop> loop_;
  std::unique_ptr<telemetry::TcpServer> tcp_;
  std::unique_ptr<telemetry::HttpServer> http_;
  int tcp_port_ = 0;
  int http_port_ = 0;
  std::thread runner_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_requested_ = false;
  std::atomic<bool> loop_done_{false};
  std::atomic<bool> stopped_{false};
  RunSummary summary_;
};

}  // namespace aerogh::runtime
