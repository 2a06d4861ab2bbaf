#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
// <resolv.h>, pulled in by httplib, defines _res, which clashes with
// identifiers in Eigen's product kernels.
#ifdef _res
#undef _res
#endif

#include "aerogh/telemetry/broker.hpp"
#include "aerogh/telemetry/tcp_server.hpp"

namespace aerogh::telemetry {

/// HTTP facade over the broker for the dashboard.
///
///   GET  /api/state                        retained frames (array of pub records)
///   GET  /api/history?topic=&from=&to=     logged frames for one topic, ascending
///   GET  /api/stream?pattern=              server-sent events, one pub record per event
///   POST /api/command                      cmd record in, ack record out
///   GET  /api/ack?id=                      ack of an earlier (possibly pending) command
///
/// 400 for validation failures, 404 for unknown routes or ack ids, 504 when a
/// command is still pending after the gateway timeout.
class HttpServer {
 public:
  HttpServer(Broker& broker, CommandGateway& gateway) : broker_(broker), gateway_(gateway) { routes(); }
  ~HttpServer() { stop(); }

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  int start(const ListenAddress& addr) {
    const std::string host = addr.host == "localhost" ? "127.0.0.1" : addr.host;
    if (addr.port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ <= 0) throw BindError("cannot bind HTTP on " + host);
    } else {
      if (!server_.bind_to_port(host, addr.port))
        throw BindError("cannot listen on " + host + ":" + std::to_string(addr.port));
      port_ = addr.port;
    }
    running_ = true;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  int port() const { return port_; }

  void stop() {
    if (!running_.exchange(false)) return;
    stopping_ = true;
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  static void json_reply(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void routes() {
    // httplib's default adds SO_REUSEPORT, which lets a second server share the
    // port silently instead of failing to bind
    server_.set_socket_options([](socket_t sock) {
      int one = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    });
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    server_.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& f : broker_.retained()) arr.push_back(to_record(f));
      json_reply(res, 200, arr);
    });

    server_.Get("/api/history", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        if (!req.has_param("topic")) throw ValidationError("missing 'topic'");
        const auto topic = req.get_param_value("topic");
        if (!valid_topic(topic)) throw ValidationError("malformed topic '" + topic + "'");
        const SimTime from = req.has_param("from") ? parse_time(req.get_param_value("from")) : 0;
        const SimTime to = req.has_param("to") ? parse_time(req.get_param_value("to"))
                                               : std::numeric_limits<SimTime>::max();
        auto arr = nlohmann::ordered_json::array();
        for (const auto& f : broker_.history(topic, from, to)) arr.push_back(to_record(f));
        json_reply(res, 200, arr);
      } catch (const ValidationError& e) {
        json_reply(res, 400, error_record(e.what()));
      }
    });

    server_.Get("/api/stream", [this](const httplib::Request& req, httplib::Response& res) {
      const auto pattern = req.has_param("pattern") ? req.get_param_value("pattern") : "gh/*/*";
      std::shared_ptr<Subscription> sub;
      try {
        sub = broker_.subscribe(pattern);
      } catch (const ValidationError& e) {
        json_reply(res, 400, error_record(e.what()));
        return;
      }
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [this, sub](std::size_t, httplib::DataSink& sink) {
            while (!stopping_) {
              if (auto f = sub->next(std::chrono::milliseconds(200))) {
                const auto ev = "data: " + to_line(to_record(*f)) + "\n\n";
                return sink.write(ev.data(), ev.size());
              }
              if (sub->closed()) {
                if (sub->overflowed()) {
                  const auto ev = "data: " + to_line(overflow_record(sub->pattern())) + "\n\n";
                  sink.write(ev.data(), ev.size());
                }
                sink.done();
                return true;
              }
              if (!sink.is_writable()) return false;
            }
            sink.done();
            return true;
          },
          [this, sub](bool) { broker_.unsubscribe(sub); });
    });

    server_.Post("/api/command", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::ordered_json rec;
      try {
        rec = nlohmann::ordered_json::parse(req.body);
      } catch (const nlohmann::json::exception&) {
        json_reply(res, 400, error_record("body is not a JSON record"));
        return;
      }
      const auto ack = gateway_.submit_record(rec);
      const int status = ack.status == control::Ack::Status::ok        ? 200
                         : ack.status == control::Ack::Status::pending ? 504
                                                                      : 400;
      json_reply(res, status, ack_record(ack));
    });

    server_.Get("/api/ack", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.get_param_value("id");
      if (auto ack = gateway_.acks().find(id)) {
        json_reply(res, 200, ack_record(*ack));
      } else {
        json_reply(res, 404, error_record("no ack for '" + id + "'"));
      }
    });

    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(error_record(res.status == 404 ? "no such route" : "request failed").dump(),
                        "application/json");
      }
    });
  }

  static SimTime parse_time(const std::string& s) {
    try {
      std::size_t used = 0;
      const auto v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("bad time '" + s + "'");
    }
  }

  Broker& broker_;
  CommandGateway& gateway_;
  httplib::Server server_;
  std::thread thread_;
  std::atomic<bool> running_{false};
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

}  // namespace aerogh::telemetry
