#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "aerogh/telemetry/broker.hpp"

namespace aerogh::telemetry {

class BindError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ListenAddress {
  std::string host = "127.0.0.1";
  int port = 0;
};

/// "host:port", ":port" or "port".
inline ListenAddress parse_listen_address(const std::string& s) {
  ListenAddress a;
  const auto colon = s.rfind(':');
  std::string port = colon == std::string::npos ? s : s.substr(colon + 1);
  if (colon != std::string::npos && colon > 0) a.host = s.substr(0, colon);
  try {
    std::size_t used = 0;
    a.port = std::stoi(port, &used);
    if (used != port.size() || a.port < 0 || a.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw ValidationError("bad listen address '" + s + "'");
  }
  return a;
}

/// Line-oriented TCP endpoint for machine clients. Each line a client sends is
/// one record: "sub" starts a push stream of pub records for a pattern, "pub"
/// publishes a frame, "cmd" submits an operator command and is answered with
/// an ack record. Anything else gets an err record. A subscriber that
/// overflows its buffer receives an overflow record and is disconnected.
class TcpServer {
 public:
  TcpServer(Broker& broker, CommandGateway& gateway) : broker_(broker), gateway_(gateway) {}
  ~TcpServer() { stop(); }

  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  /// Binds and starts accepting; returns the bound port (useful with port 0).
  int start(const ListenAddress& addr) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw BindError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(addr.port));
    if (::inet_pton(AF_INET, addr.host == "localhost" ? "127.0.0.1" : addr.host.c_str(), &sa.sin_addr) != 1) {
      close_listener();
      throw BindError("cannot parse host '" + addr.host + "'");
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0 || ::listen(listen_fd_, 16) < 0) {
      const std::string err = std::strerror(errno);
      close_listener();
      throw BindError("cannot listen on " + addr.host + ":" + std::to_string(addr.port) + ": " + err);
    }
    socklen_t len = sizeof sa;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
    port_ = ntohs(sa.sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
    return port_;
  }

  int port() const { return port_; }

  /// Live client connections; closed ones are reaped by the accept loop.
  std::size_t connection_count() {
    std::lock_guard lock(conns_mu_);
    return conns_.size();
  }

  void stop() {
    if (!running_.exchange(false)) return;
    close_listener();
    if (acceptor_.joinable()) acceptor_.join();
    std::list<std::shared_ptr<Connection>> conns;
    {
      std::lock_guard lock(conns_mu_);
      conns.swap(conns_);
    }
    for (auto& c : conns) c->shutdown();
    for (auto& c : conns) c->join();
  }

 private:
  struct Connection {
    int fd;
    std::mutex write_mu;
    std::atomic<bool> open{true};
    std::thread reader;
    std::vector<std::thread> pushers;
    std::vector<std::shared_ptr<Subscription>> subs;
    std::mutex subs_mu;

    explicit Connection(int f) : fd(f) {}

    bool write_line(const std::string& line) {
      std::lock_guard lock(write_mu);
      if (!open) return false;
      std::string buf = line + "\n";
      const char* p = buf.data();
      std::size_t left = buf.size();
      while (left > 0) {
        const auto n = ::send(fd, p, left, MSG_NOSIGNAL);
        if (n <= 0) {
          if (n < 0 && errno == EINTR) continue;
          open = false;
          return false;
        }
        p += n;
        left -= static_cast<std::size_t>(n);
      }
      return true;
    }

    void shutdown() {
      open = false;
      ::shutdown(fd, SHUT_RDWR);
      std::lock_guard lock(subs_mu);
      for (auto& s : subs) s->close();
    }

    void join() {
      if (reader.joinable()) reader.join();
      std::vector<std::thread> ps;
      {
        std::lock_guard lock(subs_mu);
        ps.swap(pushers);
      }
      for (auto& t : ps)
        if (t.joinable()) t.join();
      ::close(fd);
    }
  };

  void close_listener() {
    if (listen_fd_ >= 0) {
      ::shutdown(listen_fd_, SHUT_RDWR);
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
  }

  // joins connections whose peer has gone; their threads exit within one poll tick
  void reap() {
    std::list<std::shared_ptr<Connection>> dead;
    {
      std::lock_guard lock(conns_mu_);
      for (auto it = conns_.begin(); it != conns_.end();) {
        if (!(*it)->open) {
          dead.push_back(*it);
          it = conns_.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& c : dead) c->join();
  }

  void accept_loop() {
    while (running_) {
      reap();
      pollfd pfd{listen_fd_, POLLIN, 0};
      if (::poll(&pfd, 1, 100) <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      auto conn = std::make_shared<Connection>(fd);
      {
        std::lock_guard lock(conns_mu_);
        if (!running_) {
          ::close(fd);
          return;
        }
        conns_.push_back(conn);
      }
      conn->reader = std::thread([this, conn] { read_loop(conn); });
    }
  }

  void read_loop(const std::shared_ptr<Connection>& conn) {
    std::string buf;
    char chunk[4096];
    while (conn->open) {
      pollfd pfd{conn->fd, POLLIN, 0};
      const int r = ::poll(&pfd, 1, 100);
      if (r == 0) continue;
      if (r < 0 && errno == EINTR) continue;
      const auto n = r < 0 ? -1 : ::recv(conn->fd, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) handle_line(conn, line);
      }
    }
    conn->shutdown();
  }

  void handle_line(const std::shared_ptr<Connection>& conn, const std::string& line) {
    nlohmann::ordered_json rec;
    try {
      rec = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception&) {
      conn->write_line(to_line(error_record("malformed record")));
      return;
    }
    const std::string type = rec.is_object() && rec.contains("t") && rec["t"].is_string() ? rec["t"].get<std::string>() : "";
    try {
      if (type == "sub") {
        const auto pattern = rec.at("pattern").get<std::string>();
        auto sub = broker_.subscribe(pattern);
        std::lock_guard lock(conn->subs_mu);
        conn->subs.push_back(sub);
        conn->pushers.emplace_back([conn, sub] { push_loop(conn, sub); });
      } else if (type == "pub") {
        broker_.publish(frame_from_record(rec));
      } else if (type == "cmd") {
        conn->write_line(to_line(ack_record(gateway_.submit_record(rec))));
      } else {
        conn->write_line(to_line(error_record("unknown record type '" + type + "'")));
      }
    } catch (const ValidationError& e) {
      conn->write_line(to_line(error_record(e.what())));
    } catch (const nlohmann::json::exception& e) {
      conn->write_line(to_line(error_record(std::string("malformed record: ") + e.what())));
    }
  }

  static void push_loop(const std::shared_ptr<Connection>& conn, const std::shared_ptr<Subscription>& sub) {
    while (conn->open) {
      auto f = sub->next(std::chrono::milliseconds(100));
      if (f) {
        if (!conn->write_line(to_line(to_record(*f)))) break;
        continue;
      }
      if (sub->closed()) {
        if (sub->overflowed()) {
          conn->write_line(to_line(overflow_record(sub->pattern())));
          conn->shutdown();
        }
        break;
      }
    }
    sub->close();
  }

  Broker& broker_;
  CommandGateway& gateway_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex conns_mu_;
  std::list<std::shared_ptr<Connection>> conns_;
};

}  // namespace aerogh::telemetry
