#pragma once

#include <atomic>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <json.hpp>

#include "simura/actions.hpp"
#include "simura/environment.hpp"
#include "simura/errors.hpp"

// Remote environment protocol: one JSON object per line over TCP.
//   -> {"op":"reset","goal":{...},"v":1}
//   -> {"op":"step","action":"click('42')","v":1}
//   <- {"observation":{...},"terminated":false,"env_error":null}
// A response with an "error" field aborts the episode on the client side.

namespace simura {

namespace detail {

inline bool send_all(int fd, const std::string& data) {
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) return false;
    off += static_cast<size_t>(n);
  }
  return true;
}

inline bool recv_line(int fd, std::string& buffer, std::string& line) {
  while (true) {
    size_t nl = buffer.find('\n');
    if (nl != std::string::npos) {
      line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      return true;
    }
    char chunk[4096];
    ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) return false;
    buffer.append(chunk, static_cast<size_t>(n));
  }
}

}  // namespace detail

inline constexpr int kDriverProtocolVersion = 1;

class DriverClient : public Environment {
 public:
  DriverClient(std::string host, int port) : host_(std::move(host)), port_(port) {}

  DriverClient(const DriverClient&) = delete;
  DriverClient& operator=(const DriverClient&) = delete;

  ~DriverClient() override {
    if (fd_ >= 0) ::close(fd_);
  }

  Observation reset(const GoalSpec& goal) override {
    nlohmann::json req{{"op", "reset"}, {"goal", goal}, {"v", kDriverProtocolVersion}};
    return parse_step(roundtrip(req)).observation;
  }

  StepResult step(const ConcreteAction& action) override {
    nlohmann::json req{
        {"op", "step"}, {"action", render_action(action)}, {"v", kDriverProtocolVersion}};
    return parse_step(roundtrip(req));
  }

 private:
  std::string host_;
  int port_;
  int fd_ = -1;
  std::string buffer_;
  std::mutex mutex_;

  void ensure_connected() {
    if (fd_ >= 0) return;
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* results = nullptr;
    int rc = ::getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints, &results);
    if (rc != 0 || !results) {
      fail(ErrorKind::DriverUnavailable,
           "cannot resolve driver at " + host_ + ":" + std::to_string(port_));
    }
    int fd = -1;
    for (addrinfo* ai = results; ai; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(results);
    if (fd < 0) {
      fail(ErrorKind::DriverUnavailable,
           "cannot connect to driver at " + host_ + ":" + std::to_string(port_));
    }
    fd_ = fd;
  }

  nlohmann::json roundtrip(const nlohmann::json& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    ensure_connected();
    if (!detail::send_all(fd_, request.dump() + "\n")) {
      fail(ErrorKind::ProtocolError, "driver connection lost while sending");
    }
    std::string line;
    if (!detail::recv_line(fd_, buffer_, line)) {
      fail(ErrorKind::ProtocolError, "driver closed the connection mid-request");
    }
    nlohmann::json reply = nlohmann::json::parse(line, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) {
      fail(ErrorKind::ProtocolError, "driver sent a non-JSON response");
    }
    if (reply.contains("error")) {
      fail(ErrorKind::ProtocolError, "driver error: " + reply["error"].get<std::string>());
    }
    return reply;
  }

  static StepResult parse_step(const nlohmann::json& reply) {
    StepResult r;
    try {
      r.observation = reply.at("observation").get<Observation>();
      r.terminated = reply.at("terminated").get<bool>();
      if (reply.contains("env_error") && !reply["env_error"].is_null()) {
        r.env_error = reply["env_error"].get<EnvError>();
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::ProtocolError, std::string("malformed driver response: ") + e.what());
    }
    return r;
  }
};

// Serves a local Environment over the wire protocol. One connection at a time;
// used by tests and by `simura serve-env` so both ends stay honest.
class DriverServer {
 public:
  explicit DriverServer(Environment& env) : env_(env) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) fail(ErrorKind::DriverUnavailable, "cannot create listening socket");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;  // ephemeral
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listen_fd_, 4) != 0) {
      ::close(listen_fd_);
      fail(ErrorKind::DriverUnavailable, "cannot bind driver server on loopback");
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  DriverServer(const DriverServer&) = delete;
  DriverServer& operator=(const DriverServer&) = delete;

  ~DriverServer() { stop(); }

  int port() const { return port_; }

  void start() {
    running_ = true;
    thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) {
      if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
      }
      return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    int conn = conn_fd_.exchange(-1);
    if (conn >= 0) ::shutdown(conn, SHUT_RDWR);
    if (thread_.joinable()) thread_.join();
    ::close(listen_fd_);
    listen_fd_ = -1;
  }

 private:
  Environment& env_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::thread thread_;
  std::atomic<bool> running_{false};
  std::atomic<int> conn_fd_{-1};

  void accept_loop() {
    while (running_) {
      int conn = ::accept(listen_fd_, nullptr, nullptr);
      if (conn < 0) break;
      conn_fd_ = conn;
      serve(conn);
      int held = conn_fd_.exchange(-1);
      if (held >= 0) ::close(held);
    }
  }

  void serve(int conn) {
    std::string buffer;
    std::string line;
    while (running_ && detail::recv_line(conn, buffer, line)) {
      nlohmann::json reply = handle(line);
      if (!detail::send_all(conn, reply.dump() + "\n")) break;
    }
  }

  nlohmann::json handle(const std::string& line) {
    nlohmann::json req = nlohmann::json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object()) {
      return {{"error", "request is not a JSON object"}};
    }
    if (req.value("v", 0) != kDriverProtocolVersion) {
      return {{"error", "unsupported protocol version"}};
    }
    try {
      std::string op = req.value("op", "");
      if (op == "reset") {
        GoalSpec goal = req.at("goal").get<GoalSpec>();
        Observation obs = env_.reset(goal);
        return {{"observation", obs}, {"terminated", false}, {"env_error", nullptr}};
      }
      if (op == "step") {
        ConcreteAction action = parse_action(req.at("action").get<std::string>());
        StepResult r = env_.step(action);
        nlohmann::json reply{{"observation", r.observation}, {"terminated", r.terminated}};
        reply["env_error"] = r.env_error ? nlohmann::json(*r.env_error) : nlohmann::json(nullptr);
        return reply;
      }
      return {{"error", "unknown op '" + op + "'"}};
    } catch (const std::exception& e) {
      return {{"error", e.what()}};
    }
  }
};

}  // namespace simura
