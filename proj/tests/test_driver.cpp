#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "simura/driver.hpp"
#include "support/matchers.hpp"

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

using namespace simura;
using nlohmann::json;

namespace {

const GoalSpec kGoal{"find the cheapest nonstop flight from SFO to JFK",
                     "2025-03-01 09:00:00"};

SiteGraph flight_graph() { return load_site_graph_file(std::string(SIMURA_FIXTURE_DIR) + "/flight_site.json"); }
SiteGraph crash_graph() { return load_site_graph_file(std::string(SIMURA_FIXTURE_DIR) + "/crash_site.json"); }

// Bare-bones scripted TCP peer for protocol-violation tests.
struct RawServer {
  int listen_fd = -1;
  int port = 0;
  std::thread thread;

  explicit RawServer(std::vector<std::string> replies) {
    listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(listen_fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(::listen(listen_fd, 1) == 0);
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port = ntohs(addr.sin_port);
    thread = std::thread([this, replies = std::move(replies)] {
      int conn = ::accept(listen_fd, nullptr, nullptr);
      if (conn < 0) return;
      std::string buffer, line;
      for (const auto& reply : replies) {
        if (!detail::recv_line(conn, buffer, line)) break;
        detail::send_all(conn, reply);
      }
      ::close(conn);
    });
  }
  ~RawServer() {
    if (thread.joinable()) thread.join();
    ::close(listen_fd);
  }
};

// Client-side raw line exchange for poking the real server with bad requests.
struct RawClient {
  int fd = -1;
  std::string buffer;

  explicit RawClient(int port) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(port));
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  }
  ~RawClient() { ::close(fd); }

  json ask(const std::string& line) {
    REQUIRE(detail::send_all(fd, line + "\n"));
    std::string reply;
    REQUIRE(detail::recv_line(fd, buffer, reply));
    return json::parse(reply);
  }
};

}  // namespace

TEST_CASE("a remote episode matches the in-process environment step for step") {
  std::vector<std::string> script = {"fill('5', 'SFO')", "fill('6', 'JFK')", "click('9')",
                                     "hover('777')",     "go_back()",        "scroll(0, 300)"};

  MockEnvironment direct(flight_graph());
  json direct_trace = json::array();
  direct_trace.push_back(direct.reset(kGoal));

  MockEnvironment served(flight_graph());
  DriverServer server(served);
  server.start();
  DriverClient client("127.0.0.1", server.port());
  json remote_trace = json::array();
  remote_trace.push_back(client.reset(kGoal));

  for (const auto& call : script) {
    StepResult a = direct.step(parse_action(call));
    StepResult b = client.step(parse_action(call));
    direct_trace.push_back(
        json{{"observation", a.observation},
             {"terminated", a.terminated},
             {"env_error", a.env_error ? json(*a.env_error) : json(nullptr)}});
    remote_trace.push_back(
        json{{"observation", b.observation},
             {"terminated", b.terminated},
             {"env_error", b.env_error ? json(*b.env_error) : json(nullptr)}});
  }
  CHECK(direct_trace.dump() == remote_trace.dump());
  server.stop();
}

TEST_CASE("crash and termination states survive the wire") {
  MockEnvironment env(crash_graph());
  DriverServer server(env);
  server.start();
  DriverClient client("127.0.0.1", server.port());
  client.reset(kGoal);

  StepResult r = client.step(parse_action("click('41')"));
  CHECK(r.terminated);
  REQUIRE(r.env_error);
  CHECK(r.env_error->kind == "crash");

  // A second client session can reset the same served environment.
  Observation obs = client.reset(kGoal);
  CHECK(obs.url == "https://fragile.example/");
  server.stop();
}

TEST_CASE("connecting to a dead port raises DriverUnavailable") {
  // Grab an ephemeral port, then close it so nothing is listening there.
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  int dead_port = ntohs(addr.sin_port);
  ::close(fd);

  DriverClient client("127.0.0.1", dead_port);
  CHECK_THROWS_MATCHES(client.reset(kGoal), Error, ErrorKindIs(ErrorKind::DriverUnavailable));
}

TEST_CASE("garbage and error replies raise ProtocolError") {
  {
    RawServer peer({"this is not json\n"});
    DriverClient client("127.0.0.1", peer.port);
    CHECK_THROWS_MATCHES(client.reset(kGoal), Error, ErrorKindIs(ErrorKind::ProtocolError));
  }
  {
    RawServer peer({"{\"error\": \"browser exploded\"}\n"});
    DriverClient client("127.0.0.1", peer.port);
    CHECK_THROWS_WITH(client.reset(kGoal), Catch::Matchers::ContainsSubstring("browser exploded"));
  }
  {
    // Truncated stream: peer hangs up without replying.
    RawServer peer({});
    DriverClient client("127.0.0.1", peer.port);
    CHECK_THROWS_MATCHES(client.reset(kGoal), Error, ErrorKindIs(ErrorKind::ProtocolError));
  }
  {
    // Structurally valid JSON with missing fields.
    RawServer peer({"{\"observation\": 42}\n"});
    DriverClient client("127.0.0.1", peer.port);
    CHECK_THROWS_MATCHES(client.reset(kGoal), Error, ErrorKindIs(ErrorKind::ProtocolError));
  }
}

TEST_CASE("the server rejects malformed requests without dying") {
  MockEnvironment env(flight_graph());
  DriverServer server(env);
  server.start();
  RawClient raw(server.port());

  CHECK(raw.ask("not json at all").contains("error"));
  CHECK(raw.ask(R"x({"op":"step","action":"noop()","v":2})x")["error"].get<std::string>().find(
            "version") != std::string::npos);
  CHECK(raw.ask(R"x({"op":"fly","v":1})x").contains("error"));
  CHECK(raw.ask(R"x({"op":"step","action":"clicck('1')","v":1})x").contains("error"));
  CHECK(raw.ask(R"x({"op":"step","v":1})x").contains("error"));

  // And still serves a well-formed episode afterwards.
  json goal(kGoal);
  json ok = raw.ask(json{{"op", "reset"}, {"goal", goal}, {"v", 1}}.dump());
  CHECK(ok.contains("observation"));
  CHECK(ok["terminated"] == false);
  server.stop();
}
