#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simura/driver.hpp"
#include "simura/environment.hpp"
#include "simura/errors.hpp"
#include "simura/harness.hpp"
#include "simura/llm.hpp"
#include "simura/llm_http.hpp"

// Layered tool settings: built-in defaults, then the JSON config file, then
// SIMURA_* environment variables, then command-line flags. Later layers win.

namespace simura {

struct Settings {
  // backend
  std::string backend;   // "script:<rules.json>" or "http"
  std::string api_base;  // SIMURA_API_BASE
  std::string api_key;   // SIMURA_API_KEY
  std::string model;     // SIMURA_MODEL
  std::optional<int> seed;

  // episodes
  std::string env_spec;  // "mock:<fixture.json>" or "driver:<host>:<port>"
  std::string planner = "world-model";
  std::string goal;
  std::string goal_datetime = "2025-03-01 09:00:00";
  std::optional<std::string> answer_pattern;
  bool webarena = false;
  int parallel = 1;
  RunLimits limits;
  PlanConfig plan;

  // flightqa
  int c = 3;
  int n = 15;
  int k = 5;

  // file plumbing
  std::string dataset;   // batch-run input, gen output join, judge join
  std::string run_dir;   // judge input
  std::string verdicts;  // report input
  std::string out;       // output directory
};

// The manifest echo of the resolved settings. Secrets are reduced to a
// present/absent bit.
inline void to_json(nlohmann::json& j, const Settings& s) {
  j = nlohmann::json{{"backend", s.backend},
                     {"api_base", s.api_base},
                     {"api_key_set", !s.api_key.empty()},
                     {"model", s.model},
                     {"seed", s.seed ? nlohmann::json(*s.seed) : nlohmann::json()},
                     {"env", s.env_spec},
                     {"planner", s.planner},
                     {"goal", s.goal},
                     {"goal_datetime", s.goal_datetime},
                     {"answer_pattern", s.answer_pattern ? nlohmann::json(*s.answer_pattern)
                                                         : nlohmann::json()},
                     {"webarena", s.webarena},
                     {"parallel", s.parallel},
                     {"limits", s.limits},
                     {"plan", s.plan},
                     {"c", s.c},
                     {"n", s.n},
                     {"k", s.k},
                     {"dataset", s.dataset}};
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::ConfigError, "cannot read file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::ConfigError, "cannot write file '" + path + "'");
  out << content;
}

// Config file: one JSON object whose keys mirror the long flags, plus nested
// "limits" and "plan" objects. Unknown keys are rejected to catch typos.
inline void apply_config_file(Settings& s, const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    fail(ErrorKind::ConfigError, "config file '" + path + "' is not a JSON object");
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "backend") value.get_to(s.backend);
      else if (key == "api_base") value.get_to(s.api_base);
      else if (key == "api_key") value.get_to(s.api_key);
      else if (key == "model") value.get_to(s.model);
      else if (key == "seed") s.seed = value.get<int>();
      else if (key == "env") value.get_to(s.env_spec);
      else if (key == "planner") value.get_to(s.planner);
      else if (key == "goal") value.get_to(s.goal);
      else if (key == "goal_datetime") value.get_to(s.goal_datetime);
      else if (key == "answer_pattern") s.answer_pattern = value.get<std::string>();
      else if (key == "webarena") value.get_to(s.webarena);
      else if (key == "parallel") value.get_to(s.parallel);
      else if (key == "limits") value.get_to(s.limits);
      else if (key == "plan") value.get_to(s.plan);
      else if (key == "c") value.get_to(s.c);
      else if (key == "n") value.get_to(s.n);
      else if (key == "k") value.get_to(s.k);
      else if (key == "dataset") value.get_to(s.dataset);
      else if (key == "out") value.get_to(s.out);
      else fail(ErrorKind::ConfigError, "config file has unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("config file value has the wrong type: ") +
                                     e.what());
  }
}

inline void apply_env_vars(Settings& s) {
  if (const char* v = std::getenv("SIMURA_API_BASE")) s.api_base = v;
  if (const char* v = std::getenv("SIMURA_API_KEY")) s.api_key = v;
  if (const char* v = std::getenv("SIMURA_MODEL")) s.model = v;
}

// "world-model" on the command line, "world_model" in the library.
inline std::string canonical_planner(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (c == '-') c = '_';
  }
  return out;
}

// --- backend construction ----------------------------------------------------

// Stamps a default sampling seed onto outgoing requests. Scripted backends
// ignore it; HTTP backends forward it to the server.
class SeededBackend : public Backend {
 public:
  SeededBackend(std::unique_ptr<Backend> inner, int seed)
      : inner_(std::move(inner)), seed_(seed) {}

 protected:
  Completion do_complete(const ChatRequest& request) override {
    ChatRequest stamped = request;
    if (!stamped.seed) stamped.seed = seed_;
    return inner_->complete(stamped);
  }

 private:
  std::unique_ptr<Backend> inner_;
  int seed_;
};

inline std::unique_ptr<Backend> make_backend(const Settings& s) {
  if (s.backend.empty()) {
    fail(ErrorKind::ConfigError, "missing --backend (script:<rules.json> or http)");
  }
  std::unique_ptr<Backend> backend;
  if (s.backend.rfind("script:", 0) == 0) {
    std::string path = s.backend.substr(7);
    if (path.empty()) fail(ErrorKind::ConfigError, "script backend needs a rules file path");
    nlohmann::json rules = nlohmann::json::parse(read_file(path), nullptr, false);
    if (rules.is_discarded() || !rules.is_array()) {
      fail(ErrorKind::ConfigError, "script file '" + path + "' is not a JSON array of rules");
    }
    try {
      backend = std::make_unique<ScriptedBackend>(rules.get<std::vector<ScriptedRule>>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::ConfigError, "script file '" + path + "': " + e.what());
    }
  } else if (s.backend == "http") {
    if (s.api_base.empty()) {
      fail(ErrorKind::ConfigError,
           "http backend needs --api-base or SIMURA_API_BASE");
    }
    HttpBackendConfig config;
    config.base_url = s.api_base;
    config.api_key = s.api_key;
    backend = std::make_unique<HttpBackend>(std::move(config));
  } else {
    fail(ErrorKind::ConfigError, "unknown backend '" + s.backend +
                                     "' (expected script:<rules.json> or http)");
  }
  if (s.seed) backend = std::make_unique<SeededBackend>(std::move(backend), *s.seed);
  return backend;
}

// --- environment construction --------------------------------------------------

struct EnvSpec {
  std::string kind;     // "mock" | "driver"
  std::string fixture;  // mock only
  std::string host;     // driver only
  int port = 0;
};

inline EnvSpec parse_env_spec(const std::string& spec) {
  if (spec.empty()) {
    fail(ErrorKind::ConfigError, "missing --env (mock:<fixture.json> or driver:<host>:<port>)");
  }
  EnvSpec out;
  if (spec.rfind("mock:", 0) == 0) {
    out.kind = "mock";
    out.fixture = spec.substr(5);
    if (out.fixture.empty()) fail(ErrorKind::ConfigError, "mock environment needs a fixture path");
    return out;
  }
  if (spec.rfind("driver:", 0) == 0) {
    std::string rest = spec.substr(7);
    size_t colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
      fail(ErrorKind::ConfigError, "driver environment needs <host>:<port>");
    }
    out.kind = "driver";
    out.host = rest.substr(0, colon);
    try {
      out.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::ConfigError, "driver port is not a number");
    }
    return out;
  }
  fail(ErrorKind::ConfigError,
       "unknown environment '" + spec + "' (expected mock:<fixture.json> or driver:<host>:<port>)");
}

// One environment per episode: mock episodes get a fresh browser over the
// shared fixture, driver episodes get their own connection.
inline std::unique_ptr<Environment> make_environment(const EnvSpec& spec,
                                                     const SiteGraph* graph) {
  if (spec.kind == "mock") return std::make_unique<MockEnvironment>(*graph);
  return std::make_unique<DriverClient>(spec.host, spec.port);
}

// --- misc -----------------------------------------------------------------------

inline std::string fnv1a64_hex(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace simura
