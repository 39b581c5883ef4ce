#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "simura/errors.hpp"
#include "simura/text.hpp"

// Single choke point for all language-model calls. Every module talks to a
// Backend; production uses the chat-completion HTTP client, tests use the
// deterministic scripted stub. Both sides honor the same contract.

namespace simura {

struct TokenUsage {
  int64_t prompt_tokens = 0;
  int64_t completion_tokens = 0;
};

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  int n_samples = 1;
  int max_tokens = 4096;
  std::string model_id;
  std::optional<int64_t> seed;
};

struct Completion {
  std::vector<std::string> samples;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
};

inline void to_json(nlohmann::json& j, const ChatRequest& v) {
  j = nlohmann::json{{"kind", "chat_request"},
                     {"system", v.system},
                     {"user", v.user},
                     {"temperature", v.temperature},
                     {"n_samples", v.n_samples},
                     {"max_tokens", v.max_tokens},
                     {"model_id", v.model_id},
                     {"seed", v.seed ? nlohmann::json(*v.seed) : nlohmann::json()}};
}

class Backend {
 public:
  virtual ~Backend() = default;

  Completion complete(const ChatRequest& request) {
    if (request.n_samples < 1) {
      fail(ErrorKind::ConfigError, "n_samples must be >= 1");
    }
    {
      std::lock_guard<std::mutex> lock(log_mutex_);
      request_log_.push_back(request);
    }
    Completion c = do_complete(request);
    if (c.samples.size() != static_cast<size_t>(request.n_samples)) {
      fail(ErrorKind::TransportError,
           "backend produced " + std::to_string(c.samples.size()) + " samples, requested " +
               std::to_string(request.n_samples));
    }
    return c;
  }

  size_t call_count() const {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return request_log_.size();
  }

  std::vector<ChatRequest> request_log() const {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return request_log_;
  }

  void reset_log() {
    std::lock_guard<std::mutex> lock(log_mutex_);
    request_log_.clear();
  }

 protected:
  virtual Completion do_complete(const ChatRequest& request) = 0;

 private:
  mutable std::mutex log_mutex_;
  std::vector<ChatRequest> request_log_;
};

// --- tag extraction --------------------------------------------------------

inline const std::vector<std::string>& known_tags() {
  static const std::vector<std::string> tags = {
      "state",  "intent",        "think",  "next_state", "memory_update",
      "status", "on_the_right_track", "action", "grounding",  "relevance"};
  return tags;
}

// Trimmed content of the first well-formed <tag>...</tag> pair. Tags are
// case-sensitive; a lone opening tag is MissingTag, not a prefix match.
inline std::string extract_tag(std::string_view text, const std::string& tag_name) {
  bool known = false;
  for (const auto& t : known_tags()) {
    if (t == tag_name) {
      known = true;
      break;
    }
  }
  if (!known) throw std::logic_error("extract_tag: unknown tag '" + tag_name + "'");

  const std::string open = "<" + tag_name + ">";
  const std::string close = "</" + tag_name + ">";
  size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string_view::npos) {
    size_t body = pos + open.size();
    size_t end = text.find(close, body);
    if (end != std::string_view::npos) {
      return trim(text.substr(body, end - body));
    }
    pos = body;
  }
  fail(ErrorKind::MissingTag, "no <" + tag_name + "> ... </" + tag_name + "> pair in response");
}

// One bounded recovery: on MissingTag the request is reissued once with a
// terse format reminder appended. A second miss propagates MissingTag for
// the caller to map onto its own failure kind.
inline std::string complete_and_extract(Backend& backend, ChatRequest request,
                                        const std::string& tag_name) {
  Completion first = backend.complete(request);
  try {
    return extract_tag(first.samples.at(0), tag_name);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MissingTag) throw;
  }
  request.user += "\n\nReminder: wrap your response in the tag <" + tag_name + "> and </" +
                  tag_name + ">.";
  Completion second = backend.complete(request);
  return extract_tag(second.samples.at(0), tag_name);
}

// --- scripted stub ----------------------------------------------------------

// A rule matches when every listed substring appears in the corresponding
// request field. Responses are handed out per sample index by default, or
// one per call when mode is "cycled". Non-repeatable rules are consumed by
// their first match.
struct ScriptedRule {
  std::vector<std::string> system_contains;
  std::vector<std::string> user_contains;
  std::vector<std::string> responses;
  bool repeatable = false;
  std::string mode = "indexed";  // or "cycled"
};

inline void from_json(const nlohmann::json& j, ScriptedRule& r) {
  if (j.contains("system_contains")) {
    r.system_contains = j.at("system_contains").get<std::vector<std::string>>();
  }
  if (j.contains("user_contains")) {
    r.user_contains = j.at("user_contains").get<std::vector<std::string>>();
  }
  r.responses = j.at("responses").get<std::vector<std::string>>();
  r.repeatable = j.value("repeatable", false);
  r.mode = j.value("mode", "indexed");
}

inline void to_json(nlohmann::json& j, const ScriptedRule& r) {
  j = nlohmann::json{{"system_contains", r.system_contains},
                     {"user_contains", r.user_contains},
                     {"responses", r.responses},
                     {"repeatable", r.repeatable},
                     {"mode", r.mode}};
}

class ScriptedBackend : public Backend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<ScriptedRule> rules) { set_rules(std::move(rules)); }

  static ScriptedBackend from_json(const nlohmann::json& script) {
    return ScriptedBackend(script.get<std::vector<ScriptedRule>>());
  }

  void set_rules(std::vector<ScriptedRule> rules) {
    std::lock_guard<std::mutex> lock(mutex_);
    states_.clear();
    for (auto& r : rules) states_.push_back(RuleState{std::move(r), false, 0});
  }

 protected:
  Completion do_complete(const ChatRequest& request) override {
    std::lock_guard<std::mutex> lock(mutex_);
    for (auto& state : states_) {
      if (state.consumed) continue;
      if (!matches(state.rule, request)) continue;
      if (!state.rule.repeatable) state.consumed = true;

      const auto& responses = state.rule.responses;
      if (responses.empty()) fail(ErrorKind::ScriptMiss, "matched rule has no responses");

      Completion c;
      c.samples.reserve(static_cast<size_t>(request.n_samples));
      if (state.rule.mode == "cycled") {
        const std::string& r = responses[state.cycle % responses.size()];
        ++state.cycle;
        c.samples.assign(static_cast<size_t>(request.n_samples), r);
      } else if (request.temperature == 0.0) {
        // zero temperature: every sample identical
        c.samples.assign(static_cast<size_t>(request.n_samples), responses[0]);
      } else {
        for (int i = 0; i < request.n_samples; ++i) {
          c.samples.push_back(responses[static_cast<size_t>(i) % responses.size()]);
        }
      }
      int64_t completion_chars = 0;
      for (const auto& s : c.samples) completion_chars += static_cast<int64_t>(s.size());
      c.usage.prompt_tokens = static_cast<int64_t>(request.system.size() + request.user.size()) / 4;
      c.usage.completion_tokens = completion_chars / 4;
      c.latency = std::chrono::milliseconds(0);
      return c;
    }
    fail(ErrorKind::ScriptMiss, "no scripted rule matched request (user starts with: \"" +
                                    std::string(request.user.substr(0, 160)) + "\")");
  }

 private:
  struct RuleState {
    ScriptedRule rule;
    bool consumed = false;
    size_t cycle = 0;
  };

  static bool matches(const ScriptedRule& rule, const ChatRequest& request) {
    for (const auto& s : rule.system_contains) {
      if (!contains(request.system, s)) return false;
    }
    for (const auto& s : rule.user_contains) {
      if (!contains(request.user, s)) return false;
    }
    return true;
  }

  std::mutex mutex_;
  std::vector<RuleState> states_;
};

}  // namespace simura
