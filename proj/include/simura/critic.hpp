#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simura/core.hpp"
#include "simura/errors.hpp"
#include "simura/llm.hpp"
#include "simura/prompts.hpp"
#include "simura/text.hpp"

// Critic v: N sampled qualitative verdicts over a (simulated) final state,
// mapped to scalars and averaged. success -> 1.0, failure on track -> 0.5,
// failure off track -> 0.0.

namespace simura {

struct CriticVerdict {
  bool success = false;
  bool on_right_track = false;
  bool operator==(const CriticVerdict&) const = default;
};

struct ValueEstimate {
  double value = 0.0;
  int n_valid = 0;      // malformed verdicts reduce the denominator
  int n_requested = 0;
  std::vector<CriticVerdict> verdicts;
};

inline void to_json(nlohmann::json& j, const CriticVerdict& v) {
  j = nlohmann::json{{"success", v.success}, {"on_right_track", v.on_right_track}};
}
inline void from_json(const nlohmann::json& j, CriticVerdict& v) {
  j.at("success").get_to(v.success);
  j.at("on_right_track").get_to(v.on_right_track);
}
inline void to_json(nlohmann::json& j, const ValueEstimate& v) {
  j = nlohmann::json{{"kind", "value_estimate"},
                     {"value", v.value},
                     {"n_valid", v.n_valid},
                     {"n_requested", v.n_requested},
                     {"verdicts", v.verdicts}};
}
inline void from_json(const nlohmann::json& j, ValueEstimate& v) {
  j.at("value").get_to(v.value);
  j.at("n_valid").get_to(v.n_valid);
  j.at("n_requested").get_to(v.n_requested);
  j.at("verdicts").get_to(v.verdicts);
}

struct CriticOptions {
  double temperature = 1.0;
  int max_tokens = 4096;
  std::string model_id;
  int memory_cap = 0;
};

namespace detail {

inline std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    s = s.substr(1, s.size() - 2);
  }
  return to_lower(trim(s));
}

// A verdict needs a clean <status>; <on_the_right_track> is required only
// when the status is failure (that is the only case the mapping reads it).
inline std::optional<CriticVerdict> parse_verdict(const std::string& sample) {
  std::string status;
  try {
    status = unquote(extract_tag(sample, "status"));
  } catch (const Error&) {
    return std::nullopt;
  }
  if (status != "success" && status != "failure") return std::nullopt;

  CriticVerdict v;
  v.success = status == "success";
  if (v.success) {
    v.on_right_track = true;
    return v;
  }
  std::string track;
  try {
    track = unquote(extract_tag(sample, "on_the_right_track"));
  } catch (const Error&) {
    return std::nullopt;
  }
  if (track != "yes" && track != "no") return std::nullopt;
  v.on_right_track = track == "yes";
  return v;
}

}  // namespace detail

inline double map_verdict(const CriticVerdict& v) {
  if (v.success) return 1.0;
  return v.on_right_track ? 0.5 : 0.0;
}

inline double aggregate(const std::vector<CriticVerdict>& verdicts) {
  if (verdicts.empty()) fail(ErrorKind::EmptyVerdicts, "cannot aggregate zero verdicts");
  double sum = 0.0;
  for (const auto& v : verdicts) sum += map_verdict(v);
  return sum / static_cast<double>(verdicts.size());
}

// One batched call for n verdicts; malformed samples are dropped, and a
// fully malformed batch is retried once before AllVerdictsMalformed.
inline ValueEstimate sample_verdicts(Backend& backend, const AgentIdentity& identity,
                                     const GoalSpec& goal, const BeliefState& belief, int n,
                                     const CriticOptions& opts = {}) {
  if (n < 1) fail(ErrorKind::ConfigError, "sample_verdicts requires n >= 1");
  ChatRequest req;
  req.system = render_identity(identity, goal);
  req.user = prompts::critic(render_memory(belief, opts.memory_cap), belief.current.text);
  req.temperature = opts.temperature;
  req.n_samples = n;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;

  for (int attempt = 0; attempt < 2; ++attempt) {
    Completion c = backend.complete(req);
    ValueEstimate est;
    est.n_requested = n;
    for (const auto& sample : c.samples) {
      if (auto v = detail::parse_verdict(sample)) est.verdicts.push_back(*v);
    }
    est.n_valid = static_cast<int>(est.verdicts.size());
    if (est.n_valid > 0) {
      est.value = aggregate(est.verdicts);
      return est;
    }
    req.user +=
        "\n\nReminder: wrap your response in the tags <status> and </status> and "
        "<on_the_right_track> and </on_the_right_track>.";
  }
  fail(ErrorKind::AllVerdictsMalformed, "no critic sample parsed into a verdict");
}

}  // namespace simura
