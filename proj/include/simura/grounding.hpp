#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "simura/actions.hpp"
#include "simura/core.hpp"
#include "simura/errors.hpp"
#include "simura/llm.hpp"
#include "simura/prompts.hpp"
#include "simura/text.hpp"

// Grounding turns the chosen natural-language intent into one executable
// action. The model output is parsed, never evaluated; a bad reply gets one
// corrective re-prompt before the step is declared failed.

namespace simura {

struct GroundingOptions {
  std::vector<std::string> allowed_actions;  // empty means the full grammar
  size_t max_obs_chars = 40000;
  double temperature = 0.0;
  int max_tokens = 4096;
  std::string model_id;
  size_t memory_cap = 0;
};

namespace detail {

// Models love to wrap code in markdown fences; unwrap before strict parsing.
inline std::string strip_code_fence(const std::string& text) {
  std::string s = trim(text);
  if (s.rfind("```", 0) == 0) {
    size_t body = s.find('\n');
    s = body == std::string::npos ? "" : s.substr(body + 1);
    size_t closing = s.rfind("```");
    if (closing != std::string::npos) s = s.substr(0, closing);
    return trim(s);
  }
  if (s.size() >= 2 && s.front() == '`' && s.back() == '`') {
    return trim(s.substr(1, s.size() - 2));
  }
  return s;
}

}  // namespace detail

inline ConcreteAction ground_intent(Backend& backend, const AgentIdentity& identity,
                                    const GoalSpec& goal, const BeliefState& belief,
                                    const Observation& obs, const std::string& intent,
                                    const GroundingOptions& opts = {}) {
  std::string observation = truncate_lines(observation_text(obs), opts.max_obs_chars);

  ChatRequest req;
  req.system = render_identity(identity, goal);
  req.user = prompts::actor(render_memory(belief, opts.memory_cap), observation,
                            belief.current.text, intent);
  req.temperature = opts.temperature;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;

  auto attempt = [&](const std::string& sample) {
    std::string payload = extract_tag(sample, "action");
    return parse_action(detail::strip_code_fence(payload));
  };

  ConcreteAction action;
  Completion first = backend.complete(req);
  try {
    action = attempt(first.samples.front());
  } catch (const Error& e) {
    ChatRequest retry = req;
    retry.user += "\n\nYour previous response was invalid: " + std::string(e.what()) +
                  "\nRespond with exactly one action call wrapped in the tag <action> and "
                  "</action>.";
    Completion second = backend.complete(retry);
    try {
      action = attempt(second.samples.front());
    } catch (const Error& e2) {
      fail(ErrorKind::GroundingParseFailure,
           std::string("could not ground intent after one retry: ") + e2.what());
    }
  }

  if (!opts.allowed_actions.empty()) {
    std::string name = action_name(action);
    if (std::find(opts.allowed_actions.begin(), opts.allowed_actions.end(), name) ==
        opts.allowed_actions.end()) {
      fail(ErrorKind::UnknownAction,
           "action '" + name + "' is not available in this environment");
    }
  }

  for (const std::string& bid : action_bids(action)) {
    if (obs.axtree_text.find("[" + bid + "]") == std::string::npos) {
      fail(ErrorKind::BidNotInObservation,
           "bid '" + bid + "' does not appear in the current observation");
    }
  }
  return action;
}

}  // namespace simura
