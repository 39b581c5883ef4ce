#pragma once

#include <array>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "simura/core.hpp"
#include "simura/environment.hpp"
#include "simura/errors.hpp"
#include "simura/grounding.hpp"
#include "simura/llm.hpp"
#include "simura/perception.hpp"
#include "simura/planner.hpp"
#include "simura/prompts.hpp"

// Episode controller: the observe / encode / plan / remember / ground / act
// loop, the stop rules, the outcome taxonomy, and JSONL trace persistence.
// Component failures never escape an episode; they are folded into outcomes.

namespace simura {

// --- outcomes -----------------------------------------------------------------

enum class OutcomeCategory {
  response_returned,
  browser_crashed,
  max_steps_reached,
  repetitive_actions,
  action_errors,
  parsing_error,
};

inline constexpr std::array<OutcomeCategory, 6> kOutcomeCategories = {
    OutcomeCategory::response_returned, OutcomeCategory::browser_crashed,
    OutcomeCategory::max_steps_reached, OutcomeCategory::repetitive_actions,
    OutcomeCategory::action_errors,     OutcomeCategory::parsing_error,
};

inline std::string_view to_string(OutcomeCategory c) {
  switch (c) {
    case OutcomeCategory::response_returned: return "response_returned";
    case OutcomeCategory::browser_crashed: return "browser_crashed";
    case OutcomeCategory::max_steps_reached: return "max_steps_reached";
    case OutcomeCategory::repetitive_actions: return "repetitive_actions";
    case OutcomeCategory::action_errors: return "action_errors";
    case OutcomeCategory::parsing_error: return "parsing_error";
  }
  return "unknown";
}

inline OutcomeCategory outcome_category_from_string(const std::string& s) {
  for (OutcomeCategory c : kOutcomeCategories) {
    if (to_string(c) == s) return c;
  }
  fail(ErrorKind::ConfigError, "unknown outcome category '" + s + "'");
}

struct Outcome {
  OutcomeCategory category = OutcomeCategory::max_steps_reached;
  std::optional<std::string> final_message;
};

inline void to_json(nlohmann::json& j, const Outcome& o) {
  j = nlohmann::json{{"category", std::string(to_string(o.category))},
                     {"final_message",
                      o.final_message ? nlohmann::json(*o.final_message) : nlohmann::json()}};
}
inline void from_json(const nlohmann::json& j, Outcome& o) {
  o.category = outcome_category_from_string(j.at("category").get<std::string>());
  o.final_message.reset();
  if (j.contains("final_message") && !j["final_message"].is_null()) {
    o.final_message = j["final_message"].get<std::string>();
  }
}

// --- run configuration ----------------------------------------------------------

struct RunLimits {
  int max_steps = 30;
  int repeat_limit = 3;
  int error_budget = 3;
};

inline void validate(const RunLimits& l) {
  if (l.max_steps < 1 || l.repeat_limit < 1 || l.error_budget < 1) {
    fail(ErrorKind::ConfigError, "run limits must all be at least 1");
  }
}

inline void to_json(nlohmann::json& j, const RunLimits& l) {
  j = nlohmann::json{{"max_steps", l.max_steps},
                     {"repeat_limit", l.repeat_limit},
                     {"error_budget", l.error_budget}};
}
inline void from_json(const nlohmann::json& j, RunLimits& l) {
  l = RunLimits{};
  if (j.contains("max_steps")) j.at("max_steps").get_to(l.max_steps);
  if (j.contains("repeat_limit")) j.at("repeat_limit").get_to(l.repeat_limit);
  if (j.contains("error_budget")) j.at("error_budget").get_to(l.error_budget);
}

struct AgentConfig {
  GoalSpec goal;
  std::string planner = "world_model";  // "world_model" | "autoregressive"
  PlanConfig plan;
  GroundingOptions grounding;
  bool webarena_mode = false;
  std::optional<std::string> answer_pattern;  // structured-answer modes only
  bool deterministic = true;                  // zero timings so traces replay byte-identical
};

inline void to_json(nlohmann::json& j, const AgentConfig& c) {
  j = nlohmann::json{{"goal", c.goal},
                     {"planner", c.planner},
                     {"plan", c.plan},
                     {"webarena_mode", c.webarena_mode},
                     {"answer_pattern",
                      c.answer_pattern ? nlohmann::json(*c.answer_pattern) : nlohmann::json()},
                     {"deterministic", c.deterministic},
                     {"allowed_actions", c.grounding.allowed_actions},
                     {"max_obs_chars", c.grounding.max_obs_chars}};
}

inline void validate(const AgentConfig& c) {
  if (c.planner != "world_model" && c.planner != "autoregressive") {
    fail(ErrorKind::ConfigError, "unknown planner '" + c.planner + "'");
  }
  validate(c.plan);
  if (c.answer_pattern) {
    try {
      std::regex probe(*c.answer_pattern);
    } catch (const std::regex_error& e) {
      fail(ErrorKind::ConfigError, std::string("bad answer pattern: ") + e.what());
    }
  }
}

// The synthetic-browser identity, with the task-focused description swap used
// in WebArena mode. The swap touches nothing but the identity block.
inline AgentIdentity agent_identity(const AgentConfig& cfg) {
  AgentIdentity id = prompts::default_web_identity();
  if (cfg.webarena_mode) id.description = std::string(prompts::kWebArenaDescription);
  return id;
}

inline RunLimits effective_limits(const AgentConfig& cfg, RunLimits limits) {
  if (cfg.webarena_mode) limits.max_steps = 15;
  return limits;
}

// --- episode records ---------------------------------------------------------

struct StepRecord {
  int step = 1;
  Observation observation;
  std::optional<StateSummary> summary;
  std::optional<PlanDiagnostics> diagnostics;  // world-model mode only
  std::optional<std::string> intent;
  std::optional<std::string> think;
  std::string memory_update;
  std::optional<std::string> action;  // canonical rendering
  std::optional<EnvError> env_error;
  bool terminated = false;
  std::optional<std::string> component_error;  // failure before the env was touched
  int errors_after = 0;
  double duration_ms = 0.0;
};

namespace detail {
inline nlohmann::json opt_json(const std::optional<std::string>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}
}  // namespace detail

inline void to_json(nlohmann::json& j, const StepRecord& r) {
  j = nlohmann::json{
      {"kind", "step_record"},
      {"step", r.step},
      {"observation", r.observation},
      {"summary", r.summary ? nlohmann::json(*r.summary) : nlohmann::json()},
      {"diagnostics", r.diagnostics ? nlohmann::json(*r.diagnostics) : nlohmann::json()},
      {"intent", detail::opt_json(r.intent)},
      {"think", detail::opt_json(r.think)},
      {"memory_update", r.memory_update},
      {"action", detail::opt_json(r.action)},
      {"env_error", r.env_error ? nlohmann::json(*r.env_error) : nlohmann::json()},
      {"terminated", r.terminated},
      {"component_error", detail::opt_json(r.component_error)},
      {"errors_after", r.errors_after},
      {"duration_ms", r.duration_ms}};
}

struct EpisodeTrace {
  GoalSpec goal;
  AgentIdentity identity;
  nlohmann::json config;  // AgentConfig + RunLimits snapshot
  std::string model_id;
  std::vector<StepRecord> steps;
  Outcome outcome;
  int error_count = 0;
  double total_ms = 0.0;
};

inline std::string trace_to_jsonl(const EpisodeTrace& t) {
  std::string out;
  nlohmann::json header{{"kind", "episode_header"},
                        {"goal", t.goal},
                        {"identity", t.identity},
                        {"config", t.config},
                        {"model_id", t.model_id}};
  out += header.dump() + "\n";
  for (const StepRecord& r : t.steps) {
    out += nlohmann::json(r).dump() + "\n";
  }
  nlohmann::json footer{{"kind", "episode_footer"},
                        {"outcome", t.outcome},
                        {"steps", static_cast<int>(t.steps.size())},
                        {"error_count", t.error_count},
                        {"total_ms", t.total_ms}};
  out += footer.dump() + "\n";
  return out;
}

inline void write_trace(const EpisodeTrace& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::ConfigError, "cannot write trace file '" + path + "'");
  out << trace_to_jsonl(t);
}

// Reload a persisted trace. Everything the judge and the reports consume comes
// back; per-step planner diagnostics stay in the file only.
inline EpisodeTrace trace_from_jsonl(const std::string& text) {
  EpisodeTrace t;
  bool saw_header = false, saw_footer = false;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("kind")) {
      fail(ErrorKind::ConfigError, "trace line is not a tagged JSON object");
    }
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "episode_header") {
      j.at("goal").get_to(t.goal);
      j.at("identity").get_to(t.identity);
      t.config = j.at("config");
      j.at("model_id").get_to(t.model_id);
      saw_header = true;
    } else if (kind == "step_record") {
      StepRecord r;
      j.at("step").get_to(r.step);
      j.at("observation").get_to(r.observation);
      if (!j["summary"].is_null()) r.summary = j["summary"].get<StateSummary>();
      if (!j["intent"].is_null()) r.intent = j["intent"].get<std::string>();
      if (!j["think"].is_null()) r.think = j["think"].get<std::string>();
      j.at("memory_update").get_to(r.memory_update);
      if (!j["action"].is_null()) r.action = j["action"].get<std::string>();
      if (!j["env_error"].is_null()) r.env_error = j["env_error"].get<EnvError>();
      j.at("terminated").get_to(r.terminated);
      if (!j["component_error"].is_null()) {
        r.component_error = j["component_error"].get<std::string>();
      }
      j.at("errors_after").get_to(r.errors_after);
      j.at("duration_ms").get_to(r.duration_ms);
      t.steps.push_back(std::move(r));
    } else if (kind == "episode_footer") {
      j.at("outcome").get_to(t.outcome);
      j.at("error_count").get_to(t.error_count);
      j.at("total_ms").get_to(t.total_ms);
      saw_footer = true;
    }
  }
  if (!saw_header || !saw_footer) {
    fail(ErrorKind::ConfigError, "trace is missing its header or footer line");
  }
  return t;
}

inline EpisodeTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::ConfigError, "cannot read trace file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return trace_from_jsonl(buf.str());
}

// --- outcome classification ---------------------------------------------------

// Everything classify_outcome needs to know about a finished episode.
struct EpisodeHistory {
  bool message_sent = false;
  std::optional<std::string> final_message;
  bool answer_ok = true;  // false when a required structured answer failed to parse
  bool crashed = false;
  int error_count = 0;
  int max_consecutive_repeats = 0;
  int steps = 0;
};

inline Outcome classify_outcome(const EpisodeHistory& h, const RunLimits& limits) {
  Outcome o;
  o.final_message = h.final_message;
  if (h.message_sent) {
    o.category =
        h.answer_ok ? OutcomeCategory::response_returned : OutcomeCategory::parsing_error;
    return o;
  }
  if (h.crashed) {
    o.category = OutcomeCategory::browser_crashed;
  } else if (h.error_count > limits.error_budget) {
    o.category = OutcomeCategory::action_errors;
  } else if (h.max_consecutive_repeats >= limits.repeat_limit) {
    o.category = OutcomeCategory::repetitive_actions;
  } else {
    o.category = OutcomeCategory::max_steps_reached;
  }
  return o;
}

// --- the run loop ------------------------------------------------------------

inline EpisodeTrace run_episode(Backend& backend, Environment& env, const AgentConfig& cfg,
                                RunLimits limits = {}) {
  validate(cfg);
  validate(limits);
  limits = effective_limits(cfg, limits);

  AgentIdentity identity = agent_identity(cfg);
  EpisodeTrace trace;
  trace.goal = cfg.goal;
  trace.identity = identity;
  trace.config = nlohmann::json{{"agent", cfg}, {"limits", limits}};
  trace.model_id = cfg.plan.model_id;

  EncodeOptions enc_opts{cfg.grounding.max_obs_chars, cfg.plan.deterministic_temperature,
                         cfg.plan.max_tokens, cfg.plan.model_id};
  MemoryUpdateOptions mem_opts = detail::memory_options(cfg.plan);

  EpisodeHistory history;
  std::vector<MemoryEntry> entries;
  Observation obs = env.reset(cfg.goal);

  std::string last_canonical;
  int consecutive = 0;

  auto episode_start = std::chrono::steady_clock::now();
  for (int step = 1; step <= limits.max_steps; ++step) {
    StepRecord rec;
    rec.step = step;
    rec.observation = obs;
    auto step_start = std::chrono::steady_clock::now();

    std::optional<ConcreteAction> action;
    try {
      StateSummary summary = encode_observation(backend, identity, cfg.goal, obs,
                                                static_cast<int>(entries.size()) + 1, enc_opts);
      rec.summary = summary;
      BeliefState belief = compose_belief_state(entries, summary);

      std::string intent;
      std::string memory_update;
      if (cfg.planner == "world_model") {
        auto [chosen, diag] = plan_world_model(backend, identity, cfg.goal, belief, cfg.plan);
        intent = chosen.intent;
        rec.think = chosen.think;
        for (const BranchScore& b : diag.branch_scores) {
          if (b.cluster_index == diag.chosen_index) memory_update = b.memory_update;
        }
        rec.diagnostics = std::move(diag);
      } else {
        SimulatedAction chosen =
            plan_autoregressive(backend, identity, cfg.goal, belief, cfg.plan);
        intent = chosen.intent;
        rec.think = chosen.think;
      }
      if (memory_update.empty()) {
        memory_update = generate_memory_update(backend, identity, cfg.goal, belief, intent,
                                               mem_opts);
      }
      rec.intent = intent;
      rec.memory_update = memory_update;

      action = ground_intent(backend, identity, cfg.goal, belief, obs, intent, cfg.grounding);
      rec.action = render_action(*action);
    } catch (const Error& e) {
      rec.component_error = e.what();
      ++history.error_count;
      action.reset();
    }

    if (action) {
      const std::string& canonical = *rec.action;
      consecutive = (canonical == last_canonical) ? consecutive + 1 : 1;
      last_canonical = canonical;
      history.max_consecutive_repeats = std::max(history.max_consecutive_repeats, consecutive);

      if (const auto* msg = std::get_if<SendMsgAction>(&*action)) {
        history.message_sent = true;
        history.final_message = msg->text;
        if (cfg.answer_pattern) {
          history.answer_ok = std::regex_search(msg->text, std::regex(*cfg.answer_pattern));
        }
      }

      try {
        StepResult result = env.step(*action);
        rec.env_error = result.env_error;
        rec.terminated = result.terminated;
        if (result.env_error) {
          if (result.env_error->kind == "crash") {
            history.crashed = true;
          } else {
            ++history.error_count;
          }
        }
        obs = result.observation;
      } catch (const Error& e) {
        // Losing the environment mid-step is indistinguishable from a browser
        // death as far as the episode is concerned.
        rec.component_error = e.what();
        history.crashed = true;
      }

      entries = append_memory(entries, *rec.summary,
                              SimulatedAction{*rec.intent, rec.think}, rec.memory_update);
    }

    rec.errors_after = history.error_count;
    if (!cfg.deterministic) {
      rec.duration_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - step_start)
                            .count();
    }
    trace.steps.push_back(std::move(rec));
    history.steps = step;

    if (history.message_sent || history.crashed || trace.steps.back().terminated ||
        history.error_count > limits.error_budget ||
        history.max_consecutive_repeats >= limits.repeat_limit) {
      break;
    }
  }

  trace.error_count = history.error_count;
  trace.outcome = classify_outcome(history, limits);
  if (!cfg.deterministic) {
    trace.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               episode_start)
                         .count();
  }
  return trace;
}

// --- aggregation ---------------------------------------------------------------

struct OutcomeStats {
  int total = 0;
  std::map<std::string, int> counts;        // every category present, zeros included
  std::map<std::string, double> percentages;
};

inline OutcomeStats aggregate_outcomes(const std::vector<Outcome>& outcomes) {
  if (outcomes.empty()) fail(ErrorKind::EmptyInput, "no outcomes to aggregate");
  OutcomeStats stats;
  stats.total = static_cast<int>(outcomes.size());
  for (OutcomeCategory c : kOutcomeCategories) {
    stats.counts[std::string(to_string(c))] = 0;
  }
  for (const Outcome& o : outcomes) {
    ++stats.counts[std::string(to_string(o.category))];
  }
  for (const auto& [name, count] : stats.counts) {
    stats.percentages[name] = 100.0 * count / stats.total;
  }
  return stats;
}

inline OutcomeStats aggregate_outcomes(const std::vector<EpisodeTrace>& traces) {
  std::vector<Outcome> outcomes;
  outcomes.reserve(traces.size());
  for (const EpisodeTrace& t : traces) outcomes.push_back(t.outcome);
  return aggregate_outcomes(outcomes);
}

inline void to_json(nlohmann::json& j, const OutcomeStats& s) {
  j = nlohmann::json{{"total", s.total}, {"counts", s.counts}, {"percentages", s.percentages}};
}

}  // namespace simura
