#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simura/errors.hpp"
#include "simura/text.hpp"

// Shared domain types of the agent-environment loop: identity, goal,
// observation, state summaries, and the belief state the planner forks.
// Everything here is an immutable value after construction; memory
// operations return new lists instead of mutating, so concurrent planner
// branches can never alias each other's state.

namespace simura {

using json = nlohmann::json;

struct AgentIdentity {
  std::string name;
  std::string description;
  std::string observation_space_doc;
  std::string action_space_doc;
};

struct GoalSpec {
  std::string instruction;
  std::string issued_at;  // rendered as "Current Date and Time"
};

struct Observation {
  std::string url;
  int64_t scroll_position = 0;
  int64_t window_height = 0;
  int64_t webpage_height = 0;
  int64_t remaining_pixels = 0;
  double scrolling_progress = 0.0;  // percentage in [0, 100]
  std::string axtree_text;
  std::optional<std::string> last_action_error;
};

struct StateSummary {
  std::string text;
  int step_index = 1;
};

// Natural-language intent used for planning; the rationale is kept only
// for traces and never fed back into prompts.
struct SimulatedAction {
  std::string intent;
  std::optional<std::string> think;
};

struct MemoryEntry {
  int step_index = 1;
  StateSummary summary;
  SimulatedAction chosen_intent;
  std::string memory_update;
};

struct BeliefState {
  std::vector<MemoryEntry> entries;  // steps 1..t-1
  StateSummary current;              // step t
};

inline bool operator==(const Observation& a, const Observation& b) {
  return a.url == b.url && a.scroll_position == b.scroll_position &&
         a.window_height == b.window_height && a.webpage_height == b.webpage_height &&
         a.remaining_pixels == b.remaining_pixels &&
         a.scrolling_progress == b.scrolling_progress && a.axtree_text == b.axtree_text &&
         a.last_action_error == b.last_action_error;
}
inline bool operator==(const StateSummary& a, const StateSummary& b) {
  return a.text == b.text && a.step_index == b.step_index;
}
inline bool operator==(const SimulatedAction& a, const SimulatedAction& b) {
  return a.intent == b.intent && a.think == b.think;
}
inline bool operator==(const MemoryEntry& a, const MemoryEntry& b) {
  return a.step_index == b.step_index && a.summary == b.summary &&
         a.chosen_intent == b.chosen_intent && a.memory_update == b.memory_update;
}
inline bool operator==(const BeliefState& a, const BeliefState& b) {
  return a.entries == b.entries && a.current == b.current;
}

namespace detail {

inline void check_entries_consecutive(const std::vector<MemoryEntry>& entries) {
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].step_index != static_cast<int>(i) + 1) {
      fail(ErrorKind::OrderViolation,
           "memory entry at position " + std::to_string(i) + " has step_index " +
               std::to_string(entries[i].step_index) + ", expected " + std::to_string(i + 1));
    }
  }
}

}  // namespace detail

inline BeliefState compose_belief_state(std::vector<MemoryEntry> entries, StateSummary current) {
  detail::check_entries_consecutive(entries);
  if (current.step_index != static_cast<int>(entries.size()) + 1) {
    fail(ErrorKind::OrderViolation,
         "current summary at step " + std::to_string(current.step_index) + " does not follow " +
             std::to_string(entries.size()) + " memory entries");
  }
  return BeliefState{std::move(entries), std::move(current)};
}

inline std::vector<MemoryEntry> append_memory(const std::vector<MemoryEntry>& entries,
                                              StateSummary summary, SimulatedAction chosen,
                                              std::string update) {
  detail::check_entries_consecutive(entries);
  if (summary.step_index != static_cast<int>(entries.size()) + 1) {
    fail(ErrorKind::OrderViolation,
         "summary at step " + std::to_string(summary.step_index) + " cannot follow " +
             std::to_string(entries.size()) + " memory entries");
  }
  std::vector<MemoryEntry> out = entries;
  int step = summary.step_index;
  out.push_back(MemoryEntry{step, std::move(summary), std::move(chosen), std::move(update)});
  return out;
}

inline std::string render_memory_entry(const MemoryEntry& e) {
  std::string out;
  out += "# Step " + std::to_string(e.step_index) + " State:\n";
  out += e.summary.text + "\n";
  out += "## Chosen Intent:\n";
  out += e.chosen_intent.intent + "\n";
  out += "## Memory Update:\n";
  out += e.memory_update;
  return out;
}

// Renders the memory half of a prompt ("{memory}" placeholder). A cap of 0
// keeps everything; a positive cap keeps the newest entries, never fewer
// than the most recent 3.
inline std::string render_memory(const BeliefState& belief, int cap = 0) {
  size_t keep = belief.entries.size();
  if (cap > 0) {
    keep = std::max<size_t>(std::min<size_t>(keep, static_cast<size_t>(cap)),
                            std::min<size_t>(keep, 3));
  }
  std::string out;
  size_t first = belief.entries.size() - keep;
  for (size_t i = first; i < belief.entries.size(); ++i) {
    if (!out.empty()) out += "\n\n";
    out += render_memory_entry(belief.entries[i]);
  }
  return out;
}

inline std::string render_state_context(const BeliefState& belief, int cap = 0) {
  std::string memory = render_memory(belief, cap);
  std::string out;
  if (!memory.empty()) out += memory + "\n\n";
  out += "# Current State:\n" + belief.current.text;
  return out;
}

// Appendix-style observation text: URL line, viewport header line, then the
// accessibility tree.
inline std::string observation_text(const Observation& obs) {
  char progress[32];
  std::snprintf(progress, sizeof(progress), "%.1f", obs.scrolling_progress);
  std::string out = "URL " + obs.url + "\n";
  out += "Scroll Position: " + std::to_string(obs.scroll_position) +
         ", Window Height: " + std::to_string(obs.window_height) +
         ", Webpage Height: " + std::to_string(obs.webpage_height) +
         ", Remaining Pixels: " + std::to_string(obs.remaining_pixels) +
         ", Scrolling Progress: " + std::string(progress) + "%\n";
  out += obs.axtree_text;
  if (obs.last_action_error && !obs.last_action_error->empty()) {
    out += "\nLast Action Error: " + *obs.last_action_error;
  }
  return out;
}

// Identity block consumed as the system prompt. Starts with "# Name:" and
// carries the goal and timestamp at the end.
inline std::string render_identity(const AgentIdentity& id, const GoalSpec& goal) {
  std::string out;
  out += "# Name:\n" + id.name + "\n\n";
  out += "# Description:\n" + id.description + "\n\n";
  out += "# Observation Space:\n" + id.observation_space_doc + "\n\n";
  out += "# Action Space:\n" + id.action_space_doc + "\n\n";
  out += "# Instruction:\n" + goal.instruction + "\n\n";
  out += "# Current Date and Time:\n" + goal.issued_at;
  return out;
}

// --- JSONL serialization -------------------------------------------------
// One object per record with a "kind" discriminator; field names mirror the
// struct members exactly.

inline void to_json(json& j, const AgentIdentity& v) {
  j = json{{"kind", "agent_identity"},
           {"name", v.name},
           {"description", v.description},
           {"observation_space_doc", v.observation_space_doc},
           {"action_space_doc", v.action_space_doc}};
}
inline void from_json(const json& j, AgentIdentity& v) {
  j.at("name").get_to(v.name);
  j.at("description").get_to(v.description);
  j.at("observation_space_doc").get_to(v.observation_space_doc);
  j.at("action_space_doc").get_to(v.action_space_doc);
}

inline void to_json(json& j, const GoalSpec& v) {
  j = json{{"kind", "goal_spec"}, {"instruction", v.instruction}, {"issued_at", v.issued_at}};
}
inline void from_json(const json& j, GoalSpec& v) {
  j.at("instruction").get_to(v.instruction);
  j.at("issued_at").get_to(v.issued_at);
}

inline void to_json(json& j, const Observation& v) {
  j = json{{"kind", "observation"},
           {"url", v.url},
           {"scroll_position", v.scroll_position},
           {"window_height", v.window_height},
           {"webpage_height", v.webpage_height},
           {"remaining_pixels", v.remaining_pixels},
           {"scrolling_progress", v.scrolling_progress},
           {"axtree_text", v.axtree_text},
           {"last_action_error", v.last_action_error ? json(*v.last_action_error) : json()}};
}
inline void from_json(const json& j, Observation& v) {
  j.at("url").get_to(v.url);
  j.at("scroll_position").get_to(v.scroll_position);
  j.at("window_height").get_to(v.window_height);
  j.at("webpage_height").get_to(v.webpage_height);
  j.at("remaining_pixels").get_to(v.remaining_pixels);
  j.at("scrolling_progress").get_to(v.scrolling_progress);
  j.at("axtree_text").get_to(v.axtree_text);
  if (j.contains("last_action_error") && !j.at("last_action_error").is_null()) {
    v.last_action_error = j.at("last_action_error").get<std::string>();
  } else {
    v.last_action_error.reset();
  }
}

inline void to_json(json& j, const StateSummary& v) {
  j = json{{"kind", "state_summary"}, {"text", v.text}, {"step_index", v.step_index}};
}
inline void from_json(const json& j, StateSummary& v) {
  j.at("text").get_to(v.text);
  j.at("step_index").get_to(v.step_index);
}

inline void to_json(json& j, const SimulatedAction& v) {
  j = json{{"kind", "simulated_action"},
           {"intent", v.intent},
           {"think", v.think ? json(*v.think) : json()}};
}
inline void from_json(const json& j, SimulatedAction& v) {
  j.at("intent").get_to(v.intent);
  if (j.contains("think") && !j.at("think").is_null()) {
    v.think = j.at("think").get<std::string>();
  } else {
    v.think.reset();
  }
}

inline void to_json(json& j, const MemoryEntry& v) {
  j = json{{"kind", "memory_entry"},
           {"step_index", v.step_index},
           {"summary", v.summary},
           {"chosen_intent", v.chosen_intent},
           {"memory_update", v.memory_update}};
}
inline void from_json(const json& j, MemoryEntry& v) {
  j.at("step_index").get_to(v.step_index);
  j.at("summary").get_to(v.summary);
  j.at("chosen_intent").get_to(v.chosen_intent);
  j.at("memory_update").get_to(v.memory_update);
}

inline void to_json(json& j, const BeliefState& v) {
  j = json{{"kind", "belief_state"}, {"entries", v.entries}, {"current", v.current}};
}
inline void from_json(const json& j, BeliefState& v) {
  v.entries = j.at("entries").get<std::vector<MemoryEntry>>();
  j.at("current").get_to(v.current);
}

}  // namespace simura
