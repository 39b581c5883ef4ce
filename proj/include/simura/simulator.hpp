#pragma once

#include <string>

#include "simura/core.hpp"
#include "simura/errors.hpp"
#include "simura/llm.hpp"
#include "simura/prompts.hpp"

// World model f: predict the next state summary for a candidate intent, and
// extend a belief state with the simulated step. Belief values are copied,
// never shared, so planner branches cannot alias.

namespace simura {

struct SimulateOptions {
  double temperature = 0.0;
  int max_tokens = 4096;
  std::string model_id;
  int memory_cap = 0;
};

inline std::string predict_next_summary(Backend& backend, const AgentIdentity& identity,
                                        const GoalSpec& goal, const BeliefState& belief,
                                        const std::string& memory_update,
                                        const std::string& intent,
                                        const SimulateOptions& opts = {}) {
  ChatRequest req;
  req.system = render_identity(identity, goal);
  req.user = prompts::world_model(render_memory(belief, opts.memory_cap), belief.current.text,
                                  memory_update, intent);
  req.temperature = opts.temperature;
  req.n_samples = 1;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;
  try {
    return complete_and_extract(backend, req, "next_state");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MissingTag) {
      fail(ErrorKind::SimulationFailure,
           std::string("no <next_state> in world model response: ") + e.what());
    }
    throw;
  }
}

// Commits a simulated (or real) transition: the current summary moves into
// memory alongside the chosen intent and its memory update, and the next
// summary becomes current.
inline BeliefState advance_belief(const BeliefState& belief, const SimulatedAction& chosen,
                                  const std::string& memory_update,
                                  const std::string& next_summary) {
  auto entries = append_memory(belief.entries, belief.current, chosen, memory_update);
  return compose_belief_state(std::move(entries),
                              StateSummary{next_summary, belief.current.step_index + 1});
}

}  // namespace simura
