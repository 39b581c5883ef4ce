#pragma once

#include <string>

#include "simura/core.hpp"
#include "simura/errors.hpp"
#include "simura/llm.hpp"
#include "simura/prompts.hpp"
#include "simura/text.hpp"

// Encoder and memory-update stages: raw observation -> state summary, and
// (summary, chosen intent) -> one memory entry body.

namespace simura {

struct EncodeOptions {
  size_t max_obs_chars = 40000;  // whole-line truncation budget for the observation text
  double temperature = 0.0;
  int max_tokens = 4096;
  std::string model_id;
};

struct MemoryUpdateOptions {
  double temperature = 0.0;
  int max_tokens = 4096;
  std::string model_id;
  int memory_cap = 0;  // 0 = render every entry
};

// Summarizes one observation into a natural-language state description.
// Long observations are cut from the bottom, whole lines only, so the URL
// and scroll header always survive.
inline StateSummary encode_observation(Backend& backend, const AgentIdentity& identity,
                                       const GoalSpec& goal, const Observation& obs,
                                       int step_index, const EncodeOptions& opts = {}) {
  ChatRequest req;
  req.system = render_identity(identity, goal);
  req.user = prompts::encoder(truncate_lines(observation_text(obs), opts.max_obs_chars));
  req.temperature = opts.temperature;
  req.n_samples = 1;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;
  try {
    return StateSummary{complete_and_extract(backend, req, "state"), step_index};
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MissingTag) {
      fail(ErrorKind::EncodeFailure, std::string("no <state> in encoder response: ") + e.what());
    }
    throw;
  }
}

// Produces the memory-update text recorded alongside a chosen intent.
inline std::string generate_memory_update(Backend& backend, const AgentIdentity& identity,
                                          const GoalSpec& goal, const BeliefState& belief,
                                          const std::string& chosen_intent,
                                          const MemoryUpdateOptions& opts = {}) {
  ChatRequest req;
  req.system = render_identity(identity, goal);
  req.user = prompts::memory_update(render_memory(belief, opts.memory_cap), belief.current.text,
                                    chosen_intent);
  req.temperature = opts.temperature;
  req.n_samples = 1;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;
  try {
    return complete_and_extract(backend, req, "memory_update");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MissingTag) {
      fail(ErrorKind::MemoryUpdateFailure,
           std::string("no <memory_update> in response: ") + e.what());
    }
    throw;
  }
}

}  // namespace simura
