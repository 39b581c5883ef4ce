#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simura/core.hpp"
#include "simura/critic.hpp"
#include "simura/errors.hpp"
#include "simura/llm.hpp"
#include "simura/perception.hpp"
#include "simura/proposer.hpp"
#include "simura/simulator.hpp"

// Planning stage: expand every intent cluster through the world model,
// score the simulated outcome with the critic, and commit to the argmax.
// Depth 1 is the default; deeper horizons re-plan from the simulated
// belief and propagate the best terminal value.

namespace simura {

struct PlanConfig {
  int m_samples = 20;
  int n_verdicts = 20;
  int depth = 1;
  int branch_cap = 10;
  std::string search = "dfs";  // "mcts" is a reserved name, not implemented
  double policy_temperature = 1.0;
  double critic_temperature = 1.0;
  double deterministic_temperature = 0.0;  // encoder/world model/memory update/actor/clustering
  std::string model_id;
  int max_tokens = 4096;
  int memory_cap = 0;  // rendered memory window, 0 = unlimited
};

inline void validate(const PlanConfig& cfg) {
  if (cfg.m_samples < 1 || cfg.n_verdicts < 1 || cfg.depth < 1 || cfg.branch_cap < 1) {
    fail(ErrorKind::ConfigError, "plan config values must be positive");
  }
  if (cfg.search != "dfs") {
    fail(ErrorKind::ConfigError, "search '" + cfg.search + "' is not implemented (only dfs)");
  }
}

inline void to_json(nlohmann::json& j, const PlanConfig& c) {
  j = nlohmann::json{{"kind", "plan_config"},
                     {"m_samples", c.m_samples},
                     {"n_verdicts", c.n_verdicts},
                     {"depth", c.depth},
                     {"branch_cap", c.branch_cap},
                     {"search", c.search},
                     {"policy_temperature", c.policy_temperature},
                     {"critic_temperature", c.critic_temperature},
                     {"deterministic_temperature", c.deterministic_temperature},
                     {"model_id", c.model_id},
                     {"max_tokens", c.max_tokens},
                     {"memory_cap", c.memory_cap}};
}
inline void from_json(const nlohmann::json& j, PlanConfig& c) {
  c = PlanConfig{};
  if (j.contains("m_samples")) j.at("m_samples").get_to(c.m_samples);
  if (j.contains("n_verdicts")) j.at("n_verdicts").get_to(c.n_verdicts);
  if (j.contains("depth")) j.at("depth").get_to(c.depth);
  if (j.contains("branch_cap")) j.at("branch_cap").get_to(c.branch_cap);
  if (j.contains("search")) j.at("search").get_to(c.search);
  if (j.contains("policy_temperature")) j.at("policy_temperature").get_to(c.policy_temperature);
  if (j.contains("critic_temperature")) j.at("critic_temperature").get_to(c.critic_temperature);
  if (j.contains("deterministic_temperature")) {
    j.at("deterministic_temperature").get_to(c.deterministic_temperature);
  }
  if (j.contains("model_id")) j.at("model_id").get_to(c.model_id);
  if (j.contains("max_tokens")) j.at("max_tokens").get_to(c.max_tokens);
  if (j.contains("memory_cap")) j.at("memory_cap").get_to(c.memory_cap);
}

struct BranchScore {
  int cluster_index = 0;                          // index into PlanDiagnostics.clusters
  ValueEstimate value;                            // zero-valued when the branch failed
  std::optional<StateSummary> predicted_summary;  // absent when the branch failed
  std::string memory_update;                      // empty if failure preceded that stage
  std::optional<std::string> failure;             // "<ErrorKind>: message"
};

struct PlanDiagnostics {
  IntentClusterSet clusters;
  std::vector<BranchScore> branch_scores;  // one per expanded (capped) branch
  int chosen_index = 0;                    // cluster index of the winner
  bool tie_broken = false;
};

inline void to_json(nlohmann::json& j, const BranchScore& b) {
  j = nlohmann::json{{"cluster_index", b.cluster_index},
                     {"value", b.value},
                     {"predicted_summary",
                      b.predicted_summary ? nlohmann::json(*b.predicted_summary) : nlohmann::json()},
                     {"memory_update", b.memory_update},
                     {"failure", b.failure ? nlohmann::json(*b.failure) : nlohmann::json()}};
}
inline void from_json(const nlohmann::json& j, BranchScore& b) {
  j.at("cluster_index").get_to(b.cluster_index);
  j.at("value").get_to(b.value);
  if (!j.at("predicted_summary").is_null()) {
    b.predicted_summary = j.at("predicted_summary").get<StateSummary>();
  }
  j.at("memory_update").get_to(b.memory_update);
  if (!j.at("failure").is_null()) b.failure = j.at("failure").get<std::string>();
}
inline void to_json(nlohmann::json& j, const PlanDiagnostics& d) {
  j = nlohmann::json{{"kind", "plan_diagnostics"},
                     {"clusters", d.clusters},
                     {"branch_scores", d.branch_scores},
                     {"chosen_index", d.chosen_index},
                     {"tie_broken", d.tie_broken}};
}
inline void from_json(const nlohmann::json& j, PlanDiagnostics& d) {
  j.at("clusters").get_to(d.clusters);
  j.at("branch_scores").get_to(d.branch_scores);
  j.at("chosen_index").get_to(d.chosen_index);
  j.at("tie_broken").get_to(d.tie_broken);
}

namespace detail {

inline ProposeOptions propose_options(const PlanConfig& cfg) {
  return ProposeOptions{cfg.policy_temperature, cfg.max_tokens, cfg.model_id, cfg.memory_cap};
}
inline ClusterOptions cluster_options(const PlanConfig& cfg) {
  return ClusterOptions{cfg.deterministic_temperature, cfg.max_tokens, cfg.model_id};
}
inline MemoryUpdateOptions memory_options(const PlanConfig& cfg) {
  return MemoryUpdateOptions{cfg.deterministic_temperature, cfg.max_tokens, cfg.model_id,
                             cfg.memory_cap};
}
inline SimulateOptions simulate_options(const PlanConfig& cfg) {
  return SimulateOptions{cfg.deterministic_temperature, cfg.max_tokens, cfg.model_id,
                         cfg.memory_cap};
}
inline CriticOptions critic_options(const PlanConfig& cfg) {
  return CriticOptions{cfg.critic_temperature, cfg.max_tokens, cfg.model_id, cfg.memory_cap};
}

// Value of a belief state `depth` simulated steps from the horizon: the
// critic scores the horizon itself; deeper states take the best child.
inline double plan_value(Backend& backend, const AgentIdentity& identity, const GoalSpec& goal,
                         const BeliefState& belief, int depth, const PlanConfig& cfg) {
  if (depth == 0) {
    return sample_verdicts(backend, identity, goal, belief, cfg.n_verdicts, critic_options(cfg))
        .value;
  }
  auto intents = propose_intents(backend, identity, goal, belief, cfg.m_samples,
                                 propose_options(cfg));
  IntentClusterSet set = cluster_intents(backend, identity, goal, intents, cluster_options(cfg));
  double best = 0.0;
  bool any = false;
  for (const IntentCluster& cluster : select_branches(set, cfg.branch_cap)) {
    try {
      std::string update = generate_memory_update(backend, identity, goal, belief,
                                                  cluster.representative, memory_options(cfg));
      std::string next = predict_next_summary(backend, identity, goal, belief, update,
                                              cluster.representative, simulate_options(cfg));
      BeliefState sim =
          advance_belief(belief, SimulatedAction{cluster.representative, std::nullopt}, update,
                         next);
      double v = plan_value(backend, identity, goal, sim, depth - 1, cfg);
      if (!any || v > best) best = v;
      any = true;
    } catch (const Error&) {
      if (!any) best = 0.0, any = true;  // failed branch contributes a floor of 0
    }
  }
  return best;
}

}  // namespace detail

// Baseline: commit to the first policy sample. Exactly one backend call on
// the happy path; no clustering, simulation, or critic involvement.
inline SimulatedAction plan_autoregressive(Backend& backend, const AgentIdentity& identity,
                                           const GoalSpec& goal, const BeliefState& belief,
                                           const PlanConfig& cfg = {}) {
  return propose_intents(backend, identity, goal, belief, 1, detail::propose_options(cfg))
      .front();
}

inline std::pair<SimulatedAction, PlanDiagnostics> plan_world_model(Backend& backend,
                                                                    const AgentIdentity& identity,
                                                                    const GoalSpec& goal,
                                                                    const BeliefState& belief,
                                                                    const PlanConfig& cfg = {}) {
  validate(cfg);

  std::vector<SimulatedAction> intents;
  try {
    intents = propose_intents(backend, identity, goal, belief, cfg.m_samples,
                              detail::propose_options(cfg));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::AllSamplesMalformed) {
      fail(ErrorKind::PlanningFailure, std::string("policy produced no usable intent: ") +
                                           e.what());
    }
    throw;
  }

  PlanDiagnostics diag;
  diag.clusters =
      cluster_intents(backend, identity, goal, intents, detail::cluster_options(cfg));

  std::vector<int> branch_indices;
  {
    auto branches = select_branches(diag.clusters, cfg.branch_cap);
    for (const auto& b : branches) {
      for (size_t i = 0; i < diag.clusters.clusters.size(); ++i) {
        if (diag.clusters.clusters[i].member_ids.front() == b.member_ids.front()) {
          branch_indices.push_back(static_cast<int>(i));
          break;
        }
      }
    }
  }

  for (int index : branch_indices) {
    const IntentCluster& cluster = diag.clusters.clusters[static_cast<size_t>(index)];
    BranchScore score;
    score.cluster_index = index;
    try {
      score.memory_update = generate_memory_update(backend, identity, goal, belief,
                                                   cluster.representative,
                                                   detail::memory_options(cfg));
      std::string next =
          predict_next_summary(backend, identity, goal, belief, score.memory_update,
                               cluster.representative, detail::simulate_options(cfg));
      BeliefState sim = advance_belief(
          belief, SimulatedAction{cluster.representative, std::nullopt}, score.memory_update,
          next);
      score.predicted_summary = sim.current;
      if (cfg.depth == 1) {
        score.value = sample_verdicts(backend, identity, goal, sim, cfg.n_verdicts,
                                      detail::critic_options(cfg));
      } else {
        score.value.value = detail::plan_value(backend, identity, goal, sim, cfg.depth - 1, cfg);
        score.value.n_requested = cfg.n_verdicts;
      }
    } catch (const Error& e) {
      score.value = ValueEstimate{};
      score.value.n_requested = cfg.n_verdicts;
      score.predicted_summary.reset();
      score.failure = std::string(to_string(e.kind())) + ": " + e.what();
    }
    diag.branch_scores.push_back(std::move(score));
  }

  // branch_scores are in cluster-index order; argmax with ties to the
  // lowest cluster index.
  const BranchScore* best = &diag.branch_scores.front();
  int max_count = 1;
  for (size_t i = 1; i < diag.branch_scores.size(); ++i) {
    const BranchScore& b = diag.branch_scores[i];
    if (b.value.value > best->value.value) {
      best = &b;
      max_count = 1;
    } else if (b.value.value == best->value.value) {
      ++max_count;
    }
  }
  diag.chosen_index = best->cluster_index;
  diag.tie_broken = max_count > 1;

  const IntentCluster& winner = diag.clusters.clusters[static_cast<size_t>(diag.chosen_index)];
  return {SimulatedAction{winner.representative, std::nullopt}, std::move(diag)};
}

}  // namespace simura
