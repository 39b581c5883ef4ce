#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "simura/core.hpp"
#include "simura/errors.hpp"
#include "simura/llm.hpp"
#include "simura/prompts.hpp"
#include "simura/text.hpp"

// Policy stage: sample M candidate intents in one batched call, then group
// semantically equivalent ones into the planner's branch set.

namespace simura {

struct IntentCluster {
  std::string representative;   // what the simulator and actor consume
  std::vector<int> member_ids;  // sorted ascending
  bool operator==(const IntentCluster&) const = default;
};

struct IntentClusterSet {
  std::vector<IntentCluster> clusters;  // ordered by smallest member id
  int source_count = 0;                 // M
  bool operator==(const IntentClusterSet&) const = default;
};

inline void to_json(nlohmann::json& j, const IntentCluster& c) {
  j = nlohmann::json{{"representative", c.representative}, {"member_ids", c.member_ids}};
}
inline void from_json(const nlohmann::json& j, IntentCluster& c) {
  j.at("representative").get_to(c.representative);
  j.at("member_ids").get_to(c.member_ids);
}
inline void to_json(nlohmann::json& j, const IntentClusterSet& s) {
  j = nlohmann::json{{"kind", "intent_cluster_set"},
                     {"clusters", s.clusters},
                     {"source_count", s.source_count}};
}
inline void from_json(const nlohmann::json& j, IntentClusterSet& s) {
  j.at("clusters").get_to(s.clusters);
  j.at("source_count").get_to(s.source_count);
}

struct ProposeOptions {
  double temperature = 1.0;
  int max_tokens = 4096;
  std::string model_id;
  int memory_cap = 0;
};

struct ClusterOptions {
  double temperature = 0.0;
  int max_tokens = 4096;
  std::string model_id;
};

namespace detail {

inline std::optional<SimulatedAction> parse_intent_sample(const std::string& sample) {
  SimulatedAction a;
  try {
    a.intent = extract_tag(sample, "intent");
  } catch (const Error&) {
    return std::nullopt;
  }
  if (a.intent.empty()) return std::nullopt;
  try {
    a.think = extract_tag(sample, "think");
  } catch (const Error&) {
    a.think.reset();
  }
  return a;
}

// Orders clusters by smallest member id and sorts members; callers must
// have validated the partition first.
inline IntentClusterSet finalize_cluster_set(std::vector<IntentCluster> clusters, int m) {
  for (auto& c : clusters) std::sort(c.member_ids.begin(), c.member_ids.end());
  std::sort(clusters.begin(), clusters.end(), [](const IntentCluster& a, const IntentCluster& b) {
    return a.member_ids.front() < b.member_ids.front();
  });
  return IntentClusterSet{std::move(clusters), m};
}

inline std::string normalize_intent(const std::string& text) {
  std::string out = collapse_ws(to_lower(trim(text)));
  while (!out.empty() && (out.back() == '.' || out.back() == '!' || out.back() == '?' ||
                          out.back() == ',' || out.back() == ';')) {
    out.pop_back();
  }
  return out;
}

// The model may fence the JSON; take the outermost brace span.
inline std::optional<nlohmann::json> parse_json_object(const std::string& text) {
  size_t open = text.find('{');
  size_t close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    return std::nullopt;
  }
  nlohmann::json j = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

}  // namespace detail

// Samples m candidate intents from the policy. Samples that lack a usable
// <intent> are dropped; an all-malformed batch is retried once with a tag
// reminder before giving up.
inline std::vector<SimulatedAction> propose_intents(Backend& backend, const AgentIdentity& identity,
                                                    const GoalSpec& goal, const BeliefState& belief,
                                                    int m, const ProposeOptions& opts = {}) {
  if (m < 1) fail(ErrorKind::ConfigError, "propose_intents requires m >= 1");
  ChatRequest req;
  req.system = render_identity(identity, goal);
  req.user = prompts::policy(render_memory(belief, opts.memory_cap), belief.current.text);
  req.temperature = opts.temperature;
  req.n_samples = m;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;

  for (int attempt = 0; attempt < 2; ++attempt) {
    Completion c = backend.complete(req);
    std::vector<SimulatedAction> intents;
    for (const auto& sample : c.samples) {
      if (auto a = detail::parse_intent_sample(sample)) intents.push_back(std::move(*a));
    }
    if (!intents.empty()) return intents;
    req.user += "\n\nReminder: wrap your response in the tag <intent> and </intent>.";
  }
  fail(ErrorKind::AllSamplesMalformed, "no policy sample contained a usable <intent>");
}

// Groups equal intents by normalized text; representative keeps the first
// member's original wording.
inline IntentClusterSet fallback_cluster(const std::vector<SimulatedAction>& intents) {
  if (intents.empty()) fail(ErrorKind::ConfigError, "fallback_cluster requires intents");
  std::vector<IntentCluster> clusters;
  std::map<std::string, size_t> seen;
  for (size_t i = 0; i < intents.size(); ++i) {
    std::string key = detail::normalize_intent(intents[i].intent);
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, clusters.size());
      clusters.push_back(IntentCluster{intents[i].intent, {static_cast<int>(i)}});
    } else {
      clusters[it->second].member_ids.push_back(static_cast<int>(i));
    }
  }
  return detail::finalize_cluster_set(std::move(clusters), static_cast<int>(intents.size()));
}

// One clustering call; any structural violation in the reply (bad ids,
// duplicates, gaps) falls back to the normalization-based partition, so the
// result is always a valid partition of {0..M-1}.
inline IntentClusterSet cluster_intents(Backend& backend, const AgentIdentity& identity,
                                        const GoalSpec& goal,
                                        const std::vector<SimulatedAction>& intents,
                                        const ClusterOptions& opts = {}) {
  if (intents.empty()) fail(ErrorKind::ConfigError, "cluster_intents requires intents");
  const int m = static_cast<int>(intents.size());
  if (m == 1) {
    return IntentClusterSet{{IntentCluster{intents[0].intent, {0}}}, 1};
  }

  nlohmann::ordered_json dict = nlohmann::ordered_json::object();
  for (int i = 0; i < m; ++i) dict[std::to_string(i)] = intents[i].intent;

  ChatRequest req;
  req.system = render_identity(identity, goal);
  req.user = prompts::clustering(dict.dump(2));
  req.temperature = opts.temperature;
  req.n_samples = 1;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;
  Completion c = backend.complete(req);

  auto reply = detail::parse_json_object(c.samples.at(0));
  if (!reply) return fallback_cluster(intents);

  std::vector<IntentCluster> clusters;
  std::set<int> used;
  for (const auto& [key, value] : reply->items()) {
    if (!value.is_object() || !value.contains("candidates") ||
        !value.at("candidates").is_array()) {
      return fallback_cluster(intents);
    }
    IntentCluster cluster;
    for (const auto& id : value.at("candidates")) {
      int member = -1;
      if (id.is_number_integer()) {
        member = id.get<int>();
      } else if (id.is_string()) {
        try {
          member = std::stoi(id.get<std::string>());
        } catch (...) {
          return fallback_cluster(intents);
        }
      } else {
        return fallback_cluster(intents);
      }
      if (member < 0 || member >= m || !used.insert(member).second) {
        return fallback_cluster(intents);
      }
      cluster.member_ids.push_back(member);
    }
    if (cluster.member_ids.empty()) return fallback_cluster(intents);
    if (value.contains("intent") && value.at("intent").is_string() &&
        !value.at("intent").get<std::string>().empty()) {
      cluster.representative = value.at("intent").get<std::string>();
    } else {
      cluster.representative =
          intents[*std::min_element(cluster.member_ids.begin(), cluster.member_ids.end())].intent;
    }
    clusters.push_back(std::move(cluster));
  }
  if (static_cast<int>(used.size()) != m) return fallback_cluster(intents);
  return detail::finalize_cluster_set(std::move(clusters), m);
}

// Planner branch list: at most cap clusters, preferring larger clusters
// (ties by smaller min member id), listed in min-member order.
inline std::vector<IntentCluster> select_branches(const IntentClusterSet& set, int cap) {
  std::vector<IntentCluster> out = set.clusters;
  if (cap > 0 && static_cast<int>(out.size()) > cap) {
    std::stable_sort(out.begin(), out.end(), [](const IntentCluster& a, const IntentCluster& b) {
      if (a.member_ids.size() != b.member_ids.size()) {
        return a.member_ids.size() > b.member_ids.size();
      }
      return a.member_ids.front() < b.member_ids.front();
    });
    out.resize(static_cast<size_t>(cap));
    std::sort(out.begin(), out.end(), [](const IntentCluster& a, const IntentCluster& b) {
      return a.member_ids.front() < b.member_ids.front();
    });
  }
  return out;
}

}  // namespace simura
