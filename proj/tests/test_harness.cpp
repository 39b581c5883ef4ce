#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "simura/driver.hpp"
#include "simura/harness.hpp"
#include "support/matchers.hpp"

using namespace simura;
using nlohmann::json;

namespace {

const GoalSpec kGoal{"Find the cheapest nonstop flight from SFO to JFK and report its price.",
                     "2025-03-01 09:00:00"};

SiteGraph flight_graph() { return load_site_graph_file(std::string(SIMURA_FIXTURE_DIR) + "/flight_site.json"); }
SiteGraph crash_graph() { return load_site_graph_file(std::string(SIMURA_FIXTURE_DIR) + "/crash_site.json"); }

std::vector<ScriptedRule> trap_script() {
  std::ifstream in(std::string(SIMURA_FIXTURE_DIR) + "/scripts/flight_trap.json");
  REQUIRE(in);
  return json::parse(in).get<std::vector<ScriptedRule>>();
}

AgentConfig trap_config(const std::string& planner) {
  AgentConfig cfg;
  cfg.goal = kGoal;
  cfg.planner = planner;
  cfg.plan.m_samples = 2;
  cfg.plan.n_verdicts = 2;
  return cfg;
}

}  // namespace

TEST_CASE("simulative planning sidesteps the ad trap the baseline falls into") {
  // Same stub script, same environment, same goal; the only difference is the
  // planner. Sample 0 of the policy is the sponsored-ad bait.
  ScriptedBackend wm_backend(trap_script());
  MockEnvironment wm_env(flight_graph());
  EpisodeTrace wm = run_episode(wm_backend, wm_env, trap_config("world_model"));

  CHECK(wm.outcome.category == OutcomeCategory::response_returned);
  REQUIRE(wm.outcome.final_message.has_value());
  CHECK(*wm.outcome.final_message ==
        "The cheapest nonstop flight from SFO to JFK is UA 1234 at $214.");
  REQUIRE(wm.steps.size() == 2);
  CHECK(wm.steps[0].action == "click('9')");
  CHECK(wm.steps[1].action ==
        "send_msg_to_user('The cheapest nonstop flight from SFO to JFK is UA 1234 at $214.')");
  CHECK(wm.steps[0].observation.url == "https://flights.example/");
  CHECK(wm.steps[1].observation.url == "https://flights.example/results?from=SFO&to=JFK");
  CHECK(wm.error_count == 0);
  // Per planning step: 1 encode + 1 policy + 1 clustering + 2x(memory, model,
  // critic) + 1 actor = 10 calls.
  CHECK(wm_backend.call_count() == 20);

  REQUIRE(wm.steps[0].diagnostics.has_value());
  const PlanDiagnostics& diag = *wm.steps[0].diagnostics;
  REQUIRE(diag.branch_scores.size() == 2);
  CHECK(diag.branch_scores[0].value.value == 0.0);  // the simulated ad detour
  CHECK(diag.branch_scores[1].value.value == 1.0);  // the simulated search
  CHECK(diag.chosen_index == 1);
  CHECK(!diag.tie_broken);
  CHECK(wm.steps[0].intent == "Click the Search flights button");
  CHECK(wm.steps[0].memory_update == "Step 1: submitted the flight search from the home page.");

  ScriptedBackend base_backend(trap_script());
  MockEnvironment base_env(flight_graph());
  EpisodeTrace base = run_episode(base_backend, base_env, trap_config("autoregressive"));

  CHECK(base.outcome.category == OutcomeCategory::repetitive_actions);
  REQUIRE(base.steps.size() == 3);
  CHECK(base.steps[0].intent == "Click the sponsored ad link promising cheap flights");
  for (const StepRecord& r : base.steps) {
    CHECK(r.action == "click('901')");
    CHECK(!r.diagnostics.has_value());
  }
  CHECK(base.steps[1].observation.url == "https://ads.example/deal");
  // Per baseline step: encode + policy + memory update + actor = 4 calls.
  CHECK(base_backend.call_count() == 12);
}

TEST_CASE("an episode replays byte-identically from the same script and fixture") {
  auto run_once = [] {
    ScriptedBackend backend(trap_script());
    MockEnvironment env(flight_graph());
    return trace_to_jsonl(run_episode(backend, env, trap_config("world_model")));
  };
  std::string first = run_once();
  CHECK(first == run_once());

  // Shape of the persisted trace: header, contiguous steps, exactly one footer.
  std::vector<json> lines;
  size_t start = 0;
  while (start < first.size()) {
    size_t end = first.find('\n', start);
    lines.push_back(json::parse(first.substr(start, end - start)));
    start = end + 1;
  }
  REQUIRE(lines.size() == 4);
  CHECK(lines.front()["kind"] == "episode_header");
  CHECK(lines.front()["config"]["agent"]["planner"] == "world_model");
  CHECK(lines[1]["kind"] == "step_record");
  CHECK(lines[1]["step"] == 1);
  CHECK(lines[2]["step"] == 2);
  CHECK(lines.back()["kind"] == "episode_footer");
  CHECK(lines.back()["outcome"]["category"] == "response_returned");
  CHECK(lines.back()["total_ms"] == 0.0);
}

TEST_CASE("four grounding failures exhaust the error budget") {
  ScriptedRule encoder;
  encoder.user_contains = {"Wrap your response in the tag <state>"};
  encoder.responses = {"<state>The home page.</state>"};
  encoder.repeatable = true;
  ScriptedRule policy;
  policy.user_contains = {"# Intent:"};
  policy.responses = {"<intent>Click the phantom button</intent>"};
  policy.repeatable = true;
  ScriptedRule memory;
  memory.user_contains = {"<memory_update>"};
  memory.responses = {"<memory_update>Tried the phantom button.</memory_update>"};
  memory.repeatable = true;
  ScriptedRule actor;
  actor.user_contains = {"# Action:"};
  actor.responses = {"<action>click('777')</action>"};  // bid not on any page
  actor.repeatable = true;

  ScriptedBackend backend({encoder, policy, memory, actor});
  MockEnvironment env(flight_graph());
  EpisodeTrace trace = run_episode(backend, env, trap_config("autoregressive"));

  CHECK(trace.outcome.category == OutcomeCategory::action_errors);
  CHECK(trace.error_count == 4);  // budget is 3; the fourth error stops the run
  REQUIRE(trace.steps.size() == 4);
  for (const StepRecord& r : trace.steps) {
    CHECK(!r.action.has_value());  // the environment was never touched
    REQUIRE(r.component_error.has_value());
    CHECK(r.component_error->find("BidNotInObservation") != std::string::npos);
    CHECK(r.observation.url == "https://flights.example/");
  }
}

TEST_CASE("a rejected action costs an error but the episode recovers") {
  ScriptedRule encoder;
  encoder.user_contains = {"Wrap your response in the tag <state>"};
  encoder.responses = {"<state>The home page.</state>"};
  encoder.repeatable = true;
  ScriptedRule policy;
  policy.user_contains = {"# Intent:"};
  policy.responses = {"<intent>Write a note into the page heading</intent>",
                      "<intent>Report that the heading is not editable</intent>"};
  policy.mode = "cycled";
  policy.repeatable = true;
  ScriptedRule memory;
  memory.user_contains = {"<memory_update>"};
  memory.responses = {"<memory_update>Noted.</memory_update>"};
  memory.repeatable = true;
  ScriptedRule actor;
  actor.user_contains = {"# Action:"};
  actor.responses = {"<action>fill('2', 'note')</action>",  // bid 2 is a heading, not a field
                     "<action>send_msg_to_user('That element is not editable.')</action>"};
  actor.mode = "cycled";
  actor.repeatable = true;

  ScriptedBackend backend({encoder, policy, memory, actor});
  MockEnvironment env(flight_graph());
  EpisodeTrace trace = run_episode(backend, env, trap_config("autoregressive"));

  CHECK(trace.outcome.category == OutcomeCategory::response_returned);
  CHECK(trace.error_count == 1);
  REQUIRE(trace.steps.size() == 2);
  REQUIRE(trace.steps[0].env_error.has_value());
  CHECK(trace.steps[0].env_error->kind == "action_rejected");
  REQUIRE(trace.steps[1].observation.last_action_error.has_value());
}

TEST_CASE("an environment crash ends the episode as browser_crashed") {
  ScriptedRule encoder;
  encoder.user_contains = {"Wrap your response in the tag <state>"};
  encoder.responses = {"<state>A dashboard launcher page.</state>"};
  encoder.repeatable = true;
  ScriptedRule policy;
  policy.user_contains = {"# Intent:"};
  policy.responses = {"<intent>Open the dashboard</intent>"};
  policy.repeatable = true;
  ScriptedRule memory;
  memory.user_contains = {"<memory_update>"};
  memory.responses = {"<memory_update>Opening the dashboard.</memory_update>"};
  memory.repeatable = true;
  ScriptedRule actor;
  actor.user_contains = {"# Action:"};
  actor.responses = {"<action>click('41')</action>"};
  actor.repeatable = true;

  ScriptedBackend backend({encoder, policy, memory, actor});
  MockEnvironment env(crash_graph());
  EpisodeTrace trace = run_episode(backend, env, trap_config("autoregressive"));

  CHECK(trace.outcome.category == OutcomeCategory::browser_crashed);
  REQUIRE(trace.steps.size() == 1);
  REQUIRE(trace.steps[0].env_error.has_value());
  CHECK(trace.steps[0].env_error->kind == "crash");
  CHECK(trace.error_count == 0);  // a crash is not an action error
}

TEST_CASE("outcome precedence is total") {
  RunLimits limits;  // 30 / 3 / 3

  EpisodeHistory h;
  h.message_sent = true;
  h.final_message = "done";
  h.crashed = true;
  h.error_count = 99;
  h.max_consecutive_repeats = 99;
  h.steps = 30;
  CHECK(classify_outcome(h, limits).category == OutcomeCategory::response_returned);
  CHECK(classify_outcome(h, limits).final_message == "done");

  h.message_sent = false;
  CHECK(classify_outcome(h, limits).category == OutcomeCategory::browser_crashed);

  h.crashed = false;
  CHECK(classify_outcome(h, limits).category == OutcomeCategory::action_errors);

  h.error_count = 3;  // budget is "more than 3"
  CHECK(classify_outcome(h, limits).category == OutcomeCategory::repetitive_actions);

  h.max_consecutive_repeats = 2;
  CHECK(classify_outcome(h, limits).category == OutcomeCategory::max_steps_reached);

  // Structured-answer mode: an unparseable message becomes parsing_error.
  EpisodeHistory structured;
  structured.message_sent = true;
  structured.final_message = "I could not find the price.";
  structured.answer_ok = false;
  CHECK(classify_outcome(structured, limits).category == OutcomeCategory::parsing_error);
  structured.answer_ok = true;
  CHECK(classify_outcome(structured, limits).category == OutcomeCategory::response_returned);
}

TEST_CASE("the answer pattern gates response_returned in structured mode") {
  ScriptedRule encoder;
  encoder.user_contains = {"Wrap your response in the tag <state>"};
  encoder.responses = {"<state>The home page.</state>"};
  encoder.repeatable = true;
  ScriptedRule policy;
  policy.user_contains = {"# Intent:"};
  policy.responses = {"<intent>Give up and apologize</intent>"};
  policy.repeatable = true;
  ScriptedRule memory;
  memory.user_contains = {"<memory_update>"};
  memory.responses = {"<memory_update>Giving up.</memory_update>"};
  memory.repeatable = true;
  ScriptedRule actor;
  actor.user_contains = {"# Action:"};
  actor.responses = {"<action>send_msg_to_user('Sorry, I could not find out.')</action>"};
  actor.repeatable = true;

  ScriptedBackend backend({encoder, policy, memory, actor});
  MockEnvironment env(flight_graph());
  AgentConfig cfg = trap_config("autoregressive");
  cfg.answer_pattern = R"(\$\d+)";
  EpisodeTrace trace = run_episode(backend, env, cfg);
  CHECK(trace.outcome.category == OutcomeCategory::parsing_error);
  CHECK(trace.outcome.final_message == "Sorry, I could not find out.");
}

TEST_CASE("outcome aggregation reports all categories as percentages") {
  std::vector<Outcome> outcomes;
  for (int i = 0; i < 4; ++i) outcomes.push_back({OutcomeCategory::response_returned, "ok"});
  for (int i = 0; i < 6; ++i) outcomes.push_back({OutcomeCategory::max_steps_reached, {}});
  OutcomeStats stats = aggregate_outcomes(outcomes);
  CHECK(stats.total == 10);
  CHECK(stats.percentages.at("response_returned") == 40.0);
  CHECK(stats.percentages.at("max_steps_reached") == 60.0);
  CHECK(stats.percentages.at("browser_crashed") == 0.0);
  CHECK(stats.percentages.size() == 6);

  OutcomeStats one = aggregate_outcomes(std::vector<Outcome>{{OutcomeCategory::parsing_error, {}}});
  CHECK(one.percentages.at("parsing_error") == 100.0);

  CHECK_THROWS_MATCHES(aggregate_outcomes(std::vector<Outcome>{}), Error,
                       ErrorKindIs(ErrorKind::EmptyInput));

  std::mt19937 rng(7);
  for (int round = 0; round < 20; ++round) {
    std::vector<Outcome> sample;
    int n = 1 + int(rng() % 50);
    for (int i = 0; i < n; ++i) {
      sample.push_back({kOutcomeCategories[rng() % kOutcomeCategories.size()], {}});
    }
    OutcomeStats s = aggregate_outcomes(sample);
    double sum = 0.0;
    int count_sum = 0;
    for (const auto& [name, pct] : s.percentages) sum += pct;
    for (const auto& [name, c] : s.counts) count_sum += c;
    CHECK(sum == Catch::Approx(100.0).margin(0.1));
    CHECK(count_sum == n);
  }
}

TEST_CASE("the focused-browsing mode swaps only the identity description") {
  AgentConfig plain = trap_config("world_model");
  AgentConfig focused = plain;
  focused.webarena_mode = true;

  AgentIdentity a = agent_identity(plain);
  AgentIdentity b = agent_identity(focused);
  CHECK(a.name == b.name);
  CHECK(a.observation_space_doc == b.observation_space_doc);
  CHECK(a.action_space_doc == b.action_space_doc);
  CHECK(a.description != b.description);

  // The rendered system prompts differ exactly in the description block.
  std::string pa = render_identity(a, kGoal);
  std::string pb = render_identity(b, kGoal);
  size_t desc_a = pa.find("# Description:");
  size_t obs_a = pa.find("# Observation Space:");
  size_t desc_b = pb.find("# Description:");
  size_t obs_b = pb.find("# Observation Space:");
  CHECK(pa.substr(0, desc_a) == pb.substr(0, desc_b));
  CHECK(pa.substr(obs_a) == pb.substr(obs_b));

  CHECK(effective_limits(focused, RunLimits{}).max_steps == 15);
  CHECK(effective_limits(plain, RunLimits{}).max_steps == 30);
  CHECK(effective_limits(focused, RunLimits{}).repeat_limit == 3);
}

TEST_CASE("run limits and agent configs are validated up front") {
  CHECK_THROWS_MATCHES(validate(RunLimits{0, 3, 3}), Error, ErrorKindIs(ErrorKind::ConfigError));
  CHECK_THROWS_MATCHES(validate(RunLimits{30, 0, 3}), Error, ErrorKindIs(ErrorKind::ConfigError));

  AgentConfig cfg = trap_config("mcts_planner");
  ScriptedBackend backend;
  MockEnvironment env(flight_graph());
  CHECK_THROWS_MATCHES(run_episode(backend, env, cfg), Error,
                       ErrorKindIs(ErrorKind::ConfigError));

  AgentConfig bad_pattern = trap_config("autoregressive");
  bad_pattern.answer_pattern = "([unterminated";
  CHECK_THROWS_MATCHES(run_episode(backend, env, bad_pattern), Error,
                       ErrorKindIs(ErrorKind::ConfigError));
}

TEST_CASE("episodes run unchanged over the wire protocol") {
  ScriptedBackend backend(trap_script());
  MockEnvironment local(flight_graph());
  DriverServer server(local);
  server.start();
  DriverClient remote("127.0.0.1", server.port());

  EpisodeTrace trace = run_episode(backend, remote, trap_config("world_model"));
  CHECK(trace.outcome.category == OutcomeCategory::response_returned);
  CHECK(trace.steps.size() == 2);
  server.stop();

  ScriptedBackend backend2(trap_script());
  MockEnvironment direct(flight_graph());
  EpisodeTrace local_trace = run_episode(backend2, direct, trap_config("world_model"));
  CHECK(trace_to_jsonl(trace) == trace_to_jsonl(local_trace));
}
