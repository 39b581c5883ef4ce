#include <catch2/catch_amalgamated.hpp>

#include "simura/perception.hpp"
#include "support/matchers.hpp"

using namespace simura;

namespace {

const AgentIdentity kIdentity{"Agent", "identity description", "obs", "actions"};
const GoalSpec kGoal{"find a flight", "2025-03-01 09:00:00"};

Observation sample_obs() {
  Observation obs;
  obs.url = "https://flights.example";
  obs.scroll_position = 0;
  obs.window_height = 720;
  obs.webpage_height = 3024;
  obs.remaining_pixels = 2304;
  obs.scrolling_progress = 720.0 / 3024.0 * 100.0;
  obs.axtree_text = "RootWebArea 'Flights'\n    [5] textbox 'Origin'";
  return obs;
}

}  // namespace

TEST_CASE("encoder wraps the observation in the state prompt under the identity") {
  ScriptedRule r;
  r.user_contains = {"# Observation:\nURL https://flights.example",
                     "Wrap your response in the tag <state>"};
  r.system_contains = {"# Instruction:\nfind a flight"};
  r.responses = {"<state>A flight search form with an origin textbox.</state>"};
  ScriptedBackend backend({r});

  StateSummary summary = encode_observation(backend, kIdentity, kGoal, sample_obs(), 3);
  CHECK(summary.text == "A flight search form with an origin textbox.");
  CHECK(summary.step_index == 3);

  auto log = backend.request_log();
  REQUIRE(log.size() == 1);
  CHECK(log[0].temperature == 0.0);
  CHECK(log[0].n_samples == 1);
  CHECK(log[0].user.find("Scroll Position: 0, Window Height: 720") != std::string::npos);
}

TEST_CASE("oversized observations are cut from the bottom, whole lines only") {
  Observation obs = sample_obs();
  obs.axtree_text.clear();
  for (int i = 0; i < 5000; ++i) {
    obs.axtree_text += "[" + std::to_string(i) + "] link 'Row " + std::to_string(i) + "'\n";
  }
  obs.axtree_text += "[99999] button 'The Very Bottom'";

  ScriptedRule r;
  r.user_contains = {"# Observation:"};
  r.responses = {"<state>ok</state>"};
  ScriptedBackend backend({r});

  EncodeOptions opts;
  opts.max_obs_chars = 2000;
  encode_observation(backend, kIdentity, kGoal, obs, 1, opts);
  const std::string user = backend.request_log()[0].user;

  CHECK(user.find("URL https://flights.example") != std::string::npos);
  CHECK(user.find("Scroll Position: 0") != std::string::npos);
  CHECK(user.find("The Very Bottom") == std::string::npos);

  size_t obs_start = user.find("URL ");
  size_t obs_end = user.find("\n\n# State:");
  REQUIRE(obs_start != std::string::npos);
  REQUIRE(obs_end != std::string::npos);
  CHECK(obs_end - obs_start <= 2000);
  CHECK(user[obs_end - 1] != '\n');  // ends on a complete line, no dangling newline
}

TEST_CASE("an encoder reply without the state tag fails as EncodeFailure after a retry") {
  ScriptedRule r;
  r.user_contains = {"# Observation:"};
  r.responses = {"the page seems fine"};
  r.repeatable = true;
  ScriptedBackend backend({r});
  CHECK_THROWS_MATCHES(encode_observation(backend, kIdentity, kGoal, sample_obs(), 1), Error,
                       ErrorKindIs(ErrorKind::EncodeFailure));
  CHECK(backend.call_count() == 2);
}

TEST_CASE("memory update prompt carries memory, state, and the chosen intent") {
  MemoryEntry e1{1, StateSummary{"form page", 1}, SimulatedAction{"fill origin", std::nullopt},
                 "origin filled"};
  BeliefState belief = compose_belief_state({e1}, StateSummary{"form with origin set", 2});

  ScriptedRule r;
  r.user_contains = {"# Step 1 State:\nform page", "# State:\nform with origin set",
                     "# Action Intent:\nclick search", "tag <memory_update>"};
  r.responses = {"<memory_update>The search was submitted.</memory_update>"};
  ScriptedBackend backend({r});

  std::string update =
      generate_memory_update(backend, kIdentity, kGoal, belief, "click search");
  CHECK(update == "The search was submitted.");

  ScriptedRule bad;
  bad.user_contains = {"# Action Intent:"};
  bad.responses = {"forgot"};
  bad.repeatable = true;
  ScriptedBackend failing({bad});
  CHECK_THROWS_MATCHES(generate_memory_update(failing, kIdentity, kGoal, belief, "click search"),
                       Error, ErrorKindIs(ErrorKind::MemoryUpdateFailure));
}
