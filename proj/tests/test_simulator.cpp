#include <catch2/catch_amalgamated.hpp>

#include "simura/simulator.hpp"
#include "support/matchers.hpp"

using namespace simura;

namespace {
const AgentIdentity kIdentity{"Agent", "desc", "obs", "actions"};
const GoalSpec kGoal{"book a flight", "2025-03-01 09:00:00"};
}  // namespace

TEST_CASE("world model extracts the predicted next state") {
  ScriptedRule r;
  r.user_contains = {"# Next State:", "# Action Intent:\nClick search\n"};
  r.responses = {"<next_state>Results page with three flights.</next_state>"};
  ScriptedBackend backend({r});

  BeliefState belief = compose_belief_state({}, StateSummary{"a search form", 1});
  std::string next = predict_next_summary(backend, kIdentity, kGoal, belief,
                                          "form was filled", "Click search");
  CHECK(next == "Results page with three flights.");

  auto log = backend.request_log();
  REQUIRE(log.size() == 1);
  CHECK(log[0].user.find("# Memory Update:\nform was filled") != std::string::npos);
  CHECK(log[0].user.find("# Current State:\na search form") != std::string::npos);
  CHECK(log[0].temperature == 0.0);
}

TEST_CASE("a tagless world model reply becomes SimulationFailure after one retry") {
  ScriptedRule r;
  r.user_contains = {"# Next State:"};
  r.responses = {"the page will probably change"};
  r.repeatable = true;
  ScriptedBackend backend({r});
  BeliefState belief = compose_belief_state({}, StateSummary{"s", 1});
  CHECK_THROWS_MATCHES(
      predict_next_summary(backend, kIdentity, kGoal, belief, "u", "intent"), Error,
      ErrorKindIs(ErrorKind::SimulationFailure));
  CHECK(backend.call_count() == 2);
}

TEST_CASE("advance_belief commits the step without touching the source belief") {
  BeliefState belief = compose_belief_state({}, StateSummary{"step one state", 1});
  BeliefState next = advance_belief(belief, SimulatedAction{"Click search", std::nullopt},
                                    "memory note", "step two state");

  CHECK(belief.entries.empty());
  CHECK(belief.current.step_index == 1);

  REQUIRE(next.entries.size() == 1);
  CHECK(next.entries[0].step_index == 1);
  CHECK(next.entries[0].summary.text == "step one state");
  CHECK(next.entries[0].chosen_intent.intent == "Click search");
  CHECK(next.entries[0].memory_update == "memory note");
  CHECK(next.current.step_index == 2);
  CHECK(next.current.text == "step two state");

  BeliefState third = advance_belief(next, SimulatedAction{"Read results", std::nullopt},
                                     "saw flights", "step three state");
  CHECK(third.entries.size() == 2);
  CHECK(third.current.step_index == 3);
  CHECK(next.entries.size() == 1);  // branches never alias
}
