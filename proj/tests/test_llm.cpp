#include <catch2/catch_amalgamated.hpp>

#include "simura/llm.hpp"
#include "support/matchers.hpp"

using namespace simura;

namespace {

ScriptedRule rule(std::vector<std::string> user_contains, std::vector<std::string> responses,
                  bool repeatable = false, std::string mode = "indexed") {
  ScriptedRule r;
  r.user_contains = std::move(user_contains);
  r.responses = std::move(responses);
  r.repeatable = repeatable;
  r.mode = std::move(mode);
  return r;
}

ChatRequest request(std::string user, double temperature = 0.0, int n = 1) {
  ChatRequest req;
  req.system = "system prompt";
  req.user = std::move(user);
  req.temperature = temperature;
  req.n_samples = n;
  return req;
}

}  // namespace

TEST_CASE("scripted backend matches on substrings of system and user") {
  ScriptedRule sys_rule;
  sys_rule.system_contains = {"system prompt"};
  sys_rule.user_contains = {"alpha", "beta"};
  sys_rule.responses = {"matched"};
  ScriptedBackend backend({sys_rule});

  CHECK_THROWS_MATCHES(backend.complete(request("only alpha here")), Error,
                       ErrorKindIs(ErrorKind::ScriptMiss));
  Completion c = backend.complete(request("alpha and beta present"));
  CHECK(c.samples == std::vector<std::string>{"matched"});
}

TEST_CASE("rules are consumed in order unless repeatable") {
  ScriptedBackend backend({rule({"go"}, {"first"}), rule({"go"}, {"second"}, true)});
  CHECK(backend.complete(request("go")).samples[0] == "first");
  CHECK(backend.complete(request("go")).samples[0] == "second");
  CHECK(backend.complete(request("go")).samples[0] == "second");
}

TEST_CASE("temperature zero collapses all samples to the first response") {
  ScriptedBackend backend({rule({"q"}, {"a", "b", "c"}, true)});
  Completion c = backend.complete(request("q", 0.0, 4));
  CHECK(c.samples == std::vector<std::string>{"a", "a", "a", "a"});
}

TEST_CASE("positive temperature hands out responses by sample index, wrapping") {
  ScriptedBackend backend({rule({"q"}, {"a", "b", "c"}, true)});
  Completion c = backend.complete(request("q", 1.0, 5));
  CHECK(c.samples == std::vector<std::string>{"a", "b", "c", "a", "b"});
}

TEST_CASE("cycled mode advances one response per call") {
  ScriptedBackend backend({rule({"q"}, {"r1", "r2"}, true, "cycled")});
  CHECK(backend.complete(request("q", 1.0, 2)).samples ==
        std::vector<std::string>{"r1", "r1"});
  CHECK(backend.complete(request("q", 1.0, 1)).samples == std::vector<std::string>{"r2"});
  CHECK(backend.complete(request("q", 1.0, 1)).samples == std::vector<std::string>{"r1"});
}

TEST_CASE("script miss error carries a prefix of the unmatched prompt") {
  ScriptedBackend backend;
  try {
    backend.complete(request("some very specific user text"));
    FAIL("expected ScriptMiss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ScriptMiss);
    CHECK(std::string(e.what()).find("some very specific user text") != std::string::npos);
  }
}

TEST_CASE("backend validates sample count and logs every request") {
  ScriptedBackend backend({rule({"q"}, {"a"}, true)});
  ChatRequest bad = request("q");
  bad.n_samples = 0;
  CHECK_THROWS_MATCHES(backend.complete(bad), Error, ErrorKindIs(ErrorKind::ConfigError));

  backend.complete(request("q", 0.0, 3));
  backend.complete(request("q"));
  CHECK(backend.call_count() == 2);
  auto log = backend.request_log();
  REQUIRE(log.size() == 2);
  CHECK(log[0].n_samples == 3);
  backend.reset_log();
  CHECK(backend.call_count() == 0);
}

TEST_CASE("scripted backend deserializes from a JSON rule list") {
  nlohmann::json script = nlohmann::json::array(
      {{{"user_contains", {"hello"}}, {"responses", {"world"}}, {"repeatable", true}}});
  ScriptedBackend backend = ScriptedBackend::from_json(script);
  CHECK(backend.complete(request("hello there")).samples[0] == "world");
}

TEST_CASE("extract_tag returns trimmed content of the first well-formed pair") {
  CHECK(extract_tag("junk <state>  the page \n</state> tail", "state") == "the page");
  CHECK(extract_tag("<state>first</state><state>second</state>", "state") == "first");
  CHECK(extract_tag("<state>prefix <state>inner</state>", "state") == "prefix <state>inner");
  CHECK_THROWS_MATCHES(extract_tag("<state>never closed", "state"), Error,
                       ErrorKindIs(ErrorKind::MissingTag));
  CHECK_THROWS_MATCHES(extract_tag("no tags at all", "intent"), Error,
                       ErrorKindIs(ErrorKind::MissingTag));
  CHECK_THROWS_AS(extract_tag("<made_up>x</made_up>", "made_up"), std::logic_error);
}

TEST_CASE("complete_and_extract re-prompts once with a tag reminder") {
  ScriptedBackend backend({rule({"describe"}, {"forgot the tag"}),
                           rule({"Reminder: wrap your response in the tag <state>"},
                                {"<state>recovered</state>"})});
  CHECK(complete_and_extract(backend, request("describe"), "state") == "recovered");
  CHECK(backend.call_count() == 2);

  ScriptedBackend hopeless({rule({"describe"}, {"nope"}, true)});
  CHECK_THROWS_MATCHES(complete_and_extract(hopeless, request("describe"), "state"), Error,
                       ErrorKindIs(ErrorKind::MissingTag));
  CHECK(hopeless.call_count() == 2);
}
