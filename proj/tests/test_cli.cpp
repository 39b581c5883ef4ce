#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "simura/cli.hpp"
#include "simura/simura.hpp"

using namespace simura;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = SIMURA_FIXTURE_DIR;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "simura");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "simura_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kTrapGoal =
    "Find the cheapest nonstop flight from SFO to JFK and report its price.";

std::vector<std::string> trap_run_args(const std::string& planner, const fs::path& out) {
  return {"run",
          "--env", "mock:" + kFixtures + "/flight_site.json",
          "--backend", "script:" + kFixtures + "/scripts/flight_trap.json",
          "--planner", planner,
          "--m-samples", "2",
          "--n-verdicts", "2",
          "--goal", kTrapGoal,
          "--out", out.string()};
}

}  // namespace

TEST_CASE("missing or malformed arguments exit 2 with usage") {
  CliResult no_env = cli({"run", "--goal", "x", "--backend", "http"});
  CHECK(no_env.code == 2);
  CHECK(no_env.err.find("missing --env") != std::string::npos);
  CHECK(no_env.err.find("Usage:") != std::string::npos);

  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"run", "--env", "teleport:mars", "--goal", "x", "--backend", "http"}).code == 2);
  CHECK(cli({"run", "--env", "mock:" + kFixtures + "/flight_site.json", "--backend",
             "http", "--goal", "a", "--dataset", "b"})
            .code == 2);

  CliResult help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("gen-flightqa") != std::string::npos);
}

TEST_CASE("one trap episode per planner through the CLI") {
  fs::path wm = scratch("trap_wm");
  CliResult r = cli(trap_run_args("world-model", wm));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("response_returned   1 (100.0%)") != std::string::npos);

  json manifest = json::parse(read_file((wm / "manifest.json").string()));
  REQUIRE(manifest["episodes"].size() == 1);
  CHECK(manifest["episodes"][0]["outcome"] == "response_returned");
  CHECK(manifest["episodes"][0]["steps"] == 2);
  CHECK(manifest["settings"]["planner"] == "world-model");
  CHECK(manifest["environment"]["fixture_fnv1a64"].get<std::string>().size() == 16);

  EpisodeTrace trace = read_trace((wm / "episode_0001.jsonl").string());
  REQUIRE(trace.outcome.final_message.has_value());
  CHECK(trace.outcome.final_message->find("$214") != std::string::npos);

  fs::path ar = scratch("trap_ar");
  CliResult base = cli(trap_run_args("autoregressive", ar));
  REQUIRE(base.code == 0);
  CHECK(base.out.find("repetitive_actions  1 (100.0%)") != std::string::npos);
  json base_manifest = json::parse(read_file((ar / "manifest.json").string()));
  CHECK(base_manifest["episodes"][0]["outcome"] == "repetitive_actions");
}

TEST_CASE("gen-flightqa produces the expected shapes deterministically") {
  fs::path full = scratch("gen_full");
  CliResult r = cli({"gen-flightqa", "--backend",
                     "script:" + kFixtures + "/scripts/flightqa_gen.json", "--out",
                     full.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("total: 90 questions in 15 sequences (0 discarded)") != std::string::npos);
  for (int c = 3; c <= 8; ++c) {
    CHECK(r.out.find("constraints " + std::to_string(c) + ": 15 questions") !=
          std::string::npos);
  }
  std::vector<ConstraintQuestion> dataset =
      dataset_from_jsonl(read_file((full / "dataset.jsonl").string()));
  CHECK(dataset.size() == 90);
  CHECK_NOTHROW(validate_dataset(dataset, 3, 5));

  fs::path small = scratch("gen_small");
  CliResult s = cli({"gen-flightqa", "--c", "2", "--n", "3", "--k", "2", "--backend",
                     "script:" + kFixtures + "/scripts/flightqa_gen.json", "--out",
                     small.string()});
  REQUIRE(s.code == 0);
  std::vector<ConstraintQuestion> nine =
      dataset_from_jsonl(read_file((small / "dataset.jsonl").string()));
  CHECK(nine.size() == 9);
  CHECK_NOTHROW(validate_dataset(nine, 2, 2));

  fs::path again = scratch("gen_again");
  cli({"gen-flightqa", "--backend", "script:" + kFixtures + "/scripts/flightqa_gen.json",
       "--out", again.string()});
  CHECK(read_file((full / "dataset.jsonl").string()) ==
        read_file((again / "dataset.jsonl").string()));
}

TEST_CASE("the offline pipeline: generate, run, judge, report") {
  fs::path gen = scratch("pipe_gen");
  REQUIRE(cli({"gen-flightqa", "--c", "2", "--n", "3", "--k", "2", "--backend",
               "script:" + kFixtures + "/scripts/flightqa_gen.json", "--out", gen.string()})
              .code == 0);
  std::string dataset = (gen / "dataset.jsonl").string();

  fs::path run_dir = scratch("pipe_run");
  CliResult run = cli({"run", "--dataset", dataset,
                       "--env", "mock:" + kFixtures + "/two_site_hop.json",
                       "--backend", "script:" + kFixtures + "/scripts/generic_responder.json",
                       "--planner", "autoregressive",
                       "--parallel", "3",
                       "--out", run_dir.string()});
  REQUIRE(run.code == 0);
  CHECK(run.out.find("episodes: 9") != std::string::npos);
  CHECK(run.out.find("response_returned   9 (100.0%)") != std::string::npos);

  CliResult judged = cli({"judge", "--run", run_dir.string(), "--dataset", dataset,
                          "--backend",
                          "script:" + kFixtures + "/scripts/flightqa_judge.json"});
  REQUIRE(judged.code == 0);
  CHECK(judged.out.find("judged 9 of 9 responses (0 unjudged)") != std::string::npos);

  int tokyo_rows = 0;
  for (const std::string& line : split_lines(read_file((run_dir / "verdicts.jsonl").string()))) {
    if (trim(line).empty()) continue;
    json record = json::parse(line);
    bool about_tokyo = record["question"]["question"].get<std::string>().find("Tokyo") !=
                       std::string::npos;
    CHECK(record["verdict"]["correct"] == !about_tokyo);
    if (about_tokyo) ++tokyo_rows;
  }
  CHECK(tokyo_rows == 3);

  fs::path rep = scratch("pipe_report");
  CliResult report_run = cli({"report", "--verdicts", (run_dir / "verdicts.jsonl").string(),
                              "--out", rep.string()});
  REQUIRE(report_run.code == 0);
  json report_json = json::parse(read_file((rep / "report.json").string()));
  CHECK(report_json["total"] == 9);
  CHECK(report_json["percent_correct"].get<double>() == Catch::Approx(100.0 * 6 / 9));
  CHECK(report_run.out.find("Correct:  66.7%") != std::string::npos);
  CHECK(read_file((rep / "report.txt").string()) == report_run.out);

  // The same batch at a different parallelism writes the same trace bytes.
  fs::path rerun_dir = scratch("pipe_rerun");
  REQUIRE(cli({"run", "--dataset", dataset,
               "--env", "mock:" + kFixtures + "/two_site_hop.json",
               "--backend", "script:" + kFixtures + "/scripts/generic_responder.json",
               "--planner", "autoregressive",
               "--parallel", "1",
               "--out", rerun_dir.string()})
              .code == 0);
  for (int i = 1; i <= 9; ++i) {
    std::string name = "episode_000" + std::to_string(i) + ".jsonl";
    CHECK(read_file((run_dir / name).string()) == read_file((rerun_dir / name).string()));
  }
}

TEST_CASE("unreachable dependencies exit 3") {
  CliResult dead = cli({"run", "--env", "driver:localhost:1",
                        "--backend", "script:" + kFixtures + "/scripts/generic_responder.json",
                        "--goal", "anything", "--out", scratch("dead").string()});
  CHECK(dead.code == 3);
  CHECK(dead.err.find("DriverUnavailable") != std::string::npos);
}

TEST_CASE("an underfilled dataset exits 4") {
  fs::path dir = scratch("underflow");
  write_file((dir / "thin.json").string(),
             R"([{"user_contains":["Your Response:"],)"
             R"("responses":["{\"num_constraints\":3,\"questions\":[]}"],)"
             R"("repeatable":true}])");
  CliResult r = cli({"gen-flightqa", "--backend", "script:" + (dir / "thin.json").string(),
                     "--out", (dir / "out").string()});
  CHECK(r.code == 4);
  CHECK(r.err.find("GenerationUnderflow") != std::string::npos);
}

TEST_CASE("judge and report insist on their inputs") {
  CHECK(cli({"judge", "--dataset", "nope.jsonl"}).code == 2);
  CHECK(cli({"judge", "--run", "not_a_dir", "--dataset", "nope.jsonl"}).code == 2);

  fs::path dir = scratch("empty_verdicts");
  write_file((dir / "verdicts.jsonl").string(), "");
  CliResult r = cli({"report", "--verdicts", (dir / "verdicts.jsonl").string(),
                     "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("no verdicts") != std::string::npos);
}

TEST_CASE("flags beat environment variables, which beat the config file") {
  fs::path dir = scratch("precedence");
  write_file((dir / "cfg.json").string(),
             json{{"model", "file-model"},
                  {"backend", "script:" + kFixtures + "/scripts/flight_trap.json"},
                  {"env", "mock:" + kFixtures + "/flight_site.json"},
                  {"planner", "world-model"},
                  {"plan", {{"m_samples", 2}, {"n_verdicts", 2}}},
                  {"goal", kTrapGoal}}
                 .dump());

  setenv("SIMURA_MODEL", "env-model", 1);
  CliResult env_wins = cli({"run", "--config", (dir / "cfg.json").string(),
                            "--out", (dir / "env_wins").string()});
  REQUIRE(env_wins.code == 0);
  json m1 = json::parse(read_file((dir / "env_wins" / "manifest.json").string()));
  CHECK(m1["settings"]["model"] == "env-model");
  CHECK(m1["model_id"] == "env-model");

  CliResult flag_wins = cli({"run", "--config", (dir / "cfg.json").string(),
                             "--model", "flag-model",
                             "--out", (dir / "flag_wins").string()});
  REQUIRE(flag_wins.code == 0);
  json m2 = json::parse(read_file((dir / "flag_wins" / "manifest.json").string()));
  CHECK(m2["settings"]["model"] == "flag-model");
  unsetenv("SIMURA_MODEL");

  CliResult file_wins = cli({"run", "--config", (dir / "cfg.json").string(),
                             "--out", (dir / "file_wins").string()});
  REQUIRE(file_wins.code == 0);
  json m3 = json::parse(read_file((dir / "file_wins" / "manifest.json").string()));
  CHECK(m3["settings"]["model"] == "file-model");

  write_file((dir / "typo.json").string(), R"({"modle": "oops"})");
  CliResult typo = cli({"run", "--config", (dir / "typo.json").string(),
                        "--out", (dir / "x").string()});
  CHECK(typo.code == 2);
  CHECK(typo.err.find("unknown key 'modle'") != std::string::npos);
}

TEST_CASE("the installed binary behaves like the library entry point") {
  fs::path dir = scratch("binary");
  std::string cmd = std::string(SIMURA_CLI_BIN) + " run --env mock:" + kFixtures +
                    "/flight_site.json --backend script:" + kFixtures +
                    "/scripts/flight_trap.json --planner world-model --m-samples 2 "
                    "--n-verdicts 2 --goal \"" + kTrapGoal + "\" --out " +
                    (dir / "out").string() + " > " + (dir / "stdout.txt").string() + " 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status == 0);
  CHECK(read_file((dir / "stdout.txt").string()).find("response_returned   1 (100.0%)") !=
        std::string::npos);

  int missing = std::system((std::string(SIMURA_CLI_BIN) + " run > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(missing) == 2);
}
