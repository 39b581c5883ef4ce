#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simura/config.hpp"
#include "simura/flightqa.hpp"
#include "simura/harness.hpp"

// The operator tool: run episodes, generate the question dataset, judge
// responses, and build reports. Everything here is deterministic under a
// scripted backend so the whole pipeline can run offline.

namespace simura {

// 2: bad configuration or inputs; 3: the backend or browser endpoint is
// unreachable; 4: the generator could not fill the dataset; 1: anything else.
inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::ConfigError:
    case ErrorKind::EmptyInput:
      return 2;
    case ErrorKind::TransportError:
    case ErrorKind::BackendRefusal:
    case ErrorKind::DriverUnavailable:
      return 3;
    case ErrorKind::GenerationUnderflow:
      return 4;
    default:
      return 1;
  }
}

namespace detail {

inline AgentConfig agent_config_from(const Settings& s, GoalSpec goal) {
  AgentConfig cfg;
  cfg.goal = std::move(goal);
  cfg.planner = canonical_planner(s.planner);
  cfg.plan = s.plan;
  if (!s.model.empty()) cfg.plan.model_id = s.model;
  cfg.webarena_mode = s.webarena;
  cfg.answer_pattern = s.answer_pattern;
  return cfg;
}

inline std::string episode_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "episode_%04d.jsonl", index);
  return buf;
}

}  // namespace detail

// --- run -----------------------------------------------------------------------

inline int cmd_run(const Settings& s, std::ostream& out) {
  EnvSpec espec = parse_env_spec(s.env_spec);
  if (!s.goal.empty() && !s.dataset.empty()) {
    fail(ErrorKind::ConfigError, "--goal and --dataset are mutually exclusive");
  }
  if (s.goal.empty() && s.dataset.empty()) {
    fail(ErrorKind::ConfigError, "provide --goal for one episode or --dataset for a batch");
  }
  if (s.parallel < 1) fail(ErrorKind::ConfigError, "--parallel must be at least 1");
  validate(s.limits);

  std::vector<GoalSpec> goals;
  if (!s.goal.empty()) {
    goals.push_back(GoalSpec{s.goal, s.goal_datetime});
  } else {
    for (const ConstraintQuestion& q : dataset_from_jsonl(read_file(s.dataset))) {
      goals.push_back(GoalSpec{q.question, s.goal_datetime});
    }
  }
  validate(detail::agent_config_from(s, goals.front()));  // fail before any work

  // Mock fixtures load once and are fingerprinted into the manifest.
  std::optional<SiteGraph> graph;
  std::string fixture_hash;
  if (espec.kind == "mock") {
    std::string bytes = read_file(espec.fixture);
    fixture_hash = fnv1a64_hex(bytes);
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded()) {
      fail(ErrorKind::ConfigError, "fixture '" + espec.fixture + "' is not JSON");
    }
    graph = load_site_graph(j);
  }

  // Episodes are independent: each worker owns a fresh backend and browser,
  // so scripted rule consumption never leaks across episodes.
  const int total = static_cast<int>(goals.size());
  std::vector<EpisodeTrace> traces(total);
  std::vector<std::exception_ptr> failures(total);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= total) return;
      try {
        std::unique_ptr<Backend> backend = make_backend(s);
        std::unique_ptr<Environment> env =
            make_environment(espec, graph ? &*graph : nullptr);
        traces[i] = run_episode(*backend, *env, detail::agent_config_from(s, goals[i]),
                                s.limits);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(s.parallel, total); ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  std::filesystem::create_directories(s.out);
  nlohmann::json episodes = nlohmann::json::array();
  for (int i = 0; i < total; ++i) {
    std::string name = detail::episode_filename(i + 1);
    write_trace(traces[i], (std::filesystem::path(s.out) / name).string());
    episodes.push_back({{"index", i + 1},
                        {"trace", name},
                        {"goal", traces[i].goal.instruction},
                        {"outcome", std::string(to_string(traces[i].outcome.category))},
                        {"steps", traces[i].steps.size()},
                        {"error_count", traces[i].error_count}});
  }
  OutcomeStats stats = aggregate_outcomes(traces);
  nlohmann::json manifest{{"kind", "run_manifest"},
                          {"settings", s},
                          {"model_id", traces.front().model_id},
                          {"environment",
                           {{"spec", s.env_spec},
                            {"fixture_fnv1a64",
                             fixture_hash.empty() ? nlohmann::json() : nlohmann::json(fixture_hash)}}},
                          {"episodes", episodes},
                          {"outcomes", stats}};
  write_file((std::filesystem::path(s.out) / "manifest.json").string(),
             manifest.dump(2) + "\n");

  out << "episodes: " << total << "\n";
  for (const auto& [name, count] : stats.counts) {
    std::string padded = name;
    padded.resize(20, ' ');
    out << "  " << padded << count << " (" << detail::pct(stats.percentages.at(name)) << "%)\n";
  }
  out << "run directory: " << s.out << "\n";
  return 0;
}

// --- gen-flightqa ----------------------------------------------------------------

inline int cmd_gen_flightqa(const Settings& s, std::ostream& out) {
  std::unique_ptr<Backend> backend = make_backend(s);
  GenerationOptions opts;
  opts.model_id = s.model;
  opts.current_datetime = s.goal_datetime;

  std::vector<ConstraintQuestion> seeds = generate_seed_lists(*backend, s.c, s.n, opts);
  ExtendedDataset dataset = extend_sequences(*backend, seeds, s.k, opts);
  validate_dataset(dataset.questions, s.c, s.k);

  std::filesystem::create_directories(s.out);
  write_file((std::filesystem::path(s.out) / "dataset.jsonl").string(),
             dataset_to_jsonl(dataset.questions));
  nlohmann::json manifest = dataset_manifest(dataset.questions, dataset.discarded, opts, s.c,
                                             s.n, s.k);
  manifest["settings"] = s;
  write_file((std::filesystem::path(s.out) / "manifest.json").string(),
             manifest.dump(2) + "\n");

  std::map<int, int> counts;
  std::set<int> sequences;
  for (const ConstraintQuestion& q : dataset.questions) {
    ++counts[q.num_constraints];
    sequences.insert(q.sequence_id);
  }
  for (const auto& [constraints, count] : counts) {
    out << "constraints " << constraints << ": " << count << " questions\n";
  }
  out << "total: " << dataset.questions.size() << " questions in " << sequences.size()
      << " sequences (" << dataset.discarded.size() << " discarded)\n";
  out << "dataset: " << (std::filesystem::path(s.out) / "dataset.jsonl").string() << "\n";
  return 0;
}

// --- judge ----------------------------------------------------------------------

inline int cmd_judge(const Settings& s, std::ostream& out) {
  if (s.run_dir.empty()) fail(ErrorKind::ConfigError, "missing --run <run directory>");
  if (s.dataset.empty()) fail(ErrorKind::ConfigError, "missing --dataset <dataset.jsonl>");

  nlohmann::json manifest =
      nlohmann::json::parse(read_file((std::filesystem::path(s.run_dir) / "manifest.json").string()),
                            nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("episodes")) {
    fail(ErrorKind::ConfigError, "run directory has no usable manifest.json");
  }
  std::vector<ConstraintQuestion> questions = dataset_from_jsonl(read_file(s.dataset));
  const auto& episodes = manifest["episodes"];
  if (episodes.size() != questions.size()) {
    fail(ErrorKind::ConfigError,
         "run has " + std::to_string(episodes.size()) + " episodes but the dataset has " +
             std::to_string(questions.size()) + " questions");
  }

  std::unique_ptr<Backend> backend = make_backend(s);
  JudgeOptions opts;
  opts.model_id = s.model;

  std::string lines;
  int judged = 0, unjudged = 0;
  for (size_t i = 0; i < questions.size(); ++i) {
    EpisodeTrace trace = read_trace(
        (std::filesystem::path(s.run_dir) / episodes[i].at("trace").get<std::string>())
            .string());
    nlohmann::json record{{"index", static_cast<int>(i) + 1},
                          {"question", questions[i]},
                          {"outcome", std::string(to_string(trace.outcome.category))}};
    try {
      record["verdict"] = judge_response(*backend, trace, questions[i], opts);
      record["judge_error"] = nullptr;
      ++judged;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::JudgeParseFailure) throw;
      record["verdict"] = nullptr;
      record["judge_error"] = std::string(e.what());
      ++unjudged;
    }
    lines += record.dump() + "\n";
  }

  std::string path = s.out.empty()
                         ? (std::filesystem::path(s.run_dir) / "verdicts.jsonl").string()
                         : s.out;
  write_file(path, lines);
  out << "judged " << judged << " of " << questions.size() << " responses (" << unjudged
      << " unjudged)\n";
  out << "verdicts: " << path << "\n";
  return 0;
}

// --- report ---------------------------------------------------------------------

inline int cmd_report(const Settings& s, std::ostream& out) {
  if (s.verdicts.empty()) fail(ErrorKind::ConfigError, "missing --verdicts <verdicts.jsonl>");

  std::vector<JudgedQuestion> rows;
  for (const std::string& line : split_lines(read_file(s.verdicts))) {
    std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(trimmed, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      fail(ErrorKind::ConfigError, "verdict line is not a JSON object");
    }
    JudgedQuestion row;
    j.at("question").get_to(row.question);
    if (j.contains("verdict") && !j["verdict"].is_null()) {
      row.verdict = j["verdict"].get<JudgeVerdict>();
    }
    if (j.contains("outcome") && !j["outcome"].is_null()) {
      row.outcome = outcome_category_from_string(j["outcome"].get<std::string>());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::EmptyInput, "no verdicts to report");

  ReportTables tables = report(rows);
  std::filesystem::create_directories(s.out);
  write_file((std::filesystem::path(s.out) / "report.json").string(),
             nlohmann::json(tables).dump(2) + "\n");
  std::string text = render_report(tables);
  write_file((std::filesystem::path(s.out) / "report.txt").string(), text);
  out << text;
  return 0;
}

// --- argument parsing --------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"world-model web agent: run episodes, build FlightQA, judge, report"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  struct {
    std::optional<std::string> backend, api_base, api_key, model, env, planner, goal,
        goal_datetime, dataset, run_dir, verdicts, out, answer_pattern;
    std::optional<int> seed, parallel, c, n, k, max_steps, repeat_limit, error_budget,
        m_samples, n_verdicts, branch_cap, memory_cap;
  } flags;
  bool webarena = false;

  app.add_option("--config", config_path, "JSON config file (flags and env vars override it)");
  app.add_option("--backend", flags.backend, "script:<rules.json> or http");
  app.add_option("--api-base", flags.api_base, "chat-completions endpoint prefix");
  app.add_option("--api-key", flags.api_key, "bearer token for the http backend");
  app.add_option("--model", flags.model, "model identifier sent with each request");
  app.add_option("--seed", flags.seed, "sampling seed forwarded to the backend");

  CLI::App* run = app.add_subcommand("run", "run one episode or a batch over a dataset");
  run->add_option("--env", flags.env, "mock:<fixture.json> or driver:<host>:<port>");
  run->add_option("--planner", flags.planner, "world-model or autoregressive");
  run->add_option("--goal", flags.goal, "instruction for a single episode");
  run->add_option("--goal-datetime", flags.goal_datetime, "issued-at timestamp for goals");
  run->add_option("--dataset", flags.dataset, "question JSONL; one episode per question");
  run->add_option("--out", flags.out, "run directory to write traces into");
  run->add_option("--parallel", flags.parallel, "episodes to run concurrently");
  run->add_option("--answer-pattern", flags.answer_pattern,
                  "regex a final answer must match to count as returned");
  run->add_flag("--webarena", webarena, "task-focused identity and a 15-step cap");
  run->add_option("--max-steps", flags.max_steps, "episode step budget");
  run->add_option("--repeat-limit", flags.repeat_limit, "identical consecutive actions allowed");
  run->add_option("--error-budget", flags.error_budget, "component/action errors allowed");
  run->add_option("--m-samples", flags.m_samples, "policy intent samples per step");
  run->add_option("--n-verdicts", flags.n_verdicts, "critic verdicts per branch");
  run->add_option("--branch-cap", flags.branch_cap, "max clusters expanded per step");
  run->add_option("--memory-cap", flags.memory_cap, "memory entries rendered into prompts");

  CLI::App* gen = app.add_subcommand("gen-flightqa", "generate the constraint-question dataset");
  gen->add_option("--c", flags.c, "constraints in each seed question");
  gen->add_option("--n", flags.n, "number of seed questions");
  gen->add_option("--k", flags.k, "extension levels per seed");
  gen->add_option("--out", flags.out, "directory for dataset.jsonl and manifest.json");
  gen->add_option("--datetime", flags.goal_datetime, "current date and time for the generator");

  CLI::App* judge = app.add_subcommand("judge", "judge run responses against their questions");
  judge->add_option("--run", flags.run_dir, "run directory produced by `run --dataset`");
  judge->add_option("--dataset", flags.dataset, "the dataset the run was executed over");
  judge->add_option("--out", flags.out, "verdicts file (default <run>/verdicts.jsonl)");

  CLI::App* rep = app.add_subcommand("report", "tables from a verdicts file");
  rep->add_option("--verdicts", flags.verdicts, "verdicts JSONL from `judge`");
  rep->add_option("--out", flags.out, "directory for report.json and report.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    Settings s;
    if (config_path) apply_config_file(s, *config_path);
    apply_env_vars(s);

    if (flags.backend) s.backend = *flags.backend;
    if (flags.api_base) s.api_base = *flags.api_base;
    if (flags.api_key) s.api_key = *flags.api_key;
    if (flags.model) s.model = *flags.model;
    if (flags.seed) s.seed = flags.seed;
    if (flags.env) s.env_spec = *flags.env;
    if (flags.planner) s.planner = *flags.planner;
    if (flags.goal) s.goal = *flags.goal;
    if (flags.goal_datetime) s.goal_datetime = *flags.goal_datetime;
    if (flags.dataset) s.dataset = *flags.dataset;
    if (flags.run_dir) s.run_dir = *flags.run_dir;
    if (flags.verdicts) s.verdicts = *flags.verdicts;
    if (flags.answer_pattern) s.answer_pattern = flags.answer_pattern;
    if (webarena) s.webarena = true;
    if (flags.parallel) s.parallel = *flags.parallel;
    if (flags.max_steps) s.limits.max_steps = *flags.max_steps;
    if (flags.repeat_limit) s.limits.repeat_limit = *flags.repeat_limit;
    if (flags.error_budget) s.limits.error_budget = *flags.error_budget;
    if (flags.m_samples) s.plan.m_samples = *flags.m_samples;
    if (flags.n_verdicts) s.plan.n_verdicts = *flags.n_verdicts;
    if (flags.branch_cap) s.plan.branch_cap = *flags.branch_cap;
    if (flags.memory_cap) s.plan.memory_cap = *flags.memory_cap;
    if (flags.c) s.c = *flags.c;
    if (flags.n) s.n = *flags.n;
    if (flags.k) s.k = *flags.k;
    if (flags.out) {
      s.out = *flags.out;
    } else if (active == run) {
      s.out = "run";
    } else if (active == gen) {
      s.out = "flightqa";
    } else if (active == rep) {
      s.out = ".";
    }

    if (active == run) return cmd_run(s, out);
    if (active == gen) return cmd_gen_flightqa(s, out);
    if (active == judge) return cmd_judge(s, out);
    return cmd_report(s, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::ConfigError) {
      err << "\n" << active->help();
    }
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace simura
