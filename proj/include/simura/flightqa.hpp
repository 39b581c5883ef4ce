#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simura/critic.hpp"  // detail::unquote
#include "simura/errors.hpp"
#include "simura/harness.hpp"
#include "simura/llm.hpp"
#include "simura/prompts.hpp"
#include "simura/proposer.hpp"  // detail::parse_json_object
#include "simura/text.hpp"

// FlightQA: flight-search questions organized as sequences whose constraint
// lists grow one item at a time, plus the groundedness/relevance judge and
// the correct-vs-constraints report.

namespace simura {

// --- dataset types -------------------------------------------------------------

struct ConstraintQuestion {
  int sequence_id = 0;
  int num_constraints = 0;
  std::vector<std::string> constraints;
  std::string question;
};

inline void to_json(nlohmann::json& j, const ConstraintQuestion& q) {
  j = nlohmann::json{{"sequence_id", q.sequence_id},
                     {"num_constraints", q.num_constraints},
                     {"constraints", q.constraints},
                     {"question", q.question}};
}
inline void from_json(const nlohmann::json& j, ConstraintQuestion& q) {
  j.at("sequence_id").get_to(q.sequence_id);
  j.at("num_constraints").get_to(q.num_constraints);
  j.at("constraints").get_to(q.constraints);
  j.at("question").get_to(q.question);
}

inline void validate(const ConstraintQuestion& q) {
  if (static_cast<int>(q.constraints.size()) != q.num_constraints) {
    fail(ErrorKind::ConfigError, "constraint count does not match num_constraints");
  }
  if (q.question.empty()) fail(ErrorKind::ConfigError, "question text is empty");
}

struct JudgeVerdict {
  bool grounded = false;
  bool relevant = false;
  bool correct = false;  // grounded AND relevant, by construction
  std::string think;
};

inline void to_json(nlohmann::json& j, const JudgeVerdict& v) {
  j = nlohmann::json{{"grounded", v.grounded},
                     {"relevant", v.relevant},
                     {"correct", v.correct},
                     {"think", v.think}};
}
inline void from_json(const nlohmann::json& j, JudgeVerdict& v) {
  j.at("grounded").get_to(v.grounded);
  j.at("relevant").get_to(v.relevant);
  j.at("correct").get_to(v.correct);
  if (j.contains("think")) j.at("think").get_to(v.think);
}

// --- generation ---------------------------------------------------------------

struct GenerationOptions {
  double temperature = 1.0;
  int max_tokens = 8192;
  std::string model_id;
  std::string current_datetime = "2025-03-01 09:00:00";
  int max_calls = 6;  // total backend calls allowed while accumulating seeds
};

// Constraints are compared as case-folded, whitespace-collapsed strings;
// paraphrase drift is a validation failure, not a fuzzy match.
inline std::string normalize_constraint(const std::string& s) {
  return to_lower(collapse_ws(trim(s)));
}

namespace detail {

// Reply shape: {"num_constraints": c, "questions": [{"constraints": [...],
// "question": "..."}]}. Individually invalid questions are dropped; a reply
// without a usable questions array is malformed as a whole.
inline std::optional<std::vector<ConstraintQuestion>> parse_generation_reply(
    const std::string& text, int c) {
  auto j = parse_json_object(text);
  if (!j || !j->contains("questions") || !(*j)["questions"].is_array()) return std::nullopt;
  std::vector<ConstraintQuestion> out;
  for (const auto& item : (*j)["questions"]) {
    if (!item.is_object() || !item.contains("constraints") || !item.contains("question")) {
      continue;
    }
    if (!item["constraints"].is_array() || !item["question"].is_string()) continue;
    ConstraintQuestion q;
    bool ok = true;
    for (const auto& constraint : item["constraints"]) {
      if (!constraint.is_string()) {
        ok = false;
        break;
      }
      q.constraints.push_back(constraint.get<std::string>());
    }
    q.question = item["question"].get<std::string>();
    q.num_constraints = static_cast<int>(q.constraints.size());
    if (ok && q.num_constraints == c && !q.question.empty()) out.push_back(std::move(q));
  }
  return out;
}

}  // namespace detail

inline std::vector<ConstraintQuestion> generate_seed_lists(Backend& backend, int c, int n,
                                                           const GenerationOptions& opts = {}) {
  if (c < 1 || n < 1) fail(ErrorKind::ConfigError, "generation requires c >= 1 and n >= 1");

  ChatRequest req;
  req.system = prompts::flightqa_system(opts.current_datetime);
  req.user = prompts::flightqa_generate(c);
  req.temperature = opts.temperature;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;

  std::vector<ConstraintQuestion> seeds;
  bool reminded = false;
  for (int call = 0; call < opts.max_calls && static_cast<int>(seeds.size()) < n; ++call) {
    Completion comp = backend.complete(req);
    auto parsed = detail::parse_generation_reply(comp.samples.front(), c);
    if (!parsed) {
      if (reminded) break;  // one reminder for malformed JSON, then give up
      req.user += "\n\nReminder: respond with exactly one JSON object in the format above.";
      reminded = true;
      continue;
    }
    for (auto& q : *parsed) seeds.push_back(std::move(q));
  }

  if (static_cast<int>(seeds.size()) < n) {
    fail(ErrorKind::GenerationUnderflow,
         "needed " + std::to_string(n) + " seed questions, collected " +
             std::to_string(seeds.size()));
  }
  seeds.resize(n);
  for (int i = 0; i < n; ++i) seeds[i].sequence_id = i + 1;
  return seeds;
}

// --- extension ----------------------------------------------------------------

// Each extension level must contain every earlier constraint plus exactly one
// new one, compared on normalized text.
inline void validate_chain(const ConstraintQuestion& seed,
                           const std::vector<ConstraintQuestion>& extensions) {
  std::set<std::string> previous;
  for (const auto& c : seed.constraints) previous.insert(normalize_constraint(c));
  int expected = seed.num_constraints;
  for (size_t level = 0; level < extensions.size(); ++level) {
    const ConstraintQuestion& q = extensions[level];
    ++expected;
    if (q.num_constraints != expected ||
        static_cast<int>(q.constraints.size()) != expected) {
      fail(ErrorKind::ExtensionViolation,
           "level " + std::to_string(level + 1) + " should have " + std::to_string(expected) +
               " constraints");
    }
    if (q.question.empty()) {
      fail(ErrorKind::ExtensionViolation,
           "level " + std::to_string(level + 1) + " has an empty question");
    }
    std::set<std::string> current;
    for (const auto& c : q.constraints) current.insert(normalize_constraint(c));
    if (static_cast<int>(current.size()) != expected) {
      fail(ErrorKind::ExtensionViolation,
           "level " + std::to_string(level + 1) + " repeats a constraint");
    }
    for (const auto& c : previous) {
      if (!current.count(c)) {
        fail(ErrorKind::ExtensionViolation,
             "level " + std::to_string(level + 1) + " dropped earlier constraint '" + c + "'");
      }
    }
    previous = std::move(current);
  }
}

namespace detail {

inline std::vector<ConstraintQuestion> parse_extension_reply(const std::string& text,
                                                             const ConstraintQuestion& seed,
                                                             int k) {
  auto j = parse_json_object(text);
  if (!j || !j->contains("questions") || !(*j)["questions"].is_array()) {
    fail(ErrorKind::ExtensionViolation, "extension reply is not the expected JSON object");
  }
  std::vector<ConstraintQuestion> out;
  for (const auto& item : (*j)["questions"]) {
    if (!item.is_object() || !item.contains("constraints") || !item.contains("question") ||
        !item["constraints"].is_array() || !item["question"].is_string()) {
      fail(ErrorKind::ExtensionViolation, "extension question is malformed");
    }
    ConstraintQuestion q;
    q.sequence_id = seed.sequence_id;
    for (const auto& constraint : item["constraints"]) {
      if (!constraint.is_string()) {
        fail(ErrorKind::ExtensionViolation, "constraint is not a string");
      }
      q.constraints.push_back(constraint.get<std::string>());
    }
    q.num_constraints = item.contains("num_constraints") && item["num_constraints"].is_number()
                            ? item["num_constraints"].get<int>()
                            : static_cast<int>(q.constraints.size());
    q.question = item["question"].get<std::string>();
    out.push_back(std::move(q));
  }
  if (static_cast<int>(out.size()) != k) {
    fail(ErrorKind::ExtensionViolation, "expected " + std::to_string(k) +
                                            " extension questions, got " +
                                            std::to_string(out.size()));
  }
  validate_chain(seed, out);
  return out;
}

}  // namespace detail

// One extension call for one seed; a bad reply gets one corrective retry
// before the violation escapes.
inline std::vector<ConstraintQuestion> extend_one(Backend& backend,
                                                  const ConstraintQuestion& seed, int k,
                                                  const GenerationOptions& opts = {}) {
  nlohmann::ordered_json starting{{"num_constraints", seed.num_constraints},
                                  {"constraints", seed.constraints},
                                  {"question", seed.question}};
  ChatRequest req;
  req.system = prompts::flightqa_system(opts.current_datetime);
  req.user = prompts::flightqa_extend(seed.num_constraints + k, starting.dump(4));
  req.temperature = opts.temperature;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;

  Completion first = backend.complete(req);
  try {
    return detail::parse_extension_reply(first.samples.front(), seed, k);
  } catch (const Error& e) {
    req.user += std::string("\n\nReminder: your previous response was invalid (") + e.what() +
                "). Each list must contain all previous constraints plus exactly one new one.";
    Completion second = backend.complete(req);
    return detail::parse_extension_reply(second.samples.front(), seed, k);
  }
}

struct ExtendedDataset {
  std::vector<ConstraintQuestion> questions;  // seeds and extensions, grouped by sequence
  std::vector<std::string> discarded;         // "sequence 7: ExtensionViolation: ..."
};

inline ExtendedDataset extend_sequences(Backend& backend,
                                        const std::vector<ConstraintQuestion>& seeds, int k,
                                        const GenerationOptions& opts = {}) {
  if (k < 1) fail(ErrorKind::ConfigError, "extension requires k >= 1");
  ExtendedDataset out;
  for (const ConstraintQuestion& seed : seeds) {
    validate(seed);
    try {
      std::vector<ConstraintQuestion> extensions = extend_one(backend, seed, k, opts);
      out.questions.push_back(seed);
      for (auto& q : extensions) out.questions.push_back(std::move(q));
    } catch (const Error& e) {
      out.discarded.push_back("sequence " + std::to_string(seed.sequence_id) + ": " + e.what());
    }
  }
  return out;
}

// Full-dataset shape check: every sequence is a seed with c constraints
// followed by k chained extensions.
inline void validate_dataset(const std::vector<ConstraintQuestion>& questions, int c, int k) {
  std::map<int, std::vector<ConstraintQuestion>> by_sequence;
  for (const auto& q : questions) by_sequence[q.sequence_id].push_back(q);
  for (auto& [id, group] : by_sequence) {
    std::sort(group.begin(), group.end(),
              [](const ConstraintQuestion& a, const ConstraintQuestion& b) {
                return a.num_constraints < b.num_constraints;
              });
    if (static_cast<int>(group.size()) != k + 1 || group.front().num_constraints != c) {
      fail(ErrorKind::ConfigError,
           "sequence " + std::to_string(id) + " does not have lengths " + std::to_string(c) +
               ".." + std::to_string(c + k));
    }
    validate(group.front());
    validate_chain(group.front(), {group.begin() + 1, group.end()});
  }
}

// --- dataset persistence -------------------------------------------------------

inline std::string dataset_to_jsonl(const std::vector<ConstraintQuestion>& questions) {
  std::string out;
  for (const auto& q : questions) out += nlohmann::json(q).dump() + "\n";
  return out;
}

inline std::vector<ConstraintQuestion> dataset_from_jsonl(const std::string& text) {
  std::vector<ConstraintQuestion> out;
  for (const auto& line : split_lines(text)) {
    std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(trimmed, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::ConfigError, "dataset line is not JSON");
    ConstraintQuestion q = j.get<ConstraintQuestion>();
    validate(q);
    out.push_back(std::move(q));
  }
  if (out.empty()) fail(ErrorKind::EmptyInput, "dataset is empty");
  return out;
}

inline nlohmann::json dataset_manifest(const std::vector<ConstraintQuestion>& questions,
                                       const std::vector<std::string>& discarded,
                                       const GenerationOptions& opts, int c, int n, int k) {
  std::set<int> sequences;
  for (const auto& q : questions) sequences.insert(q.sequence_id);
  return nlohmann::json{{"kind", "flightqa_manifest"},
                        {"model_id", opts.model_id},
                        {"generated_at", opts.current_datetime},
                        {"c", c},
                        {"n", n},
                        {"k", k},
                        {"num_questions", questions.size()},
                        {"num_sequences", sequences.size()},
                        {"discarded", discarded}};
}

// --- judging -------------------------------------------------------------------

struct JudgeOptions {
  double temperature = 0.0;
  int max_tokens = 4096;
  std::string model_id;  // the judge is configured independently of the agent
};

namespace detail {

inline std::string interaction_history(const EpisodeTrace& trace) {
  std::string out;
  for (const StepRecord& r : trace.steps) {
    if (!out.empty()) out += "\n\n";
    out += "## Step " + std::to_string(r.step) + ":\n\n" + observation_text(r.observation);
  }
  return out;
}

inline bool parse_yes_no(const std::string& raw, const char* tag) {
  std::string v = unquote(raw);
  if (v == "yes") return true;
  if (v == "no") return false;
  fail(ErrorKind::MissingTag, std::string("tag <") + tag + "> is not a yes/no answer");
}

}  // namespace detail

inline JudgeVerdict judge_response(Backend& backend, const EpisodeTrace& trace,
                                   const ConstraintQuestion& q, const JudgeOptions& opts = {}) {
  if (!trace.outcome.final_message) {
    JudgeVerdict v;
    v.think = "no response returned; scored incorrect without judging";
    return v;
  }

  std::string constraints;
  for (const auto& c : q.constraints) constraints += "- " + c + "\n";

  ChatRequest req;
  req.user = prompts::flightqa_judge(trace.goal.issued_at, detail::interaction_history(trace),
                                     constraints, q.question, *trace.outcome.final_message);
  req.temperature = opts.temperature;
  req.max_tokens = opts.max_tokens;
  req.model_id = opts.model_id;

  auto attempt = [&](const std::string& sample) {
    JudgeVerdict v;
    v.grounded = detail::parse_yes_no(extract_tag(sample, "grounding"), "grounding");
    v.relevant = detail::parse_yes_no(extract_tag(sample, "relevance"), "relevance");
    v.correct = v.grounded && v.relevant;
    try {
      v.think = extract_tag(sample, "think");
    } catch (const Error&) {
      // reasoning is optional
    }
    return v;
  };

  Completion first = backend.complete(req);
  try {
    return attempt(first.samples.front());
  } catch (const Error&) {
    ChatRequest retry = req;
    retry.user += "\n\nReminder: answer with the tags <grounding> and <relevance>, each "
                  "containing \"yes\" or \"no\".";
    Completion second = backend.complete(retry);
    try {
      return attempt(second.samples.front());
    } catch (const Error& e) {
      fail(ErrorKind::JudgeParseFailure,
           std::string("judge reply unusable after one retry: ") + e.what());
    }
  }
}

// --- reporting -----------------------------------------------------------------

struct JudgedQuestion {
  ConstraintQuestion question;
  std::optional<JudgeVerdict> verdict;       // absent = unjudged (judge parse failure)
  std::optional<OutcomeCategory> outcome;    // episode outcome, when a trace exists
};

struct ConstraintBucket {
  int judged = 0;
  int correct = 0;
  double percent = 0.0;
};

struct ReportTables {
  int total = 0;
  int judged = 0;
  int unjudged = 0;
  double percent_correct = 0.0;
  double percent_grounded = 0.0;
  double percent_relevant = 0.0;
  std::map<int, ConstraintBucket> by_constraints;  // num_constraints -> curve point
  std::optional<OutcomeStats> outcomes;
};

inline ReportTables report(const std::vector<JudgedQuestion>& rows) {
  ReportTables t;
  t.total = static_cast<int>(rows.size());
  int correct = 0, grounded = 0, relevant = 0;
  std::vector<Outcome> outcomes;
  for (const JudgedQuestion& row : rows) {
    if (!row.verdict) {
      ++t.unjudged;
      continue;
    }
    ++t.judged;
    ConstraintBucket& bucket = t.by_constraints[row.question.num_constraints];
    ++bucket.judged;
    if (row.verdict->correct) ++correct, ++bucket.correct;
    if (row.verdict->grounded) ++grounded;
    if (row.verdict->relevant) ++relevant;
  }
  for (const JudgedQuestion& row : rows) {
    if (row.outcome) outcomes.push_back(Outcome{*row.outcome, {}});
  }
  if (t.judged > 0) {
    t.percent_correct = 100.0 * correct / t.judged;
    t.percent_grounded = 100.0 * grounded / t.judged;
    t.percent_relevant = 100.0 * relevant / t.judged;
  }
  for (auto& [n, bucket] : t.by_constraints) {
    bucket.percent = bucket.judged > 0 ? 100.0 * bucket.correct / bucket.judged : 0.0;
  }
  if (!outcomes.empty()) t.outcomes = aggregate_outcomes(outcomes);
  return t;
}

inline void to_json(nlohmann::json& j, const ConstraintBucket& b) {
  j = nlohmann::json{{"judged", b.judged}, {"correct", b.correct}, {"percent", b.percent}};
}

inline void to_json(nlohmann::json& j, const ReportTables& t) {
  nlohmann::json curve = nlohmann::json::object();
  for (const auto& [n, bucket] : t.by_constraints) curve[std::to_string(n)] = bucket;
  j = nlohmann::json{{"kind", "flightqa_report"},
                     {"total", t.total},
                     {"judged", t.judged},
                     {"unjudged", t.unjudged},
                     {"percent_correct", t.percent_correct},
                     {"percent_grounded", t.percent_grounded},
                     {"percent_relevant", t.percent_relevant},
                     {"correct_by_constraints", curve},
                     {"outcomes", t.outcomes ? nlohmann::json(*t.outcomes) : nlohmann::json()}};
}

namespace detail {
inline std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}
}  // namespace detail

inline std::string render_report(const ReportTables& t) {
  std::string out;
  out += "FlightQA report\n";
  out += "===============\n";
  out += "Questions: " + std::to_string(t.total) + " (judged " + std::to_string(t.judged) +
         ", unjudged " + std::to_string(t.unjudged) + ")\n";
  out += "Correct:  " + detail::pct(t.percent_correct) + "%\n";
  out += "Grounded: " + detail::pct(t.percent_grounded) + "%\n";
  out += "Relevant: " + detail::pct(t.percent_relevant) + "%\n";
  out += "\nCorrect by number of constraints:\n";
  for (const auto& [n, bucket] : t.by_constraints) {
    out += "  " + std::to_string(n) + ": " + detail::pct(bucket.percent) + "%  (" +
           std::to_string(bucket.correct) + "/" + std::to_string(bucket.judged) + ")\n";
  }
  if (t.outcomes) {
    out += "\nOutcomes:\n";
    for (const auto& [name, pct] : t.outcomes->percentages) {
      std::string padded = name;
      padded.resize(20, ' ');
      out += "  " + padded + detail::pct(pct) + "%\n";
    }
  }
  return out;
}

}  // namespace simura
