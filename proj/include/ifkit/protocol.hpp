#pragma once

#include <string>
#include <vector>

#include "ifkit/augment.hpp"
#include "ifkit/clients.hpp"
#include "ifkit/errors.hpp"
#include "ifkit/extraction.hpp"
#include "ifkit/taxonomy.hpp"
#include "ifkit/util/parallel.hpp"

namespace ifkit {

constexpr int kMaxTokensCeiling = 32768;

struct RunConfig {
  std::string model_id;
  double temperature = 0.0;  // 0.2 is the convention for livevibe tasks
  int max_tokens = 4096;     // hard ceiling kMaxTokensCeiling
  int max_attempts = 3;
  std::chrono::milliseconds retry_backoff{2000};
  std::string system_prompt_id = "default";
  std::string system_prompt;  // resolved text; empty means no system turn
  int worker_limit = 4;
  Json options;     // provider pass-through
  Sleeper sleeper = default_sleeper;

  void validate() const {
    if (max_tokens < 1 || max_tokens > kMaxTokensCeiling)
      throw ConfigError("max_tokens must be in [1, " +
                        std::to_string(kMaxTokensCeiling) + "]");
    if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (retry_backoff.count() < 0) throw ConfigError("retry backoff must be >= 0");
    if (worker_limit < 1) throw ConfigError("worker_limit must be >= 1");
  }
};

struct Turn {
  std::string role;  // system | user | model
  std::string content;
  int index = 0;
};

struct Transcript {
  std::string task_id;
  PromptMode mode = PromptMode::kSingle;
  int k = 0;
  std::vector<Turn> turns;
  CodeExtract final_code_extract;
  std::string status = "ok";  // ok | error
  std::string error_reason;
  std::vector<int> attempts;  // per model call, in call order
  std::vector<std::string> attempt_errors;

  int model_turns() const {
    int n = 0;
    for (const auto& t : turns)
      if (t.role == "model") ++n;
    return n;
  }
};

// ---------------------------------------------------------------------------
// Prompt assembly

// Single-turn: all instructions at once, numbered in position order after a
// blank line. The list markup is part of the recorded transcript, so any
// alternative formatting can be diffed later.
inline std::string build_single_turn_prompt(const AugmentedTask& task, int k,
                                            const TaxonomyRegistry& registry) {
  std::string prompt = task.base.base_prompt;
  prompt += "\n";
  for (int i = 0; i < k; ++i) {
    prompt += "\n" + std::to_string(i + 1) + ". " +
              render_prompt(task.instructions[static_cast<size_t>(i)],
                            PromptMode::kSingle, registry);
  }
  return prompt;
}

namespace detail {

inline std::vector<ChatMessage> to_messages(const std::vector<Turn>& turns) {
  std::vector<ChatMessage> msgs;
  msgs.reserve(turns.size());
  for (const auto& t : turns) msgs.push_back({t.role, t.content});
  return msgs;
}

inline void check_k(const AugmentedTask& task, int k) {
  int n = static_cast<int>(task.instructions.size());
  if (k < 1 || k > n)
    throw DomainError("k must be in [1, " + std::to_string(n) + "] for task " +
                      task.base.task_id);
}

struct TurnRunner {
  ModelClient& client;
  const RunConfig& cfg;
  Transcript& transcript;
  int next_index = 0;

  void push(const std::string& role, const std::string& content) {
    transcript.turns.push_back({role, content, next_index++});
  }

  // One model call over the whole current history, with retries.
  // Returns false after recording the error state.
  bool call_model() {
    ModelRequest req;
    req.messages = to_messages(transcript.turns);
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;
    req.options = cfg.options;
    RetryPolicy policy{cfg.max_attempts, cfg.retry_backoff, cfg.sleeper};
    try {
      AttemptedCall call = complete_with_retry(client, req, policy);
      transcript.attempts.push_back(call.attempts);
      for (auto& e : call.attempt_errors)
        transcript.attempt_errors.push_back(std::move(e));
      push("model", call.response);
      return true;
    } catch (const ClientError& e) {
      transcript.attempts.push_back(cfg.max_attempts);
      transcript.attempt_errors.push_back(e.what());
      transcript.status = "error";
      transcript.error_reason = e.what();
      return false;
    }
  }

  void finish(const SyntaxChecker& syntax_ok) {
    for (auto it = transcript.turns.rbegin(); it != transcript.turns.rend(); ++it)
      if (it->role == "model") {
        transcript.final_code_extract = extract(it->content, syntax_ok);
        return;
      }
  }
};

}  // namespace detail

// Base prompt alone; the k = 0 cell that anchors S_0.
inline Transcript run_base_turn(const AugmentedTask& task, ModelClient& client,
                                const RunConfig& cfg,
                                const SyntaxChecker& syntax_ok = python_syntax_ok) {
  cfg.validate();
  Transcript t;
  t.task_id = task.base.task_id;
  t.mode = PromptMode::kSingle;
  t.k = 0;
  detail::TurnRunner runner{client, cfg, t};
  if (!cfg.system_prompt.empty()) runner.push("system", cfg.system_prompt);
  runner.push("user", task.base.base_prompt);
  if (runner.call_model()) runner.finish(syntax_ok);
  return t;
}

inline Transcript run_single_turn(const AugmentedTask& task, int k,
                                  ModelClient& client, const RunConfig& cfg,
                                  const TaxonomyRegistry& registry,
                                  const SyntaxChecker& syntax_ok = python_syntax_ok) {
  cfg.validate();
  detail::check_k(task, k);
  Transcript t;
  t.task_id = task.base.task_id;
  t.mode = PromptMode::kSingle;
  t.k = k;
  detail::TurnRunner runner{client, cfg, t};
  if (!cfg.system_prompt.empty()) runner.push("system", cfg.system_prompt);
  runner.push("user", build_single_turn_prompt(task, k, registry));
  if (runner.call_model()) runner.finish(syntax_ok);
  return t;
}

// Multi-turn editing: base prompt first, then one instruction per round.
// Every round resends the full history; the last round's code is what gets
// judged. A failed round leaves the partial transcript in place.
inline Transcript run_multi_turn(const AugmentedTask& task, int k,
                                 ModelClient& client, const RunConfig& cfg,
                                 const TaxonomyRegistry& registry,
                                 const SyntaxChecker& syntax_ok = python_syntax_ok) {
  cfg.validate();
  detail::check_k(task, k);
  Transcript t;
  t.task_id = task.base.task_id;
  t.mode = PromptMode::kMulti;
  t.k = k;
  detail::TurnRunner runner{client, cfg, t};
  if (!cfg.system_prompt.empty()) runner.push("system", cfg.system_prompt);
  runner.push("user", task.base.base_prompt);
  if (runner.call_model()) {
    for (int i = 0; i < k; ++i) {
      runner.push("user",
                  render_prompt(task.instructions[static_cast<size_t>(i)],
                                PromptMode::kMulti, registry));
      if (!runner.call_model()) break;
    }
  }
  runner.finish(syntax_ok);
  return t;
}

// ---------------------------------------------------------------------------
// Suite driver

struct SuiteResult {
  std::vector<Transcript> transcripts;  // task-major, then mode, then k
  int cells_total = 0;
  int cells_errored = 0;
  double error_rate = 0.0;
  bool excluded = false;  // error rate above the 10% exclusion threshold
};

// Executes every requested (task, mode, k) cell. k = 0 runs under the
// single mode only (the base cell is protocol-independent); cells whose k
// exceeds a task's instruction count are skipped, which is how under-filled
// tasks stay out of fixed-k aggregates.
inline SuiteResult run_suite(const std::vector<AugmentedTask>& tasks,
                             const std::vector<PromptMode>& modes,
                             const std::vector<int>& ks, ModelClient& client,
                             const RunConfig& cfg,
                             const TaxonomyRegistry& registry,
                             const SyntaxChecker& syntax_ok = python_syntax_ok) {
  cfg.validate();
  if (tasks.empty()) throw DomainError("run_suite with no tasks");

  struct Cell {
    const AugmentedTask* task;
    PromptMode mode;
    int k;
  };
  std::vector<Cell> cells;
  for (const auto& task : tasks) {
    int n = static_cast<int>(task.instructions.size());
    for (const auto& mode : modes) {
      for (int k : ks) {
        if (k < 0 || k > n) continue;
        if (k == 0 && mode == PromptMode::kMulti) continue;
        cells.push_back({&task, mode, k});
      }
    }
  }
  if (cells.empty()) throw DomainError("run_suite produced no cells");

  SuiteResult result;
  result.transcripts.resize(cells.size());
  result.cells_total = static_cast<int>(cells.size());

  parallel_for_each(cells.size(), static_cast<size_t>(cfg.worker_limit),
                    [&](size_t i) {
                      const Cell& cell = cells[i];
                      if (cell.k == 0) {
                        result.transcripts[i] =
                            run_base_turn(*cell.task, client, cfg, syntax_ok);
                      } else if (cell.mode == PromptMode::kSingle) {
                        result.transcripts[i] = run_single_turn(
                            *cell.task, cell.k, client, cfg, registry, syntax_ok);
                      } else {
                        result.transcripts[i] = run_multi_turn(
                            *cell.task, cell.k, client, cfg, registry, syntax_ok);
                      }
                    });

  for (const auto& t : result.transcripts)
    if (t.status == "error") ++result.cells_errored;
  result.error_rate =
      static_cast<double>(result.cells_errored) / result.cells_total;
  result.excluded = result.error_rate > 0.10;
  return result;
}

// ---------------------------------------------------------------------------
// Transcript serialization

inline Json transcript_to_json(const Transcript& t) {
  Json turns = Json::array();
  for (const auto& turn : t.turns)
    turns.push_back(Json{{"role", turn.role},
                         {"content", turn.content},
                         {"index", turn.index}});
  const CodeExtract& e = t.final_code_extract;
  return Json{{"task_id", t.task_id},
              {"mode", t.mode == PromptMode::kSingle ? "single" : "multi"},
              {"k", t.k},
              {"turns", turns},
              {"status", t.status},
              {"error_reason", t.error_reason},
              {"attempts", t.attempts},
              {"attempt_errors", t.attempt_errors},
              {"final_extract",
               Json{{"code", e.code},
                    {"prose_before_last_block", e.prose_before_last_block},
                    {"prose_after_last_block", e.prose_after_last_block},
                    {"block_count", e.block_count},
                    {"parse_ok", e.parse_ok}}}};
}

inline Transcript transcript_from_json(const Json& j) {
  Transcript t;
  t.task_id = j.at("task_id").get<std::string>();
  t.mode = j.at("mode").get<std::string>() == "multi" ? PromptMode::kMulti
                                                      : PromptMode::kSingle;
  t.k = j.at("k").get<int>();
  for (const auto& turn : j.at("turns"))
    t.turns.push_back({turn.at("role").get<std::string>(),
                       turn.at("content").get<std::string>(),
                       turn.at("index").get<int>()});
  t.status = j.at("status").get<std::string>();
  t.error_reason = j.value("error_reason", std::string());
  if (j.contains("attempts")) t.attempts = j.at("attempts").get<std::vector<int>>();
  if (j.contains("attempt_errors"))
    t.attempt_errors = j.at("attempt_errors").get<std::vector<std::string>>();
  const Json& e = j.at("final_extract");
  t.final_code_extract.code = e.at("code").get<std::string>();
  t.final_code_extract.prose_before_last_block =
      e.at("prose_before_last_block").get<std::string>();
  t.final_code_extract.prose_after_last_block =
      e.at("prose_after_last_block").get<std::string>();
  t.final_code_extract.block_count = e.at("block_count").get<int>();
  t.final_code_extract.parse_ok = e.at("parse_ok").get<bool>();
  return t;
}

}  // namespace ifkit
