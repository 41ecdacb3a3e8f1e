#pragma once

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ifkit/augment.hpp"
#include "ifkit/clients.hpp"
#include "ifkit/config.hpp"
#include "ifkit/correlation.hpp"
#include "ifkit/errors.hpp"
#include "ifkit/http_client.hpp"
#include "ifkit/metrics.hpp"
#include "ifkit/protocol.hpp"
#include "ifkit/taxonomy.hpp"
#include "ifkit/testrun.hpp"
#include "ifkit/verifier.hpp"

namespace ifkit {

namespace cli_detail {

// ---------------------------------------------------------------------------
// Shared plumbing

inline std::shared_ptr<ModelClient> make_client(const std::string& spec) {
  if (starts_with(spec, "mock:"))
    return std::make_shared<MockModelClient>(spec.substr(5));
  if (starts_with(spec, "http:")) {
    Json cfg = parse_json(read_file(spec.substr(5)), spec);
    HttpClientConfig http;
    http.base_url = cfg.at("base_url").get<std::string>();
    http.path = cfg.value("path", http.path);
    http.model = cfg.at("model").get<std::string>();
    http.api_key_env = cfg.value("api_key_env", std::string());
    http.timeout_seconds = cfg.value("timeout_seconds", http.timeout_seconds);
    return std::make_shared<HttpModelClient>(std::move(http));
  }
  throw ConfigError("client spec must be mock:<fixture> or http:<config>: " + spec);
}

inline std::vector<PromptMode> parse_modes(const std::string& csv) {
  std::vector<PromptMode> modes;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string m(trim(item));
    if (m == "single")
      modes.push_back(PromptMode::kSingle);
    else if (m == "multi")
      modes.push_back(PromptMode::kMulti);
    else if (m == "both") {
      modes.push_back(PromptMode::kSingle);
      modes.push_back(PromptMode::kMulti);
    } else
      throw ConfigError("unknown mode: " + m);
  }
  if (modes.empty()) throw ConfigError("no modes requested");
  return modes;
}

inline std::vector<int> parse_ks(const std::string& csv) {
  std::vector<int> ks;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string v(trim(item));
    if (v.empty()) continue;
    try {
      ks.push_back(std::stoi(v));
    } catch (const std::exception&) {
      throw ConfigError("unparseable k value: " + v);
    }
  }
  if (ks.empty()) throw ConfigError("no k values requested");
  return ks;
}

inline std::string linter_name(const std::string& binary) {
  return fs::path(binary).filename().string();
}

inline bool is_header_record(const Json& j) {
  return j.is_object() && j.contains("file_kind");
}

inline VerdictRecord verdict_from_json(const Json& j) {
  VerdictRecord v;
  v.task_id = j.at("task_id").get<std::string>();
  v.spec_id = j.at("spec_id").get<std::string>();
  v.position = j.at("position").get<int>();
  v.passed = j.at("passed").get<bool>();
  v.reason = j.value("reason", std::string());
  v.mode = j.at("mode").get<std::string>() == "multi" ? PromptMode::kMulti
                                                      : PromptMode::kSingle;
  v.k = j.at("k").get<int>();
  return v;
}

// Minimal CSV splitting for the formats this tool itself writes (no quoted
// fields anywhere in them).
inline std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

struct ScorePair {
  double if_score = 0.0;
  double func_score = 0.0;
};

// Reads {model_id, if_score, func_score} rows.
inline std::map<std::string, ScorePair> load_scores_csv(const fs::path& path) {
  std::map<std::string, ScorePair> scores;
  auto lines = split_lines(read_file(path));
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string line(trim(lines[i]));
    if (line.empty()) continue;
    if (i == 0 && starts_with(line, "model_id")) continue;
    auto fields = csv_fields(line);
    if (fields.size() != 3)
      throw DomainError("scores row needs model_id,if_score,func_score: " + line);
    ScorePair p;
    try {
      p.if_score = std::stod(fields[1]);
      p.func_score = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw DomainError("unparseable score values: " + line);
    }
    if (!scores.emplace(std::string(trim(fields[0])), p).second)
      throw DomainError("duplicate scores row: " + fields[0]);
  }
  if (scores.empty()) throw DomainError("scores file has no rows: " + path.string());
  return scores;
}

// Pulls (IF at single k=1, Func at k=0) out of a metrics CSV produced by
// the score command: the pair the composite mixes.
inline std::pair<std::string, ScorePair> scores_from_metrics_csv(
    const fs::path& path) {
  auto lines = split_lines(read_file(path));
  std::string model_id;
  std::optional<double> if_score, func_score;
  for (size_t i = 1; i < lines.size(); ++i) {
    std::string line(trim(lines[i]));
    if (line.empty()) continue;
    auto fields = csv_fields(line);
    if (fields.size() < 8)
      throw DomainError("unrecognized metrics row in " + path.string());
    model_id = fields[0];
    const std::string& mode = fields[1];
    const std::string& k = fields[2];
    if (mode == "single" && k == "0" && !fields[4].empty())
      func_score = std::stod(fields[4]);  // s_k column
    if (mode == "single" && k == "1" && !fields[6].empty())
      if_score = std::stod(fields[6]);  // if_instruction column
  }
  if (model_id.empty() || !if_score || !func_score)
    throw DomainError("metrics file lacks the (single,0) and (single,1) rows "
                      "needed for correlation: " +
                      path.string());
  return {model_id, ScorePair{*if_score, *func_score}};
}

// ---------------------------------------------------------------------------
// Subcommand bodies

struct CommonOpts {
  std::string config_path;
  OptionResolver resolver;

  void load() {
    if (!config_path.empty())
      resolver = OptionResolver::from_file(config_path);
  }
};

inline int cmd_taxonomy_validate(const std::string& taxonomy_path,
                                 std::ostream& out) {
  TaxonomyRegistry registry = load_taxonomy_file(taxonomy_path);
  std::map<Category, size_t> counts = registry.category_counts();
  size_t linter_backed = 0;
  for (const auto& s : registry.specs())
    if (s.verifier.kind == VerifierKind::kLinterRule) ++linter_backed;
  out << "taxonomy OK: " << registry.size() << " instructions";
  for (const auto& [cat, name] : category_names()) {
    auto it = counts.find(cat);
    out << "; " << name << " " << (it == counts.end() ? 0 : it->second);
  }
  out << "; linter-backed " << linter_backed << "\n";
  return 0;
}

struct AugmentOpts {
  std::string taxonomy_path;
  std::string dataset_path;
  std::string out_path;
  std::string skip_report_path;
  std::uint64_t seed = 1234;
  bool seed_given = false;
  int limit = 5;
  bool limit_given = false;
  std::string selector = "stub";
  std::string client_spec;
  std::string judge_template_path;
  std::string params_template_path;
  int workers = 0;
  bool workers_given = false;
};

inline int cmd_augment(AugmentOpts& o, CommonOpts& common, std::ostream& out) {
  const auto& r = common.resolver;
  std::uint64_t seed = r.resolve<std::uint64_t>(o.seed_given, o.seed,
                                                {"augment", "seed"}, nullptr, 1234);
  int limit =
      r.resolve<int>(o.limit_given, o.limit, {"augment", "limit"}, nullptr, 5);
  int workers = r.resolve<int>(o.workers_given, o.workers,
                               {"run", "worker_limit"}, nullptr, 4);

  TaxonomyRegistry registry = load_taxonomy_file(o.taxonomy_path);
  std::vector<BaseTask> dataset = load_base_tasks(o.dataset_path);

  std::unique_ptr<SelectorClient> selector;
  std::unique_ptr<SelectorClient> param_client;
  if (o.selector == "stub") {
    selector = std::make_unique<StubSelector>();
    param_client = std::make_unique<StubSelector>();
  } else if (o.selector == "llm") {
    if (o.client_spec.empty())
      throw ConfigError("--selector llm requires --client");
    auto client = make_client(o.client_spec);
    std::string judge_tmpl = read_file(o.judge_template_path);
    std::string params_tmpl = read_file(o.params_template_path);
    selector = std::make_unique<LlmSelector>(client, judge_tmpl, params_tmpl);
    param_client = std::make_unique<LlmSelector>(client, judge_tmpl, params_tmpl);
  } else {
    throw ConfigError("unknown selector: " + o.selector);
  }

  AugmentResult result =
      augment_dataset(dataset, registry, *selector, *param_client, seed, limit,
                      static_cast<size_t>(workers));

  std::vector<Json> records;
  for (const auto& task : result.tasks)
    records.push_back(augmented_task_to_json(task));
  write_jsonl(o.out_path, records);

  std::vector<Json> skips;
  for (const auto& s : result.skips)
    skips.push_back(Json{{"task_id", s.task_id}, {"reason", s.reason}});
  std::string skip_path = o.skip_report_path.empty()
                              ? o.out_path + ".skips.jsonl"
                              : o.skip_report_path;
  write_jsonl(skip_path, skips);

  out << "augmented " << result.tasks.size() << " of " << dataset.size()
      << " tasks (seed " << seed << ", limit " << limit << "); "
      << result.skips.size() << " skip-report entries -> " << skip_path << "\n";
  return 0;
}

struct RunOpts {
  std::string taxonomy_path;
  std::string tasks_path;
  std::string client_spec;
  std::string model_id;
  std::string modes = "single,multi";
  std::string ks = "0,1,2,3,4,5";
  std::string out_path;
  std::string summary_path;
  double temperature = 0.0;
  bool temperature_given = false;
  int max_tokens = 4096;
  bool max_tokens_given = false;
  int max_attempts = 3;
  bool max_attempts_given = false;
  int retry_backoff_ms = 2000;
  bool backoff_given = false;
  int workers = 4;
  bool workers_given = false;
  std::string system_prompts_path;
  std::string system_prompt_id = "default";
};

inline int cmd_run(RunOpts& o, CommonOpts& common, std::ostream& out) {
  const auto& r = common.resolver;
  TaxonomyRegistry registry = load_taxonomy_file(o.taxonomy_path);

  std::vector<AugmentedTask> tasks;
  for (const auto& rec : read_jsonl(o.tasks_path))
    tasks.push_back(augmented_task_from_json(rec, registry));

  auto client = make_client(o.client_spec);
  RunConfig cfg;
  cfg.model_id = o.model_id.empty() ? client->name() : o.model_id;
  cfg.temperature = r.resolve<double>(o.temperature_given, o.temperature,
                                      {"run", "temperature"}, nullptr, 0.0);
  cfg.max_tokens = r.resolve<int>(o.max_tokens_given, o.max_tokens,
                                  {"run", "max_tokens"}, nullptr, 4096);
  cfg.max_attempts = r.resolve<int>(o.max_attempts_given, o.max_attempts,
                                    {"run", "max_attempts"}, nullptr, 3);
  cfg.retry_backoff = std::chrono::milliseconds(
      r.resolve<int>(o.backoff_given, o.retry_backoff_ms,
                     {"run", "retry_backoff_ms"}, nullptr, 2000));
  cfg.worker_limit = r.resolve<int>(o.workers_given, o.workers,
                                    {"run", "worker_limit"}, nullptr, 4);
  std::string prompts_path =
      r.resolve<std::string>(!o.system_prompts_path.empty(), o.system_prompts_path,
                             {"run", "system_prompts"}, nullptr, "");
  cfg.system_prompt_id = o.system_prompt_id;
  if (!prompts_path.empty())
    cfg.system_prompt = load_system_prompt(prompts_path, cfg.system_prompt_id);

  SuiteResult suite = run_suite(tasks, parse_modes(o.modes), parse_ks(o.ks),
                                *client, cfg, registry);

  std::vector<Json> records;
  for (const auto& t : suite.transcripts)
    records.push_back(transcript_to_json(t));
  write_jsonl(o.out_path, records);

  Json summary{{"model_id", cfg.model_id},
               {"cells_total", suite.cells_total},
               {"cells_errored", suite.cells_errored},
               {"error_rate", suite.error_rate},
               {"excluded", suite.excluded}};
  if (!o.summary_path.empty())
    write_file_atomic(o.summary_path, summary.dump() + "\n");
  out << summary.dump() << "\n";
  return 0;
}

struct VerifyOpts {
  std::string taxonomy_path;
  std::string tasks_path;
  std::string transcripts_path;
  std::string verdicts_path;
  std::string outcomes_path;
  std::string linter_bin;
  bool linter_bin_given = false;
  std::string linter_version;
  bool linter_version_given = false;
  int workers = 4;
  bool workers_given = false;
  int test_timeout_seconds = 10;
  bool timeout_given = false;
  int test_memory_mib = 512;
  bool memory_given = false;
};

inline int cmd_verify(VerifyOpts& o, CommonOpts& common, std::ostream& out) {
  const auto& r = common.resolver;
  LinterConfig linter;
  linter.binary =
      r.resolve<std::string>(o.linter_bin_given, o.linter_bin,
                             {"linter", "binary"}, "IFKIT_LINTER_BIN", "ruff");
  linter.expected_version = r.resolve<std::string>(
      o.linter_version_given, o.linter_version, {"linter", "expected_version"},
      nullptr, "0.16.4");
  int workers = r.resolve<int>(o.workers_given, o.workers,
                               {"run", "worker_limit"}, nullptr, 4);
  TestLimits limits;
  limits.timeout = std::chrono::seconds(
      r.resolve<int>(o.timeout_given, o.test_timeout_seconds,
                     {"limits", "test_timeout_seconds"}, nullptr, 10));
  limits.memory_bytes =
      1024ull * 1024 *
      static_cast<std::uint64_t>(r.resolve<int>(o.memory_given, o.test_memory_mib,
                                                {"limits", "test_memory_mib"},
                                                nullptr, 512));

  TaxonomyRegistry registry = load_taxonomy_file(o.taxonomy_path);
  std::map<std::string, AugmentedTask> tasks;
  for (const auto& rec : read_jsonl(o.tasks_path)) {
    AugmentedTask t = augmented_task_from_json(rec, registry);
    tasks.emplace(t.base.task_id, std::move(t));
  }
  std::vector<Transcript> transcripts;
  for (const auto& rec : read_jsonl(o.transcripts_path))
    transcripts.push_back(transcript_from_json(rec));

  std::string version = ensure_linter(linter);  // fail fast, once

  struct Slot {
    std::vector<VerdictRecord> verdicts;
    std::optional<TestOutcome> outcome;
    std::optional<Json> outcome_row;
  };
  std::vector<Slot> slots(transcripts.size());

  parallel_for_each(transcripts.size(), static_cast<size_t>(workers), [&](size_t i) {
    const Transcript& t = transcripts[i];
    if (t.status != "ok") return;  // errored cells stay out of every metric
    auto it = tasks.find(t.task_id);
    if (it == tasks.end())
      throw DomainError("transcript references unknown task: " + t.task_id);
    const AugmentedTask& task = it->second;
    if (t.k > static_cast<int>(task.instructions.size()))
      throw DomainError("transcript k exceeds task instructions: " + t.task_id);

    VerdictContext ctx{t.task_id, t.mode, t.k};
    for (int j = 0; j < t.k; ++j)
      slots[i].verdicts.push_back(verify(task.instructions[static_cast<size_t>(j)],
                                         t.final_code_extract, registry, linter,
                                         ctx));
    TestOutcome outcome = run_unit_tests(t.final_code_extract.code,
                                         task.base.tests_ref, limits, t.task_id);
    slots[i].outcome_row =
        Json{{"task_id", t.task_id},
             {"mode", t.mode == PromptMode::kSingle ? "single" : "multi"},
             {"k", t.k},
             {"passed", outcome.passed},
             {"timed_out", outcome.timed_out},
             {"detail", outcome.detail}};
    slots[i].outcome = std::move(outcome);
  });

  std::vector<Json> verdict_records;
  verdict_records.push_back(Json{{"file_kind", "verdicts"},
                                 {"schema_version", 1},
                                 {"linter", linter_name(linter.binary)},
                                 {"linter_version", version}});
  std::vector<Json> outcome_records;
  outcome_records.push_back(Json{{"file_kind", "outcomes"},
                                 {"schema_version", 1}});
  size_t n_verdicts = 0, n_outcomes = 0;
  for (const auto& slot : slots) {
    for (const auto& v : slot.verdicts) {
      verdict_records.push_back(verdict_to_json(v));
      ++n_verdicts;
    }
    if (slot.outcome_row) {
      outcome_records.push_back(*slot.outcome_row);
      ++n_outcomes;
    }
  }
  write_jsonl(o.verdicts_path, verdict_records);
  write_jsonl(o.outcomes_path, outcome_records);

  out << "verified " << transcripts.size() << " transcripts: " << n_verdicts
      << " instruction verdicts, " << n_outcomes << " test outcomes (linter "
      << linter_name(linter.binary) << " " << version << ")\n";
  return 0;
}

struct ScoreOpts {
  std::string verdicts_path;
  std::string outcomes_path;
  std::string model_id = "model";
  std::string out_path;
  std::string positions_path;
};

inline int cmd_score(ScoreOpts& o, std::ostream& out) {
  std::vector<VerdictRecord> verdicts;
  for (const auto& rec : read_jsonl(o.verdicts_path)) {
    if (is_header_record(rec)) {
      if (rec.value("file_kind", std::string()) != "verdicts")
        throw DomainError("not a verdicts file: " + o.verdicts_path);
      continue;
    }
    verdicts.push_back(verdict_from_json(rec));
  }

  std::map<CellKey, std::vector<TestOutcome>> outcome_cells;
  for (const auto& rec : read_jsonl(o.outcomes_path)) {
    if (is_header_record(rec)) {
      if (rec.value("file_kind", std::string()) != "outcomes")
        throw DomainError("not an outcomes file: " + o.outcomes_path);
      continue;
    }
    CellKey key{rec.at("mode").get<std::string>() == "multi" ? PromptMode::kMulti
                                                             : PromptMode::kSingle,
                rec.at("k").get<int>()};
    TestOutcome outcome;
    outcome.task_id = rec.at("task_id").get<std::string>();
    outcome.passed = rec.at("passed").get<bool>();
    outcome.timed_out = rec.value("timed_out", false);
    outcome_cells[key].push_back(std::move(outcome));
  }

  FunctionalScores functional;
  for (const auto& [key, cell] : outcome_cells)
    functional[key] =
        FunctionalCell{pass_at_1(cell), static_cast<int>(cell.size())};

  MetricsTable table =
      aggregate(o.model_id, build_verdict_tables(verdicts), functional);
  write_file_atomic(o.out_path, metrics_to_csv(table));
  if (!o.positions_path.empty())
    write_file_atomic(o.positions_path, position_profile_to_csv(table));

  out << "scored model " << o.model_id << ": " << table.rows.size()
      << " metric rows -> " << o.out_path << "\n";
  return 0;
}

struct CorrelateOpts {
  std::string scores_path;
  std::vector<std::string> metrics_paths;
  std::string elo_path;
  std::string elo_column = "without_sc";
  double step = 0.01;
  bool step_given = false;
  std::string corr = "both";
  bool zscore = false;
  std::string out_path;
  std::string summary_path;
};

inline int cmd_correlate(CorrelateOpts& o, CommonOpts& common, std::ostream& out) {
  const auto& r = common.resolver;
  double step = r.resolve<double>(o.step_given, o.step,
                                  {"correlate", "step"}, nullptr, 0.01);
  if (!(step > 0.0) || step > 0.5)
    throw ConfigError("--step must be in (0, 0.5]");

  std::map<std::string, ScorePair> scores;
  if (!o.scores_path.empty()) {
    scores = load_scores_csv(o.scores_path);
  }
  for (const auto& path : o.metrics_paths) {
    auto [model, pair] = scores_from_metrics_csv(path);
    if (!scores.emplace(model, pair).second)
      throw DomainError("duplicate model across score inputs: " + model);
  }
  if (scores.empty())
    throw ConfigError("correlate needs --scores and/or --metrics input");

  EloTable elo = load_elo_csv(o.elo_path);
  EloColumn column;
  if (o.elo_column == "with_sc")
    column = EloColumn::kWithStyleControl;
  else if (o.elo_column == "without_sc")
    column = EloColumn::kWithoutStyleControl;
  else
    throw ConfigError("--elo-column must be with_sc or without_sc");

  std::vector<CorrKind> kinds;
  if (o.corr == "pearson")
    kinds = {CorrKind::kPearson};
  else if (o.corr == "spearman")
    kinds = {CorrKind::kSpearman};
  else if (o.corr == "both")
    kinds = {CorrKind::kPearson, CorrKind::kSpearman};
  else
    throw ConfigError("--corr must be pearson, spearman, or both");

  std::map<std::string, double> if_scores, func_scores;
  for (const auto& [model, pair] : scores) {
    if_scores[model] = pair.if_score;
    func_scores[model] = pair.func_score;
  }

  Json summary = Json::object();
  for (CorrKind kind : kinds) {
    SweepResult sweep = composite_sweep(if_scores, func_scores, elo, column,
                                        step, kind, o.zscore);
    fs::path base(o.out_path);
    fs::path path = kinds.size() == 1
                        ? base
                        : base.parent_path() /
                              (base.stem().string() + "_" + to_string(kind) +
                               base.extension().string());
    write_file_atomic(path, sweep_to_csv(sweep));
    summary[to_string(kind)] =
        Json{{"best_alpha", sweep.best_alpha},
             {"best_coefficient", sweep.best_coefficient},
             {"n_models", sweep.models.size()},
             {"elo_column", o.elo_column},
             {"zscore", o.zscore},
             // Basename only: the summary names its sibling file and must
             // compare equal no matter where the run is staged.
             {"sweep_file", path.filename().string()}};
    out << to_string(kind) << ": best_alpha " << format_2dp(sweep.best_alpha)
        << " (coefficient " << format_2dp(sweep.best_coefficient) << ", "
        << sweep.models.size() << " models) -> " << path.string() << "\n";
  }
  if (!o.summary_path.empty())
    write_file_atomic(o.summary_path, summary.dump() + "\n");
  return 0;
}

struct ReportOpts {
  std::vector<std::string> metrics_paths;
  std::vector<std::string> positions_paths;
  std::vector<std::string> sweep_paths;
  std::string out_dir;
};

inline int cmd_report(ReportOpts& o, std::ostream& out) {
  if (o.metrics_paths.empty())
    throw ConfigError("report needs at least one --metrics file");
  fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);

  // Metric curves: straight concatenation, one row per (model, mode, k).
  std::string curves = "model_id,mode,k,n_tasks,s_k,fr_k_pct,if_instruction,if_task\n";
  for (const auto& path : o.metrics_paths) {
    auto lines = split_lines(read_file(path));
    for (size_t i = 1; i < lines.size(); ++i)
      if (!trim(lines[i]).empty()) curves += lines[i] + "\n";
  }
  write_file_atomic(dir / "metric_curves.csv", curves);

  // Position profiles plus an unweighted cross-model mean per (mode, position).
  std::string positions = "model_id,mode,position,mean_if\n";
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> mean_acc;
  for (const auto& path : o.positions_paths) {
    auto lines = split_lines(read_file(path));
    for (size_t i = 1; i < lines.size(); ++i) {
      std::string line(trim(lines[i]));
      if (line.empty()) continue;
      positions += line + "\n";
      auto fields = csv_fields(line);
      if (fields.size() != 4)
        throw DomainError("unrecognized position row in " + path);
      auto& acc = mean_acc[{fields[1], fields[2]}];
      acc.first += std::stod(fields[3]);
      acc.second += 1;
    }
  }
  for (const auto& [key, acc] : mean_acc)
    positions += "cross-model-mean," + key.first + "," + key.second + "," +
                 format_2dp(acc.first / acc.second) + "\n";
  write_file_atomic(dir / "position_profile_points.csv", positions);

  // Alpha sweep points for the correlation figure.
  std::string sweeps = "sweep,alpha,coefficient\n";
  for (const auto& path : o.sweep_paths) {
    std::string stem = fs::path(path).stem().string();
    auto lines = split_lines(read_file(path));
    for (size_t i = 1; i < lines.size(); ++i)
      if (!trim(lines[i]).empty()) sweeps += stem + "," + lines[i] + "\n";
  }
  write_file_atomic(dir / "alpha_sweep_points.csv", sweeps);

  out << "report written to " << dir.string() << " (metric_curves.csv, "
      << "position_profile_points.csv, alpha_sweep_points.csv)\n";
  return 0;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Entry point shared by the binary and the tests

inline int run_cli(std::vector<std::string> args, std::ostream& out,
                   std::ostream& err) {
  using namespace cli_detail;

  CLI::App app{"instruction-following evaluation toolkit", "ifkit"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--config", common.config_path,
                 "JSON config file (flags > config > environment > defaults)");

  // taxonomy-validate
  auto* validate = app.add_subcommand("taxonomy-validate",
                                      "load and validate a taxonomy file");
  std::string validate_taxonomy;
  validate->add_option("--taxonomy", validate_taxonomy, "taxonomy JSON file")
      ->required();

  // augment
  auto* augment = app.add_subcommand("augment", "augment base tasks with instructions");
  AugmentOpts aug;
  augment->add_option("--taxonomy", aug.taxonomy_path, "taxonomy JSON file")->required();
  augment->add_option("--dataset", aug.dataset_path, "base task JSONL")->required();
  augment->add_option("--out", aug.out_path, "augmented task JSONL output")->required();
  augment->add_option("--skip-report", aug.skip_report_path,
                      "skip report JSONL output (default <out>.skips.jsonl)");
  auto* aug_seed = augment->add_option("--seed", aug.seed, "global augmentation seed");
  auto* aug_limit = augment->add_option("--limit", aug.limit, "instructions per task");
  augment->add_option("--selector", aug.selector, "stub or llm");
  augment->add_option("--client", aug.client_spec,
                      "selector model client, mock:<fixture> or http:<config>");
  augment->add_option("--judge-template", aug.judge_template_path,
                      "keep/discard prompt template (llm selector)");
  augment->add_option("--params-template", aug.params_template_path,
                      "parameter proposal prompt template (llm selector)");
  auto* aug_workers = augment->add_option("--workers", aug.workers, "worker limit");

  // run
  auto* run = app.add_subcommand("run", "drive a model over augmented tasks");
  RunOpts ro;
  run->add_option("--taxonomy", ro.taxonomy_path, "taxonomy JSON file")->required();
  run->add_option("--tasks", ro.tasks_path, "augmented task JSONL")->required();
  run->add_option("--client", ro.client_spec,
                  "mock:<fixture> or http:<config>")->required();
  run->add_option("--model-id", ro.model_id, "model label for reports");
  run->add_option("--modes", ro.modes, "comma list: single,multi");
  run->add_option("--ks", ro.ks, "comma list of instruction counts (0 = base)");
  run->add_option("--out", ro.out_path, "transcript JSONL output")->required();
  run->add_option("--summary", ro.summary_path, "run summary JSON output");
  auto* run_temp = run->add_option("--temperature", ro.temperature, "sampling temperature");
  auto* run_tokens = run->add_option("--max-tokens", ro.max_tokens, "generation cap");
  auto* run_attempts = run->add_option("--max-attempts", ro.max_attempts,
                                       "attempts per model call");
  auto* run_backoff = run->add_option("--retry-backoff-ms", ro.retry_backoff_ms,
                                      "delay between retries");
  auto* run_workers = run->add_option("--workers", ro.workers, "worker limit");
  run->add_option("--system-prompts", ro.system_prompts_path,
                  "system prompt fixture file");
  run->add_option("--system-prompt-id", ro.system_prompt_id,
                  "prompt id within the fixture");

  // verify
  auto* verify_cmd = app.add_subcommand("verify",
                                        "judge transcripts and run unit tests");
  VerifyOpts vo;
  verify_cmd->add_option("--taxonomy", vo.taxonomy_path, "taxonomy JSON file")->required();
  verify_cmd->add_option("--tasks", vo.tasks_path, "augmented task JSONL")->required();
  verify_cmd->add_option("--transcripts", vo.transcripts_path,
                         "transcript JSONL from run")->required();
  verify_cmd->add_option("--out", vo.verdicts_path, "verdict JSONL output")->required();
  verify_cmd->add_option("--outcomes", vo.outcomes_path,
                         "test outcome JSONL output")->required();
  auto* v_bin = verify_cmd->add_option("--linter-bin", vo.linter_bin,
                                       "reference linter binary");
  auto* v_ver = verify_cmd->add_option("--linter-version", vo.linter_version,
                                       "pinned linter version");
  auto* v_workers = verify_cmd->add_option("--workers", vo.workers, "worker limit");
  auto* v_timeout = verify_cmd->add_option("--test-timeout", vo.test_timeout_seconds,
                                           "unit test timeout seconds");
  auto* v_memory = verify_cmd->add_option("--test-memory-mib", vo.test_memory_mib,
                                          "unit test memory cap (MiB)");

  // score
  auto* score = app.add_subcommand("score", "aggregate verdicts and outcomes");
  ScoreOpts so;
  score->add_option("--verdicts", so.verdicts_path, "verdict JSONL")->required();
  score->add_option("--outcomes", so.outcomes_path, "outcome JSONL")->required();
  score->add_option("--model-id", so.model_id, "model label");
  score->add_option("--out", so.out_path, "metrics CSV output")->required();
  score->add_option("--positions", so.positions_path,
                    "position profile CSV output");

  // correlate
  auto* correlate = app.add_subcommand("correlate",
                                       "sweep composite weight against Elo");
  CorrelateOpts co;
  correlate->add_option("--scores", co.scores_path,
                        "CSV {model_id,if_score,func_score}");
  correlate->add_option("--metrics", co.metrics_paths,
                        "metrics CSV from score (repeatable)");
  correlate->add_option("--elo", co.elo_path, "Elo CSV")->required();
  correlate->add_option("--elo-column", co.elo_column, "with_sc or without_sc");
  auto* corr_step = correlate->add_option("--step", co.step, "alpha grid step");
  correlate->add_option("--corr", co.corr, "pearson, spearman, or both");
  correlate->add_flag("--zscore", co.zscore, "standardize scores before mixing");
  correlate->add_option("--out", co.out_path, "sweep CSV output")->required();
  correlate->add_option("--summary", co.summary_path, "summary JSON output");

  // report
  auto* report = app.add_subcommand("report", "emit plot-ready data files");
  ReportOpts po;
  report->add_option("--metrics", po.metrics_paths, "metrics CSV (repeatable)");
  report->add_option("--positions", po.positions_paths,
                     "position profile CSV (repeatable)");
  report->add_option("--sweep", po.sweep_paths, "sweep CSV (repeatable)");
  report->add_option("--out-dir", po.out_dir, "output directory")->required();

  // Top-level options like --config may appear after the subcommand name.
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    // CLI11 consumes the vector back to front.
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    common.load();
    aug.seed_given = aug_seed->count() > 0;
    aug.limit_given = aug_limit->count() > 0;
    aug.workers_given = aug_workers->count() > 0;
    ro.temperature_given = run_temp->count() > 0;
    ro.max_tokens_given = run_tokens->count() > 0;
    ro.max_attempts_given = run_attempts->count() > 0;
    ro.backoff_given = run_backoff->count() > 0;
    ro.workers_given = run_workers->count() > 0;
    vo.linter_bin_given = v_bin->count() > 0;
    vo.linter_version_given = v_ver->count() > 0;
    vo.workers_given = v_workers->count() > 0;
    vo.timeout_given = v_timeout->count() > 0;
    vo.memory_given = v_memory->count() > 0;
    co.step_given = corr_step->count() > 0;

    if (validate->parsed()) return cmd_taxonomy_validate(validate_taxonomy, out);
    if (augment->parsed()) return cmd_augment(aug, common, out);
    if (run->parsed()) return cmd_run(ro, common, out);
    if (verify_cmd->parsed()) return cmd_verify(vo, common, out);
    if (score->parsed()) return cmd_score(so, out);
    if (correlate->parsed()) return cmd_correlate(co, common, out);
    if (report->parsed()) return cmd_report(po, out);
    err << "error: no subcommand\n";
    return 1;
  } catch (const EnvironmentError& e) {
    err << "environment error: " << e.what() << "\n";
    return 2;
  } catch (const ClientError& e) {
    err << "client error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ifkit
