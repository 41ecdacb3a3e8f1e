#pragma once

#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ifkit/clients.hpp"
#include "ifkit/errors.hpp"
#include "ifkit/taxonomy.hpp"
#include "ifkit/util/hash.hpp"
#include "ifkit/util/parallel.hpp"

namespace ifkit {

// ---------------------------------------------------------------------------
// Task model

enum class TaskSource { kBigVibe, kLiveVibe, kCustom };

inline std::string to_string(TaskSource s) {
  switch (s) {
    case TaskSource::kBigVibe: return "bigvibe";
    case TaskSource::kLiveVibe: return "livevibe";
    case TaskSource::kCustom: return "custom";
  }
  throw DomainError("unknown task source value");
}

inline TaskSource task_source_from_string(const std::string& s) {
  if (s == "bigvibe") return TaskSource::kBigVibe;
  if (s == "livevibe") return TaskSource::kLiveVibe;
  if (s == "custom") return TaskSource::kCustom;
  throw DomainError("unknown task source: " + s);
}

struct BaseTask {
  std::string task_id;
  TaskSource source = TaskSource::kCustom;
  std::string base_prompt;
  std::string tests_ref;  // "inline:<suite text>" or "dir:<path>"
};

inline BaseTask base_task_from_json(const Json& j) {
  BaseTask t;
  t.task_id = j.at("task_id").get<std::string>();
  t.source = task_source_from_string(j.at("source").get<std::string>());
  t.base_prompt = j.at("base_prompt").get<std::string>();
  t.tests_ref = j.at("tests_ref").get<std::string>();
  if (t.task_id.empty()) throw DomainError("task with empty task_id");
  return t;
}

inline std::vector<BaseTask> load_base_tasks(const fs::path& path) {
  std::vector<BaseTask> tasks;
  std::set<std::string> seen;
  for (const auto& rec : read_jsonl(path)) {
    BaseTask t = base_task_from_json(rec);
    if (!seen.insert(t.task_id).second)
      throw DomainError("duplicate task_id in dataset: " + t.task_id);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

struct AugmentedTask {
  BaseTask base;
  std::vector<InstructionInstance> instructions;  // positions 1..n
  std::uint64_t selection_seed = 0;
  bool under_filled = false;
};

inline Json augmented_task_to_json(const AugmentedTask& t) {
  Json instructions = Json::array();
  for (const auto& inst : t.instructions)
    instructions.push_back(instance_to_json(inst));
  return Json{{"task_id", t.base.task_id},
              {"source", to_string(t.base.source)},
              {"base_prompt", t.base.base_prompt},
              {"tests_ref", t.base.tests_ref},
              {"selection_seed", t.selection_seed},
              {"under_filled", t.under_filled},
              {"instructions", instructions}};
}

inline AugmentedTask augmented_task_from_json(const Json& j,
                                              const TaxonomyRegistry& registry) {
  AugmentedTask t;
  t.base = base_task_from_json(j);
  t.selection_seed = j.at("selection_seed").get<std::uint64_t>();
  t.under_filled = j.value("under_filled", false);
  int expected_position = 1;
  for (const auto& item : j.at("instructions")) {
    InstructionInstance inst = instance_from_json(item, registry);
    if (inst.position != expected_position++)
      throw DomainError("instruction positions not contiguous in task " +
                        t.base.task_id);
    t.instructions.push_back(std::move(inst));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Selector abstraction

struct SelectorDecision {
  std::string spec_id;
  bool keep = false;
  std::string rationale;
};

// One judgment per candidate: relevance to the query plus non-conflict with
// what is already kept. Parameter proposal is a separate call so the two
// prompts stay independently tunable.
class SelectorClient {
 public:
  virtual ~SelectorClient() = default;
  virtual SelectorDecision judge(const std::string& query,
                                 const InstructionSpec& candidate,
                                 const std::vector<std::string>& kept_ids,
                                 const TaxonomyRegistry& registry) = 0;
  virtual Json propose_parameters(const std::string& query,
                                  const InstructionSpec& spec) = 0;
};

// Deterministic offline selector. Default keeps everything and proposes the
// first recommended value; reject lists and a keep cap make the failure
// paths testable without a live model.
class StubSelector : public SelectorClient {
 public:
  StubSelector() = default;
  explicit StubSelector(std::set<std::string> reject_ids, int max_keep = -1)
      : reject_ids_(std::move(reject_ids)), max_keep_(max_keep) {}

  SelectorDecision judge(const std::string&, const InstructionSpec& candidate,
                         const std::vector<std::string>& kept_ids,
                         const TaxonomyRegistry&) override {
    SelectorDecision d;
    d.spec_id = candidate.id;
    if (reject_ids_.count(candidate.id)) {
      d.keep = false;
      d.rationale = "rejected by stub rule";
    } else if (max_keep_ >= 0 &&
               static_cast<int>(kept_ids.size()) >= max_keep_) {
      d.keep = false;
      d.rationale = "stub keep cap reached";
    } else {
      d.keep = true;
      d.rationale = "accepted by stub";
    }
    return d;
  }

  Json propose_parameters(const std::string&, const InstructionSpec& spec) override {
    Json out = Json::object();
    for (const auto& p : spec.parameters)
      out[p.key] = param_value_json(p.recommended.empty() ? p.default_value
                                                          : p.recommended.front());
    return out;
  }

 private:
  std::set<std::string> reject_ids_;
  int max_keep_ = -1;
};

// Selector backed by a chat model. Prompt wording lives in template files,
// not code; replies are free text containing a JSON object. A reply we
// cannot parse discards the candidate (judgment) or falls back to defaults
// (parameters): the pipeline must stay total over sloppy model output.
class LlmSelector : public SelectorClient {
 public:
  LlmSelector(std::shared_ptr<ModelClient> client, std::string judge_template,
              std::string params_template, RetryPolicy retry = {},
              double temperature = 0.0, int max_tokens = 1024)
      : client_(std::move(client)),
        judge_template_(std::move(judge_template)),
        params_template_(std::move(params_template)),
        retry_(retry),
        temperature_(temperature),
        max_tokens_(max_tokens) {}

  static std::string parameters_doc(const InstructionSpec& spec) {
    if (spec.parameters.empty()) return "(no parameters)";
    std::string doc;
    for (const auto& p : spec.parameters) {
      doc += "- " + p.key + ": ";
      if (p.kind == ValueKind::kInteger) {
        doc += "integer in [" + std::to_string(p.min_value) + ", " +
               std::to_string(p.max_value) + "]";
      } else {
        doc += "one of {";
        for (size_t i = 0; i < p.allowed_values.size(); ++i)
          doc += (i ? ", " : "") + p.allowed_values[i];
        doc += "}";
      }
      doc += "; recommended: ";
      for (size_t i = 0; i < p.recommended.size(); ++i)
        doc += (i ? ", " : "") + param_value_text(p.recommended[i]);
      doc += "\n";
    }
    return doc;
  }

  SelectorDecision judge(const std::string& query,
                         const InstructionSpec& candidate,
                         const std::vector<std::string>& kept_ids,
                         const TaxonomyRegistry& registry) override {
    std::string kept_doc;
    for (const auto& id : kept_ids)
      kept_doc += "- " + id + ": " + registry.find(id).description + "\n";
    if (kept_doc.empty()) kept_doc = "(none yet)";

    std::string prompt = fill(judge_template_,
                              {{"query", query},
                               {"id", candidate.id},
                               {"description", candidate.description},
                               {"category", to_string(candidate.category)},
                               {"kept", kept_doc}});
    std::string reply = call(prompt);
    SelectorDecision d;
    d.spec_id = candidate.id;
    auto obj = find_first_json_object(reply);
    if (obj && obj->contains("keep") && obj->at("keep").is_boolean()) {
      d.keep = obj->at("keep").get<bool>();
      d.rationale = obj->value("rationale", std::string());
    } else {
      d.keep = false;
      d.rationale = "unparseable selector reply";
    }
    return d;
  }

  Json propose_parameters(const std::string& query,
                          const InstructionSpec& spec) override {
    if (spec.parameters.empty()) return Json::object();
    std::string prompt = fill(params_template_,
                              {{"query", query},
                               {"id", spec.id},
                               {"description", spec.description},
                               {"parameters_doc", parameters_doc(spec)}});
    auto obj = find_first_json_object(call(prompt));
    return obj ? *obj : Json::object();
  }

 private:
  // Same placeholder syntax as instruction templates, applied to the
  // selector prompt files.
  static std::string fill(const std::string& tmpl,
                          const std::map<std::string, std::string>& values) {
    std::string out;
    detail::scan_template(
        tmpl, "selector template", [&](char c) { out += c; },
        [&](const std::string& name) {
          auto it = values.find(name);
          if (it == values.end())
            throw ConfigError("selector template placeholder unknown: " + name);
          out += it->second;
        });
    return out;
  }

  std::string call(const std::string& prompt) {
    ModelRequest req;
    req.messages = {{"user", prompt}};
    req.temperature = temperature_;
    req.max_tokens = max_tokens_;
    return complete_with_retry(*client_, req, retry_).response;
  }

  std::shared_ptr<ModelClient> client_;
  std::string judge_template_;
  std::string params_template_;
  RetryPolicy retry_;
  double temperature_;
  int max_tokens_;
};

// ---------------------------------------------------------------------------
// Pipeline

// Hand-rolled Fisher-Yates over a fixed engine: std::shuffle and the
// distribution adapters vary between standard libraries, and permutations
// must replay bit-identically anywhere.
inline std::vector<std::string> permute_instructions(
    const TaxonomyRegistry& registry, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(registry.size());
  for (const auto& s : registry.specs()) ids.push_back(s.id);
  std::mt19937_64 gen(seed);
  for (size_t i = ids.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(gen() % i);
    std::swap(ids[i - 1], ids[j]);
  }
  return ids;
}

// Single pass in permuted order; stops as soon as `limit` ids are kept. The
// selector sees each id at most once.
inline std::vector<SelectorDecision> select_instructions(
    const std::string& query, const std::vector<std::string>& ordered_ids,
    SelectorClient& selector, int limit, const TaxonomyRegistry& registry) {
  if (limit < 1) throw ConfigError("selection limit must be >= 1");
  std::vector<SelectorDecision> decisions;
  std::vector<std::string> kept;
  for (const auto& id : ordered_ids) {
    if (static_cast<int>(kept.size()) >= limit) break;
    SelectorDecision d = selector.judge(query, registry.find(id), kept, registry);
    d.spec_id = id;
    if (d.keep) kept.push_back(id);
    decisions.push_back(std::move(d));
  }
  return decisions;
}

inline std::vector<InstructionInstance> assign_parameters(
    const std::string& query, const std::vector<std::string>& kept,
    const TaxonomyRegistry& registry, SelectorClient& param_client) {
  if (kept.empty()) throw DomainError("assign_parameters with no kept ids");
  std::vector<InstructionInstance> instances;
  int position = 1;
  for (const auto& id : kept) {
    Json raw = param_client.propose_parameters(query, registry.find(id));
    instances.push_back(instantiate(id, raw, position++, registry));
  }
  return instances;
}

struct SkipRecord {
  std::string task_id;
  std::string reason;
};

struct AugmentResult {
  std::vector<AugmentedTask> tasks;  // input dataset order
  std::vector<SkipRecord> skips;
};

// Stable per-task seed: tasks keep their augmentation no matter how the
// dataset is sliced or reordered.
inline std::uint64_t per_task_seed(std::uint64_t global_seed,
                                   const std::string& task_id) {
  return fnv1a64(task_id, fnv1a64_mix(kFnvOffset, global_seed));
}

inline AugmentResult augment_dataset(const std::vector<BaseTask>& dataset,
                                     const TaxonomyRegistry& registry,
                                     SelectorClient& selector,
                                     SelectorClient& param_client,
                                     std::uint64_t seed, int limit,
                                     size_t workers = 1) {
  if (dataset.empty()) throw DomainError("augment_dataset with empty dataset");

  struct Slot {
    std::optional<AugmentedTask> task;
    std::optional<SkipRecord> skip;
  };
  std::vector<Slot> slots(dataset.size());

  parallel_for_each(dataset.size(), workers, [&](size_t i) {
    const BaseTask& base = dataset[i];
    std::uint64_t task_seed = per_task_seed(seed, base.task_id);
    try {
      auto ordered = permute_instructions(registry, task_seed);
      auto decisions =
          select_instructions(base.base_prompt, ordered, selector, limit, registry);
      std::vector<std::string> kept;
      for (const auto& d : decisions)
        if (d.keep) kept.push_back(d.spec_id);
      if (kept.empty()) {
        slots[i].skip = SkipRecord{base.task_id, "no instructions kept"};
        return;
      }
      AugmentedTask task;
      task.base = base;
      task.selection_seed = task_seed;
      task.instructions = assign_parameters(base.base_prompt, kept, registry,
                                            param_client);
      task.under_filled = static_cast<int>(kept.size()) < limit;
      if (task.under_filled)
        slots[i].skip = SkipRecord{
            base.task_id, "under-filled: kept " + std::to_string(kept.size()) +
                              " of " + std::to_string(limit)};
      slots[i].task = std::move(task);
    } catch (const ClientError& e) {
      slots[i].skip = SkipRecord{base.task_id, e.what()};
    }
  });

  AugmentResult result;
  for (auto& slot : slots) {
    if (slot.task) result.tasks.push_back(std::move(*slot.task));
    if (slot.skip) result.skips.push_back(std::move(*slot.skip));
  }
  if (result.tasks.empty())
    throw DomainError("augmentation failed for every task; first reason: " +
                      (result.skips.empty() ? std::string("unknown")
                                            : result.skips.front().reason));
  return result;
}

}  // namespace ifkit
