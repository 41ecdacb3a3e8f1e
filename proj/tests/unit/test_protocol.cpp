#include <catch2/catch_amalgamated.hpp>

#include "ifkit/augment.hpp"
#include "ifkit/protocol.hpp"

using namespace ifkit;

namespace {

TaxonomyRegistry& shipped() {
  static TaxonomyRegistry reg =
      load_taxonomy_file(std::string(IFKIT_SOURCE_DIR) + "/data/taxonomy.json");
  return reg;
}

bool lenient_syntax(const std::string&) { return true; }

AugmentedTask make_task(const std::string& id,
                        const std::vector<std::string>& spec_ids,
                        const std::string& prompt) {
  AugmentedTask t;
  t.base.task_id = id;
  t.base.source = TaskSource::kCustom;
  t.base.base_prompt = prompt;
  t.base.tests_ref = "inline:pass";
  int position = 1;
  for (const auto& spec_id : spec_ids)
    t.instructions.push_back(
        instantiate(spec_id, Json::object(), position++, shipped()));
  return t;
}

RunConfig quick_config() {
  RunConfig cfg;
  cfg.model_id = "test-model";
  cfg.retry_backoff = std::chrono::milliseconds(0);
  cfg.worker_limit = 1;
  return cfg;
}

// Scripted replies in call order; records every request it sees.
class ScriptedClient : public ModelClient {
 public:
  explicit ScriptedClient(std::vector<std::string> replies)
      : replies_(std::move(replies)) {}
  std::string complete(const ModelRequest& req) override {
    std::lock_guard<std::mutex> lock(mu_);
    requests.push_back(req);
    if (calls_ >= replies_.size()) throw ClientError("script exhausted");
    return replies_[calls_++];
  }
  std::string name() const override { return "scripted"; }
  std::vector<ModelRequest> requests;

 private:
  std::vector<std::string> replies_;
  size_t calls_ = 0;
  std::mutex mu_;
};

MockModelClient mock_from(const ScopedTempDir& dir, const Json& doc) {
  fs::path p = dir.path() / "mock.json";
  write_file_atomic(p, doc.dump());
  return MockModelClient(p);
}

}  // namespace

TEST_CASE("single-turn prompts number instructions after a blank line") {
  AugmentedTask task = make_task("t1", {"style_3", "logic_3"}, "Write a parser.");
  std::string prompt = build_single_turn_prompt(task, 2, shipped());
  std::string expected =
      "Write a parser.\n"
      "\n1. " + render_prompt(task.instructions[0], PromptMode::kSingle, shipped()) +
      "\n2. " + render_prompt(task.instructions[1], PromptMode::kSingle, shipped());
  CHECK(prompt == expected);
  CHECK(prompt.find("79") != std::string::npos);  // default parameter rendered

  // k trims the list from the back, keeping position order.
  std::string shorter = build_single_turn_prompt(task, 1, shipped());
  CHECK(shorter.find("\n1. ") != std::string::npos);
  CHECK(shorter.find("\n2. ") == std::string::npos);
}

TEST_CASE("the base cell sends the bare prompt and one model turn runs") {
  ScriptedClient client({"```python\nx = 1\n```\n"});
  AugmentedTask task = make_task("t1", {"style_3"}, "Write a parser.");
  Transcript t = run_base_turn(task, client, quick_config(), lenient_syntax);
  CHECK(t.status == "ok");
  CHECK(t.k == 0);
  CHECK(t.mode == PromptMode::kSingle);
  REQUIRE(t.turns.size() == 2);
  CHECK(t.turns[0].role == "user");
  CHECK(t.turns[0].content == "Write a parser.");
  CHECK(t.turns[1].role == "model");
  CHECK(t.turns[0].index == 0);
  CHECK(t.turns[1].index == 1);
  CHECK(t.final_code_extract.code == "x = 1");
  CHECK(t.model_turns() == 1);
}

TEST_CASE("a configured system prompt becomes the opening turn") {
  ScriptedClient client({"reply"});
  AugmentedTask task = make_task("t1", {"style_3"}, "p");
  RunConfig cfg = quick_config();
  cfg.system_prompt = "You are a careful engineer.";
  Transcript t = run_base_turn(task, client, cfg, lenient_syntax);
  REQUIRE(t.turns.size() == 3);
  CHECK(t.turns[0].role == "system");
  CHECK(t.turns[0].content == "You are a careful engineer.");
  REQUIRE(client.requests.size() == 1);
  CHECK(client.requests[0].messages[0].role == "system");
}

TEST_CASE("single mode sends everything in one exchange") {
  ScriptedClient client({"```python\ny = 2\n```\n"});
  AugmentedTask task = make_task("t1", {"style_3", "logic_3"}, "Write a parser.");
  Transcript t =
      run_single_turn(task, 2, client, quick_config(), shipped(), lenient_syntax);
  CHECK(t.k == 2);
  CHECK(t.model_turns() == 1);
  REQUIRE(client.requests.size() == 1);
  CHECK(client.requests[0].messages.back().content ==
        build_single_turn_prompt(task, 2, shipped()));
  CHECK(t.final_code_extract.code == "y = 2");
}

TEST_CASE("multi mode runs k plus one exchanges over the full history") {
  ScriptedClient client({"draft zero", "draft one", "```python\nfinal = 3\n```\n"});
  AugmentedTask task = make_task("t1", {"style_3", "logic_3"}, "Write a parser.");
  Transcript t =
      run_multi_turn(task, 2, client, quick_config(), shipped(), lenient_syntax);
  CHECK(t.status == "ok");
  CHECK(t.model_turns() == 3);  // base round plus one per instruction
  REQUIRE(t.turns.size() == 6);

  // Each round resends the whole conversation so far.
  REQUIRE(client.requests.size() == 3);
  CHECK(client.requests[0].messages.size() == 1);
  CHECK(client.requests[1].messages.size() == 3);
  CHECK(client.requests[2].messages.size() == 5);
  CHECK(client.requests[2].messages[1].content == "draft zero");
  CHECK(client.requests[2].messages[3].content == "draft one");

  // Instruction rounds use the editing wording, one instruction each.
  CHECK(client.requests[1].messages.back().content ==
        render_prompt(task.instructions[0], PromptMode::kMulti, shipped()));
  CHECK(client.requests[2].messages.back().content ==
        render_prompt(task.instructions[1], PromptMode::kMulti, shipped()));

  // Only the last reply is judged.
  CHECK(t.final_code_extract.code == "final = 3");
}

TEST_CASE("k outside the task's instruction count is a domain fault") {
  ScriptedClient client({"r"});
  AugmentedTask task = make_task("t1", {"style_3"}, "p");
  CHECK_THROWS_AS(
      run_single_turn(task, 0, client, quick_config(), shipped(), lenient_syntax),
      DomainError);
  CHECK_THROWS_AS(
      run_single_turn(task, 2, client, quick_config(), shipped(), lenient_syntax),
      DomainError);
  CHECK_THROWS_AS(
      run_multi_turn(task, 5, client, quick_config(), shipped(), lenient_syntax),
      DomainError);
}

TEST_CASE("transient faults are retried and the attempt count recorded") {
  ScopedTempDir dir("ifkit-test");
  MockModelClient client = mock_from(
      dir, Json{{"schema_version", 1},
                {"entries", Json::array({Json{{"match_substring", "parser"},
                                              {"response", "ok reply"},
                                              {"fail_times", 2}}})}});
  AugmentedTask task = make_task("t1", {"style_3"}, "Write a parser.");
  Transcript t = run_base_turn(task, client, quick_config(), lenient_syntax);
  CHECK(t.status == "ok");
  CHECK(t.attempts == std::vector<int>{3});
  CHECK(t.attempt_errors.size() == 2);
}

TEST_CASE("a persistent fault marks the cell errored with the reason") {
  ScopedTempDir dir("ifkit-test");
  MockModelClient client = mock_from(
      dir, Json{{"schema_version", 1},
                {"entries", Json::array({Json{{"match_substring", "parser"},
                                              {"response", "unused"},
                                              {"persistent_fail", true}}})}});
  AugmentedTask task = make_task("t1", {"style_3"}, "Write a parser.");
  Transcript t = run_base_turn(task, client, quick_config(), lenient_syntax);
  CHECK(t.status == "error");
  CHECK(t.error_reason.find("failed after 3 attempts") != std::string::npos);
  CHECK(t.model_turns() == 0);
  CHECK(t.turns.back().role == "user");
  CHECK(t.attempts == std::vector<int>{3});
}

TEST_CASE("a failed later round keeps the partial multi-turn transcript") {
  ScopedTempDir dir("ifkit-test");
  AugmentedTask task = make_task("t1", {"style_3"}, "Write a parser.");
  std::string edit_prompt =
      render_prompt(task.instructions[0], PromptMode::kMulti, shipped());
  // The editing round matches first; the base prompt appears in every
  // request's history so its entry must come second.
  MockModelClient client = mock_from(
      dir,
      Json{{"schema_version", 1},
           {"entries",
            Json::array({Json{{"match_substring", edit_prompt},
                              {"response", "unused"},
                              {"persistent_fail", true}},
                         Json{{"match_substring", "parser"},
                              {"response", "```python\ndraft = 1\n```\n"}}})}});
  Transcript t =
      run_multi_turn(task, 1, client, quick_config(), shipped(), lenient_syntax);
  CHECK(t.status == "error");
  CHECK(t.model_turns() == 1);
  // The draft from the successful round is still extracted for the record.
  CHECK(t.final_code_extract.code == "draft = 1");
}

TEST_CASE("the suite enumerates cells and skips impossible ones") {
  ScopedTempDir dir("ifkit-test");
  MockModelClient client =
      mock_from(dir, Json{{"schema_version", 1}, {"default_response", "reply"}});
  std::vector<AugmentedTask> tasks = {
      make_task("t1", {"style_3", "logic_3"}, "alpha"),
      make_task("t2", {"style_3"}, "beta")};
  SuiteResult r =
      run_suite(tasks, {PromptMode::kSingle, PromptMode::kMulti}, {0, 1, 2, 5},
                client, quick_config(), shipped(), lenient_syntax);
  // t1: single 0,1,2 and multi 1,2. t2: single 0,1 and multi 1. k=5 never fits.
  CHECK(r.cells_total == 8);
  CHECK(r.cells_errored == 0);
  CHECK(!r.excluded);
  int multi_k0 = 0, base_cells = 0;
  for (const auto& t : r.transcripts) {
    CHECK(t.k <= 2);
    if (t.mode == PromptMode::kMulti && t.k == 0) ++multi_k0;
    if (t.k == 0) ++base_cells;
  }
  CHECK(multi_k0 == 0);
  CHECK(base_cells == 2);
}

TEST_CASE("the exclusion threshold is strictly above ten percent") {
  ScopedTempDir dir("ifkit-test");
  MockModelClient client = mock_from(
      dir, Json{{"schema_version", 1},
                {"default_response", "reply"},
                {"entries", Json::array({Json{{"match_substring", "broken"},
                                              {"response", "unused"},
                                              {"persistent_fail", true}}})}});
  std::vector<AugmentedTask> tasks;
  for (int i = 0; i < 10; ++i)
    tasks.push_back(make_task("t" + std::to_string(i), {},
                              i == 0 ? "broken task" : "fine task"));

  SuiteResult at_boundary = run_suite(tasks, {PromptMode::kSingle}, {0}, client,
                                      quick_config(), shipped(), lenient_syntax);
  CHECK(at_boundary.cells_total == 10);
  CHECK(at_boundary.cells_errored == 1);
  CHECK(at_boundary.error_rate == Catch::Approx(0.10));
  CHECK(!at_boundary.excluded);

  tasks[1].base.base_prompt = "broken too";
  SuiteResult over = run_suite(tasks, {PromptMode::kSingle}, {0}, client,
                               quick_config(), shipped(), lenient_syntax);
  CHECK(over.cells_errored == 2);
  CHECK(over.excluded);
}

TEST_CASE("an empty suite is a domain fault") {
  ScopedTempDir dir("ifkit-test");
  MockModelClient client =
      mock_from(dir, Json{{"schema_version", 1}, {"default_response", "r"}});
  CHECK_THROWS_AS(run_suite({}, {PromptMode::kSingle}, {0}, client, quick_config(),
                            shipped(), lenient_syntax),
                  DomainError);
  // Tasks exist but no cell is runnable.
  std::vector<AugmentedTask> tasks = {make_task("t1", {}, "p")};
  CHECK_THROWS_AS(run_suite(tasks, {PromptMode::kMulti}, {0}, client,
                            quick_config(), shipped(), lenient_syntax),
                  DomainError);
}

TEST_CASE("parallel suite execution is order-stable") {
  ScopedTempDir dir("ifkit-test");
  MockModelClient client =
      mock_from(dir, Json{{"schema_version", 1}, {"default_response", "reply"}});
  std::vector<AugmentedTask> tasks;
  for (int i = 0; i < 6; ++i)
    tasks.push_back(make_task("t" + std::to_string(i), {"style_3"}, "p"));
  RunConfig serial = quick_config();
  RunConfig parallel = quick_config();
  parallel.worker_limit = 4;
  SuiteResult a = run_suite(tasks, {PromptMode::kSingle}, {0, 1}, client, serial,
                            shipped(), lenient_syntax);
  SuiteResult b = run_suite(tasks, {PromptMode::kSingle}, {0, 1}, client, parallel,
                            shipped(), lenient_syntax);
  REQUIRE(a.transcripts.size() == b.transcripts.size());
  for (size_t i = 0; i < a.transcripts.size(); ++i)
    CHECK(transcript_to_json(a.transcripts[i]) ==
          transcript_to_json(b.transcripts[i]));
}

TEST_CASE("transcripts round-trip through their wire form") {
  ScriptedClient client({"draft", "```python\nz = 1\n```\ndone\n"});
  AugmentedTask task = make_task("t1", {"style_3"}, "Write a parser.");
  Transcript t =
      run_multi_turn(task, 1, client, quick_config(), shipped(), lenient_syntax);
  Json j = transcript_to_json(t);
  Transcript back = transcript_from_json(j);
  CHECK(transcript_to_json(back) == j);
  CHECK(back.final_code_extract.code == t.final_code_extract.code);
}

TEST_CASE("run configuration bounds are enforced") {
  RunConfig cfg = quick_config();
  cfg.max_tokens = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_config();
  cfg.max_attempts = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_config();
  cfg.retry_backoff = std::chrono::milliseconds(-1);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_config();
  cfg.worker_limit = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
