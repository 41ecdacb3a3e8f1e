#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ifkit/metrics.hpp"

using namespace ifkit;

namespace {

VerdictRecord rec(const std::string& task, int position, bool passed,
                  PromptMode mode, int k) {
  VerdictRecord v;
  v.task_id = task;
  v.spec_id = "style_1";
  v.position = position;
  v.passed = passed;
  v.mode = mode;
  v.k = k;
  return v;
}

}  // namespace

TEST_CASE("verdict tables group records by cell and position") {
  std::vector<VerdictRecord> records = {
      rec("a", 1, true, PromptMode::kSingle, 2),
      rec("a", 2, false, PromptMode::kSingle, 2),
      rec("b", 1, false, PromptMode::kSingle, 2),
      rec("b", 2, true, PromptMode::kSingle, 2),
      rec("a", 1, true, PromptMode::kMulti, 1),
  };
  auto tables = build_verdict_tables(records);
  REQUIRE(tables.size() == 2);
  const VerdictTable& single2 = tables.at({PromptMode::kSingle, 2});
  REQUIRE(single2.rows.size() == 2);
  CHECK(single2.rows.at("a") == std::vector<bool>{true, false});
  CHECK(single2.rows.at("b") == std::vector<bool>{false, true});
  CHECK(tables.at({PromptMode::kMulti, 1}).rows.at("a") == std::vector<bool>{true});
}

TEST_CASE("incomplete or duplicated verdicts are rejected") {
  // Missing position 2.
  CHECK_THROWS_WITH(
      build_verdict_tables({rec("a", 1, true, PromptMode::kSingle, 2)}),
      Catch::Matchers::ContainsSubstring("lacks verdict for position 2"));
  // Duplicate (task, position) in a cell.
  CHECK_THROWS_WITH(
      build_verdict_tables({rec("a", 1, true, PromptMode::kSingle, 1),
                            rec("a", 1, false, PromptMode::kSingle, 1)}),
      Catch::Matchers::ContainsSubstring("duplicate verdict"));
  // Position beyond k.
  CHECK_THROWS_AS(
      build_verdict_tables({rec("a", 1, true, PromptMode::kSingle, 1),
                            rec("a", 2, true, PromptMode::kSingle, 1)}),
      DomainError);
}

TEST_CASE("instruction and task scores follow their definitions") {
  CHECK(if_instruction_score({true, true, false, true}) == Catch::Approx(0.75));
  CHECK(if_instruction_score({false}) == 0.0);
  CHECK(if_task_score({true, true, true}) == 1);
  CHECK(if_task_score({true, false, true}) == 0);
  CHECK_THROWS_AS(if_instruction_score({}), DomainError);
  CHECK_THROWS_AS(if_task_score({}), DomainError);
}

TEST_CASE("functional regression anchors reproduce to two decimals") {
  CHECK(format_2dp(functional_regression(50.35, 47.81) * 100.0) == "5.04");
  CHECK(format_2dp(functional_regression(51.05, 52.11) * 100.0) == "-2.08");
  CHECK(functional_regression(80.0, 80.0) == 0.0);
  CHECK_THROWS_AS(functional_regression(0.0, 10.0), DomainError);
  CHECK_THROWS_AS(functional_regression(-1.0, 10.0), DomainError);
}

TEST_CASE("aggregate matches a brute-force recount on a small table") {
  std::vector<VerdictRecord> records;
  // 3 tasks at (single, 2): a = TT, b = TF, c = FF.
  records.push_back(rec("a", 1, true, PromptMode::kSingle, 2));
  records.push_back(rec("a", 2, true, PromptMode::kSingle, 2));
  records.push_back(rec("b", 1, true, PromptMode::kSingle, 2));
  records.push_back(rec("b", 2, false, PromptMode::kSingle, 2));
  records.push_back(rec("c", 1, false, PromptMode::kSingle, 2));
  records.push_back(rec("c", 2, false, PromptMode::kSingle, 2));

  FunctionalScores functional;
  functional[{PromptMode::kSingle, 0}] = {60.0, 3};
  functional[{PromptMode::kSingle, 2}] = {45.0, 3};

  MetricsTable table = aggregate("m", build_verdict_tables(records), functional);
  REQUIRE(table.rows.size() == 2);

  const MetricsRow& base = table.rows[0];
  CHECK(base.k == 0);
  CHECK(*base.s_k == 60.0);
  CHECK(!base.if_instruction.has_value());

  const MetricsRow& cell = table.rows[1];
  CHECK(cell.k == 2);
  CHECK(*cell.if_instruction == Counts{3, 6});
  CHECK(*cell.if_task == Counts{1, 3});
  CHECK(*cell.s_k == 45.0);
  CHECK(*cell.fr_k == Catch::Approx((60.0 - 45.0) / 60.0));
  CHECK(cell.n_tasks == 3);
}

TEST_CASE("aggregation is exact over a thousand random tables") {
  std::mt19937_64 gen(11);
  for (int round = 0; round < 50; ++round) {
    int k = 1 + static_cast<int>(gen() % 5);
    int n_tasks = 2 + static_cast<int>(gen() % 30);
    std::vector<VerdictRecord> records;
    long long want_instr = 0, want_task = 0;
    for (int t = 0; t < n_tasks; ++t) {
      bool all = true;
      for (int p = 1; p <= k; ++p) {
        bool passed = gen() % 2 == 0;
        all = all && passed;
        want_instr += passed ? 1 : 0;
        records.push_back(rec("t" + std::to_string(t), p, passed,
                              PromptMode::kSingle, k));
      }
      want_task += all ? 1 : 0;
    }
    FunctionalScores functional;
    functional[{PromptMode::kSingle, 0}] = {50.0, n_tasks};
    MetricsTable table = aggregate("m", build_verdict_tables(records), functional);
    REQUIRE(table.rows.size() == 2);
    const MetricsRow& row = table.rows[1];
    CHECK(*row.if_instruction == Counts{want_instr, 1ll * n_tasks * k});
    CHECK(*row.if_task == Counts{want_task, n_tasks});
  }
}

TEST_CASE("aggregate requires the base cell") {
  FunctionalScores functional;
  functional[{PromptMode::kSingle, 2}] = {45.0, 3};
  CHECK_THROWS_WITH(aggregate("m", {}, functional),
                    Catch::Matchers::ContainsSubstring("base cell"));
}

TEST_CASE("position profiles are built from the k=5 cell only") {
  std::vector<VerdictRecord> records;
  // Two tasks at single k=5 with complementary patterns.
  for (int p = 1; p <= 5; ++p) {
    records.push_back(rec("a", p, p % 2 == 1, PromptMode::kSingle, 5));
    records.push_back(rec("b", p, true, PromptMode::kSingle, 5));
  }
  // A k=3 cell that must not contribute.
  for (int p = 1; p <= 3; ++p)
    records.push_back(rec("a", p, false, PromptMode::kSingle, 3));

  FunctionalScores functional;
  functional[{PromptMode::kSingle, 0}] = {50.0, 2};
  MetricsTable table = aggregate("m", build_verdict_tables(records), functional);
  REQUIRE(table.position_profile.count(PromptMode::kSingle) == 1);
  const auto& profile = table.position_profile.at(PromptMode::kSingle);
  CHECK(profile[0] == Counts{2, 2});  // both passed position 1
  CHECK(profile[1] == Counts{1, 2});  // a failed position 2
  CHECK(profile[4] == Counts{2, 2});

  // The profile mean over positions equals the cell's instruction score.
  const MetricsRow* k5 = nullptr;
  for (const auto& row : table.rows)
    if (row.k == 5) k5 = &row;
  REQUIRE(k5 != nullptr);
  Counts total{0, 0};
  for (const auto& c : profile) {
    total.num += c.num;
    total.den += c.den;
  }
  CHECK(total == *k5->if_instruction);
}

TEST_CASE("task scores never exceed instruction scores") {
  std::mt19937_64 gen(13);
  for (int round = 0; round < 200; ++round) {
    int k = 1 + static_cast<int>(gen() % 6);
    std::vector<bool> verdicts;
    bool all = true;
    for (int p = 0; p < k; ++p) {
      verdicts.push_back(gen() % 3 != 0);
      all = all && verdicts.back();
    }
    double instr = if_instruction_score(verdicts);
    int task = if_task_score(verdicts);
    CHECK(static_cast<double>(task) <= instr + 1e-12);
    CHECK((task == 1) == all);
    if (task == 1) CHECK(instr == 1.0);
  }
}

TEST_CASE("metrics serialize with two decimals and empty optionals") {
  MetricsTable table;
  table.model_id = "demo";
  MetricsRow base;
  base.mode = PromptMode::kSingle;
  base.k = 0;
  base.s_k = 89.4736842;
  base.fr_k = 0.0;
  base.n_tasks = 19;
  MetricsRow cell;
  cell.mode = PromptMode::kMulti;
  cell.k = 3;
  cell.if_instruction = Counts{2, 3};
  cell.if_task = Counts{1, 3};
  cell.n_tasks = 3;
  table.rows = {base, cell};

  std::string csv = metrics_to_csv(table);
  auto lines = split_lines(csv);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "model_id,mode,k,n_tasks,s_k,fr_k_pct,if_instruction,if_task");
  // k=0 rows leave fr and the instruction columns empty.
  CHECK(lines[1] == "demo,single,0,19,89.47,,,");
  // Rows without functional runs leave s_k and fr empty; ratios print at 2dp.
  CHECK(lines[2] == "demo,multi,3,3,,,66.67,33.33");
}

TEST_CASE("position profiles serialize one row per populated position") {
  MetricsTable table;
  table.model_id = "demo";
  auto& profile = table.position_profile[PromptMode::kSingle];
  for (size_t p = 0; p < kProfileK; ++p) profile[p] = Counts{static_cast<long long>(p), 4};
  std::string csv = position_profile_to_csv(table);
  auto lines = split_lines(csv);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "model_id,mode,position,mean_if");
  CHECK(lines[1] == "demo,single,1,0.00");
  CHECK(lines[5] == "demo,single,5,100.00");
}

TEST_CASE("exact fractions survive where floats would drift") {
  // 1/3 aggregated 3 times must be exactly 3/9, not 0.33333... summed.
  Counts total{0, 0};
  for (int i = 0; i < 3; ++i) {
    total.num += 1;
    total.den += 3;
  }
  CHECK(total == Counts{3, 9});
  CHECK(format_2dp(total.ratio() * 100.0) == "33.33");
}
