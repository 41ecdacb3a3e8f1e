#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ifkit/errors.hpp"
#include "ifkit/verifier.hpp"

namespace ifkit {

// Exact fraction kept as integer counts. All aggregation stays in counts;
// floating point appears only when a value is printed.
struct Counts {
  long long num = 0;
  long long den = 0;

  double ratio() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Counts&) const = default;
};

struct CellKey {
  PromptMode mode = PromptMode::kSingle;
  int k = 0;
  auto operator<=>(const CellKey&) const = default;
};

// Verdicts for one (model, mode, k) cell: every present task carries
// exactly positions 1..k.
struct VerdictTable {
  PromptMode mode = PromptMode::kSingle;
  int k = 1;
  std::map<std::string, std::vector<bool>> rows;  // task_id -> by position
};

inline std::map<CellKey, VerdictTable> build_verdict_tables(
    const std::vector<VerdictRecord>& records) {
  std::map<CellKey, std::map<std::string, std::map<int, bool>>> staged;
  for (const auto& r : records)
    if (!staged[{r.mode, r.k}][r.task_id].emplace(r.position, r.passed).second)
      throw DomainError("duplicate verdict for task " + r.task_id +
                        " position " + std::to_string(r.position));

  std::map<CellKey, VerdictTable> tables;
  for (const auto& [key, tasks] : staged) {
    VerdictTable table;
    table.mode = key.mode;
    table.k = key.k;
    for (const auto& [task_id, by_pos] : tasks) {
      std::vector<bool> verdicts;
      for (int p = 1; p <= key.k; ++p) {
        auto it = by_pos.find(p);
        if (it == by_pos.end())
          throw DomainError("task " + task_id + " lacks verdict for position " +
                            std::to_string(p) + " at k=" + std::to_string(key.k));
        verdicts.push_back(it->second);
      }
      if (static_cast<int>(by_pos.size()) != key.k)
        throw DomainError("task " + task_id + " has verdicts beyond position k");
      table.rows.emplace(task_id, std::move(verdicts));
    }
    tables.emplace(key, std::move(table));
  }
  return tables;
}

// ---------------------------------------------------------------------------
// Core formulas

inline double if_instruction_score(const std::vector<bool>& verdicts) {
  if (verdicts.empty()) throw DomainError("instruction score over empty verdicts");
  long long passed = 0;
  for (bool v : verdicts) passed += v ? 1 : 0;
  return static_cast<double>(passed) / static_cast<double>(verdicts.size());
}

inline int if_task_score(const std::vector<bool>& verdicts) {
  if (verdicts.empty()) throw DomainError("task score over empty verdicts");
  for (bool v : verdicts)
    if (!v) return 0;
  return 1;
}

// Relative drop in functional score after k instructions; negative values
// are genuine improvements.
inline double functional_regression(double s0, double sk) {
  if (s0 <= 0.0)
    throw DomainError("functional regression undefined for S_0 = " +
                      std::to_string(s0));
  return (s0 - sk) / s0;
}

// ---------------------------------------------------------------------------
// Aggregation

struct FunctionalCell {
  double score = 0.0;  // percentage
  int n_tasks = 0;
};

using FunctionalScores = std::map<CellKey, FunctionalCell>;  // k=0 under single

struct MetricsRow {
  PromptMode mode = PromptMode::kSingle;
  int k = 0;
  std::optional<double> s_k;
  std::optional<double> fr_k;          // fraction, printed as percentage
  std::optional<Counts> if_instruction;  // over tasks*k instruction slots
  std::optional<Counts> if_task;         // over tasks
  int n_tasks = 0;
};

constexpr int kProfileK = 5;

struct MetricsTable {
  std::string model_id;
  std::vector<MetricsRow> rows;  // ordered by (mode, k)
  // Position means at k = 5, the deepest cell the profile reports.
  std::map<PromptMode, std::array<Counts, kProfileK>> position_profile;
};

inline MetricsTable aggregate(const std::string& model_id,
                              const std::map<CellKey, VerdictTable>& tables,
                              const FunctionalScores& functional) {
  auto s0_it = functional.find({PromptMode::kSingle, 0});
  if (s0_it == functional.end())
    throw DomainError("aggregate requires the base cell S_0 (single, k=0)");
  double s0 = s0_it->second.score;

  std::map<CellKey, MetricsRow> rows;
  for (const auto& [key, cell] : functional) {
    MetricsRow& row = rows[key];
    row.mode = key.mode;
    row.k = key.k;
    row.s_k = cell.score;
    row.n_tasks = cell.n_tasks;
    row.fr_k = s0 > 0.0 ? functional_regression(s0, cell.score) : 0.0;
  }
  for (const auto& [key, table] : tables) {
    if (table.rows.empty()) continue;
    MetricsRow& row = rows[key];
    row.mode = key.mode;
    row.k = key.k;
    Counts instr{0, 0}, task{0, 0};
    for (const auto& [task_id, verdicts] : table.rows) {
      (void)task_id;
      for (bool v : verdicts) instr.num += v ? 1 : 0;
      instr.den += table.k;
      task.num += if_task_score(verdicts);
      task.den += 1;
    }
    row.if_instruction = instr;
    row.if_task = task;
    if (row.n_tasks == 0) row.n_tasks = static_cast<int>(table.rows.size());
  }

  MetricsTable out;
  out.model_id = model_id;
  for (auto& [key, row] : rows) out.rows.push_back(std::move(row));

  for (const auto& [key, table] : tables) {
    if (table.k != kProfileK || table.rows.empty()) continue;
    auto& profile = out.position_profile[key.mode];
    for (const auto& [task_id, verdicts] : table.rows) {
      (void)task_id;
      for (int p = 0; p < kProfileK; ++p) {
        profile[static_cast<size_t>(p)].num += verdicts[static_cast<size_t>(p)] ? 1 : 0;
        profile[static_cast<size_t>(p)].den += 1;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization (the only place values get rounded)

inline std::string format_2dp(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

inline std::string metrics_to_csv(const MetricsTable& table) {
  std::string out = "model_id,mode,k,n_tasks,s_k,fr_k_pct,if_instruction,if_task\n";
  for (const auto& row : table.rows) {
    out += table.model_id;
    out += ',';
    out += row.mode == PromptMode::kSingle ? "single" : "multi";
    out += ',' + std::to_string(row.k);
    out += ',' + std::to_string(row.n_tasks);
    out += ',' + (row.s_k ? format_2dp(*row.s_k) : std::string());
    out += ',' + (row.fr_k && row.k > 0 ? format_2dp(*row.fr_k * 100.0)
                                        : std::string());
    out += ',' + (row.if_instruction ? format_2dp(row.if_instruction->ratio() * 100.0)
                                     : std::string());
    out += ',' + (row.if_task ? format_2dp(row.if_task->ratio() * 100.0)
                              : std::string());
    out += '\n';
  }
  return out;
}

inline std::string position_profile_to_csv(const MetricsTable& table) {
  std::string out = "model_id,mode,position,mean_if\n";
  for (const auto& [mode, profile] : table.position_profile) {
    for (int p = 0; p < kProfileK; ++p) {
      const Counts& c = profile[static_cast<size_t>(p)];
      if (c.den == 0) continue;
      out += table.model_id;
      out += ',';
      out += mode == PromptMode::kSingle ? "single" : "multi";
      out += ',' + std::to_string(p + 1);
      out += ',' + format_2dp(c.ratio() * 100.0);
      out += '\n';
    }
  }
  return out;
}

}  // namespace ifkit
