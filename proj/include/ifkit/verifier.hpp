#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ifkit/errors.hpp"
#include "ifkit/extraction.hpp"
#include "ifkit/taxonomy.hpp"
#include "ifkit/util/fs.hpp"
#include "ifkit/util/jsonl.hpp"
#include "ifkit/util/subprocess.hpp"

namespace ifkit {

struct Diagnostic {
  std::string rule_code;
  int line = 1;
  int column = 1;
  std::string message;
};

struct VerdictRecord {
  std::string task_id;
  std::string spec_id;
  int position = 1;
  bool passed = false;
  std::string reason;  // empty when passed
  PromptMode mode = PromptMode::kSingle;
  int k = 0;  // instruction count of the task cell
};

inline Json verdict_to_json(const VerdictRecord& v) {
  return Json{{"task_id", v.task_id},
              {"spec_id", v.spec_id},
              {"position", v.position},
              {"passed", v.passed},
              {"reason", v.reason},
              {"mode", v.mode == PromptMode::kSingle ? "single" : "multi"},
              {"k", v.k}};
}

// Rule semantics drift between linter releases, so the binary and version
// are pinned together; a mismatched host install is an environment fault,
// never a silent source of different verdicts.
struct LinterConfig {
  std::string binary = "ruff";
  std::string expected_version = "0.16.4";
  std::chrono::milliseconds timeout{15000};
};

namespace detail {

inline std::string probe_linter_version(const std::string& binary) {
  static std::mutex mu;
  static std::map<std::string, std::string> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(binary);
    if (it != cache.end()) return it->second;
  }
  SubprocessOptions opt;
  opt.argv = {binary, "--version"};
  opt.timeout = std::chrono::milliseconds(10000);
  SubprocessResult r = run_subprocess(opt);
  if (r.exit_code != 0)
    throw EnvironmentError("linter version probe failed: " + binary + ": " + r.err);
  // Output shaped like "ruff 0.16.4"; the second token is the version.
  std::string text(trim(r.out));
  size_t sp = text.find(' ');
  std::string version =
      sp == std::string::npos ? text : std::string(trim(text.substr(sp + 1)));
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(binary, version);
  return version;
}

}  // namespace detail

inline std::string ensure_linter(const LinterConfig& cfg) {
  std::string version = detail::probe_linter_version(cfg.binary);
  if (version != cfg.expected_version)
    throw EnvironmentError("linter version mismatch: have " + version +
                           ", pinned " + cfg.expected_version);
  return version;
}

// ---------------------------------------------------------------------------
// Linter invocation

namespace detail {

inline bool looks_like_integer(std::string_view s) {
  if (s.empty()) return false;
  size_t i = s[0] == '-' ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return true;
}

inline std::string toml_value(std::string_view raw) {
  if (looks_like_integer(raw)) return std::string(raw);
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

// A diagnostic counts only if its code is in the requested selection, where
// a selection entry may be a full code (E501) or a prefix group (PTH, D).
inline bool code_selected(const std::string& code,
                          const std::vector<std::string>& selection) {
  for (const auto& sel : selection) {
    if (code == sel) return true;
    if (code.size() > sel.size() && starts_with(code, sel)) {
      bool digits = true;
      for (size_t i = sel.size(); i < code.size(); ++i)
        if (code[i] < '0' || code[i] > '9') digits = false;
      if (digits) return true;
    }
  }
  return false;
}

}  // namespace detail

inline std::vector<std::pair<std::string, std::string>> resolve_settings(
    const std::vector<SettingBinding>& settings,
    const std::map<std::string, ParamValue>& params) {
  std::vector<std::pair<std::string, std::string>> resolved;
  for (const auto& s : settings) {
    std::string raw;
    if (s.from_param) {
      auto it = params.find(*s.from_param);
      if (it == params.end())
        throw ConfigError("setting '" + s.key + "' references missing parameter '" +
                          *s.from_param + "'");
      raw = param_value_text(it->second);
      auto mapped = s.value_map.find(raw);
      if (mapped != s.value_map.end()) raw = mapped->second;
    } else {
      raw = *s.fixed_value;
    }
    resolved.emplace_back(s.key, detail::toml_value(raw));
  }
  return resolved;
}

inline std::vector<Diagnostic> run_linter_check(
    const std::string& code, const std::vector<std::string>& rule_codes,
    const std::vector<std::pair<std::string, std::string>>& settings,
    const LinterConfig& cfg = {}) {
  if (rule_codes.empty()) throw ConfigError("linter check with empty rule selection");
  ensure_linter(cfg);

  ScopedTempDir dir("ifkit-lint");
  fs::path file = dir.path() / "snippet.py";
  write_file_atomic(file, code);

  SubprocessOptions opt;
  opt.argv = {cfg.binary, "check", "--isolated", "--no-cache",
              "--output-format", "json"};
  std::string select;
  for (const auto& c : rule_codes) {
    if (!select.empty()) select += ',';
    select += c;
  }
  opt.argv.push_back("--select");
  opt.argv.push_back(select);
  for (const auto& [key, value] : settings) {
    opt.argv.push_back("--config");
    opt.argv.push_back(key + " = " + value);
  }
  opt.argv.push_back("snippet.py");
  opt.cwd = dir.path();
  opt.timeout = cfg.timeout;

  SubprocessResult r = run_subprocess(opt);
  if (r.timed_out) throw EnvironmentError("linter timed out");
  if (r.exit_code != 0 && r.exit_code != 1)
    throw EnvironmentError("linter error (exit " + std::to_string(r.exit_code) +
                           "): " + r.err);

  Json arr = Json::parse(r.out, nullptr, false);
  if (arr.is_discarded() || !arr.is_array())
    throw EnvironmentError("unparseable linter output: " + r.out);

  std::vector<Diagnostic> diags;
  for (const auto& item : arr) {
    Diagnostic d;
    if (item.contains("code") && item.at("code").is_string())
      d.rule_code = item.at("code").get<std::string>();
    if (!detail::code_selected(d.rule_code, rule_codes)) continue;
    const Json& loc = item.at("location");
    d.line = loc.at("row").get<int>();
    d.column = loc.at("column").get<int>();
    d.message = item.at("message").get<std::string>();
    diags.push_back(std::move(d));
  }
  std::stable_sort(diags.begin(), diags.end(),
                   [](const Diagnostic& a, const Diagnostic& b) {
                     return std::tie(a.line, a.column) < std::tie(b.line, b.column);
                   });
  return diags;
}

// ---------------------------------------------------------------------------
// Built-in structural and prose checks

using CheckResult = std::pair<bool, std::string>;
using StructuralCheck = std::function<CheckResult(
    const CodeExtract&, const std::map<std::string, ParamValue>&)>;

namespace detail {

inline long long int_param(const std::map<std::string, ParamValue>& params,
                           const std::string& key, long long fallback) {
  auto it = params.find(key);
  if (it == params.end() || !std::holds_alternative<long long>(it->second))
    return fallback;
  return std::get<long long>(it->second);
}

}  // namespace detail

inline const std::map<std::string, StructuralCheck>& builtin_checks() {
  static const std::map<std::string, StructuralCheck> checks = {
      {"json-explanation-after-code",
       [](const CodeExtract& e, const std::map<std::string, ParamValue>&) {
         if (find_first_json_object(e.prose_after_last_block).has_value())
           return CheckResult{true, ""};
         return CheckResult{false, "no JSON object in prose after the final code block"};
       }},
      {"prose-intro-before-code",
       [](const CodeExtract& e, const std::map<std::string, ParamValue>& params) {
         long long need = detail::int_param(params, "min_words", 1);
         size_t have = count_words(e.prose_before_last_block);
         if (e.block_count > 0 && static_cast<long long>(have) >= need)
           return CheckResult{true, ""};
         return CheckResult{
             false, "prose before the code block has " + std::to_string(have) +
                        " words, need " + std::to_string(need)};
       }},
      {"min-comment-lines",
       [](const CodeExtract& e, const std::map<std::string, ParamValue>& params) {
         long long need = detail::int_param(params, "min_comment_lines", 1);
         long long have = 0;
         for (const auto& line : split_lines(e.code)) {
           std::string_view t = trim(line);
           if (!t.empty() && t[0] == '#') ++have;
         }
         if (have >= need) return CheckResult{true, ""};
         return CheckResult{false, "found " + std::to_string(have) +
                                       " comment lines, need " +
                                       std::to_string(need)};
       }},
      {"oserror-canonical",
       [](const CodeExtract& e, const std::map<std::string, ParamValue>&) {
         static const std::regex alias(
             R"(\b(IOError|EnvironmentError|WindowsError|socket\.error|os\.error|mmap\.error)\b)");
         std::smatch m;
         if (std::regex_search(e.code, m, alias))
           return CheckResult{false, "deprecated exception alias " + m[1].str()};
         return CheckResult{true, ""};
       }},
  };
  return checks;
}

inline CheckResult run_structural_check(
    const CodeExtract& extract, const std::string& check_id,
    const std::map<std::string, ParamValue>& params) {
  auto it = builtin_checks().find(check_id);
  if (it == builtin_checks().end())
    throw ConfigError("unknown check_id: " + check_id);
  return it->second(extract, params);
}

// ---------------------------------------------------------------------------
// Verdicts

struct VerdictContext {
  std::string task_id;
  PromptMode mode = PromptMode::kSingle;
  int k = 0;
};

inline VerdictRecord verify(const InstructionInstance& instance,
                            const CodeExtract& extract,
                            const TaxonomyRegistry& registry,
                            const LinterConfig& linter_cfg,
                            const VerdictContext& ctx) {
  const InstructionSpec& spec = registry.find(instance.spec_id);
  VerdictRecord v;
  v.task_id = ctx.task_id;
  v.spec_id = instance.spec_id;
  v.position = instance.position;
  v.mode = ctx.mode;
  v.k = ctx.k;

  const bool targets_code = spec.verifier.kind != VerifierKind::kProse;
  if (targets_code && !extract.parse_ok) {
    v.passed = false;
    v.reason = "unparseable code";
    return v;
  }
  if (targets_code && extract.code.empty()) {
    v.passed = false;
    v.reason = "no code";
    return v;
  }

  switch (spec.verifier.kind) {
    case VerifierKind::kLinterRule: {
      auto settings = resolve_settings(spec.verifier.settings, instance.params);
      auto diags = run_linter_check(extract.code, spec.verifier.rule_codes,
                                    settings, linter_cfg);
      if (diags.empty()) {
        v.passed = true;
      } else {
        const Diagnostic& d = diags.front();
        v.passed = false;
        v.reason = d.rule_code + " at " + std::to_string(d.line) + ":" +
                   std::to_string(d.column) + ": " + d.message;
      }
      break;
    }
    case VerifierKind::kStructural:
    case VerifierKind::kProse: {
      auto [passed, reason] =
          run_structural_check(extract, spec.verifier.check_id, instance.params);
      v.passed = passed;
      v.reason = passed ? "" : reason;
      break;
    }
  }
  return v;
}

}  // namespace ifkit
