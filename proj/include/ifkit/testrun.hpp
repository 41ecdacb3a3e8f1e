#pragma once

#include <regex>
#include <string>
#include <vector>

#include "ifkit/errors.hpp"
#include "ifkit/util/fs.hpp"
#include "ifkit/util/strings.hpp"
#include "ifkit/util/subprocess.hpp"

namespace ifkit {

struct TestLimits {
  std::chrono::milliseconds timeout{10000};
  std::uint64_t memory_bytes = 512ull * 1024 * 1024;
};

struct TestOutcome {
  std::string task_id;
  bool passed = false;
  std::string detail;
  double duration_seconds = 0.0;  // in-memory only; reports omit wall time
  bool timed_out = false;
};

namespace detail {

// Drops wall-clock fragments test runners print ("Ran 3 tests in 0.004s"),
// so recorded outcomes stay byte-stable across reruns.
inline std::string scrub_timing(const std::string& text) {
  static const std::regex timing(R"( in [0-9]+(\.[0-9]+)?s\b)");
  return std::regex_replace(text, timing, "");
}

inline std::string clip_tail(const std::string& text, size_t max_bytes) {
  if (text.size() <= max_bytes) return text;
  return "..." + text.substr(text.size() - max_bytes);
}

}  // namespace detail

// Runs a candidate solution against its suite in a throwaway directory with
// a dedicated process group, a deadline, and an address-space cap. The suite
// decides the verdict through its exit status alone.
inline TestOutcome run_unit_tests(const std::string& code,
                                  const std::string& tests_ref,
                                  const TestLimits& limits = {},
                                  const std::string& task_id = "") {
  TestOutcome outcome;
  outcome.task_id = task_id;

  ScopedTempDir sandbox("ifkit-run");
  std::vector<std::string> argv;

  if (starts_with(tests_ref, "inline:")) {
    write_file_atomic(sandbox.path() / "test_solution.py", tests_ref.substr(7));
    argv = {"python3", "-s", "test_solution.py"};
  } else if (starts_with(tests_ref, "dir:")) {
    fs::path src(tests_ref.substr(4));
    if (!fs::is_directory(src))
      throw EnvironmentError("tests_ref directory missing: " + src.string());
    std::error_code ec;
    fs::copy(src, sandbox.path(), fs::copy_options::recursive, ec);
    if (ec)
      throw EnvironmentError("cannot stage tests_ref directory: " + ec.message());
    if (fs::exists(sandbox.path() / "run_tests.py"))
      argv = {"python3", "-s", "run_tests.py"};
    else
      argv = {"python3", "-s", "-m", "unittest", "discover", "-v"};
  } else {
    throw DomainError("unresolvable tests_ref: " + tests_ref);
  }
  // The candidate goes in last so it wins over any staged placeholder.
  write_file_atomic(sandbox.path() / "solution.py", code);

  SubprocessOptions opt;
  opt.argv = argv;
  opt.cwd = sandbox.path();
  opt.timeout = limits.timeout;
  opt.memory_limit_bytes = limits.memory_bytes;
  opt.env = {{"PYTHONDONTWRITEBYTECODE", "1"}, {"PYTHONHASHSEED", "0"}};

  auto started = std::chrono::steady_clock::now();
  SubprocessResult r = run_subprocess(opt);
  outcome.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();

  outcome.timed_out = r.timed_out;
  outcome.passed = !r.timed_out && r.exit_code == 0;
  std::string raw = r.err.empty() ? r.out : r.err;
  if (r.timed_out)
    raw = "timed out after " +
          std::to_string(limits.timeout.count() / 1000) + "s";
  // The sandbox path is freshly minted per run; normalize it away so
  // recorded details compare equal across reruns.
  raw = replace_all(std::move(raw), sandbox.path().string(), "<sandbox>");
  outcome.detail = detail::clip_tail(detail::scrub_timing(raw), 2000);
  return outcome;
}

inline double pass_at_1(const std::vector<TestOutcome>& outcomes) {
  if (outcomes.empty()) throw DomainError("pass_at_1 over no outcomes");
  size_t passed = 0;
  for (const auto& o : outcomes)
    if (o.passed) ++passed;
  return 100.0 * static_cast<double>(passed) /
         static_cast<double>(outcomes.size());
}

}  // namespace ifkit
