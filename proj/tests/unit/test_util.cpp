#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <fstream>
#include <set>

#include "ifkit/errors.hpp"
#include "ifkit/util/fs.hpp"
#include "ifkit/util/hash.hpp"
#include "ifkit/util/jsonl.hpp"
#include "ifkit/util/parallel.hpp"
#include "ifkit/util/strings.hpp"
#include "ifkit/util/subprocess.hpp"

using namespace ifkit;

TEST_CASE("trim strips ascii whitespace from both ends") {
  CHECK(trim("  x  ") == "x");
  CHECK(trim("\t\r\n") == "");
  CHECK(trim("") == "");
  CHECK(trim("a b") == "a b");
}

TEST_CASE("split_lines handles CRLF and trailing newline") {
  CHECK(split_lines("a\nb\n") == std::vector<std::string>{"a", "b"});
  CHECK(split_lines("a\r\nb") == std::vector<std::string>{"a", "b"});
  CHECK(split_lines("") == std::vector<std::string>{});
  CHECK(split_lines("\n\n") == std::vector<std::string>{"", ""});
  CHECK(split_lines("one") == std::vector<std::string>{"one"});
}

TEST_CASE("count_words counts maximal nonspace runs") {
  CHECK(count_words("") == 0);
  CHECK(count_words("   ") == 0);
  CHECK(count_words("one") == 1);
  CHECK(count_words("a quick   brown\nfox") == 4);
}

TEST_CASE("replace_all replaces every occurrence without rescanning") {
  CHECK(replace_all("aaa", "a", "aa") == "aaaaaa");
  CHECK(replace_all("/tmp/x/file and /tmp/x/other", "/tmp/x", "<d>") ==
        "<d>/file and <d>/other");
  CHECK(replace_all("none here", "zzz", "y") == "none here");
}

TEST_CASE("fnv1a64 matches published test vectors") {
  // Frozen reference values for the 64-bit FNV-1a function.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("fnv1a64 seed chaining differs from concatenation of inputs") {
  // Chaining must distinguish ("ab","c") from ("a","bc").
  CHECK(fnv1a64("c", fnv1a64("ab")) == fnv1a64("abc"));
  CHECK(fnv1a64("ab") != fnv1a64("a"));
}

TEST_CASE("fnv1a64_mix folds integers byte-wise and to_hex is 16 chars") {
  CHECK(fnv1a64_mix(kFnvOffset, 0) != fnv1a64_mix(kFnvOffset, 1));
  CHECK(fnv1a64_mix(kFnvOffset, 1) != fnv1a64_mix(kFnvOffset, 1ull << 8));
  CHECK(to_hex(0).size() == 16);
  CHECK(to_hex(0xdeadbeefull) == "00000000deadbeef");
}

TEST_CASE("write_file_atomic then read_file round-trips bytes") {
  ScopedTempDir dir("ifkit-testfs");
  auto p = dir.path() / "payload.bin";
  std::string data = "line1\nline2\0embedded";
  data += '\xff';
  write_file_atomic(p, data);
  CHECK(read_file(p) == data);
  // No stray temp files left behind.
  size_t count = 0;
  for (auto const& e : fs::directory_iterator(dir.path())) {
    (void)e;
    ++count;
  }
  CHECK(count == 1);
}

TEST_CASE("read_file on a missing path reports an environment error") {
  CHECK_THROWS_AS(read_file("/nonexistent/ifkit/file"), EnvironmentError);
}

TEST_CASE("ScopedTempDir removes its tree on destruction") {
  fs::path kept;
  {
    ScopedTempDir dir("ifkit-testtmp");
    kept = dir.path();
    write_file_atomic(kept / "a.txt", "x");
    fs::create_directories(kept / "sub");
    write_file_atomic(kept / "sub" / "b.txt", "y");
    CHECK(fs::exists(kept));
  }
  CHECK(!fs::exists(kept));
}

TEST_CASE("run_subprocess captures stdout stderr and exit code") {
  SubprocessOptions opt;
  opt.argv = {"sh", "-c", "printf out; printf err >&2; exit 3"};
  auto r = run_subprocess(opt);
  CHECK(r.exit_code == 3);
  CHECK(r.out == "out");
  CHECK(r.err == "err");
  CHECK(!r.timed_out);
}

TEST_CASE("run_subprocess feeds stdin fully even for large payloads") {
  // Bigger than a pipe buffer, so the writer must interleave with draining.
  std::string big(1 << 20, 'x');
  SubprocessOptions opt;
  opt.argv = {"wc", "-c"};
  opt.stdin_data = big;
  auto r = run_subprocess(opt);
  CHECK(r.exit_code == 0);
  CHECK(trim(r.out) == std::to_string(big.size()));
}

TEST_CASE("run_subprocess enforces the deadline with a kill") {
  SubprocessOptions opt;
  opt.argv = {"sh", "-c", "sleep 30"};
  opt.timeout = std::chrono::milliseconds(200);
  auto started = std::chrono::steady_clock::now();
  auto r = run_subprocess(opt);
  auto elapsed = std::chrono::steady_clock::now() - started;
  CHECK(r.timed_out);
  CHECK(elapsed < std::chrono::seconds(10));
}

TEST_CASE("run_subprocess applies env overrides and removals") {
  SubprocessOptions opt;
  opt.argv = {"sh", "-c", "printf '%s' \"$IFKIT_PROBE\""};
  opt.env = {{"IFKIT_PROBE", "live"}};
  CHECK(run_subprocess(opt).out == "live");

  setenv("IFKIT_PROBE_UNSET", "present", 1);
  SubprocessOptions clear;
  clear.argv = {"sh", "-c", "printf '%s' \"${IFKIT_PROBE_UNSET-gone}\""};
  clear.env = {{"IFKIT_PROBE_UNSET", ""}};
  CHECK(run_subprocess(clear).out == "gone");
  unsetenv("IFKIT_PROBE_UNSET");
}

TEST_CASE("run_subprocess honors the working directory option") {
  ScopedTempDir dir("ifkit-testcwd");
  SubprocessOptions opt;
  opt.argv = {"pwd"};
  opt.cwd = dir.path();
  CHECK(fs::path(std::string(trim(run_subprocess(opt).out))) ==
        fs::canonical(dir.path()));
}

TEST_CASE("run_subprocess surfaces exec failure as environment error") {
  SubprocessOptions opt;
  opt.argv = {"definitely-not-a-binary-ifkit"};
  CHECK_THROWS_AS(run_subprocess(opt), EnvironmentError);
}

TEST_CASE("parse_json reports malformed input as a domain error") {
  CHECK_THROWS_AS(parse_json("{nope", "test blob"), DomainError);
  CHECK(parse_json("{\"a\":1}", "x").at("a") == 1);
}

TEST_CASE("read_jsonl skips blank lines and cites the bad line") {
  ScopedTempDir dir("ifkit-testjsonl");
  auto p = dir.path() / "rows.jsonl";
  write_file_atomic(p, "{\"i\":1}\n\n{\"i\":2}\n");
  auto rows = read_jsonl(p);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].at("i") == 2);

  write_file_atomic(p, "{\"i\":1}\nnot json\n");
  try {
    read_jsonl(p);
    FAIL("expected malformed line to throw");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("write_jsonl emits one sorted-key object per line") {
  ScopedTempDir dir("ifkit-testjsonl2");
  auto p = dir.path() / "out.jsonl";
  write_jsonl(p, {Json{{"b", 1}, {"a", 2}}, Json{{"z", true}}});
  CHECK(read_file(p) == "{\"a\":2,\"b\":1}\n{\"z\":true}\n");
}

TEST_CASE("find_first_json_object scans past prose and nested braces") {
  auto hit = find_first_json_object("text {\"a\": {\"b\": 1}} trailing");
  REQUIRE(hit.has_value());
  CHECK(hit->at("a").at("b") == 1);

  CHECK(!find_first_json_object("no braces here").has_value());
  CHECK(!find_first_json_object("{unbalanced").has_value());
  // Braces inside strings must not confuse the scanner.
  auto tricky = find_first_json_object(R"(x {"k": "va}lue"} y)");
  REQUIRE(tricky.has_value());
  CHECK(tricky->at("k") == "va}lue");
  // A malformed first candidate does not hide a later well-formed one.
  auto second = find_first_json_object("{bad} then {\"ok\": 1}");
  REQUIRE(second.has_value());
  CHECK(second->at("ok") == 1);
}

TEST_CASE("parallel_for_each preserves slot order and covers every index") {
  std::vector<int> out(257, -1);
  parallel_for_each(out.size(), 8, [&](size_t i) { out[i] = static_cast<int>(i) * 2; });
  for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i) * 2);
}

TEST_CASE("parallel_for_each rethrows a worker exception after joining") {
  std::atomic<int> done{0};
  auto body = [&](size_t i) {
    if (i == 3) throw DomainError("boom");
    ++done;
  };
  CHECK_THROWS_AS(parallel_for_each(16, 4, body), DomainError);
  CHECK(done.load() <= 15);
}

TEST_CASE("parallel_for_each with one worker runs inline") {
  std::vector<size_t> order;
  parallel_for_each(5, 1, [&](size_t i) { order.push_back(i); });
  CHECK(order == std::vector<size_t>{0, 1, 2, 3, 4});
}
