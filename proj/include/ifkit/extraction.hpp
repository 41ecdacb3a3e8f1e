#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ifkit/util/strings.hpp"
#include "ifkit/util/subprocess.hpp"

namespace ifkit {

// A response is modelled as an ordered list of segments whose raw bytes
// concatenate back to the original text exactly. Blocks keep their fence
// lines inside `raw`; `content` is the interior only.
struct Segment {
  enum class Kind { kProse, kCode, kForeign };
  Kind kind = Kind::kProse;
  std::string raw;
  std::string content;  // blocks only; one trailing newline stripped
  std::string lang;     // normalized info-string token, "" when untagged
};

struct CodeExtract {
  std::string code;
  std::string prose_before_last_block;
  std::string prose_after_last_block;
  int block_count = 0;   // analyzed-language blocks only
  bool parse_ok = false;
  std::vector<Segment> segments;
};

using SyntaxChecker = std::function<bool(const std::string&)>;

// Syntax gate for the analyzed language. Compile-only, isolated interpreter,
// nothing from the candidate code is executed.
inline bool python_syntax_ok(const std::string& code) {
  SubprocessOptions opt;
  opt.argv = {"python3", "-I", "-c", "import ast,sys; ast.parse(sys.stdin.read())"};
  opt.stdin_data = code;
  opt.timeout = std::chrono::milliseconds(10000);
  SubprocessResult r = run_subprocess(opt);
  if (r.timed_out) return false;
  return r.exit_code == 0;
}

namespace detail {

inline bool is_fence_line(std::string_view line) {
  return starts_with(line, "```");
}

inline std::string fence_lang(std::string_view line) {
  size_t i = 0;
  while (i < line.size() && line[i] == '`') ++i;
  std::string_view info = trim(line.substr(i));
  size_t sp = 0;
  while (sp < info.size() && !is_space(info[sp])) ++sp;
  return to_lower(info.substr(0, sp));
}

inline bool analyzed_lang(const std::string& lang) {
  return lang.empty() || lang == "python" || lang == "py" || lang == "python3";
}

}  // namespace detail

// Splits a model response into prose and fenced blocks. Fences are
// column-zero triple-backtick lines; an unclosed fence runs to the end of
// the response. Blocks tagged with a foreign language stay out of `code`
// but count as prose for the prose-targeting checks.
inline CodeExtract extract(const std::string& response,
                           const SyntaxChecker& syntax_ok = python_syntax_ok) {
  CodeExtract result;

  // Line scan with explicit slices so segment raws reassemble losslessly.
  size_t pos = 0;
  size_t segment_start = 0;
  bool in_block = false;
  size_t block_start = 0;      // offset of the opening fence line
  size_t interior_start = 0;   // offset just past the opening fence line
  std::string block_tag;

  auto flush_prose = [&](size_t end) {
    if (end > segment_start) {
      Segment s;
      s.kind = Segment::Kind::kProse;
      s.raw = response.substr(segment_start, end - segment_start);
      result.segments.push_back(std::move(s));
    }
  };
  auto close_block = [&](size_t interior_end, size_t block_end) {
    Segment s;
    s.lang = block_tag;
    s.kind = detail::analyzed_lang(block_tag) ? Segment::Kind::kCode
                                              : Segment::Kind::kForeign;
    s.raw = response.substr(block_start, block_end - block_start);
    s.content = response.substr(interior_start, interior_end - interior_start);
    if (!s.content.empty() && s.content.back() == '\n') s.content.pop_back();
    result.segments.push_back(std::move(s));
    segment_start = block_end;
  };

  while (pos <= response.size()) {
    size_t nl = response.find('\n', pos);
    size_t line_end = nl == std::string::npos ? response.size() : nl + 1;
    std::string_view line(response.data() + pos,
                          (nl == std::string::npos ? response.size() : nl) - pos);
    if (detail::is_fence_line(line)) {
      if (!in_block) {
        flush_prose(pos);
        in_block = true;
        block_start = pos;
        interior_start = line_end;
        block_tag = detail::fence_lang(line);
      } else {
        in_block = false;
        close_block(pos, line_end);
      }
    }
    if (nl == std::string::npos) break;
    pos = line_end;
  }
  if (in_block) {
    close_block(response.size(), response.size());  // truncated response
  } else {
    flush_prose(response.size());
  }

  // Derived fields. Prose around the last analyzed block includes foreign
  // blocks verbatim: they are not candidate code.
  int last_code_index = -1;
  for (size_t i = 0; i < result.segments.size(); ++i)
    if (result.segments[i].kind == Segment::Kind::kCode) {
      ++result.block_count;
      last_code_index = static_cast<int>(i);
    }

  if (result.block_count > 0) {
    std::vector<std::string> parts;
    for (const auto& s : result.segments)
      if (s.kind == Segment::Kind::kCode) parts.push_back(s.content);
    result.code = join(parts, "\n");
    for (size_t i = 0; i < result.segments.size(); ++i) {
      const auto& s = result.segments[i];
      if (s.kind == Segment::Kind::kCode) continue;
      if (static_cast<int>(i) < last_code_index)
        result.prose_before_last_block += s.raw;
      else
        result.prose_after_last_block += s.raw;
    }
    result.parse_ok = syntax_ok(result.code);
  } else {
    // No fenced code: treat the whole response as the candidate only if it
    // already parses; otherwise there is no code to judge.
    if (syntax_ok(response)) {
      result.code = response;
      result.parse_ok = true;
    } else {
      result.parse_ok = false;
    }
    result.prose_after_last_block = response;
  }
  return result;
}

inline std::string reassemble(const std::vector<Segment>& segments) {
  std::string out;
  for (const auto& s : segments) out += s.raw;
  return out;
}

}  // namespace ifkit
