#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ifkit/errors.hpp"
#include "ifkit/util/fs.hpp"
#include "ifkit/util/strings.hpp"

namespace ifkit {

using Json = nlohmann::json;

inline Json parse_json(std::string_view text, const std::string& what) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DomainError("malformed JSON in " + what);
  return j;
}

// One JSON object per line; blank lines are tolerated on input, never
// produced on output.
inline std::vector<Json> read_jsonl(const fs::path& path) {
  std::vector<Json> records;
  std::string text = read_file(path);
  size_t lineno = 0;
  for (const auto& line : split_lines(text)) {
    ++lineno;
    if (trim(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw DomainError("malformed JSONL at " + path.string() + ":" +
                        std::to_string(lineno));
    records.push_back(std::move(j));
  }
  return records;
}

// nlohmann's default object keeps keys sorted, which is what makes these
// files byte-stable across runs. Do not switch to ordered_json here.
inline std::string dump_jsonl(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

inline void write_jsonl(const fs::path& path, const std::vector<Json>& records) {
  write_file_atomic(path, dump_jsonl(records));
}

// First balanced {...} span that parses as a JSON object, if any. The depth
// scan is string-aware so braces inside quoted text do not count.
inline std::optional<Json> find_first_json_object(const std::string& text) {
  for (size_t start = text.find('{'); start != std::string::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          Json j = Json::parse(text.substr(start, i - start + 1), nullptr, false);
          if (j.is_object()) return j;
          break;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace ifkit
