#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ifkit/errors.hpp"
#include "ifkit/util/fs.hpp"
#include "ifkit/util/hash.hpp"
#include "ifkit/util/jsonl.hpp"

namespace ifkit {

struct ChatMessage {
  std::string role;  // system | user | model
  std::string content;
};

struct ModelRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  Json options;  // provider pass-through, not part of the request identity
};

// Stable fingerprint of a request. Mock fixtures may key on it, and retries
// of the same call share it, which is how the mock counts transient faults.
inline std::string request_hash(const ModelRequest& req) {
  std::uint64_t h = kFnvOffset;
  for (const auto& m : req.messages) {
    h = fnv1a64(m.role, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(m.content, h);
    h = fnv1a64("\x1e", h);
  }
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.6g", req.temperature);
  h = fnv1a64(temp, h);
  h = fnv1a64_mix(h, static_cast<std::uint64_t>(req.max_tokens));
  return to_hex(h);
}

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string complete(const ModelRequest& req) = 0;
  virtual std::string name() const = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void default_sleeper(std::chrono::milliseconds d) {
  std::this_thread::sleep_for(d);
}

// Retry wrapper shared by every caller that talks to a client. Fixed delay
// between attempts; the sleeper is injectable so tests never actually wait.
struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{2000};
  Sleeper sleeper = default_sleeper;
};

struct AttemptedCall {
  std::string response;
  int attempts = 1;
  std::vector<std::string> attempt_errors;  // one per failed attempt
};

inline AttemptedCall complete_with_retry(ModelClient& client,
                                         const ModelRequest& req,
                                         const RetryPolicy& policy) {
  if (policy.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  AttemptedCall call;
  for (int attempt = 1;; ++attempt) {
    try {
      call.response = client.complete(req);
      call.attempts = attempt;
      return call;
    } catch (const ClientError& e) {
      call.attempt_errors.emplace_back(e.what());
      if (attempt == policy.max_attempts) {
        call.attempts = attempt;
        throw ClientError("client failed after " + std::to_string(attempt) +
                          " attempts: " + e.what());
      }
      policy.sleeper(policy.backoff);
    }
  }
}

// ---------------------------------------------------------------------------
// Scripted mock client
//
// Fixture: {schema_version: 1, default_response?, entries: [{match_hash? |
// match_substring?, response, fail_times?, persistent_fail?}]}. An entry
// matches on request hash or on a substring of the flattened message text;
// first match wins. fail_times makes the first N calls for a given request
// fingerprint fail, which exercises the retry path deterministically.
class MockModelClient : public ModelClient {
 public:
  explicit MockModelClient(const fs::path& fixture_path)
      : label_("mock:" + fixture_path.string()) {
    Json doc = parse_json(read_file(fixture_path), fixture_path.string());
    if (doc.value("schema_version", 0) != 1)
      throw ConfigError("mock fixture needs schema_version 1: " +
                        fixture_path.string());
    if (doc.contains("default_response"))
      default_response_ = doc.at("default_response").get<std::string>();
    for (const auto& e : doc.value("entries", Json::array())) {
      Entry entry;
      if (e.contains("match_hash"))
        entry.match_hash = e.at("match_hash").get<std::string>();
      if (e.contains("match_substring"))
        entry.match_substring = e.at("match_substring").get<std::string>();
      if (entry.match_hash.empty() && entry.match_substring.empty())
        throw ConfigError("mock entry without match_hash or match_substring");
      entry.response = e.value("response", std::string());
      entry.fail_times = e.value("fail_times", 0);
      entry.persistent_fail = e.value("persistent_fail", false);
      entries_.push_back(std::move(entry));
    }
  }

  std::string complete(const ModelRequest& req) override {
    std::string hash = request_hash(req);
    std::string flat;
    for (const auto& m : req.messages) {
      flat += m.content;
      flat += '\n';
    }
    std::lock_guard<std::mutex> lock(mu_);
    for (size_t i = 0; i < entries_.size(); ++i) {
      Entry& e = entries_[i];
      bool hit = (!e.match_hash.empty() && e.match_hash == hash) ||
                 (!e.match_substring.empty() &&
                  flat.find(e.match_substring) != std::string::npos);
      if (!hit) continue;
      if (e.persistent_fail) throw ClientError("scripted persistent failure");
      if (e.fail_times > 0) {
        int& seen = fail_counts_[FailKey{i, hash}];
        if (seen < e.fail_times) {
          ++seen;
          throw ClientError("scripted transient failure " +
                            std::to_string(seen) + "/" +
                            std::to_string(e.fail_times));
        }
      }
      return e.response;
    }
    if (default_response_) return *default_response_;
    throw ClientError("mock has no scripted response for request " + hash);
  }

  std::string name() const override { return label_; }

 private:
  struct Entry {
    std::string match_hash;
    std::string match_substring;
    std::string response;
    int fail_times = 0;
    bool persistent_fail = false;
  };
  using FailKey = std::pair<size_t, std::string>;

  std::string label_;
  std::optional<std::string> default_response_;
  std::vector<Entry> entries_;
  std::map<FailKey, int> fail_counts_;
  std::mutex mu_;
};

}  // namespace ifkit
