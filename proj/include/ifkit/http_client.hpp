#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "ifkit/clients.hpp"
#include "ifkit/errors.hpp"

namespace ifkit {

// Chat-completion endpoint speaking the common OpenAI-style wire shape.
// Credentials are never stored in config files; the config names an
// environment variable and the key is read at construction.
struct HttpClientConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;  // name of the env var holding the credential
  int timeout_seconds = 120;
};

class HttpModelClient : public ModelClient {
 public:
  explicit HttpModelClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) throw ConfigError("http client needs base_url");
    if (cfg_.model.empty()) throw ConfigError("http client needs a model name");
    if (!cfg_.api_key_env.empty()) {
      const char* key = std::getenv(cfg_.api_key_env.c_str());
      if (!key || !*key)
        throw EnvironmentError("credential variable not set: " + cfg_.api_key_env);
      api_key_ = key;
    }
  }

  std::string complete(const ModelRequest& req) override {
    Json body;
    body["model"] = cfg_.model;
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;
    Json messages = Json::array();
    for (const auto& m : req.messages) {
      // Internal "model" role maps to the wire's "assistant".
      std::string role = m.role == "model" ? "assistant" : m.role;
      messages.push_back(Json{{"role", role}, {"content", m.content}});
    }
    body["messages"] = std::move(messages);
    if (req.options.is_object())
      for (const auto& [k, v] : req.options.items()) body[k] = v;

    httplib::Client http(cfg_.base_url);
    http.set_connection_timeout(cfg_.timeout_seconds, 0);
    http.set_read_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key_.empty())
      headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = http.Post(cfg_.path, headers, body.dump(), "application/json");
    if (!res)
      throw ClientError("transport failure talking to " + cfg_.base_url + ": " +
                        httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      throw ClientError("endpoint returned status " +
                        std::to_string(res->status) + ": " + res->body);

    Json reply = Json::parse(res->body, nullptr, false);
    if (reply.is_discarded())
      throw ClientError("unparseable completion body: " + res->body);
    try {
      return reply.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const Json::exception&) {
      throw ClientError("completion body missing choices[0].message.content: " +
                        res->body);
    }
  }

  std::string name() const override { return cfg_.model; }

 private:
  HttpClientConfig cfg_;
  std::string api_key_;
};

}  // namespace ifkit
