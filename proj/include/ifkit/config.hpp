#pragma once

#include <cstdlib>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "ifkit/errors.hpp"
#include "ifkit/util/fs.hpp"
#include "ifkit/util/jsonl.hpp"

namespace ifkit {

// Layered option lookup implementing the precedence contract:
// command-line flag > config file > environment variable > built-in default.
// CLI code asks with the flag's count so an explicitly passed flag always
// wins even when it equals the default.
class OptionResolver {
 public:
  OptionResolver() : config_(Json::object()) {}
  explicit OptionResolver(Json config) : config_(std::move(config)) {
    if (!config_.is_object()) throw ConfigError("config root must be an object");
  }

  static OptionResolver from_file(const fs::path& path) {
    return OptionResolver(parse_json(read_file(path), path.string()));
  }

  template <typename T>
  T resolve(bool flag_given, const T& flag_value,
            const std::vector<std::string>& config_path, const char* env_name,
            const T& fallback) const {
    if (flag_given) return flag_value;
    if (auto v = config_value(config_path)) {
      try {
        return v->get<T>();
      } catch (const Json::exception&) {
        throw ConfigError("config value has wrong type at " +
                          join_path(config_path));
      }
    }
    if (env_name) {
      if (const char* raw = std::getenv(env_name); raw && *raw)
        return parse_env<T>(raw, env_name);
    }
    return fallback;
  }

 private:
  std::optional<Json> config_value(const std::vector<std::string>& path) const {
    const Json* node = &config_;
    for (const auto& key : path) {
      if (!node->is_object() || !node->contains(key)) return std::nullopt;
      node = &node->at(key);
    }
    return *node;
  }

  static std::string join_path(const std::vector<std::string>& path) {
    std::string out;
    for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
    return out;
  }

  template <typename T>
  static T parse_env(const char* raw, const char* name) {
    if constexpr (std::is_same_v<T, std::string>) {
      return std::string(raw);
    } else if constexpr (std::is_same_v<T, bool>) {
      std::string v(raw);
      return v == "1" || v == "true" || v == "yes";
    } else {
      try {
        if constexpr (std::is_floating_point_v<T>)
          return static_cast<T>(std::stod(raw));
        else
          return static_cast<T>(std::stoll(raw));
      } catch (const std::exception&) {
        throw ConfigError(std::string("unparseable environment value in $") + name);
      }
    }
  }

  Json config_;
};

// System prompt fixtures: {schema_version: 1, prompts: {id: text}}.
inline std::string load_system_prompt(const fs::path& path, const std::string& id) {
  Json doc = parse_json(read_file(path), path.string());
  if (doc.value("schema_version", 0) != 1)
    throw ConfigError("system prompt file needs schema_version 1: " + path.string());
  const Json& prompts = doc.at("prompts");
  if (!prompts.contains(id))
    throw ConfigError("unknown system_prompt_id '" + id + "' in " + path.string());
  return prompts.at(id).get<std::string>();
}

}  // namespace ifkit
