#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ifkit/errors.hpp"
#include "ifkit/util/fs.hpp"
#include "ifkit/util/jsonl.hpp"
#include "ifkit/util/strings.hpp"

namespace ifkit {

// ---------------------------------------------------------------------------
// Data model

enum class Category {
  kCodingStyle,
  kLogicPatterns,
  kDocumentation,
  kErrorHandling,
  kLibraryApi,
};

inline const std::vector<std::pair<Category, std::string>>& category_names() {
  static const std::vector<std::pair<Category, std::string>> names = {
      {Category::kCodingStyle, "coding-style"},
      {Category::kLogicPatterns, "logic-patterns"},
      {Category::kDocumentation, "documentation"},
      {Category::kErrorHandling, "error-handling"},
      {Category::kLibraryApi, "library-api"},
  };
  return names;
}

inline std::string to_string(Category c) {
  for (const auto& [cat, name] : category_names())
    if (cat == c) return name;
  throw DomainError("unknown category value");
}

inline Category category_from_string(const std::string& s) {
  for (const auto& [cat, name] : category_names())
    if (name == s) return cat;
  throw DomainError("unknown category: " + s);
}

using ParamValue = std::variant<long long, std::string>;

inline std::string param_value_text(const ParamValue& v) {
  if (std::holds_alternative<long long>(v))
    return std::to_string(std::get<long long>(v));
  return std::get<std::string>(v);
}

inline Json param_value_json(const ParamValue& v) {
  if (std::holds_alternative<long long>(v)) return std::get<long long>(v);
  return std::get<std::string>(v);
}

enum class ValueKind { kInteger, kStringEnum };

struct ParameterSchema {
  std::string key;
  ValueKind kind = ValueKind::kInteger;
  long long min_value = 0;  // integer kind
  long long max_value = 0;
  std::vector<std::string> allowed_values;  // string-enum kind
  ParamValue default_value;
  std::vector<ParamValue> recommended;

  bool contains(const ParamValue& v) const {
    if (kind == ValueKind::kInteger) {
      if (!std::holds_alternative<long long>(v)) return false;
      long long x = std::get<long long>(v);
      return x >= min_value && x <= max_value;
    }
    if (!std::holds_alternative<std::string>(v)) return false;
    const std::string& s = std::get<std::string>(v);
    for (const auto& a : allowed_values)
      if (a == s) return true;
    return false;
  }
};

// How an instruction's pass/fail gets decided. Linter-backed instructions
// carry a rule selection plus config-key bindings; the rest name a built-in
// check implemented in the engine.
struct SettingBinding {
  std::string key;                        // linter config key, dotted path
  std::optional<std::string> fixed_value;
  std::optional<std::string> from_param;
  std::map<std::string, std::string> value_map;  // param value -> config value
};

enum class VerifierKind { kLinterRule, kStructural, kProse };

struct VerifierBinding {
  VerifierKind kind = VerifierKind::kLinterRule;
  std::vector<std::string> rule_codes;
  std::vector<SettingBinding> settings;
  std::string check_id;
};

struct InstructionSpec {
  std::string id;
  Category category = Category::kCodingStyle;
  std::string description;
  std::string prompt_single;
  std::string prompt_multi;
  std::vector<ParameterSchema> parameters;
  VerifierBinding verifier;
  std::string provenance;  // "paper" or "reconstructed"

  const ParameterSchema* find_parameter(const std::string& key) const {
    for (const auto& p : parameters)
      if (p.key == key) return &p;
    return nullptr;
  }
};

struct InstructionInstance {
  std::string spec_id;
  std::map<std::string, ParamValue> params;
  int position = 1;  // 1-based index within its task
};

// ---------------------------------------------------------------------------
// Template scanning (single-brace placeholders, doubled braces are literals)

namespace detail {

template <typename OnLiteral, typename OnPlaceholder>
void scan_template(const std::string& tmpl, const std::string& what,
                   OnLiteral&& literal, OnPlaceholder&& placeholder) {
  size_t i = 0;
  while (i < tmpl.size()) {
    char c = tmpl[i];
    if (c == '{') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
        literal('{');
        i += 2;
        continue;
      }
      size_t close = tmpl.find('}', i + 1);
      if (close == std::string::npos)
        throw DomainError("unterminated placeholder in " + what);
      placeholder(tmpl.substr(i + 1, close - i - 1));
      i = close + 1;
      continue;
    }
    if (c == '}') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
        literal('}');
        i += 2;
        continue;
      }
      throw DomainError("stray '}' in " + what);
    }
    literal(c);
    ++i;
  }
}

inline std::set<std::string> placeholder_names(const std::string& tmpl,
                                               const std::string& what) {
  std::set<std::string> names;
  scan_template(
      tmpl, what, [](char) {},
      [&](const std::string& name) { names.insert(name); });
  return names;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Registry

class TaxonomyRegistry {
 public:
  TaxonomyRegistry() = default;
  explicit TaxonomyRegistry(std::vector<InstructionSpec> specs)
      : specs_(std::move(specs)) {
    for (size_t i = 0; i < specs_.size(); ++i) {
      auto [it, fresh] = index_.emplace(specs_[i].id, i);
      if (!fresh) throw DomainError("duplicate instruction id: " + specs_[i].id);
    }
  }

  const std::vector<InstructionSpec>& specs() const { return specs_; }
  size_t size() const { return specs_.size(); }

  const InstructionSpec* find_ptr(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &specs_[it->second];
  }

  const InstructionSpec& find(const std::string& id) const {
    const InstructionSpec* s = find_ptr(id);
    if (!s) throw DomainError("unknown instruction id: " + id);
    return *s;
  }

  std::map<Category, size_t> category_counts() const {
    std::map<Category, size_t> counts;
    for (const auto& s : specs_) ++counts[s.category];
    return counts;
  }

 private:
  std::vector<InstructionSpec> specs_;
  std::map<std::string, size_t> index_;
};

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline ParamValue param_value_from_json(const Json& j, const std::string& what) {
  if (j.is_number_integer()) return ParamValue(j.get<long long>());
  if (j.is_string()) return ParamValue(j.get<std::string>());
  throw DomainError("parameter value must be integer or string in " + what);
}

inline ParameterSchema parameter_from_json(const Json& j, const std::string& what) {
  ParameterSchema p;
  p.key = j.at("key").get<std::string>();
  std::string kind = j.at("kind").get<std::string>();
  const Json& allowed = j.at("allowed");
  if (kind == "integer") {
    p.kind = ValueKind::kInteger;
    p.min_value = allowed.at("min").get<long long>();
    p.max_value = allowed.at("max").get<long long>();
    if (p.min_value > p.max_value)
      throw DomainError("empty integer range for parameter " + p.key + " in " + what);
  } else if (kind == "string-enum") {
    p.kind = ValueKind::kStringEnum;
    if (!allowed.is_array() || allowed.empty())
      throw DomainError("string-enum needs a nonempty allowed list: " + p.key +
                        " in " + what);
    for (const auto& a : allowed) p.allowed_values.push_back(a.get<std::string>());
  } else {
    throw DomainError("unknown parameter kind '" + kind + "' in " + what);
  }
  p.default_value = param_value_from_json(j.at("default"), what);
  if (!p.contains(p.default_value))
    throw DomainError("default outside allowed set for parameter " + p.key +
                      " in " + what);
  for (const auto& r : j.at("recommended")) {
    ParamValue v = param_value_from_json(r, what);
    if (!p.contains(v))
      throw DomainError("recommended value outside allowed set for parameter " +
                        p.key + " in " + what);
    p.recommended.push_back(std::move(v));
  }
  return p;
}

inline VerifierBinding verifier_from_json(const Json& j, const std::string& what) {
  VerifierBinding v;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "linter-rule") {
    v.kind = VerifierKind::kLinterRule;
    for (const auto& c : j.at("rule_codes"))
      v.rule_codes.push_back(c.get<std::string>());
    if (v.rule_codes.empty())
      throw DomainError("linter-rule binding needs rule_codes in " + what);
    if (j.contains("settings")) {
      for (const auto& s : j.at("settings")) {
        SettingBinding b;
        b.key = s.at("key").get<std::string>();
        if (s.contains("value")) b.fixed_value = s.at("value").get<std::string>();
        if (s.contains("from_param"))
          b.from_param = s.at("from_param").get<std::string>();
        if (!b.fixed_value.has_value() && !b.from_param.has_value())
          throw DomainError("setting '" + b.key +
                            "' needs value or from_param in " + what);
        if (s.contains("value_map"))
          for (const auto& [mk, mv] : s.at("value_map").items())
            b.value_map[mk] = mv.get<std::string>();
        v.settings.push_back(std::move(b));
      }
    }
  } else if (kind == "structural" || kind == "prose") {
    v.kind = kind == "structural" ? VerifierKind::kStructural : VerifierKind::kProse;
    v.check_id = j.at("check_id").get<std::string>();
    if (v.check_id.empty()) throw DomainError("empty check_id in " + what);
  } else {
    throw DomainError("unknown verifier kind '" + kind + "' in " + what);
  }
  return v;
}

}  // namespace detail

inline TaxonomyRegistry load_taxonomy(const std::string& text) {
  if (trim(text).empty()) throw DomainError("taxonomy file is empty");
  Json doc = parse_json(text, "taxonomy file");
  if (!doc.is_object() || !doc.contains("schema_version"))
    throw DomainError("taxonomy file lacks schema_version header");
  if (doc.at("schema_version").get<int>() != 1)
    throw DomainError("unsupported taxonomy schema_version");
  const Json& arr = doc.at("instructions");
  if (!arr.is_array() || arr.empty())
    throw DomainError("taxonomy file has no instructions");

  std::vector<InstructionSpec> specs;
  specs.reserve(arr.size());
  for (const auto& item : arr) {
    InstructionSpec s;
    s.id = item.at("id").get<std::string>();
    const std::string what = "instruction '" + s.id + "'";
    s.category = category_from_string(item.at("category").get<std::string>());
    s.description = item.at("description").get<std::string>();
    s.prompt_single = item.at("prompt_single").get<std::string>();
    s.prompt_multi = item.at("prompt_multi").get<std::string>();
    if (item.contains("parameters"))
      for (const auto& p : item.at("parameters"))
        s.parameters.push_back(detail::parameter_from_json(p, what));
    s.verifier = detail::verifier_from_json(item.at("verifier"), what);
    if (item.contains("provenance"))
      s.provenance = item.at("provenance").get<std::string>();

    // Placeholders in either template must name declared parameters.
    const std::pair<const char*, const std::string*> prompts[] = {
        {"single", &s.prompt_single}, {"multi", &s.prompt_multi}};
    for (const auto& [which, tmpl] : prompts) {
      for (const auto& name : detail::placeholder_names(
               *tmpl, what + " " + std::string(which) + " prompt"))
        if (!s.find_parameter(name))
          throw DomainError("placeholder {" + name +
                            "} has no declared parameter in " + what);
    }
    specs.push_back(std::move(s));
  }
  return TaxonomyRegistry(std::move(specs));
}

inline TaxonomyRegistry load_taxonomy_file(const fs::path& path) {
  return load_taxonomy(read_file(path));
}

// ---------------------------------------------------------------------------
// Validation by repair

namespace detail {

inline std::optional<long long> coerce_integer(const Json& v) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    long long i = static_cast<long long>(d);
    if (static_cast<double>(i) == d) return i;
    return std::nullopt;
  }
  if (v.is_string()) {
    // Models hand back numbers as strings often enough to be worth repairing.
    std::string s(trim(v.get<std::string>()));
    if (s.empty()) return std::nullopt;
    size_t pos = 0;
    try {
      long long i = std::stoll(s, &pos);
      if (pos == s.size()) return i;
    } catch (const std::exception&) {
    }
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace detail

// Total by contract: unknown keys are dropped, missing or invalid values are
// replaced by the schema default. Enum matches are case-insensitive and
// canonicalized to the declared casing, so repeated application is a no-op.
inline std::map<std::string, ParamValue> validate_parameters(
    const InstructionSpec& spec, const Json& raw) {
  std::map<std::string, ParamValue> out;
  for (const auto& p : spec.parameters) {
    ParamValue value = p.default_value;
    if (raw.is_object() && raw.contains(p.key)) {
      const Json& v = raw.at(p.key);
      if (p.kind == ValueKind::kInteger) {
        if (auto i = detail::coerce_integer(v); i && *i >= p.min_value && *i <= p.max_value)
          value = *i;
      } else if (v.is_string()) {
        std::string lowered = to_lower(std::string(trim(v.get<std::string>())));
        for (const auto& a : p.allowed_values)
          if (to_lower(a) == lowered) {
            value = a;
            break;
          }
      }
    }
    out.emplace(p.key, std::move(value));
  }
  return out;
}

inline InstructionInstance instantiate(const std::string& spec_id, const Json& raw,
                                       int position,
                                       const TaxonomyRegistry& registry) {
  const InstructionSpec& spec = registry.find(spec_id);
  if (position < 1) throw DomainError("instruction position must be >= 1");
  InstructionInstance inst;
  inst.spec_id = spec_id;
  inst.params = validate_parameters(spec, raw);
  inst.position = position;
  return inst;
}

enum class PromptMode { kSingle, kMulti };

inline std::string render_prompt(const InstructionInstance& instance,
                                 PromptMode mode,
                                 const TaxonomyRegistry& registry) {
  const InstructionSpec& spec = registry.find(instance.spec_id);
  const std::string& tmpl =
      mode == PromptMode::kSingle ? spec.prompt_single : spec.prompt_multi;
  std::string out;
  detail::scan_template(
      tmpl, "instruction '" + spec.id + "'",
      [&](char c) { out += c; },
      [&](const std::string& name) {
        auto it = instance.params.find(name);
        if (it == instance.params.end())
          throw DomainError("instance for '" + spec.id +
                            "' lacks parameter: " + name);
        out += param_value_text(it->second);
      });
  return out;
}

// ---------------------------------------------------------------------------
// Instance serialization (datasets carry instances, not rendered text)

inline Json instance_to_json(const InstructionInstance& inst) {
  Json params = Json::object();
  for (const auto& [k, v] : inst.params) params[k] = param_value_json(v);
  return Json{{"spec_id", inst.spec_id},
              {"params", params},
              {"position", inst.position}};
}

inline InstructionInstance instance_from_json(const Json& j,
                                              const TaxonomyRegistry& registry) {
  return instantiate(j.at("spec_id").get<std::string>(),
                     j.value("params", Json::object()),
                     j.at("position").get<int>(), registry);
}

}  // namespace ifkit
