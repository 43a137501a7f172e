#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "scalewise/error.hpp"

namespace scalewise {

namespace detail {

// End (exclusive) of the brace-balanced span starting at `open`, honouring
// JSON string literals; npos when unbalanced.
inline std::size_t balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t k = open; k < s.size(); ++k) {
    const char c = s[k];
    if (in_string) {
      if (c == '\\') ++k;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return k + 1;
  }
  return std::string_view::npos;
}

inline bool is_integral(const nlohmann::json& v) {
  if (v.is_number_integer()) return true;
  if (v.is_number_float()) {
    const double d = v.get<double>();
    return std::isfinite(d) && d == std::floor(d);
  }
  return false;
}

inline void require_int(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
  if (!is_integral(j.at(key))) throw ParseError(std::string("key '") + key + "' must be an integer");
}

inline void require_string(const nlohmann::json& j, const char* key, bool non_empty) {
  if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
  if (!j.at(key).is_string()) throw ParseError(std::string("key '") + key + "' must be a string");
  if (non_empty && j.at(key).get<std::string>().empty())
    throw ParseError(std::string("key '") + key + "' must not be empty");
}

inline void optional_string(const nlohmann::json& j, const char* key) {
  if (j.contains(key) && !j.at(key).is_null() && !j.at(key).is_string())
    throw ParseError(std::string("key '") + key + "' must be a string or null");
}

inline void optional_string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  if (!j.at(key).is_array()) throw ParseError(std::string("key '") + key + "' must be a list");
  for (const auto& v : j.at(key))
    if (!v.is_string()) throw ParseError(std::string("key '") + key + "' must hold strings");
}

inline void validate_schema(const nlohmann::json& j, std::string_view schema) {
  if (schema == "question") {
    require_string(j, "question", false);
  } else if (schema == "necessity") {
    require_int(j, "necessity");
    optional_string(j, "rationale");
  } else if (schema == "facts") {
    for (const char* key : {"emotion", "frequency", "duration", "impact"}) optional_string(j, key);
    optional_string_list(j, "symptoms");
  } else if (schema == "topic_score") {
    require_int(j, "score");
    require_string(j, "summary", true);
    optional_string_list(j, "evidence");
  } else if (schema == "final_update") {
    if (!j.contains("scores")) throw ParseError("missing key 'scores'");
    if (!j.at("scores").is_array()) throw ParseError("key 'scores' must be a list");
    for (const auto& v : j.at("scores"))
      if (!is_integral(v)) throw ParseError("key 'scores' must hold integers");
    require_string(j, "reasoning", true);
    require_string(j, "overall_summary", true);
    require_string(j, "suggestions", true);
  } else if (schema == "revision") {
    if (!j.contains("revisions")) throw ParseError("missing key 'revisions'");
    if (!j.at("revisions").is_object()) throw ParseError("key 'revisions' must be an object");
    for (const auto& [k, v] : j.at("revisions").items()) {
      if (!v.is_string()) throw ParseError("revision for '" + k + "' must be a string");
      if (k.empty() || k.find_first_not_of("0123456789") != std::string::npos)
        throw ParseError("revision key '" + k + "' is not a topic index");
    }
  } else {
    throw ParseError("unknown schema '" + std::string(schema) + "'");
  }
}

}  // namespace detail

// First well-formed JSON object in `raw` (prose and code fences around it are
// ignored), checked against the named schema.
inline nlohmann::json parse_structured(std::string_view raw, std::string_view schema) {
  for (auto open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const auto end = detail::balanced_end(raw, open);
    if (end == std::string_view::npos) continue;
    auto parsed = nlohmann::json::parse(raw.substr(open, end - open), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) continue;
    detail::validate_schema(parsed, schema);
    return parsed;
  }
  throw ParseError("no JSON object found in reply");
}

}  // namespace scalewise
