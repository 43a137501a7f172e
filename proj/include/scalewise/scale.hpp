#pragma once

#include <fstream>
#include <istream>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalewise/error.hpp"

namespace scalewise {

struct Topic {
  int index = 0;  // 1-based
  std::string name;
  std::string description;

  friend bool operator==(const Topic&, const Topic&) = default;
};

struct CategoryBand {
  std::string label;
  int min_total = 0;  // inclusive
  int max_total = 0;  // inclusive

  friend bool operator==(const CategoryBand&, const CategoryBand&) = default;
};

// An assessment instrument. Immutable once loaded; share it freely between
// sessions.
struct Scale {
  std::string id;
  std::string name;
  std::vector<Topic> topics;
  int item_min = 0;
  int item_max = 0;
  std::string rating_standards;
  std::vector<CategoryBand> category_bands;

  int topic_count() const { return static_cast<int>(topics.size()); }
  int min_total() const { return topic_count() * item_min; }
  int max_total() const { return topic_count() * item_max; }
  bool item_in_range(int score) const { return score >= item_min && score <= item_max; }

  const Topic& topic(int index) const {
    if (index < 1 || index > topic_count())
      throw RangeError("topic index " + std::to_string(index) + " outside 1.." +
                       std::to_string(topic_count()));
    return topics[static_cast<std::size_t>(index - 1)];
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& b : category_bands) out.push_back(b.label);
    return out;
  }

  friend bool operator==(const Scale&, const Scale&) = default;
};

// Throws ValidationError naming the first violated rule.
inline void validate_scale(const Scale& s) {
  if (s.id.empty()) throw ValidationError("empty id");
  if (s.topics.empty()) throw ValidationError("empty topics");
  if (s.item_min >= s.item_max)
    throw ValidationError("item_min must be below item_max");
  for (std::size_t k = 0; k < s.topics.size(); ++k) {
    const auto& t = s.topics[k];
    if (t.index != static_cast<int>(k) + 1)
      throw ValidationError("topic indices must run 1..n without gaps; found " +
                            std::to_string(t.index) + " at position " + std::to_string(k + 1));
    if (t.name.empty())
      throw ValidationError("topic " + std::to_string(t.index) + " has an empty name");
  }
  if (s.category_bands.empty()) throw ValidationError("empty category_bands");

  int expected = s.min_total();
  for (const auto& b : s.category_bands) {
    if (b.label.empty()) throw ValidationError("band with empty label");
    if (b.min_total > b.max_total)
      throw ValidationError("band '" + b.label + "' has min_total above max_total");
    if (b.min_total > expected) throw ValidationError("gap at " + std::to_string(expected));
    if (b.min_total < expected) {
      if (expected == s.min_total())
        throw ValidationError("bands start at " + std::to_string(b.min_total) +
                              ", below the minimum total " + std::to_string(expected));
      throw ValidationError("overlap at " + std::to_string(b.min_total));
    }
    expected = b.max_total + 1;
  }
  if (expected - 1 != s.max_total())
    throw ValidationError("bands end at " + std::to_string(expected - 1) + ", expected " +
                          std::to_string(s.max_total()));
}

inline nlohmann::json scale_to_json(const Scale& s) {
  nlohmann::json topics = nlohmann::json::array();
  for (const auto& t : s.topics)
    topics.push_back({{"index", t.index}, {"name", t.name}, {"description", t.description}});
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : s.category_bands)
    bands.push_back({{"label", b.label}, {"min_total", b.min_total}, {"max_total", b.max_total}});
  return {{"id", s.id},
          {"name", s.name},
          {"item_min", s.item_min},
          {"item_max", s.item_max},
          {"rating_standards", s.rating_standards},
          {"topics", topics},
          {"category_bands", bands}};
}

inline Scale scale_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("scale definition must be a JSON object");
  Scale s;
  try {
    s.id = j.at("id").get<std::string>();
    s.name = j.at("name").get<std::string>();
    s.item_min = j.at("item_min").get<int>();
    s.item_max = j.at("item_max").get<int>();
    s.rating_standards = j.at("rating_standards").get<std::string>();
    for (const auto& t : j.at("topics"))
      s.topics.push_back({t.at("index").get<int>(), t.at("name").get<std::string>(),
                          t.value("description", std::string{})});
    for (const auto& b : j.at("category_bands"))
      s.category_bands.push_back({b.at("label").get<std::string>(), b.at("min_total").get<int>(),
                                  b.at("max_total").get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scale definition: ") + e.what());
  }
  validate_scale(s);
  return s;
}

inline Scale load_scale(std::istream& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(source);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scale definition: ") + e.what());
  }
  return scale_from_json(j);
}

inline Scale load_scale_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open scale file '" + path + "'");
  return load_scale(in);
}

inline int aggregate_total(std::span<const int> scores, const Scale& scale) {
  if (static_cast<int>(scores.size()) != scale.topic_count())
    throw ArityError("expected " + std::to_string(scale.topic_count()) + " scores, got " +
                     std::to_string(scores.size()));
  for (int v : scores)
    if (!scale.item_in_range(v))
      throw RangeError("item score " + std::to_string(v) + " outside [" +
                       std::to_string(scale.item_min) + "," + std::to_string(scale.item_max) + "]");
  return std::accumulate(scores.begin(), scores.end(), 0);
}

inline const std::string& categorize(int total, const Scale& scale) {
  for (const auto& b : scale.category_bands)
    if (total >= b.min_total && total <= b.max_total) return b.label;
  throw RangeError("total " + std::to_string(total) + " is outside every category band");
}

}  // namespace scalewise
