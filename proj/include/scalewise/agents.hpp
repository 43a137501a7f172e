#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalewise/chat.hpp"
#include "scalewise/error.hpp"
#include "scalewise/memory_tree.hpp"
#include "scalewise/prompts.hpp"
#include "scalewise/scale.hpp"
#include "scalewise/structured.hpp"

namespace scalewise {

struct QaPair {
  std::string question;
  std::string answer;
  friend bool operator==(const QaPair&, const QaPair&) = default;
};

struct Necessity {
  int value = 0;
  std::string rationale;
};

struct TopicScore {
  int score = 0;
  std::string summary;
  std::vector<std::string> evidence;
  friend bool operator==(const TopicScore&, const TopicScore&) = default;
};

struct FinalUpdate {
  std::vector<int> scores;
  std::string reasoning;
  std::string overall_summary;
  std::string suggestions;
};

// Per-topic entry of M_topic handed to the updater.
struct TopicSnapshot {
  int topic_index = 0;
  std::string name;
  int score = 0;
  std::string summary;
};

// All Q/A of one topic, used to render the whole-session history.
struct TopicDialogue {
  int topic_index = 0;
  std::string name;
  std::vector<QaPair> turns;
};

using WarningSink = std::function<void(const std::string&)>;

struct AgentSettings {
  std::string model = "Qwen2.5-72B-Instruct";
  double temperature = 0.0;
  int max_tokens = 1024;
  std::shared_ptr<const std::map<std::string, PromptTemplate>> templates =
      std::make_shared<const std::map<std::string, PromptTemplate>>(default_templates());
  WarningSink warn;

  const PromptTemplate& prompt(const std::string& tag) const {
    auto it = templates->find(tag);
    if (it == templates->end()) throw ValidationError("no prompt template for '" + tag + "'");
    return it->second;
  }
  void warning(const std::string& message) const {
    if (warn) warn(message);
  }
};

inline std::string render_history(const std::vector<QaPair>& qa) {
  if (qa.empty()) return "none";
  std::string out;
  for (std::size_t k = 0; k < qa.size(); ++k) {
    const auto n = std::to_string(k + 1);
    out += "Q" + n + ": " + qa[k].question + "\nA" + n + ": " + qa[k].answer + "\n";
  }
  out.pop_back();
  return out;
}

inline std::string render_full_history(const std::vector<TopicDialogue>& dialogue) {
  if (dialogue.empty()) return "none";
  std::string out;
  for (const auto& d : dialogue) {
    out += "### Topic " + std::to_string(d.topic_index) + ": " + d.name + "\n";
    out += render_history(d.turns) + "\n";
  }
  out.pop_back();
  return out;
}

inline std::string render_snapshot(const std::vector<TopicSnapshot>& snapshot) {
  if (snapshot.empty()) return "none";
  std::string out;
  for (const auto& t : snapshot)
    out += "[" + std::to_string(t.topic_index) + "] " + t.name + " | score " + std::to_string(t.score) +
           " | " + t.summary + "\n";
  out.pop_back();
  return out;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline ChatRequest make_request(const AgentSettings& settings, const std::string& tag,
                                std::vector<ChatMessage> messages) {
  return {tag, settings.model, std::move(messages), settings.temperature, settings.max_tokens};
}

// Sends the request and interprets the reply with `accept`. A ParseError or
// RangeError from `accept` triggers exactly one repair round that shows the
// model its reply and the error. The second failure is rethrown.
// BackendError is never retried here.
template <typename Accept>
auto call_with_repair(ChatBackend& backend, const AgentSettings& settings, const std::string& tag,
                      std::vector<ChatMessage> messages, Accept accept) {
  auto first = backend.complete(make_request(settings, tag, messages));
  try {
    return accept(first.content);
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::validation) throw;
    messages.push_back({"assistant", first.content});
    messages.push_back({"user", render_template(repair_instruction(), {{"error", e.what()}})});
  }
  auto second = backend.complete(make_request(settings, tag, messages));
  return accept(second.content);
}

inline int as_int(const nlohmann::json& v) {
  return static_cast<int>(v.is_number_integer() ? v.get<long long>() : std::llround(v.get<double>()));
}

inline std::optional<std::string> non_empty(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  auto v = trim(j.at(key).get<std::string>());
  if (v.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

inline std::string generate_question(ChatBackend& backend, const AgentSettings& settings, const Topic& topic,
                                     const std::vector<QaPair>& history, const ContextBlock& context,
                                     bool follow_up) {
  if (follow_up && history.empty()) throw PreconditionError("follow-up question needs a non-empty history");
  const auto messages = render_prompt(
      settings.prompt(tags::question),
      {{"topic_name", topic.name},
       {"topic_description", topic.description},
       {"history", render_history(history)},
       {"memory_context", context.text()},
       {"follow_up_constraints", follow_up ? follow_up_constraints_text() : opening_constraints_text()}});
  try {
    return detail::call_with_repair(backend, settings, tags::question, messages, [](const std::string& raw) {
      std::string question;
      try {
        question = parse_structured(raw, "question").at("question").get<std::string>();
      } catch (const ParseError&) {
        // Bare text (no JSON at all) is an acceptable question.
        if (raw.find('{') != std::string::npos) throw;
        question = raw;
      }
      question = detail::trim(question);
      if (question.empty()) throw ParseError("empty question");
      return question;
    });
  } catch (const ParseError& e) {
    throw EmptyCompletionError(std::string("question generator returned nothing usable: ") + e.what());
  }
}

inline Necessity evaluate_necessity(ChatBackend& backend, const AgentSettings& settings, const Topic& topic,
                                    const std::vector<QaPair>& qa_pairs) {
  if (qa_pairs.empty()) throw PreconditionError("necessity needs at least one Q/A pair");
  const auto messages = render_prompt(settings.prompt(tags::necessity),
                                      {{"topic_name", topic.name},
                                       {"topic_description", topic.description},
                                       {"history", render_history(qa_pairs)}});
  try {
    return detail::call_with_repair(backend, settings, tags::necessity, messages, [](const std::string& raw) {
      const auto j = parse_structured(raw, "necessity");
      const int value = detail::as_int(j.at("necessity"));
      if (value < 0 || value > 2) throw RangeError("necessity " + std::to_string(value) + " outside {0,1,2}");
      const auto& rationale = j.contains("rationale") ? j.at("rationale") : nlohmann::json();
      return Necessity{value, rationale.is_string() ? rationale.get<std::string>() : std::string{}};
    });
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::validation) throw;
    throw NecessityUnavailable(e.what());
  }
}

// Never fails on a bad reply: falls back to all-absent facts and a warning.
inline StatementFacts extract_statement_facts(ChatBackend& backend, const AgentSettings& settings,
                                              const std::string& answer, const std::string& question = {}) {
  if (answer.empty()) throw PreconditionError("cannot extract facts from an empty answer");
  const auto messages = render_prompt(settings.prompt(tags::facts),
                                      {{"question", question.empty() ? "(not given)" : question},
                                       {"answer", answer}});
  try {
    return detail::call_with_repair(backend, settings, tags::facts, messages, [](const std::string& raw) {
      const auto j = parse_structured(raw, "facts");
      StatementFacts f;
      f.emotion = detail::non_empty(j, "emotion");
      f.frequency = detail::non_empty(j, "frequency");
      f.duration = detail::non_empty(j, "duration");
      f.impact = detail::non_empty(j, "impact");
      if (j.contains("symptoms") && j.at("symptoms").is_array())
        for (const auto& s : j.at("symptoms"))
          if (auto v = detail::trim(s.get<std::string>()); !v.empty()) f.symptoms.push_back(v);
      return f;
    });
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::validation) throw;
    settings.warning(std::string("fact extraction failed, storing empty statement: ") + e.what());
    return {};
  }
}

inline TopicScore score_topic(ChatBackend& backend, const AgentSettings& settings, const Topic& topic,
                              const std::vector<QaPair>& qa_pairs, const Scale& scale) {
  if (qa_pairs.empty()) throw PreconditionError("scoring needs at least one Q/A pair");
  const auto messages = render_prompt(
      settings.prompt(tags::topic_score),
      {{"scale_name", scale.name},
       {"rating_standards", scale.rating_standards},
       {"score_range", std::to_string(scale.item_min) + " to " + std::to_string(scale.item_max)},
       {"topic_name", topic.name},
       {"topic_description", topic.description},
       {"history", render_history(qa_pairs)}});
  try {
    return detail::call_with_repair(backend, settings, tags::topic_score, messages, [&](const std::string& raw) {
      const auto j = parse_structured(raw, "topic_score");
      TopicScore out;
      out.score = detail::as_int(j.at("score"));
      if (!scale.item_in_range(out.score))
        throw RangeError("score " + std::to_string(out.score) + " outside [" + std::to_string(scale.item_min) +
                         "," + std::to_string(scale.item_max) + "]");
      out.summary = detail::trim(j.at("summary").get<std::string>());
      if (out.summary.empty()) throw ParseError("key 'summary' must not be empty");
      if (j.contains("evidence") && j.at("evidence").is_array())
        out.evidence = j.at("evidence").get<std::vector<std::string>>();
      return out;
    });
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::validation) throw;
    throw ScoringUnavailable(e.what());
  }
}

// Summary revisions for topics before `latest`. Throws UpdateUnavailable
// when no usable reply arrives.
inline std::map<int, std::string> revise_topic_summaries(ChatBackend& backend, const AgentSettings& settings,
                                                         const TopicSnapshot& latest,
                                                         const std::vector<TopicSnapshot>& earlier) {
  const auto messages = render_prompt(settings.prompt(tags::revision),
                                      {{"latest_topic", render_snapshot({latest})},
                                       {"completed_topics", render_snapshot(earlier)}});
  try {
    return detail::call_with_repair(backend, settings, tags::revision, messages, [&](const std::string& raw) {
      const auto j = parse_structured(raw, "revision");
      std::map<int, std::string> out;
      for (const auto& [key, value] : j.at("revisions").items()) {
        if (key.size() > 6) throw RangeError("revision key " + key + " is not a topic index");
        const int index = std::stoi(key);
        const bool known = std::any_of(earlier.begin(), earlier.end(),
                                       [&](const auto& t) { return t.topic_index == index; });
        if (!known || index >= latest.topic_index)
          throw RangeError("revision targets topic " + key + ", which is not an earlier topic");
        auto text = detail::trim(value.get<std::string>());
        if (text.empty()) throw ParseError("revision for topic " + key + " is empty");
        out.emplace(index, std::move(text));
      }
      return out;
    });
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::validation) throw;
    throw UpdateUnavailable(e.what());
  }
}

inline FinalUpdate final_update(ChatBackend& backend, const AgentSettings& settings,
                                const std::vector<TopicDialogue>& full_history,
                                const std::vector<TopicSnapshot>& topic_snapshot, const Scale& scale) {
  if (static_cast<int>(topic_snapshot.size()) != scale.topic_count())
    throw PreconditionError("final update needs a snapshot entry for every topic");
  const auto messages = render_prompt(
      settings.prompt(tags::final_update),
      {{"scale_name", scale.name},
       {"rating_standards", scale.rating_standards},
       {"score_range", std::to_string(scale.item_min) + " to " + std::to_string(scale.item_max)},
       {"topic_count", std::to_string(scale.topic_count())},
       {"topic_snapshot", render_snapshot(topic_snapshot)},
       {"history", render_full_history(full_history)}});
  try {
    return detail::call_with_repair(backend, settings, tags::final_update, messages, [&](const std::string& raw) {
      const auto j = parse_structured(raw, "final_update");
      FinalUpdate out;
      for (const auto& v : j.at("scores")) out.scores.push_back(detail::as_int(v));
      if (static_cast<int>(out.scores.size()) != scale.topic_count())
        throw RangeError("expected " + std::to_string(scale.topic_count()) + " scores, got " +
                         std::to_string(out.scores.size()));
      for (int s : out.scores)
        if (!scale.item_in_range(s)) throw RangeError("updated score " + std::to_string(s) + " out of range");
      out.reasoning = detail::trim(j.at("reasoning").get<std::string>());
      out.overall_summary = detail::trim(j.at("overall_summary").get<std::string>());
      out.suggestions = detail::trim(j.at("suggestions").get<std::string>());
      if (out.reasoning.empty() || out.overall_summary.empty() || out.suggestions.empty())
        throw ParseError("reasoning, overall_summary and suggestions must not be empty");
      return out;
    });
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::validation) throw;
    throw UpdateUnavailable(e.what());
  }
}

}  // namespace scalewise
