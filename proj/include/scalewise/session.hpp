#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalewise/agents.hpp"
#include "scalewise/error.hpp"
#include "scalewise/memory_tree.hpp"
#include "scalewise/scale.hpp"

namespace scalewise {

inline constexpr const char* engine_version = "scalewise/1.0.0";

struct EngineConfig {
  int theta = 1;  // follow up only when necessity > theta
  int depth = 3;  // max questions per topic, opening question included
  std::string model = "Qwen2.5-72B-Instruct";
  std::string scale_id;
  std::string tag = "default";

  void validate() const {
    if (theta < 0 || theta > 2) throw RangeError("theta must be 0, 1 or 2, got " + std::to_string(theta));
    if (depth < 1) throw RangeError("depth must be at least 1, got " + std::to_string(depth));
  }
  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

// The follow-up rule is the strict comparison; theta=0 gives the reading
// where a necessity equal to 1 still continues.
inline constexpr const char* decision_rule = "follow_up_iff_necessity_gt_theta_and_turn_lt_depth";

inline nlohmann::json config_to_json(const EngineConfig& c) {
  return {{"theta", c.theta},   {"depth", c.depth},
          {"model", c.model},   {"scale_id", c.scale_id},
          {"tag", c.tag},       {"decision_rule", decision_rule}};
}

inline EngineConfig config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  c.theta = j.value("theta", c.theta);
  c.depth = j.value("depth", c.depth);
  c.model = j.value("model", c.model);
  c.scale_id = j.value("scale_id", c.scale_id);
  c.tag = j.value("tag", c.tag);
  return c;
}

enum class Phase { AwaitingAnswer, BetweenTopics, Finalizing, Done, Aborted };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::AwaitingAnswer: return "awaiting_answer";
    case Phase::BetweenTopics: return "between_topics";
    case Phase::Finalizing: return "finalizing";
    case Phase::Done: return "done";
    case Phase::Aborted: return "aborted";
  }
  return "unknown";
}

inline Phase phase_from_string(const std::string& s) {
  for (auto p : {Phase::AwaitingAnswer, Phase::BetweenTopics, Phase::Finalizing, Phase::Done, Phase::Aborted})
    if (s == to_string(p)) return p;
  throw ParseError("unknown phase '" + s + "'");
}

struct TranscriptTurn {
  int topic_index = 0;
  int turn_index = 0;
  std::string question;
  std::string answer;
  std::optional<int> necessity;  // absent when the evaluator was unavailable
  friend bool operator==(const TranscriptTurn&, const TranscriptTurn&) = default;
};

struct AssessmentResult {
  std::vector<int> pre_update_scores;
  std::vector<int> final_scores;
  std::string reasoning;
  std::string overall_summary;
  std::string suggestions;
  int total = 0;
  std::string category;
  std::string report;
  bool update_skipped = false;
  std::vector<TranscriptTurn> transcript;
  MemoryTree memory;

  friend bool operator==(const AssessmentResult&, const AssessmentResult&) = default;
};

struct SessionState {
  std::string session_id;
  std::shared_ptr<const Scale> scale;
  EngineConfig config;
  MemoryTree memory;
  std::vector<TranscriptTurn> transcript;
  int current_topic = 1;
  int current_turn = 0;
  Phase phase = Phase::AwaitingAnswer;
  std::string pending_question;
  std::vector<TopicScore> topic_scores;
  std::vector<std::string> warnings;
  std::string abort_reason;
  std::string abort_kind;
  ErrorCategory abort_category = ErrorCategory::backend;
  std::optional<AssessmentResult> result;

  std::vector<QaPair> topic_history(int topic_index) const {
    std::vector<QaPair> out;
    for (const auto& t : transcript)
      if (t.topic_index == topic_index) out.push_back({t.question, t.answer});
    return out;
  }

  std::vector<QaPair> full_history() const {
    std::vector<QaPair> out;
    for (const auto& t : transcript) out.push_back({t.question, t.answer});
    return out;
  }

  int turns_for(int topic_index) const {
    int n = 0;
    for (const auto& t : transcript) n += t.topic_index == topic_index;
    return n;
  }
};

inline nlohmann::json transcript_to_json(const std::vector<TranscriptTurn>& transcript) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : transcript)
    out.push_back({{"topic_index", t.topic_index},
                   {"turn_index", t.turn_index},
                   {"question", t.question},
                   {"answer", t.answer},
                   {"necessity", t.necessity ? nlohmann::json(*t.necessity) : nlohmann::json(nullptr)}});
  return out;
}

inline std::vector<TranscriptTurn> transcript_from_json(const nlohmann::json& j) {
  std::vector<TranscriptTurn> out;
  for (const auto& t : j) {
    TranscriptTurn turn{t.at("topic_index").get<int>(), t.at("turn_index").get<int>(),
                        t.at("question").get<std::string>(), t.at("answer").get<std::string>(), std::nullopt};
    if (!t.at("necessity").is_null()) turn.necessity = t.at("necessity").get<int>();
    out.push_back(std::move(turn));
  }
  return out;
}

inline nlohmann::json topic_score_to_json(const TopicScore& s) {
  return {{"score", s.score}, {"summary", s.summary}, {"evidence", s.evidence}};
}

inline TopicScore topic_score_from_json(const nlohmann::json& j) {
  return {j.at("score").get<int>(), j.at("summary").get<std::string>(),
          j.at("evidence").get<std::vector<std::string>>()};
}

inline nlohmann::json result_to_json(const AssessmentResult& r) {
  return {{"pre_update_scores", r.pre_update_scores},
          {"final_scores", r.final_scores},
          {"reasoning", r.reasoning},
          {"overall_summary", r.overall_summary},
          {"suggestions", r.suggestions},
          {"total", r.total},
          {"category", r.category},
          {"report", r.report},
          {"update_skipped", r.update_skipped},
          {"transcript", transcript_to_json(r.transcript)},
          {"memory", memory_to_json(r.memory)}};
}

inline AssessmentResult result_from_json(const nlohmann::json& j) {
  AssessmentResult r;
  r.pre_update_scores = j.at("pre_update_scores").get<std::vector<int>>();
  r.final_scores = j.at("final_scores").get<std::vector<int>>();
  r.reasoning = j.at("reasoning").get<std::string>();
  r.overall_summary = j.at("overall_summary").get<std::string>();
  r.suggestions = j.at("suggestions").get<std::string>();
  r.total = j.at("total").get<int>();
  r.category = j.at("category").get<std::string>();
  r.report = j.at("report").get<std::string>();
  r.update_skipped = j.at("update_skipped").get<bool>();
  r.transcript = transcript_from_json(j.at("transcript"));
  r.memory = memory_from_json(j.at("memory"));
  return r;
}

// Throws ValidationError unless total/category agree with final_scores.
inline void check_result(const AssessmentResult& r, const Scale& scale) {
  if (static_cast<int>(r.pre_update_scores.size()) != scale.topic_count() ||
      static_cast<int>(r.final_scores.size()) != scale.topic_count())
    throw ValidationError("result score vectors do not match the topic count");
  if (r.total != aggregate_total(r.final_scores, scale)) throw ValidationError("result total is not the score sum");
  if (r.category != categorize(r.total, scale)) throw ValidationError("result category does not match its band");
}

}  // namespace scalewise
