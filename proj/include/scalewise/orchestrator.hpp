#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "scalewise/agents.hpp"
#include "scalewise/chat.hpp"
#include "scalewise/memory_tree.hpp"
#include "scalewise/report.hpp"
#include "scalewise/respondent.hpp"
#include "scalewise/scale.hpp"
#include "scalewise/session.hpp"

namespace scalewise {

enum class Decision { FollowUp, AdvanceTopic };

inline Decision decide_next(int necessity, int turn, const EngineConfig& config) {
  config.validate();
  if (necessity < 0 || necessity > 2) throw RangeError("necessity " + std::to_string(necessity) + " outside {0,1,2}");
  if (turn < 1 || turn > config.depth)
    throw RangeError("turn " + std::to_string(turn) + " outside 1.." + std::to_string(config.depth));
  return necessity > config.theta && turn < config.depth ? Decision::FollowUp : Decision::AdvanceTopic;
}

struct NextQuestion {
  std::string question;
  int topic_index = 0;
  int turn_index = 0;
};

struct TopicCompleted {
  int topic_index = 0;
  TopicScore score;
  std::string next_question;
  int next_topic_index = 0;
};

struct Finished {
  int topic_index = 0;
  TopicScore score;
  AssessmentResult result;
};

// The step failed inside an agent or backend; the session is now Aborted.
struct Aborted {
  std::string reason;
  std::string kind;
  ErrorCategory category = ErrorCategory::backend;
};

using StepOutcome = std::variant<NextQuestion, TopicCompleted, Finished, Aborted>;

struct Participant {
  std::string uid;
  AttributeMap attributes;
};

namespace detail {

inline AgentSettings session_settings(SessionState& state, const AgentSettings& base) {
  AgentSettings s = base;
  s.model = state.config.model;
  s.warn = [&state, outer = base.warn](const std::string& message) {
    state.warnings.push_back(message);
    if (outer) outer(message);
  };
  return s;
}

inline Aborted abort_session(SessionState& state, const std::exception& e) {
  state.phase = Phase::Aborted;
  state.abort_reason = e.what();
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    state.abort_kind = err->kind();
    state.abort_category = err->category();
  } else {
    state.abort_kind = "InternalError";
    state.abort_category = ErrorCategory::state;
  }
  return {state.abort_reason, state.abort_kind, state.abort_category};
}

inline std::vector<TopicSnapshot> snapshot(const SessionState& state) {
  std::vector<TopicSnapshot> out;
  for (const auto& t : state.memory.topics()) out.push_back({t.topic_index, t.name, t.score, t.summary});
  return out;
}

}  // namespace detail

// Initializes memory and asks the opening question of topic 1. Config errors
// throw before any backend call; agent failures leave the state Aborted.
inline SessionState start_session(std::shared_ptr<const Scale> scale, const Participant& participant,
                                  const EngineConfig& config, ChatBackend& backend, const AgentSettings& settings,
                                  std::string session_id) {
  config.validate();
  if (!scale) throw PreconditionError("no scale");
  SessionState state;
  state.session_id = std::move(session_id);
  state.scale = scale;
  state.config = config;
  state.config.scale_id = scale->id;
  state.memory = new_memory(participant.uid, participant.attributes, scale->item_min, scale->item_max);
  state.current_topic = 1;
  state.current_turn = 1;
  try {
    auto s = detail::session_settings(state, settings);
    state.pending_question =
        generate_question(backend, s, scale->topic(1), {}, render_context(state.memory, 1, 0), false);
    state.phase = Phase::AwaitingAnswer;
  } catch (const std::exception& e) {
    detail::abort_session(state, e);
  }
  return state;
}

// Whole-session update, aggregation and report. Falls back to the per-topic
// scores (update_skipped) when the updater cannot produce a usable reply.
inline AssessmentResult finalize(SessionState& state, ChatBackend& backend, const AgentSettings& settings) {
  const Scale& scale = *state.scale;
  if (state.memory.last_completed_topic() != scale.topic_count())
    throw PhaseError("finalize before every topic is completed");
  state.phase = Phase::Finalizing;
  auto s = detail::session_settings(state, settings);

  AssessmentResult result;
  for (const auto& t : state.topic_scores) result.pre_update_scores.push_back(t.score);

  std::vector<TopicDialogue> dialogue;
  for (const auto& topic : scale.topics) dialogue.push_back({topic.index, topic.name, state.topic_history(topic.index)});
  try {
    auto update = final_update(backend, s, dialogue, detail::snapshot(state), scale);
    result.final_scores = std::move(update.scores);
    result.reasoning = std::move(update.reasoning);
    result.overall_summary = std::move(update.overall_summary);
    result.suggestions = std::move(update.suggestions);
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::backend) throw;
    s.warning(std::string("final update skipped: ") + e.what());
    result.final_scores = result.pre_update_scores;
    result.update_skipped = true;
  }

  result.total = aggregate_total(result.final_scores, scale);
  result.category = categorize(result.total, scale);
  result.transcript = state.transcript;
  result.memory = state.memory;
  result.report = render_report(result, scale);

  state.result = result;
  state.phase = Phase::Done;
  return result;
}

// One answer through extraction, necessity, the follow-up decision and,
// when the topic ends, scoring, memory completion and the revision pass.
inline StepOutcome submit_answer(SessionState& state, std::string answer, ChatBackend& backend,
                                 const AgentSettings& settings) {
  if (state.phase != Phase::AwaitingAnswer)
    throw PhaseError(std::string("session is ") + to_string(state.phase) + ", not awaiting an answer");
  if (detail::trim(answer).empty()) answer = "[no answer]";

  const Scale& scale = *state.scale;
  auto s = detail::session_settings(state, settings);
  const int i = state.current_topic;
  const int j = state.current_turn;
  try {
    const Topic& topic = scale.topic(i);
    state.transcript.push_back({i, j, state.pending_question, answer, std::nullopt});
    const int answer_ref = static_cast<int>(state.transcript.size()) - 1;

    auto facts = extract_statement_facts(backend, s, answer, state.pending_question);
    state.memory.add_statement(i, j, std::move(facts), answer_ref);

    const auto qa = state.topic_history(i);
    int necessity = 0;
    try {
      necessity = evaluate_necessity(backend, s, topic, qa).value;
      state.transcript.back().necessity = necessity;
    } catch (const NecessityUnavailable& e) {
      s.warning(std::string("necessity unavailable, advancing topic: ") + e.what());
    }

    if (decide_next(necessity, j, state.config) == Decision::FollowUp) {
      auto q = generate_question(backend, s, topic, qa, render_context(state.memory, i, j), true);
      state.current_turn = j + 1;
      state.pending_question = q;
      return NextQuestion{std::move(q), i, j + 1};
    }

    state.phase = Phase::BetweenTopics;
    state.pending_question.clear();
    auto score = score_topic(backend, s, topic, qa, scale);
    state.memory.complete_topic(i, score.score, score.summary, topic.name);
    state.topic_scores.push_back(score);

    if (i >= 2) {
      auto snap = detail::snapshot(state);
      const auto latest = snap.back();
      snap.pop_back();
      try {
        const auto revisions = revise_topic_summaries(backend, s, latest, snap);
        state.memory.revise_summaries(revisions);
      } catch (const UpdateUnavailable& e) {
        s.warning(std::string("summary revision skipped after topic ") + std::to_string(i) + ": " + e.what());
      }
    }

    if (i < scale.topic_count()) {
      state.current_topic = i + 1;
      state.current_turn = 1;
      auto q = generate_question(backend, s, scale.topic(i + 1), {}, render_context(state.memory, i + 1, 0), false);
      state.pending_question = q;
      state.phase = Phase::AwaitingAnswer;
      return TopicCompleted{i, std::move(score), std::move(q), i + 1};
    }

    state.current_topic = scale.topic_count() + 1;
    state.current_turn = 0;
    auto result = finalize(state, backend, settings);
    return Finished{i, std::move(score), std::move(result)};
  } catch (const std::exception& e) {
    return detail::abort_session(state, e);
  }
}

// Drives a session to completion against a respondent. Returns the final
// state: Done with a result, or Aborted with the partial transcript.
inline SessionState run_session(std::shared_ptr<const Scale> scale, Respondent& respondent,
                                const Participant& participant, const EngineConfig& config, ChatBackend& backend,
                                const AgentSettings& settings, std::string session_id) {
  auto state = start_session(std::move(scale), participant, config, backend, settings, std::move(session_id));
  while (state.phase == Phase::AwaitingAnswer) {
    std::string answer;
    try {
      answer = respondent.respond(state.pending_question, state.full_history());
    } catch (const std::exception& e) {
      detail::abort_session(state, e);
      break;
    }
    const auto outcome = submit_answer(state, std::move(answer), backend, settings);
    if (std::holds_alternative<Finished>(outcome) || std::holds_alternative<Aborted>(outcome)) break;
  }
  return state;
}

}  // namespace scalewise
