#pragma once

#include <fstream>
#include <istream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalewise/agents.hpp"
#include "scalewise/chat.hpp"
#include "scalewise/error.hpp"
#include "scalewise/memory_tree.hpp"
#include "scalewise/prompts.hpp"

namespace scalewise {

class Respondent {
 public:
  virtual ~Respondent() = default;
  // history holds every earlier Q/A of the interview, oldest first.
  virtual std::string respond(const std::string& question, const std::vector<QaPair>& history) = 0;
};

class ScriptedRespondent : public Respondent {
 public:
  explicit ScriptedRespondent(std::vector<std::string> script) : script_(std::move(script)) {
    if (script_.empty()) throw PreconditionError("respondent script must not be empty");
  }

  std::string respond(const std::string&, const std::vector<QaPair>&) override {
    if (next_ >= script_.size())
      throw ScriptExhausted("script has only " + std::to_string(script_.size()) + " answers");
    return script_[next_++];
  }

  std::size_t consumed() const { return next_; }

 private:
  std::vector<std::string> script_;
  std::size_t next_ = 0;
};

inline std::unique_ptr<Respondent> scripted_respondent(std::vector<std::string> script) {
  return std::make_unique<ScriptedRespondent>(std::move(script));
}

// Script file: a JSON array of answer strings.
inline std::vector<std::string> load_answer_script(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open answer script '" + path + "'");
  try {
    return nlohmann::json::parse(in).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("answer script: ") + e.what());
  }
}

struct TranscriptLine {
  std::string speaker;
  std::string text;
  friend bool operator==(const TranscriptLine&, const TranscriptLine&) = default;
};

struct Persona {
  std::string uid;
  AttributeMap attributes;
  std::optional<std::vector<int>> gold_item_scores;
  std::optional<int> gold_total;
  std::optional<std::string> gold_label;
  std::vector<TranscriptLine> transcript_turns;
  friend bool operator==(const Persona&, const Persona&) = default;
};

// Background text for the role-play prompt. Gold fields are never included.
inline std::string render_persona(const Persona& p) {
  std::string out = "Attributes:\n";
  if (p.attributes.empty()) out += "none\n";
  for (const auto& [k, v] : p.attributes) out += "- " + k + ": " + v + "\n";
  out += "Earlier conversation with this person:\n";
  if (p.transcript_turns.empty()) out += "none\n";
  for (const auto& t : p.transcript_turns) out += t.speaker + ": " + t.text + "\n";
  out.pop_back();
  return out;
}

// Role-plays a persona through the chat backend.
class LlmRespondent : public Respondent {
 public:
  LlmRespondent(std::shared_ptr<ChatBackend> backend, AgentSettings settings, Persona persona)
      : backend_(std::move(backend)), settings_(std::move(settings)), persona_(std::move(persona)) {
    if (persona_.transcript_turns.empty() && persona_.attributes.empty())
      throw PreconditionError("persona '" + persona_.uid + "' has neither transcript nor attributes");
  }

  std::vector<ChatMessage> prompt(const std::string& question, const std::vector<QaPair>& history) const {
    return render_prompt(settings_.prompt(tags::respond), {{"persona", render_persona(persona_)},
                                                           {"history", render_history(history)},
                                                           {"question", question}});
  }

  std::string respond(const std::string& question, const std::vector<QaPair>& history) override {
    if (question.empty()) throw PreconditionError("cannot answer an empty question");
    ChatRequest req{tags::respond, settings_.model, prompt(question, history), settings_.temperature,
                    settings_.max_tokens};
    return detail::trim(backend_->complete(req).content);
  }

 private:
  std::shared_ptr<ChatBackend> backend_;
  AgentSettings settings_;
  Persona persona_;
};

inline std::unique_ptr<Respondent> llm_respondent(std::shared_ptr<ChatBackend> backend, AgentSettings settings,
                                                  Persona persona) {
  return std::make_unique<LlmRespondent>(std::move(backend), std::move(settings), std::move(persona));
}

inline void validate_persona(const Persona& p, std::optional<int> topic_count = std::nullopt) {
  if (p.uid.empty()) throw ValidationError("persona with empty uid");
  if (!p.gold_item_scores) return;
  const auto& g = *p.gold_item_scores;
  if (topic_count && static_cast<int>(g.size()) != *topic_count)
    throw ValidationError("persona '" + p.uid + "' has " + std::to_string(g.size()) + " gold item scores, expected " +
                          std::to_string(*topic_count));
  const int sum = std::accumulate(g.begin(), g.end(), 0);
  if (p.gold_total && *p.gold_total != sum)
    throw ValidationError("persona '" + p.uid + "' gold_total " + std::to_string(*p.gold_total) +
                          " does not equal the item sum " + std::to_string(sum));
}

inline nlohmann::json persona_to_json(const Persona& p) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : p.transcript_turns) turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"uid", p.uid},
          {"attributes", p.attributes},
          {"gold_item_scores", opt(p.gold_item_scores)},
          {"gold_total", opt(p.gold_total)},
          {"gold_label", opt(p.gold_label)},
          {"transcript_turns", turns}};
}

inline Persona persona_from_json(const nlohmann::json& j) {
  Persona p;
  try {
    p.uid = j.at("uid").get<std::string>();
    if (j.contains("attributes") && !j.at("attributes").is_null()) p.attributes = j.at("attributes").get<AttributeMap>();
    if (j.contains("gold_item_scores") && !j.at("gold_item_scores").is_null())
      p.gold_item_scores = j.at("gold_item_scores").get<std::vector<int>>();
    if (j.contains("gold_total") && !j.at("gold_total").is_null()) p.gold_total = j.at("gold_total").get<int>();
    if (j.contains("gold_label") && !j.at("gold_label").is_null()) p.gold_label = j.at("gold_label").get<std::string>();
    if (j.contains("transcript_turns") && !j.at("transcript_turns").is_null())
      for (const auto& t : j.at("transcript_turns"))
        p.transcript_turns.push_back({t.at("speaker").get<std::string>(), t.at("text").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("persona: ") + e.what());
  }
  return p;
}

// JSON-lines, one persona per line; blank lines are skipped.
inline std::vector<Persona> load_personas(std::istream& source, std::optional<int> topic_count = std::nullopt) {
  std::vector<Persona> out;
  std::string line;
  int line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("persona file line " + std::to_string(line_no) + " is not valid JSON");
    auto p = persona_from_json(j);
    validate_persona(p, topic_count);
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<Persona> load_personas_file(const std::string& path, std::optional<int> topic_count = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open persona file '" + path + "'");
  return load_personas(in, topic_count);
}

// Converts a tab-separated interview transcript (start_time, stop_time,
// speaker, value, with a header row) into a Persona. Speakers are kept
// verbatim; consecutive lines from one speaker are merged.
inline Persona persona_from_transcript_tsv(std::istream& source, std::string uid) {
  Persona p;
  p.uid = std::move(uid);
  std::string line;
  bool header = true;
  while (std::getline(source, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      header = false;
      if (line.find("speaker") != std::string::npos) continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
    if (cols.size() < 4) throw ParseError("transcript line has " + std::to_string(cols.size()) + " columns: " + line);
    std::string text = cols[3];
    for (std::size_t k = 4; k < cols.size(); ++k) text += " " + cols[k];
    if (!p.transcript_turns.empty() && p.transcript_turns.back().speaker == cols[2])
      p.transcript_turns.back().text += " " + text;
    else
      p.transcript_turns.push_back({cols[2], text});
  }
  return p;
}

}  // namespace scalewise
