#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scalewise/chat.hpp"
#include "scalewise/error.hpp"

namespace scalewise {

// A role prompt with named {placeholders} in both parts.
struct PromptTemplate {
  std::string system;
  std::string user;
  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

using PromptVars = std::map<std::string, std::string>;

// Every substituted value is framed as
//   <name length=N>
//   value
//   </name>
// so the rendered text decodes back to exactly one set of values.
inline std::string frame(const std::string& name, const std::string& value) {
  return "<" + name + " length=" + std::to_string(value.size()) + ">\n" + value + "\n</" + name + ">";
}

inline std::string render_template(const std::string& text, const PromptVars& vars) {
  std::string out;
  out.reserve(text.size() * 2);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('{', pos);
    if (open == std::string::npos) {
      out.append(text, pos, std::string::npos);
      break;
    }
    std::size_t k = open + 1;
    while (k < text.size() && (std::islower(static_cast<unsigned char>(text[k])) || text[k] == '_')) ++k;
    if (k == open + 1 || k >= text.size() || text[k] != '}') {
      out.append(text, pos, open + 1 - pos);
      pos = open + 1;
      continue;
    }
    const std::string name = text.substr(open + 1, k - open - 1);
    auto it = vars.find(name);
    if (it == vars.end()) throw ValidationError("template placeholder {" + name + "} has no value");
    out.append(text, pos, open - pos);
    out += frame(name, it->second);
    pos = k + 1;
  }
  return out;
}

inline std::vector<ChatMessage> render_prompt(const PromptTemplate& t, const PromptVars& vars) {
  return {{"system", render_template(t.system, vars)}, {"user", render_template(t.user, vars)}};
}

// Template file layout: a "[system]" line, the system text, a "[user]" line,
// the user text.
inline PromptTemplate parse_template_text(const std::string& text) {
  const std::string sys_marker = "[system]\n";
  const std::string user_marker = "\n[user]\n";
  if (text.rfind(sys_marker, 0) != 0) throw ParseError("template must start with a [system] line");
  const auto user_at = text.find(user_marker);
  if (user_at == std::string::npos) throw ParseError("template has no [user] section");
  PromptTemplate t;
  t.system = text.substr(sys_marker.size(), user_at - sys_marker.size());
  t.user = text.substr(user_at + user_marker.size());
  while (!t.user.empty() && t.user.back() == '\n') t.user.pop_back();
  return t;
}

inline std::string template_text(const PromptTemplate& t) {
  return "[system]\n" + t.system + "\n[user]\n" + t.user + "\n";
}

inline const std::string& follow_up_constraints_text() {
  static const std::string text =
      "- Guide the person to elaborate on the severity, frequency, duration, and impact of their symptoms.\n"
      "- Ask easy-to-answer questions (concrete, one thing at a time, yes/no or short answers welcome) "
      "to keep the cognitive burden and any resistance low.";
  return text;
}

inline const std::string& opening_constraints_text() {
  static const std::string text = "none (this is the opening question for the topic)";
  return text;
}

inline const std::string& repair_instruction() {
  static const std::string text =
      "Your previous reply could not be used: {error}\n"
      "Reply again with only a single JSON object in the required format.";
  return text;
}

inline std::map<std::string, PromptTemplate> default_templates() {
  std::map<std::string, PromptTemplate> t;
  t[tags::question] = {
      R"(You are a clinical interviewer administering an assessment scale, one topic at a time.
Ask exactly one short, warm, conversational question about the current topic.
Use the memory to avoid repeating what the person already told you, and adapt to their circumstances: never ask about things that do not fit them (for example, workplace questions for a school student).
Reply with a single JSON object: {"question": "<your question>"})",
      R"(Current topic:
{topic_name}
Topic guidance:
{topic_description}
Memory:
{memory_context}
Dialogue on this topic so far:
{history}
Follow-up constraints:
{follow_up_constraints})"};
  t[tags::necessity] = {
      R"(You review a person's answers about one assessment topic and decide how much further questioning is needed before the topic can be rated.
0 = the answers are sufficient to rate the topic.
1 = some minor details are missing, but a rating is possible.
2 = key information is missing or the answers are vague (e.g. unclear frequency, duration, severity or impact).
Reply with a single JSON object: {"necessity": <0, 1 or 2>, "rationale": "<one sentence>"})",
      R"(Topic:
{topic_name}
Topic guidance:
{topic_description}
Questions and answers:
{history})"};
  t[tags::facts] = {
      R"(Extract the key facts stated in a person's answer during a mental health interview.
Fields: emotion, frequency, duration, symptoms (list), impact.
Use null (or an empty list for symptoms) for anything not stated. Never guess.
Reply with a single JSON object: {"emotion": ..., "frequency": ..., "duration": ..., "symptoms": [...], "impact": ...})",
      R"(Question:
{question}
Answer:
{answer})"};
  t[tags::topic_score] = {
      R"(You rate one topic of an assessment scale from an interview excerpt.
Scale:
{scale_name}
Rating standards:
{rating_standards}
Allowed score range (inclusive):
{score_range}
Reply with a single JSON object: {"score": <integer>, "summary": "<behavioural summary>", "evidence": ["<short quote>", ...]})",
      R"(Topic:
{topic_name}
Topic guidance:
{topic_description}
Questions and answers:
{history})"};
  t[tags::revision] = {
      R"(You maintain the topic summaries of an interview memory. A topic has just been completed.
Rewrite the summary of an earlier topic only when the newly completed topic adds information relevant to it. Never change scores.
Reply with a single JSON object: {"revisions": {"<earlier topic index>": "<full replacement summary>"}}. Use an empty object when nothing changes.)",
      R"(Newly completed topic:
{latest_topic}
Earlier topics:
{completed_topics})"};
  t[tags::final_update] = {
      R"(You review a complete assessment interview together with the per-topic scores and summaries.
Scale:
{scale_name}
Rating standards:
{rating_standards}
Allowed score range per topic (inclusive):
{score_range}
Adjust topic scores where evidence from other topics warrants it, and explain your reasoning. Then write an overall summary of the dialogue and personalised suggestions for the person.
Reply with a single JSON object: {"scores": [<one integer per topic, in topic order>], "reasoning": "...", "overall_summary": "...", "suggestions": "..."}
Number of topics:
{topic_count})",
      R"(Topic scores and summaries:
{topic_snapshot}
Full dialogue:
{history})"};
  t[tags::respond] = {
      R"(You are role-playing a person taking part in a mental health screening interview.
Stay in character. Answer the interviewer's latest question naturally and briefly, in the first person, using only the background below. If the background does not cover something, answer plausibly and consistently with it.
Background:
{persona})",
      R"(Interview so far:
{history}
Interviewer:
{question})"};
  return t;
}

// Loads "<tag>.txt" files from dir over the defaults.
inline std::map<std::string, PromptTemplate> load_templates(const std::filesystem::path& dir) {
  auto out = default_templates();
  if (!std::filesystem::is_directory(dir)) throw IOError("template directory '" + dir.string() + "' not found");
  for (auto& [tag, tmpl] : out) {
    const auto file = dir / (tag + ".txt");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IOError("cannot read template '" + file.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    tmpl = parse_template_text(ss.str());
  }
  return out;
}

}  // namespace scalewise
