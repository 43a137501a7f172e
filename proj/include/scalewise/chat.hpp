#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "scalewise/error.hpp"

namespace scalewise {

enum class AgentRole { QuestionGenerator, Evaluator, Scorer, Updater };

inline const char* to_string(AgentRole r) {
  switch (r) {
    case AgentRole::QuestionGenerator: return "question_generator";
    case AgentRole::Evaluator: return "evaluator";
    case AgentRole::Scorer: return "scorer";
    case AgentRole::Updater: return "updater";
  }
  return "unknown";
}

// Exchange tags. Each backend call carries one; the scripted backend keys
// its canned replies on it.
namespace tags {
inline constexpr const char* question = "question";
inline constexpr const char* necessity = "necessity";
inline constexpr const char* facts = "facts";
inline constexpr const char* topic_score = "topic_score";
inline constexpr const char* revision = "revision";
inline constexpr const char* final_update = "final_update";
inline constexpr const char* respond = "respond";
}  // namespace tags

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string tag;
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;

  void check() const {
    if (messages.empty()) throw PreconditionError("chat request has no messages");
    if (messages.front().role != "system")
      throw PreconditionError("first chat message must have the system role");
  }
};

struct ChatResponse {
  std::string content;
  std::string finish_reason = "stop";
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

// One request/response pair, kept for golden comparisons and diagnostics.
struct ChatExchange {
  std::string tag;
  std::string prompt;  // all messages joined
  std::string completion;
};

inline std::string flatten(const std::vector<ChatMessage>& messages) {
  std::string out;
  for (const auto& m : messages) out += "[" + m.role + "]\n" + m.content + "\n";
  return out;
}

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

using BackendFactory = std::function<std::shared_ptr<ChatBackend>()>;

// A canned reply for the scripted backend: plain text, or a forced backend
// failure.
struct ScriptedReply {
  std::string text;
  bool fail = false;

  static ScriptedReply of(std::string text) { return {std::move(text), false}; }
  static ScriptedReply of(const char* text) { return {text, false}; }
  static ScriptedReply of(const nlohmann::json& j) { return {j.dump(), false}; }
  static ScriptedReply failure(std::string message) { return {std::move(message), true}; }
};

// Deterministic backend. Replies for each tag are consumed in order; once a
// tag's list is exhausted its last reply repeats. The literal "${call}" in a
// reply is replaced by the 1-based call number for that tag.
class ScriptedBackend : public ChatBackend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::map<std::string, std::vector<ScriptedReply>> script)
      : script_(std::move(script)) {}

  void add(const std::string& tag, ScriptedReply reply) { script_[tag].push_back(std::move(reply)); }

  ChatResponse complete(const ChatRequest& request) override {
    request.check();
    std::lock_guard lock(mu_);
    const int call = ++calls_[request.tag];
    auto it = script_.find(request.tag);
    if (it == script_.end() || it->second.empty())
      throw BackendError("scripted backend has no replies for tag '" + request.tag + "'");
    const auto& list = it->second;
    const auto& reply = list[std::min<std::size_t>(static_cast<std::size_t>(call - 1), list.size() - 1)];
    if (reply.fail) throw BackendError("scripted failure: " + reply.text);

    std::string text = reply.text;
    const std::string marker = "${call}";
    for (auto pos = text.find(marker); pos != std::string::npos; pos = text.find(marker, pos))
      text.replace(pos, marker.size(), std::to_string(call));

    exchanges_.push_back({request.tag, flatten(request.messages), text});
    return {text, "stop", 0, 0};
  }

  int calls(const std::string& tag) const {
    std::lock_guard lock(mu_);
    auto it = calls_.find(tag);
    return it == calls_.end() ? 0 : it->second;
  }

  int total_calls() const {
    std::lock_guard lock(mu_);
    int n = 0;
    for (const auto& [_, c] : calls_) n += c;
    return n;
  }

  std::vector<ChatExchange> exchanges() const {
    std::lock_guard lock(mu_);
    return exchanges_;
  }

  // Fresh instance with the same script and zeroed counters.
  std::shared_ptr<ScriptedBackend> fresh() const {
    std::lock_guard lock(mu_);
    return std::make_shared<ScriptedBackend>(script_);
  }

 private:
  std::map<std::string, std::vector<ScriptedReply>> script_;
  std::map<std::string, int> calls_;
  std::vector<ChatExchange> exchanges_;
  mutable std::mutex mu_;
};

// Fixture file: {"replies": {"<tag>": [reply, ...]}}. A reply is a string
// (sent verbatim), an object {"$error": "msg"} (backend failure), or any
// other JSON value (sent as its compact serialization).
inline std::shared_ptr<ScriptedBackend> scripted_backend_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("replies") || !j.at("replies").is_object())
    throw ParseError("scripted fixture needs a 'replies' object");
  std::map<std::string, std::vector<ScriptedReply>> script;
  for (const auto& [tag, list] : j.at("replies").items()) {
    if (!list.is_array()) throw ParseError("replies for '" + tag + "' must be an array");
    for (const auto& r : list) {
      if (r.is_string())
        script[tag].push_back(ScriptedReply::of(r.get<std::string>()));
      else if (r.is_object() && r.contains("$error"))
        script[tag].push_back(ScriptedReply::failure(r.at("$error").get<std::string>()));
      else
        script[tag].push_back(ScriptedReply::of(r));
    }
  }
  return std::make_shared<ScriptedBackend>(std::move(script));
}

inline std::shared_ptr<ScriptedBackend> load_scripted_backend(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open scripted fixture '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scripted fixture: ") + e.what());
  }
  return scripted_backend_from_json(j);
}

}  // namespace scalewise
