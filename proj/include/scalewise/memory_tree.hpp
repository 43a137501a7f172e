#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalewise/error.hpp"

namespace scalewise {

using AttributeMap = std::map<std::string, std::string>;
using NodeId = int;

// Per-turn facts pulled out of an answer. Every dimension may be absent.
struct StatementFacts {
  std::optional<std::string> emotion;
  std::optional<std::string> frequency;
  std::optional<std::string> duration;
  std::vector<std::string> symptoms;
  std::optional<std::string> impact;

  bool empty() const {
    return !emotion && !frequency && !duration && symptoms.empty() && !impact;
  }
  friend bool operator==(const StatementFacts&, const StatementFacts&) = default;
};

struct UserNode {
  NodeId node_id = 0;
  std::string uid;
  AttributeMap attributes;
  friend bool operator==(const UserNode&, const UserNode&) = default;
};

struct StatementNode {
  NodeId node_id = 0;
  int topic_index = 0;
  int turn_index = 0;
  StatementFacts facts;
  int answer_ref = 0;  // index into the session transcript
  friend bool operator==(const StatementNode&, const StatementNode&) = default;
};

struct TopicNode {
  NodeId node_id = 0;
  int topic_index = 0;
  std::string name;
  int score = 0;
  std::string summary;
  int summary_revision = 0;
  friend bool operator==(const TopicNode&, const TopicNode&) = default;
};

enum class EdgeKind { topic_user, topic_statement };

struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  EdgeKind kind = EdgeKind::topic_user;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Ordered text sections handed to agents as the memory state for the
// current topic and turn.
struct ContextBlock {
  std::string user;
  std::string completed_topics;
  std::string current_statements;

  std::string text() const {
    return "## User\n" + user + "\n## Completed topics\n" + completed_topics +
           "\n## Current topic statements\n" + current_statements;
  }
  friend bool operator==(const ContextBlock&, const ContextBlock&) = default;
};

// Session memory: one user root, one node per completed topic and one node
// per answered turn. Statement nodes stay edge-less until their topic is
// completed; topics complete strictly in index order.
class MemoryTree {
 public:
  MemoryTree() = default;

  MemoryTree(std::string uid, AttributeMap attributes, int item_min = 0, int item_max = 3)
      : item_min_(item_min), item_max_(item_max) {
    if (uid.empty()) throw EmptyUidError("uid must not be empty");
    user_.node_id = next_id_++;
    user_.uid = std::move(uid);
    user_.attributes = std::move(attributes);
  }

  const UserNode& user() const { return user_; }
  const std::vector<StatementNode>& statements() const { return statements_; }
  const std::vector<TopicNode>& topics() const { return topics_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int item_min() const { return item_min_; }
  int item_max() const { return item_max_; }

  std::size_t node_count() const { return 1 + statements_.size() + topics_.size(); }
  int last_completed_topic() const { return static_cast<int>(topics_.size()); }
  int current_topic() const { return last_completed_topic() + 1; }

  int statement_count(int topic_index) const {
    return static_cast<int>(std::count_if(statements_.begin(), statements_.end(),
                                          [&](const auto& s) { return s.topic_index == topic_index; }));
  }

  const TopicNode* find_topic(int topic_index) const {
    for (const auto& t : topics_)
      if (t.topic_index == topic_index) return &t;
    return nullptr;
  }

  NodeId add_statement(int topic_index, int turn_index, StatementFacts facts, int answer_ref) {
    if (topic_index != current_topic())
      throw TopicOrderError("statement for topic " + std::to_string(topic_index) +
                            " while current topic is " + std::to_string(current_topic()));
    const int expected = statement_count(topic_index) + 1;
    if (turn_index != expected)
      throw SequenceError("turn " + std::to_string(turn_index) + " for topic " +
                          std::to_string(topic_index) + ", expected " + std::to_string(expected));
    StatementNode node{next_id_++, topic_index, turn_index, std::move(facts), answer_ref};
    statements_.push_back(std::move(node));
    return statements_.back().node_id;
  }

  NodeId complete_topic(int topic_index, int score, std::string summary, std::string name = {}) {
    if (find_topic(topic_index))
      throw DuplicateTopicError("topic " + std::to_string(topic_index) + " already completed");
    if (topic_index != current_topic())
      throw TopicOrderError("cannot complete topic " + std::to_string(topic_index) +
                            " while current topic is " + std::to_string(current_topic()));
    if (statement_count(topic_index) == 0)
      throw NoStatementsError("topic " + std::to_string(topic_index) + " has no statements");
    if (score < item_min_ || score > item_max_)
      throw RangeError("score " + std::to_string(score) + " outside [" +
                       std::to_string(item_min_) + "," + std::to_string(item_max_) + "]");
    if (summary.empty()) throw ValidationError("topic summary must not be empty");

    TopicNode node{next_id_++, topic_index, std::move(name), score, std::move(summary), 0};
    edges_.push_back({node.node_id, user_.node_id, EdgeKind::topic_user});
    for (const auto& s : statements_)
      if (s.topic_index == topic_index)
        edges_.push_back({node.node_id, s.node_id, EdgeKind::topic_statement});
    topics_.push_back(std::move(node));
    return topics_.back().node_id;
  }

  // Replaces summaries of topics completed before the most recent one.
  // All keys are checked before anything is applied.
  int revise_summaries(const std::map<int, std::string>& revisions) {
    const int latest = last_completed_topic();
    for (const auto& [index, text] : revisions) {
      if (index < 1) throw UnknownTopicError("no topic node for index " + std::to_string(index));
      if (index >= latest)
        throw ForwardRevisionError("topic " + std::to_string(index) +
                                   " is not earlier than the latest completed topic " +
                                   std::to_string(latest));
      if (text.empty()) throw ValidationError("revised summary for topic " + std::to_string(index) + " is empty");
    }
    for (const auto& [index, text] : revisions) {
      auto& node = topics_[static_cast<std::size_t>(index - 1)];
      node.summary = text;
      ++node.summary_revision;
    }
    return static_cast<int>(revisions.size());
  }

  // Throws ValidationError when a structural invariant is broken.
  void validate() const {
    if (user_.uid.empty()) throw ValidationError("user node has empty uid");
    std::map<NodeId, char> kind;  // 'u', 's', 't'
    kind[user_.node_id] = 'u';
    for (const auto& s : statements_) {
      if (s.topic_index < 1 || s.turn_index < 1)
        throw ValidationError("statement " + std::to_string(s.node_id) + " has non-positive indices");
      if (!kind.emplace(s.node_id, 's').second)
        throw ValidationError("duplicate node id " + std::to_string(s.node_id));
    }
    for (std::size_t k = 0; k < topics_.size(); ++k) {
      const auto& t = topics_[k];
      if (t.topic_index != static_cast<int>(k) + 1)
        throw ValidationError("topic nodes out of order at " + std::to_string(t.topic_index));
      if (t.score < item_min_ || t.score > item_max_)
        throw ValidationError("topic " + std::to_string(t.topic_index) + " score out of range");
      if (t.summary.empty()) throw ValidationError("topic " + std::to_string(t.topic_index) + " summary empty");
      if (!kind.emplace(t.node_id, 't').second)
        throw ValidationError("duplicate node id " + std::to_string(t.node_id));
    }
    for (const auto& [id, k] : kind)
      if (id >= next_id_) throw ValidationError("node id " + std::to_string(id) + " not below next_id");

    std::map<NodeId, int> topic_user_edges;
    std::map<NodeId, int> incoming;
    std::map<NodeId, int> topic_of;
    for (const auto& t : topics_) topic_of[t.node_id] = t.topic_index;
    for (const auto& e : edges_) {
      auto from = kind.find(e.from);
      auto to = kind.find(e.to);
      if (from == kind.end() || to == kind.end())
        throw ValidationError("edge references a missing node");
      if (from->second != 't') throw ValidationError("edge must originate at a topic node");
      if (e.kind == EdgeKind::topic_user) {
        if (to->second != 'u') throw ValidationError("topic_user edge must target the user node");
        ++topic_user_edges[e.from];
      } else {
        if (to->second != 's') throw ValidationError("topic_statement edge must target a statement");
        ++incoming[e.to];
      }
    }
    for (const auto& t : topics_)
      if (topic_user_edges[t.node_id] != 1)
        throw ValidationError("topic " + std::to_string(t.topic_index) + " needs exactly one user edge");
    const int latest = last_completed_topic();
    for (const auto& s : statements_) {
      const int expected = s.topic_index <= latest ? 1 : 0;
      if (incoming[s.node_id] != expected)
        throw ValidationError("statement " + std::to_string(s.node_id) + " has " +
                              std::to_string(incoming[s.node_id]) + " incoming edges, expected " +
                              std::to_string(expected));
    }
    for (const auto& e : edges_)
      if (e.kind == EdgeKind::topic_statement) {
        const auto& s = *std::find_if(statements_.begin(), statements_.end(),
                                      [&](const auto& n) { return n.node_id == e.to; });
        if (topic_of[e.from] != s.topic_index)
          throw ValidationError("statement edge crosses topics");
      }
    // Edges always run topic -> {user, statement} and nothing points at a
    // topic, so the graph has depth one below each topic and cannot cycle.
  }

  friend bool operator==(const MemoryTree&, const MemoryTree&) = default;

  friend nlohmann::json memory_to_json(const MemoryTree& tree);
  friend MemoryTree memory_from_json(const nlohmann::json& j);

 private:
  UserNode user_;
  std::vector<StatementNode> statements_;
  std::vector<TopicNode> topics_;
  std::vector<Edge> edges_;
  NodeId next_id_ = 0;
  int item_min_ = 0;
  int item_max_ = 3;
};

inline MemoryTree new_memory(std::string uid, AttributeMap attributes, int item_min = 0, int item_max = 3) {
  return MemoryTree(std::move(uid), std::move(attributes), item_min, item_max);
}

namespace detail {

inline void append_fact(std::string& out, const char* name, const std::optional<std::string>& v) {
  if (!v) return;
  if (!out.empty()) out += "; ";
  out += name;
  out += ": ";
  out += *v;
}

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace detail

inline std::string render_facts(const StatementFacts& f) {
  std::string out;
  detail::append_fact(out, "emotion", f.emotion);
  detail::append_fact(out, "frequency", f.frequency);
  detail::append_fact(out, "duration", f.duration);
  if (!f.symptoms.empty()) {
    if (!out.empty()) out += "; ";
    out += "symptoms: ";
    for (std::size_t k = 0; k < f.symptoms.size(); ++k) {
      if (k) out += ", ";
      out += f.symptoms[k];
    }
  }
  detail::append_fact(out, "impact", f.impact);
  return out.empty() ? "no facts extracted" : out;
}

// Memory state for question generation at (topic_index, turn_index):
// attributes, completed topics before topic_index, and facts from turns
// 1..turn_index of topic_index. Pure function of its inputs.
inline ContextBlock render_context(const MemoryTree& tree, int topic_index, int turn_index) {
  ContextBlock block;
  block.user = "uid: " + tree.user().uid + "\n";
  if (tree.user().attributes.empty()) {
    block.user += "attributes: none\n";
  } else {
    for (const auto& [k, v] : tree.user().attributes) block.user += k + ": " + detail::one_line(v) + "\n";
  }

  for (const auto& t : tree.topics()) {
    if (t.topic_index >= topic_index) continue;
    const std::string name = t.name.empty() ? "Topic " + std::to_string(t.topic_index) : t.name;
    block.completed_topics += "- [" + std::to_string(t.topic_index) + "] " + name +
                              " | score " + std::to_string(t.score) + " | " +
                              detail::one_line(t.summary) + "\n";
  }
  if (block.completed_topics.empty()) block.completed_topics = "none\n";

  for (const auto& s : tree.statements()) {
    if (s.topic_index != topic_index || s.turn_index > turn_index) continue;
    block.current_statements += "- turn " + std::to_string(s.turn_index) + ": " +
                                detail::one_line(render_facts(s.facts)) + "\n";
  }
  if (block.current_statements.empty()) block.current_statements = "none\n";
  return block;
}

inline nlohmann::json facts_to_json(const StatementFacts& f) {
  auto opt = [](const std::optional<std::string>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"emotion", opt(f.emotion)},     {"frequency", opt(f.frequency)},
          {"duration", opt(f.duration)},   {"symptoms", f.symptoms},
          {"impact", opt(f.impact)}};
}

inline StatementFacts facts_from_json(const nlohmann::json& j) {
  auto opt = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
  };
  StatementFacts f;
  f.emotion = opt("emotion");
  f.frequency = opt("frequency");
  f.duration = opt("duration");
  if (j.contains("symptoms") && !j.at("symptoms").is_null())
    f.symptoms = j.at("symptoms").get<std::vector<std::string>>();
  f.impact = opt("impact");
  return f;
}

inline const char* to_string(EdgeKind k) {
  return k == EdgeKind::topic_user ? "topic_user" : "topic_statement";
}

inline nlohmann::json memory_to_json(const MemoryTree& tree) {
  nlohmann::json statements = nlohmann::json::array();
  for (const auto& s : tree.statements_)
    statements.push_back({{"node_id", s.node_id},
                          {"topic_index", s.topic_index},
                          {"turn_index", s.turn_index},
                          {"facts", facts_to_json(s.facts)},
                          {"answer_ref", s.answer_ref}});
  nlohmann::json topics = nlohmann::json::array();
  for (const auto& t : tree.topics_)
    topics.push_back({{"node_id", t.node_id},
                      {"topic_index", t.topic_index},
                      {"name", t.name},
                      {"score", t.score},
                      {"summary", t.summary},
                      {"summary_revision", t.summary_revision}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : tree.edges_)
    edges.push_back({{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}});
  return {{"user", {{"node_id", tree.user_.node_id},
                    {"uid", tree.user_.uid},
                    {"attributes", tree.user_.attributes}}},
          {"statements", statements},
          {"topics", topics},
          {"edges", edges},
          {"next_id", tree.next_id_},
          {"item_min", tree.item_min_},
          {"item_max", tree.item_max_}};
}

inline MemoryTree memory_from_json(const nlohmann::json& j) {
  MemoryTree tree;
  try {
    const auto& u = j.at("user");
    tree.user_.node_id = u.at("node_id").get<int>();
    tree.user_.uid = u.at("uid").get<std::string>();
    tree.user_.attributes = u.at("attributes").get<AttributeMap>();
    for (const auto& s : j.at("statements"))
      tree.statements_.push_back({s.at("node_id").get<int>(), s.at("topic_index").get<int>(),
                                  s.at("turn_index").get<int>(), facts_from_json(s.at("facts")),
                                  s.at("answer_ref").get<int>()});
    for (const auto& t : j.at("topics"))
      tree.topics_.push_back({t.at("node_id").get<int>(), t.at("topic_index").get<int>(),
                              t.value("name", std::string{}), t.at("score").get<int>(),
                              t.at("summary").get<std::string>(), t.at("summary_revision").get<int>()});
    for (const auto& e : j.at("edges")) {
      const auto kind = e.at("kind").get<std::string>();
      if (kind != "topic_user" && kind != "topic_statement") throw ParseError("unknown edge kind '" + kind + "'");
      tree.edges_.push_back({e.at("from").get<int>(), e.at("to").get<int>(),
                             kind == "topic_user" ? EdgeKind::topic_user : EdgeKind::topic_statement});
    }
    tree.next_id_ = j.at("next_id").get<int>();
    tree.item_min_ = j.at("item_min").get<int>();
    tree.item_max_ = j.at("item_max").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("memory tree: ") + e.what());
  }
  try {
    tree.validate();
  } catch (const ValidationError& e) {
    throw ParseError(std::string("memory tree: ") + e.what());
  }
  return tree;
}

inline std::string serialize_memory(const MemoryTree& tree) { return memory_to_json(tree).dump(2) + "\n"; }

inline MemoryTree deserialize_memory(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("memory tree: ") + e.what());
  }
  return memory_from_json(j);
}

}  // namespace scalewise
