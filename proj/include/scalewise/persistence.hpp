#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "scalewise/error.hpp"
#include "scalewise/session.hpp"

namespace scalewise {

inline constexpr int record_format_version = 1;

using Clock = std::function<std::chrono::system_clock::time_point()>;

inline Clock system_clock() {
  return [] { return std::chrono::system_clock::now(); };
}

inline Clock fixed_clock(std::int64_t epoch_seconds) {
  return [epoch_seconds] { return std::chrono::system_clock::time_point(std::chrono::seconds(epoch_seconds)); };
}

inline std::string iso8601_utc(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct SessionRecord {
  int format_version = record_format_version;
  std::string engine_version = scalewise::engine_version;
  std::string session_id;
  EngineConfig config;
  std::string scale_id;
  Phase phase = Phase::AwaitingAnswer;
  std::vector<TranscriptTurn> transcript;
  MemoryTree memory;
  std::optional<AssessmentResult> result;  // present iff phase is Done
  int current_topic = 1;
  int current_turn = 0;
  std::string pending_question;
  std::vector<TopicScore> topic_scores;
  std::vector<std::string> warnings;
  std::string abort_reason;
  std::string abort_kind;
  std::string created_at;
  std::string updated_at;

  friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

inline SessionRecord make_record(const SessionState& state, const std::string& created_at,
                                 const std::string& updated_at) {
  SessionRecord r;
  r.session_id = state.session_id;
  r.config = state.config;
  r.scale_id = state.scale ? state.scale->id : state.config.scale_id;
  r.phase = state.phase;
  r.transcript = state.transcript;
  r.memory = state.memory;
  if (state.phase == Phase::Done) r.result = state.result;
  r.current_topic = state.current_topic;
  r.current_turn = state.current_turn;
  r.pending_question = state.pending_question;
  r.topic_scores = state.topic_scores;
  r.warnings = state.warnings;
  r.abort_reason = state.abort_reason;
  r.abort_kind = state.abort_kind;
  r.created_at = created_at;
  r.updated_at = updated_at;
  return r;
}

inline nlohmann::json record_to_json(const SessionRecord& r) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& s : r.topic_scores) scores.push_back(topic_score_to_json(s));
  return {{"format_version", r.format_version},
          {"engine_version", r.engine_version},
          {"session_id", r.session_id},
          {"config", config_to_json(r.config)},
          {"scale_id", r.scale_id},
          {"phase", to_string(r.phase)},
          {"transcript", transcript_to_json(r.transcript)},
          {"memory", memory_to_json(r.memory)},
          {"result", r.result ? result_to_json(*r.result) : nlohmann::json(nullptr)},
          {"current_topic", r.current_topic},
          {"current_turn", r.current_turn},
          {"pending_question", r.pending_question},
          {"topic_scores", scores},
          {"warnings", r.warnings},
          {"abort", r.abort_reason.empty() && r.abort_kind.empty()
                        ? nlohmann::json(nullptr)
                        : nlohmann::json{{"reason", r.abort_reason}, {"kind", r.abort_kind}}},
          {"created_at", r.created_at},
          {"updated_at", r.updated_at}};
}

inline SessionRecord record_from_json(const nlohmann::json& j) {
  SessionRecord r;
  try {
    r.format_version = j.at("format_version").get<int>();
    if (r.format_version > record_format_version)
      throw VersionMismatch("record format " + std::to_string(r.format_version) + " is newer than supported " +
                            std::to_string(record_format_version));
    r.engine_version = j.at("engine_version").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.config = config_from_json(j.at("config"));
    r.scale_id = j.at("scale_id").get<std::string>();
    r.phase = phase_from_string(j.at("phase").get<std::string>());
    r.transcript = transcript_from_json(j.at("transcript"));
    r.memory = memory_from_json(j.at("memory"));
    if (!j.at("result").is_null()) r.result = result_from_json(j.at("result"));
    r.current_topic = j.at("current_topic").get<int>();
    r.current_turn = j.at("current_turn").get<int>();
    r.pending_question = j.at("pending_question").get<std::string>();
    for (const auto& s : j.at("topic_scores")) r.topic_scores.push_back(topic_score_from_json(s));
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (!j.at("abort").is_null()) {
      r.abort_reason = j.at("abort").at("reason").get<std::string>();
      r.abort_kind = j.at("abort").at("kind").get<std::string>();
    }
    r.created_at = j.at("created_at").get<std::string>();
    r.updated_at = j.at("updated_at").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("session record: ") + e.what());
  }
  if (r.phase == Phase::Done && !r.result) throw ParseError("session record: done without a result");
  return r;
}

// Canonical bytes: sorted keys, two-space indent, trailing newline.
inline std::string canonical_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::string serialize_record(const SessionRecord& r) { return canonical_json(record_to_json(r)); }

inline SessionRecord parse_record(std::string_view bytes) {
  auto j = nlohmann::json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw ParseError("session record is not valid JSON");
  return record_from_json(j);
}

// Writes via a temporary file in the same directory, then renames.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  static std::atomic<unsigned> counter{0};
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IOError("cannot create '" + path.parent_path().string() + "': " + ec.message());
  std::ostringstream tmp_name;
  tmp_name << "." << path.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
           << "." << counter++;
  const auto tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IOError("cannot write '" + tmp.string() + "'");
    out << bytes;
    out.flush();
    if (!out) throw IOError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IOError("cannot move record into place at '" + path.string() + "'");
  }
}

inline std::filesystem::path session_path(const std::filesystem::path& root, const std::string& session_id) {
  if (session_id.empty() || session_id.find_first_of("/\\") != std::string::npos || session_id[0] == '.')
    throw ValidationError("session id '" + session_id + "' is not usable as a file name");
  return root / (session_id + ".json");
}

inline std::filesystem::path save_session(const SessionRecord& record, const std::filesystem::path& root) {
  const auto path = session_path(root, record.session_id);
  write_file_atomic(path, serialize_record(record));
  return path;
}

inline SessionRecord load_session(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open session record '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_record(ss.str());
}

}  // namespace scalewise
