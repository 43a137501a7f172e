#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <variant>

#include "httplib.h"
#include "json.hpp"
#include "scalewise/orchestrator.hpp"
#include "scalewise/persistence.hpp"

namespace scalewise {

struct ServiceOptions {
  std::map<std::string, std::shared_ptr<const Scale>> scales;
  BackendFactory backend_factory;
  AgentSettings settings;
  EngineConfig defaults;
  std::optional<std::filesystem::path> store_root;
  std::chrono::seconds idle_expiry{30 * 60};
  std::string bearer_token;  // empty: no auth
  std::string cors_origin = "*";
  int workers = 8;
  Clock clock = system_clock();
  std::function<std::string()> id_generator;
};

struct ApiReply {
  ApiReply() = default;
  ApiReply(int s, nlohmann::json b, std::optional<std::string> t = std::nullopt)
      : status(s), body(std::move(b)), text(std::move(t)) {}

  int status = 200;
  nlohmann::json body;
  std::optional<std::string> text;  // markdown body instead of JSON
};

inline nlohmann::json error_body(const std::string& kind, const std::string& message) {
  return {{"error", kind}, {"message", message}};
}

// Transport-independent session service. Each answer call performs exactly
// one submit_answer step under the session's lock; a second call that
// arrives while one is running gets 409.
class SessionService {
 public:
  explicit SessionService(ServiceOptions options) : options_(std::move(options)) {
    if (!options_.backend_factory) throw PreconditionError("service needs a backend factory");
    if (!options_.id_generator) {
      options_.id_generator = [rng = std::make_shared<std::mt19937_64>(std::random_device{}()),
                               mu = std::make_shared<std::mutex>()] {
        std::lock_guard lock(*mu);
        static const char* hex = "0123456789abcdef";
        std::string id = "s-";
        auto v = (*rng)();
        for (int k = 0; k < 16; ++k, v >>= 4) id += hex[v & 15];
        return id;
      };
    }
  }

  const ServiceOptions& options() const { return options_; }

  ApiReply create(const nlohmann::json& body) {
    if (!body.is_object()) return {422, error_body("ValidationError", "body must be a JSON object")};
    if (!body.contains("scale_id") || !body.at("scale_id").is_string())
      return {422, error_body("ValidationError", "scale_id is required")};
    if (!body.contains("uid") || !body.at("uid").is_string() || body.at("uid").get<std::string>().empty())
      return {422, error_body("ValidationError", "uid is required")};
    auto scale_it = options_.scales.find(body.at("scale_id").get<std::string>());
    if (scale_it == options_.scales.end())
      return {422, error_body("ValidationError", "unknown scale '" + body.at("scale_id").get<std::string>() + "'")};

    Participant participant{body.at("uid").get<std::string>(), {}};
    EngineConfig config = options_.defaults;
    try {
      if (body.contains("attributes") && !body.at("attributes").is_null())
        participant.attributes = body.at("attributes").get<AttributeMap>();
      if (body.contains("config") && body.at("config").is_object()) {
        const auto& c = body.at("config");
        config.theta = c.value("theta", config.theta);
        config.depth = c.value("depth", config.depth);
        config.tag = c.value("tag", config.tag);
      }
      config.validate();
    } catch (const nlohmann::json::exception& e) {
      return {422, error_body("ValidationError", e.what())};
    } catch (const Error& e) {
      return {422, error_body(e.kind(), e.what())};
    }

    auto session = std::make_shared<Live>();
    session->backend = options_.backend_factory();
    session->created_at = now_iso();
    session->state = start_session(scale_it->second, participant, config, *session->backend, options_.settings,
                                   options_.id_generator());
    touch(*session);
    const auto id = session->state.session_id;
    {
      std::lock_guard lock(mu_);
      sessions_[id] = session;
    }
    persist(*session);
    if (session->state.phase == Phase::Aborted)
      return {502, error_body(session->state.abort_kind, session->state.abort_reason)};
    return {201,
            {{"session_id", id},
             {"question", session->state.pending_question},
             {"topic_index", session->state.current_topic},
             {"turn_index", session->state.current_turn}}};
  }

  ApiReply answer(const std::string& id, const nlohmann::json& body) {
    auto session = find(id);
    if (!session) return {404, error_body("NotFound", "unknown session '" + id + "'")};
    std::unique_lock lock(session->mu, std::try_to_lock);
    if (!lock.owns_lock()) return {409, error_body("PhaseError", "a step for this session is already running")};
    if (session->state.phase != Phase::AwaitingAnswer)
      return {409, error_body("PhaseError", std::string("session is ") + to_string(session->state.phase))};
    if (!body.is_object() || !body.contains("answer") || !body.at("answer").is_string())
      return {422, error_body("ValidationError", "answer must be a string")};

    auto outcome = submit_answer(session->state, body.at("answer").get<std::string>(), *session->backend,
                                 options_.settings);
    touch(*session);
    persist(*session);
    return std::visit([&](auto& o) { return step_reply(session->state, o); }, outcome);
  }

  ApiReply memory(const std::string& id) {
    auto session = find(id);
    if (!session) return {404, error_body("NotFound", "unknown session '" + id + "'")};
    std::lock_guard lock(session->mu);
    return {200, memory_to_json(session->state.memory)};
  }

  ApiReply report(const std::string& id) {
    if (auto session = find(id)) {
      std::lock_guard lock(session->mu);
      if (session->state.phase != Phase::Done || !session->state.result)
        return {404, error_body("NotReady", "report is available once the session is done")};
      return {200, {}, session->state.result->report};
    }
    if (auto rec = stored(id); rec && rec->result) return {200, {}, rec->result->report};
    return {404, error_body("NotFound", "unknown session '" + id + "'")};
  }

  ApiReply get(const std::string& id) {
    if (auto session = find(id)) {
      std::lock_guard lock(session->mu);
      return {200, record_to_json(record(*session))};
    }
    if (auto rec = stored(id)) return {200, record_to_json(*rec)};
    return {404, error_body("NotFound", "unknown session '" + id + "'")};
  }

  // Done sessions keep their Done record; anything else is persisted as
  // Aborted. The session is evicted either way.
  ApiReply remove(const std::string& id) {
    auto session = find(id);
    if (!session) return {404, error_body("NotFound", "unknown session '" + id + "'")};
    {
      std::lock_guard lock(session->mu);
      if (session->state.phase != Phase::Done) mark_aborted(session->state, "DeletedByClient", "session deleted by client");
      touch(*session);
      persist(*session);
    }
    std::lock_guard lock(mu_);
    sessions_.erase(id);
    return {204, nullptr};
  }

  ApiReply scales() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [id, s] : options_.scales)
      out.push_back({{"id", id}, {"name", s->name}, {"topic_count", s->topic_count()}});
    return {200, out};
  }

  // Persists idle sessions as Aborted (Done ones as they are) and evicts
  // them. Returns the number evicted.
  int sweep_expired() {
    const auto now = options_.clock();
    std::vector<std::pair<std::string, std::shared_ptr<Live>>> expired;
    {
      std::lock_guard lock(mu_);
      for (auto& [id, s] : sessions_) {
        std::unique_lock slock(s->mu, std::try_to_lock);
        if (slock.owns_lock() && now - s->last_activity >= options_.idle_expiry) expired.emplace_back(id, s);
      }
    }
    for (auto& [id, s] : expired) {
      {
        std::lock_guard slock(s->mu);
        if (s->state.phase != Phase::Done) mark_aborted(s->state, "IdleExpired", "session idle past its expiry");
        persist(*s);
      }
      std::lock_guard lock(mu_);
      sessions_.erase(id);
    }
    return static_cast<int>(expired.size());
  }

  std::size_t live_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  struct Live {
    std::mutex mu;
    SessionState state;
    std::shared_ptr<ChatBackend> backend;
    std::string created_at;
    std::chrono::system_clock::time_point last_activity;
  };

  std::string now_iso() const { return iso8601_utc(options_.clock()); }

  void touch(Live& s) const { s.last_activity = options_.clock(); }

  static void mark_aborted(SessionState& state, const std::string& kind, const std::string& reason) {
    state.phase = Phase::Aborted;
    state.abort_kind = kind;
    state.abort_reason = reason;
  }

  SessionRecord record(const Live& s) const { return make_record(s.state, s.created_at, iso8601_utc(s.last_activity)); }

  void persist(const Live& s) const {
    if (options_.store_root) save_session(record(s), *options_.store_root);
  }

  std::optional<SessionRecord> stored(const std::string& id) const {
    if (!options_.store_root) return std::nullopt;
    try {
      const auto path = session_path(*options_.store_root, id);
      if (!std::filesystem::exists(path)) return std::nullopt;
      return load_session(path);
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  std::shared_ptr<Live> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  static nlohmann::json score_json(int topic_index, const TopicScore& s) {
    auto j = topic_score_to_json(s);
    j["topic_index"] = topic_index;
    return j;
  }

  ApiReply step_reply(const SessionState&, const NextQuestion& o) const {
    return {200, {{"outcome", "next_question"}, {"question", o.question}, {"topic_index", o.topic_index},
                  {"turn_index", o.turn_index}}};
  }
  ApiReply step_reply(const SessionState&, const TopicCompleted& o) const {
    return {200, {{"outcome", "topic_completed"}, {"topic_score", score_json(o.topic_index, o.score)},
                  {"question", o.next_question}, {"topic_index", o.next_topic_index}, {"turn_index", 1}}};
  }
  ApiReply step_reply(const SessionState&, const Finished& o) const {
    return {200, {{"outcome", "finished"},
                  {"topic_score", score_json(o.topic_index, o.score)},
                  {"result_summary", {{"total", o.result.total}, {"category", o.result.category},
                                      {"final_scores", o.result.final_scores},
                                      {"pre_update_scores", o.result.pre_update_scores},
                                      {"update_skipped", o.result.update_skipped}}},
                  {"result", result_to_json(o.result)}}};
  }
  ApiReply step_reply(const SessionState&, const Aborted& o) const {
    const int status = o.category == ErrorCategory::backend ? 502 : 500;
    return {status, error_body(o.kind, o.reason)};
  }

  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
};

// HTTP transport over SessionService.
class ApiServer {
 public:
  explicit ApiServer(ServiceOptions options, std::chrono::seconds sweep_interval = std::chrono::seconds(30))
      : service_(std::move(options)), sweep_interval_(sweep_interval) {
    const int workers = std::max(1, service_.options().workers);
    server_.new_task_queue = [workers] { return new httplib::ThreadPool(static_cast<std::size_t>(workers)); };
    routes();
  }

  ~ApiServer() { stop(); }

  SessionService& service() { return service_; }

  // Blocks until stop().
  bool listen(const std::string& host, int port) {
    start_sweeper();
    return server_.listen(host, port);
  }

  int bind_any_port(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }

  // Serve on a bound socket from a background thread.
  void start_background() {
    start_sweeper();
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    {
      std::lock_guard lock(sweep_mu_);
      stopping_ = true;
    }
    sweep_cv_.notify_all();
    if (sweeper_.joinable()) sweeper_.join();
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  bool mount_ui(const std::string& dir) { return server_.set_mount_point("/ui", dir); }

 private:
  void start_sweeper() {
    if (sweeper_.joinable()) return;
    sweeper_ = std::thread([this] {
      std::unique_lock lock(sweep_mu_);
      while (!sweep_cv_.wait_for(lock, sweep_interval_, [this] { return stopping_; })) service_.sweep_expired();
    });
  }

  static void send(httplib::Response& res, const ApiReply& reply) {
    res.status = reply.status;
    if (reply.text) res.set_content(*reply.text, "text/markdown; charset=utf-8");
    else if (reply.status != 204) res.set_content(reply.body.dump(), "application/json");
  }

  static std::optional<nlohmann::json> body_json(const httplib::Request& req, httplib::Response& res) {
    auto j = nlohmann::json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
    if (j.is_discarded()) {
      send(res, {422, error_body("ValidationError", "request body is not valid JSON")});
      return std::nullopt;
    }
    return j;
  }

  void routes() {
    const auto origin = service_.options().cors_origin;
    const auto token = service_.options().bearer_token;
    server_.set_pre_routing_handler([origin, token](const httplib::Request& req, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
      if (req.method == "OPTIONS") {
        res.status = 204;
        return httplib::Server::HandlerResponse::Handled;
      }
      if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token &&
          req.path.rfind("/ui", 0) != 0) {
        send(res, {401, error_body("Unauthorized", "missing or invalid bearer token")});
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });

    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok"})", "application/json");
    });
    server_.Get("/scales", [this](const httplib::Request&, httplib::Response& res) { send(res, service_.scales()); });
    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto body = body_json(req, res)) send(res, service_.create(*body));
    });
    server_.Post(R"(/sessions/([^/]+)/answer)", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto body = body_json(req, res)) send(res, service_.answer(req.matches[1], *body));
    });
    server_.Get(R"(/sessions/([^/]+)/memory)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service_.memory(req.matches[1]));
    });
    server_.Get(R"(/sessions/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service_.report(req.matches[1]));
    });
    server_.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service_.get(req.matches[1]));
    });
    server_.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service_.remove(req.matches[1]));
    });
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send(res, {e.category() == ErrorCategory::io ? 500 : 422, error_body(e.kind(), e.what())});
      } catch (const std::exception& e) {
        send(res, {500, error_body("InternalError", e.what())});
      }
    });
  }

  SessionService service_;
  httplib::Server server_;
  std::thread thread_;
  std::thread sweeper_;
  std::chrono::seconds sweep_interval_;
  std::mutex sweep_mu_;
  std::condition_variable sweep_cv_;
  bool stopping_ = false;
};

}  // namespace scalewise
