#pragma once

#include <chrono>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "scalewise/chat.hpp"

namespace scalewise {

struct RemoteBackendOptions {
  // e.g. "http://localhost:8000/v1"; "/chat/completions" is appended.
  std::string base_url = "http://localhost:8000/v1";
  std::string api_key;
  std::chrono::milliseconds connect_timeout{10'000};
  std::chrono::milliseconds read_timeout{120'000};
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{500};
};

// OpenAI-compatible chat-completions client (works with vLLM-style servers).
// Stateless apart from its options, so one instance can serve many sessions.
class RemoteBackend : public ChatBackend {
 public:
  explicit RemoteBackend(RemoteBackendOptions options) : options_(std::move(options)) {
    const auto& url = options_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("backend URL needs a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  const RemoteBackendOptions& options() const { return options_; }
  std::string endpoint() const { return origin_ + prefix_ + "/chat/completions"; }

  static nlohmann::json request_body(const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", request.model},
            {"messages", messages},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  }

  ChatResponse complete(const ChatRequest& request) override {
    request.check();
    const std::string body = request_body(request).dump();
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    std::string last_error;
    auto backoff = options_.initial_backoff;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Client client(origin_);
      client.set_connection_timeout(options_.connect_timeout);
      client.set_read_timeout(options_.read_timeout);
      auto res = client.Post(prefix_ + "/chat/completions", headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
        continue;
      }
      if (res->status != 200)
        throw BackendError("HTTP " + std::to_string(res->status) + " from " + endpoint() + ": " +
                           res->body.substr(0, 200));
      return parse_response(res->body);
    }
    throw BackendError("giving up after " + std::to_string(options_.max_retries + 1) +
                       " attempts against " + endpoint() + " (" + last_error + ")");
  }

  static ChatResponse parse_response(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      const auto& choice = j.at("choices").at(0);
      ChatResponse out;
      const auto& content = choice.at("message").at("content");
      out.content = content.is_null() ? std::string{} : content.get<std::string>();
      if (choice.contains("finish_reason") && choice.at("finish_reason").is_string())
        out.finish_reason = choice.at("finish_reason").get<std::string>();
      if (j.contains("usage") && j.at("usage").is_object()) {
        out.prompt_tokens = j.at("usage").value("prompt_tokens", 0);
        out.completion_tokens = j.at("usage").value("completion_tokens", 0);
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("malformed chat-completions response: ") + e.what());
    }
  }

 private:
  RemoteBackendOptions options_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace scalewise
