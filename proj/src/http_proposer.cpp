#include "trussloop/http_proposer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "json.hpp"

// After the Eigen headers: httplib pulls in resolv.h, whose _res macro
// clashes with Eigen parameter names.
#include "httplib.h"

namespace trussloop {

void LlmConfig::validate() const {
  if (endpoint.empty()) throw std::invalid_argument("llm endpoint must be set");
  if (endpoint.find("://") == std::string::npos) {
    throw std::invalid_argument("llm endpoint must be an absolute http(s) URL: " + endpoint);
  }
  if (model.empty()) throw std::invalid_argument("llm model must be set");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (timeout.count() <= 0) throw std::invalid_argument("timeout must be positive");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  if (backoff_base.count() < 0 || backoff_cap < backoff_base) {
    throw std::invalid_argument("backoff base must be >= 0 and <= backoff cap");
  }
  if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
  if (token_budget && *token_budget <= 0) throw std::invalid_argument("token_budget must be positive");
}

std::chrono::milliseconds backoff_delay(const LlmConfig& config, int attempt, double jitter) {
  jitter = std::clamp(jitter, 0.0, std::nextafter(1.0, 0.0));
  const double raw = static_cast<double>(config.backoff_base.count()) * std::ldexp(1.0, std::min(attempt, 62)) *
                     (1.0 + jitter);
  const double capped = std::min(raw, static_cast<double>(config.backoff_cap.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped));
}

bool is_transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::string chat_request_body(const LlmConfig& config, const ProposerRequest& request) {
  nlohmann::ordered_json body;
  body["model"] = config.model;
  auto messages = nlohmann::ordered_json::array();
  if (!request.system_text.empty()) messages.push_back({{"role", "system"}, {"content", request.system_text}});
  for (const auto& turn : request.conversation) messages.push_back({{"role", turn.role}, {"content", turn.text}});
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  if (request.seed) body["seed"] = *request.seed;
  return body.dump();
}

ChatReply parse_chat_reply(const std::string& body) {
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error("reply is not JSON");
  const auto& choices = doc.at("choices");
  if (!choices.is_array() || choices.empty()) throw std::runtime_error("reply has no choices");
  ChatReply reply;
  const auto& content = choices.at(0).at("message").at("content");
  reply.content = content.is_null() ? std::string() : content.get<std::string>();
  if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
    reply.usage = TokenUsage{usage->value("prompt_tokens", 0L), usage->value("completion_tokens", 0L)};
  }
  return reply;
}

HttpChatProposer::HttpChatProposer(LlmConfig config, std::shared_ptr<InFlightLimiter> limiter,
                                   std::uint64_t jitter_seed)
    : config_(std::move(config)), limiter_(std::move(limiter)), jitter_rng_(jitter_seed) {
  config_.validate();
  if (!limiter_) limiter_ = std::make_shared<InFlightLimiter>(config_.max_in_flight);
  sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  const auto scheme_end = config_.endpoint.find("://") + 3;
  const auto path_start = config_.endpoint.find('/', scheme_end);
  scheme_host_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
}

std::string HttpChatProposer::backend_id() const { return "llm:" + config_.model; }

HttpChatProposer::CallStats HttpChatProposer::last_call() const {
  std::lock_guard lock(mutex_);
  return last_;
}

long HttpChatProposer::tokens_used() const {
  std::lock_guard lock(mutex_);
  return tokens_used_;
}

ProposerResponse HttpChatProposer::propose(const ProposerRequest& request) {
  if (request.user_text.empty()) throw std::invalid_argument("proposer request has an empty prompt");
  {
    std::lock_guard lock(mutex_);
    if (config_.token_budget && tokens_used_ >= *config_.token_budget) {
      throw ProposerError(ProposerErrorKind::BudgetExceeded,
                          "token budget of " + std::to_string(*config_.token_budget) + " exhausted");
    }
  }
  const char* key = std::getenv(config_.credential_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ProposerError(ProposerErrorKind::Auth, "credential variable " + config_.credential_env + " is not set");
  }

  const std::string body = chat_request_body(config_, request);
  httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

  CallStats stats;
  std::string last_error;
  const auto start = std::chrono::steady_clock::now();
  for (int attempt = 0;; ++attempt) {
    ++stats.attempts;
    httplib::Result result;
    {
      auto slot = limiter_->acquire();
      httplib::Client client(scheme_host_);
      const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
      client.set_connection_timeout(seconds.count(), micros.count());
      client.set_read_timeout(seconds.count(), micros.count());
      client.set_write_timeout(seconds.count(), micros.count());
      result = client.Post(path_, headers, body, "application/json");
    }

    bool transient = false;
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      transient = true;
    } else {
      stats.last_status = result->status;
      if (result->status >= 200 && result->status < 300) {
        ChatReply reply;
        try {
          reply = parse_chat_reply(result->body);
        } catch (const std::exception& e) {
          std::lock_guard lock(mutex_);
          last_ = stats;
          throw ProposerError(ProposerErrorKind::Transport, std::string("malformed chat reply: ") + e.what());
        }
        const auto latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        std::lock_guard lock(mutex_);
        if (reply.usage) tokens_used_ += reply.usage->prompt + reply.usage->completion;
        last_ = stats;
        return {std::move(reply.content), backend_id(), latency, reply.usage};
      }
      last_error = "HTTP " + std::to_string(result->status);
      if (result->status == 401 || result->status == 403) {
        std::lock_guard lock(mutex_);
        last_ = stats;
        throw ProposerError(ProposerErrorKind::Auth, "endpoint rejected credentials (" + last_error + ")");
      }
      transient = is_transient_status(result->status);
    }

    if (!transient || attempt >= config_.max_retries) {
      std::lock_guard lock(mutex_);
      last_ = stats;
      const std::string suffix = transient ? " after " + std::to_string(attempt + 1) + " attempts" : "";
      throw ProposerError(ProposerErrorKind::Transport, last_error + suffix);
    }

    double jitter;
    {
      std::lock_guard lock(mutex_);
      jitter = std::uniform_real_distribution<double>(0.0, 1.0)(jitter_rng_);
    }
    const auto delay = backoff_delay(config_, attempt, jitter);
    // Keep the schedule non-decreasing even when a later draw jitters low.
    const auto effective = stats.delays.empty() ? delay : std::max(delay, stats.delays.back());
    stats.delays.push_back(effective);
    ++stats.retries;
    sleeper_(effective);
  }
}

}  // namespace trussloop
