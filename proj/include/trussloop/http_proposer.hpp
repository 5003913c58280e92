#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include "trussloop/proposer.hpp"

namespace trussloop {

struct LlmConfig {
  std::string endpoint;  // e.g. https://host/v1/chat/completions
  std::string model;
  double temperature = 1.0;  // config default; each request carries its own
  std::chrono::milliseconds timeout{120000};
  int max_retries = 4;
  std::chrono::milliseconds backoff_base{1000};
  std::chrono::milliseconds backoff_cap{60000};
  std::string credential_env = "TRUSSLOOP_API_KEY";
  int max_in_flight = 2;
  std::optional<long> token_budget;  // prompt + completion tokens over the proposer's life

  /// Throws std::invalid_argument.
  void validate() const;
};

/// Delay before retry number `attempt` (0-based): base * 2^attempt scaled by
/// (1 + jitter) with jitter in [0, 1), then capped. Never decreases with
/// attempt for a fixed jitter.
std::chrono::milliseconds backoff_delay(const LlmConfig& config, int attempt, double jitter);

/// True for HTTP statuses worth retrying: 408, 429 and 5xx.
bool is_transient_status(int status);

/// Chat-completions JSON body for a request.
std::string chat_request_body(const LlmConfig& config, const ProposerRequest& request);

/// choices[0].message.content of a chat-completions reply, plus usage.
struct ChatReply {
  std::string content;
  std::optional<TokenUsage> usage;
};
ChatReply parse_chat_reply(const std::string& body);

class HttpChatProposer final : public Proposer {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  /// `limiter` may be shared between proposers talking to the same service;
  /// when null a private one sized by config.max_in_flight is created.
  explicit HttpChatProposer(LlmConfig config, std::shared_ptr<InFlightLimiter> limiter = nullptr,
                            std::uint64_t jitter_seed = 0);

  ProposerResponse propose(const ProposerRequest& request) override;
  [[nodiscard]] std::string backend_id() const override;

  /// Replaces the real sleep between retries (tests).
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

  struct CallStats {
    int attempts = 0;
    int retries = 0;
    std::vector<std::chrono::milliseconds> delays;
    int last_status = 0;
  };
  [[nodiscard]] CallStats last_call() const;
  [[nodiscard]] long tokens_used() const;

 private:
  LlmConfig config_;
  std::shared_ptr<InFlightLimiter> limiter_;
  Sleeper sleeper_;
  std::string scheme_host_;
  std::string path_;
  mutable std::mutex mutex_;
  std::mt19937_64 jitter_rng_;
  CallStats last_;
  long tokens_used_ = 0;
};

}  // namespace trussloop
