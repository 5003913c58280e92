#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trussloop/constraints.hpp"
#include "trussloop/model.hpp"

namespace trussloop {

struct ChatTurn {
  std::string role;  // "system", "user" or "assistant"
  std::string text;
};

struct ProposerRequest {
  std::string system_text;  // empty: no system message
  std::string user_text;
  std::vector<ChatTurn> conversation;  // earlier turns, oldest first
  double temperature = 1.0;
  std::optional<std::uint64_t> seed;
  /// Best attempt so far. Text-only backends ignore it; search baselines
  /// mutate it.
  const SolutionScore* best = nullptr;
};

struct TokenUsage {
  long prompt = 0;
  long completion = 0;
};

struct ProposerResponse {
  std::string raw_text;
  std::string backend_id;
  std::chrono::milliseconds latency{0};
  std::optional<TokenUsage> token_usage;
};

enum class ProposerErrorKind { Transport, Auth, ReplayExhausted, BudgetExceeded };

std::string to_string(ProposerErrorKind kind);

class ProposerError : public std::runtime_error {
 public:
  ProposerError(ProposerErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  [[nodiscard]] ProposerErrorKind kind() const noexcept { return kind_; }

 private:
  ProposerErrorKind kind_;
};

/// Anything that maps a prompt to candidate design text.
class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual ProposerResponse propose(const ProposerRequest& request) = 0;
  [[nodiscard]] virtual std::string backend_id() const = 0;
};

/// Returns scripted responses in order, then fails with ReplayExhausted.
class ReplayProposer final : public Proposer {
 public:
  explicit ReplayProposer(std::vector<std::string> script);

  /// A JSON array of strings, or a directory whose regular files (sorted by
  /// name) are the responses.
  static ReplayProposer load(const std::filesystem::path& path);

  ProposerResponse propose(const ProposerRequest& request) override;
  [[nodiscard]] std::string backend_id() const override { return "replay"; }
  [[nodiscard]] std::size_t remaining() const noexcept { return script_.size() - next_; }

 private:
  std::vector<std::string> script_;
  std::size_t next_ = 0;
};

/// One random move away from `state` (or a cold start when there is no
/// usable state), rendered as a python code block. Deterministic in
/// (state, problem, seed).
std::string baseline_propose(const SolutionScore* state, const ProblemSpec& problem, std::uint64_t seed);

/// Random-perturbation search: every call mutates the request's best design.
class BaselineProposer final : public Proposer {
 public:
  BaselineProposer(ProblemSpec problem, std::uint64_t seed);

  ProposerResponse propose(const ProposerRequest& request) override;
  [[nodiscard]] std::string backend_id() const override { return "baseline"; }

 private:
  ProblemSpec problem_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

/// Caps concurrent requests to a shared backend.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int max_in_flight);

  class Slot {
   public:
    explicit Slot(InFlightLimiter& owner) : owner_(&owner) {}
    Slot(Slot&& other) noexcept : owner_(std::exchange(other.owner_, nullptr)) {}
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;
    Slot& operator=(Slot&&) = delete;
    ~Slot() {
      if (owner_ != nullptr) owner_->release();
    }

   private:
    InFlightLimiter* owner_;
  };

  [[nodiscard]] Slot acquire();
  [[nodiscard]] int in_flight() const;
  [[nodiscard]] int peak() const;

 private:
  void release();

  const int max_;
  int current_ = 0;
  int peak_ = 0;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
};

/// Append-only JSON-lines log of every request and response. Thread-safe.
class TranscriptLog {
 public:
  explicit TranscriptLog(const std::filesystem::path& path);

  void record(const std::string& backend_id, const ProposerRequest& request, const ProposerResponse* response,
              const std::string& error);

 private:
  std::mutex mutex_;
  std::ofstream out_;
  std::uint64_t sequence_ = 0;
};

/// Mirrors every exchange of an inner proposer to a transcript.
class TranscriptingProposer final : public Proposer {
 public:
  TranscriptingProposer(std::unique_ptr<Proposer> inner, std::shared_ptr<TranscriptLog> log);

  ProposerResponse propose(const ProposerRequest& request) override;
  [[nodiscard]] std::string backend_id() const override { return inner_->backend_id(); }

 private:
  std::unique_ptr<Proposer> inner_;
  std::shared_ptr<TranscriptLog> log_;
};

}  // namespace trussloop
