#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trussloop/constraints.hpp"
#include "trussloop/model.hpp"
#include "trussloop/prompt.hpp"
#include "trussloop/proposer.hpp"
#include "trussloop/response_parser.hpp"

namespace trussloop {

enum class PhasePolicy {
  SinglePhase,
  MassFirstThenRatio,
  Auto,  // MassFirstThenRatio for stress-to-weight tasks, SinglePhase otherwise
};

std::string to_string(PhasePolicy policy);
PhasePolicy phase_policy_from_string(const std::string& text);

enum class Phase { A, B };

struct PhaseState {
  Phase phase = Phase::A;
  /// Phase B only: the latest attempt is over the mass limit again.
  bool mass_regressed = false;

  friend bool operator==(const PhaseState&, const PhaseState&) = default;
};

/// Next phase after an evaluated attempt. SinglePhase leaves the state alone;
/// under MassFirstThenRatio the first solvable attempt meeting the mass limit
/// moves A to B, and B never goes back. `policy` must already be resolved
/// (not Auto).
PhaseState phase_controller(const PhaseState& current, const ConstraintReport& report, PhasePolicy policy);

/// Prompt emphasis for a phase.
ConstraintFocus focus_for(PhasePolicy policy, Phase phase);

struct RunConfig {
  ProblemSpec problem;
  int max_iterations = 30;
  int parse_retry_limit = 2;  // extra proposals per iteration after a parse failure
  std::uint64_t seed = 0;
  PhasePolicy phase_policy = PhasePolicy::Auto;
  std::size_t history_full_k = 0;
  std::string system_text;
  double temperature = 1.0;
  std::string example_members = kDefaultExampleMembers;

  /// Throws std::invalid_argument (or ModelError from the problem).
  void validate() const;
  /// phase_policy with Auto replaced by the task's default.
  [[nodiscard]] PhasePolicy resolved_policy() const;
};

enum class Termination { Feasible, BudgetExhausted, ProposerFailure };

std::string to_string(Termination termination);

struct RunResult {
  bool succeeded = false;
  int iterations_used = 0;
  std::vector<SolutionScore> trajectory;
  std::optional<SolutionScore> final;
  Termination termination = Termination::BudgetExhausted;
  std::chrono::milliseconds wall_time{0};
  std::chrono::milliseconds proposer_latency{0};  // summed over all calls
  int feedback_prompts = 0;
  int proposer_calls = 0;
  std::string backend_id;
  /// First iteration run in phase B (two-phase policy only).
  std::optional<int> phase_b_from;
  /// Phase each trajectory entry was proposed in.
  std::vector<Phase> phases;
  std::optional<ProposerErrorKind> failure_kind;
  std::string failure_detail;
};

/// Corrective paragraphs appended to the next feedback prompt.
std::string handle_bad_proposal(const ParseError& error);
std::string handle_bad_proposal(const ValidationReport& report);
std::string handle_bad_proposal(const MechanismError& error);

/// Validates, analyzes and checks an already parsed design.
SolutionScore score_design(TrussDesign design, Rationale rationale, int iteration, const ProblemSpec& problem,
                           std::string* corrective = nullptr);

/// Evaluates one raw response: parse, validate, analyze, check constraints.
/// `corrective` receives feedback text when the attempt is unusable.
SolutionScore score_response(const std::string& raw, int iteration, const ProblemSpec& problem,
                             std::string* corrective = nullptr);

/// The generate / evaluate / meta-prompt cycle. Strictly sequential.
RunResult run(const RunConfig& config, Proposer& proposer, const PromptLibrary& library);

}  // namespace trussloop
