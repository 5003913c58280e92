#include "trussloop/loop.hpp"

#include <stdexcept>

#include "trussloop/fem.hpp"
#include "trussloop/seed.hpp"

namespace trussloop {

std::string to_string(PhasePolicy policy) {
  switch (policy) {
    case PhasePolicy::SinglePhase: return "single_phase";
    case PhasePolicy::MassFirstThenRatio: return "mass_first_then_ratio";
    case PhasePolicy::Auto: return "auto";
  }
  return "auto";
}

PhasePolicy phase_policy_from_string(const std::string& text) {
  if (text == "single_phase") return PhasePolicy::SinglePhase;
  if (text == "mass_first_then_ratio") return PhasePolicy::MassFirstThenRatio;
  if (text == "auto") return PhasePolicy::Auto;
  throw std::invalid_argument("unknown phase policy '" + text + "'");
}

std::string to_string(Termination termination) {
  switch (termination) {
    case Termination::Feasible: return "feasible";
    case Termination::BudgetExhausted: return "budget_exhausted";
    case Termination::ProposerFailure: return "proposer_failure";
  }
  return "unknown";
}

PhaseState phase_controller(const PhaseState& current, const ConstraintReport& report, PhasePolicy policy) {
  if (policy != PhasePolicy::MassFirstThenRatio) return current;
  PhaseState next = current;
  if (current.phase == Phase::A) {
    if (!report.unsolvable && report.mass_ok) next.phase = Phase::B;
    next.mass_regressed = false;
  } else {
    next.mass_regressed = report.total_mass.has_value() && !report.mass_ok;
  }
  return next;
}

ConstraintFocus focus_for(PhasePolicy policy, Phase phase) {
  if (policy != PhasePolicy::MassFirstThenRatio) return ConstraintFocus::Full;
  return phase == Phase::A ? ConstraintFocus::MassFirst : ConstraintFocus::RatioKeepMass;
}

void RunConfig::validate() const {
  problem.validate();
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (parse_retry_limit < 0) throw std::invalid_argument("parse_retry_limit must be >= 0");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (phase_policy == PhasePolicy::MassFirstThenRatio && problem.constraints.task != Task::StressToWeight) {
    throw std::invalid_argument("mass_first_then_ratio applies only to stress_to_weight tasks");
  }
}

PhasePolicy RunConfig::resolved_policy() const {
  if (phase_policy != PhasePolicy::Auto) return phase_policy;
  return problem.constraints.task == Task::StressToWeight ? PhasePolicy::MassFirstThenRatio
                                                          : PhasePolicy::SinglePhase;
}

// ---------------------------------------------------------------- corrective text

namespace {

constexpr const char* kMemberForm =
    "Every member must be a 3-tuple ('node_a', 'node_b', 'area_id') with the area id given as a string key of the "
    "area table.";

}  // namespace

std::string handle_bad_proposal(const ParseError& error) {
  std::string text = "Your previous response could not be read (" + error.describe() +
                     "). Reply with one python code block that assigns node_dict = {'node_1': (x, y), ...} and "
                     "member_dict = {'member_1': ('node_a', 'node_b', 'area_id'), ...}. ";
  text += kMemberForm;
  return text;
}

std::string handle_bad_proposal(const ValidationReport& report) {
  std::string text = "Your previous structure is invalid and was not analyzed:";
  bool given_nodes_touched = false;
  bool bad_member = false;
  for (const Violation& v : report.errors()) {
    text += "\n- " + to_string(v.kind) + " (" + v.subject + "): " + v.detail;
    given_nodes_touched |= v.kind == ViolationKind::MovedGivenNode || v.kind == ViolationKind::DeletedGivenNode;
    bad_member |= v.kind == ViolationKind::MissingEndpoint || v.kind == ViolationKind::UnknownAreaId ||
                  v.kind == ViolationKind::SelfMember;
  }
  if (given_nodes_touched) text += "\nDO NOT modify the original given node positions.";
  if (bad_member) text += std::string("\n") + kMemberForm;
  return text;
}

std::string handle_bad_proposal(const MechanismError& error) {
  return std::string("Your previous structure could not carry the load: ") + error.what() +
         ". The stiffness matrix is singular, so the structure is a mechanism. Triangulate it: every node needs at "
         "least two non-collinear members and the supports must prevent rigid-body motion.";
}

// ---------------------------------------------------------------- scoring

SolutionScore score_design(TrussDesign design, Rationale rationale, int iteration, const ProblemSpec& problem,
                           std::string* corrective) {
  SolutionScore score;
  score.iteration = iteration;
  score.design = std::move(design);
  score.rationale = std::move(rationale);
  auto set_corrective = [&](std::string text) {
    if (corrective != nullptr) *corrective = std::move(text);
  };

  const ValidationReport validation = validate_design(score.design, problem);
  if (!validation.ok()) {
    score.status = ScoreStatus::Invalid;
    const auto errors = validation.errors();
    score.defect = to_string(errors.front().kind) + " (" + errors.front().subject + "): " + errors.front().detail;
    score.report = evaluate_unsolvable(problem.constraints);
    set_corrective(handle_bad_proposal(validation));
    return score;
  }

  SolutionMetrics metrics;
  try {
    metrics = analyze(score.design, problem);
  } catch (const UnloadableError& e) {
    score.status = ScoreStatus::Invalid;
    score.defect = e.what();
    score.report = evaluate_unsolvable(problem.constraints);
    set_corrective(std::string("Your previous structure is invalid: ") + e.what() +
                   "\nDO NOT modify the original given node positions.");
    return score;
  }
  score.total_mass = metrics.mass.total;
  score.report = evaluate(metrics, problem.constraints);
  if (metrics.unsolvable()) {
    score.status = ScoreStatus::Unsolvable;
    score.defect = metrics.failure;
    set_corrective(handle_bad_proposal(MechanismError(metrics.failure)));
    return score;
  }
  score.status = ScoreStatus::Evaluated;
  score.analysis = std::move(metrics.analysis);
  return score;
}

SolutionScore score_response(const std::string& raw, int iteration, const ProblemSpec& problem,
                             std::string* corrective) {
  auto parsed = parse_response(raw);
  if (const auto* error = std::get_if<ParseError>(&parsed)) {
    SolutionScore score;
    score.iteration = iteration;
    score.status = ScoreStatus::ParseFailed;
    score.defect = error->describe();
    score.report = evaluate_unsolvable(problem.constraints);
    if (corrective != nullptr) *corrective = handle_bad_proposal(*error);
    return score;
  }
  auto& response = std::get<ParsedResponse>(parsed);
  return score_design(std::move(response.design), std::move(response.rationale), iteration, problem, corrective);
}

// ---------------------------------------------------------------- loop

RunResult run(const RunConfig& config, Proposer& proposer, const PromptLibrary& library) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const PhasePolicy policy = config.resolved_policy();
  const ProblemSpec& problem = config.problem;

  RunResult result;
  result.backend_id = proposer.backend_id();
  PhaseState phase;
  std::string corrective;
  std::optional<std::size_t> best;      // best solved attempt, index into the trajectory
  std::optional<std::size_t> fallback;  // latest validated design, used until something solves

  for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
    RenderOptions options{focus_for(policy, phase.phase), config.example_members};
    std::string prompt;
    if (result.trajectory.empty()) {
      prompt = render_initial(library, problem, options);
    } else {
      RenderContext context;
      context.problem = &problem;
      context.latest = &result.trajectory.back();
      context.history = std::span<const SolutionScore>(result.trajectory.data(), result.trajectory.size() - 1);
      context.options = options;
      context.history_full_k = config.history_full_k;
      context.mass_regressed = phase.mass_regressed;
      context.corrective = corrective;
      prompt = render_feedback(library, context);
      ++result.feedback_prompts;
    }

    SolutionScore score;
    bool proposer_failed = false;
    std::string retry_note;
    for (int attempt = 0; attempt <= config.parse_retry_limit; ++attempt) {
      ProposerRequest request;
      request.system_text = config.system_text;
      request.user_text = retry_note.empty() ? prompt : prompt + "\n\n" + retry_note;
      request.temperature = config.temperature;
      request.seed = mix_seed(config.seed, static_cast<std::uint64_t>(iteration) * 64 + attempt);
      const auto state = best ? best : fallback;
      request.best = state ? &result.trajectory[*state] : nullptr;
      ProposerResponse response;
      try {
        ++result.proposer_calls;
        response = proposer.propose(request);
      } catch (const ProposerError& e) {
        result.failure_kind = e.kind();
        result.failure_detail = e.what();
        proposer_failed = true;
        break;
      }
      result.proposer_latency += response.latency;
      score = score_response(response.raw_text, iteration, problem, &corrective);
      if (score.status != ScoreStatus::ParseFailed) break;
      retry_note = corrective;
    }
    if (proposer_failed) {
      result.termination = Termination::ProposerFailure;
      break;
    }
    if (score.status == ScoreStatus::Evaluated) corrective.clear();

    result.phases.push_back(phase.phase);
    result.trajectory.push_back(std::move(score));
    const SolutionScore& latest = result.trajectory.back();
    if (latest.analysis &&
        (!best || ranks_better(latest, result.trajectory[*best], problem.constraints))) {
      best = result.trajectory.size() - 1;
    }
    if (latest.status == ScoreStatus::Unsolvable) fallback = result.trajectory.size() - 1;

    if (latest.report.feasible) {
      result.termination = Termination::Feasible;
      result.succeeded = true;
      result.final = latest;
      break;
    }

    const Phase before = phase.phase;
    phase = phase_controller(phase, latest.report, policy);
    if (before == Phase::A && phase.phase == Phase::B) result.phase_b_from = iteration + 1;
  }

  result.iterations_used = static_cast<int>(result.trajectory.size());
  result.wall_time =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return result;
}

}  // namespace trussloop
