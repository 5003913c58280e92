#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "trussloop/fem.hpp"
#include "trussloop/model.hpp"

namespace trussloop {

/// Placeholder text used wherever stresses would appear for an unstable design.
inline constexpr std::string_view kUnstableSentinel = "structure is unstable (singular stiffness matrix)";

struct ConstraintReport {
  bool feasible = false;
  bool mass_ok = false;
  bool stress_ok = false;  // true when no stress limit applies
  bool ratio_ok = false;   // true when no ratio target applies
  bool unsolvable = false;
  bool stress_applicable = false;
  bool ratio_applicable = false;

  std::optional<double> total_mass;
  std::optional<double> max_abs_stress;
  std::optional<double> mass_margin;    // max_mass - total_mass
  std::optional<double> stress_margin;  // stress limit - max_abs_stress
  std::optional<double> ratio_value;    // max_abs_stress / total_mass; absent when mass is 0
};

/// Checks a solved design. Limits are inclusive.
ConstraintReport evaluate(const AnalysisResult& analysis, const ConstraintSpec& constraints);
/// Report for an attempt without analysis (unstable, invalid or unparseable).
ConstraintReport evaluate_unsolvable(const ConstraintSpec& constraints);
ConstraintReport evaluate(const SolutionMetrics& metrics, const ConstraintSpec& constraints);

/// Sum of relative limit excesses (0 for feasible designs), infinity when
/// unsolvable. Used to rank attempts when naming the best so far.
double violation_measure(const ConstraintReport& report, const ConstraintSpec& constraints);

enum class ScoreStatus { Evaluated, Unsolvable, Invalid, ParseFailed };

std::string to_string(ScoreStatus status);

/// One evaluated proposal: the solution-score pair.
struct SolutionScore {
  int iteration = 0;
  ScoreStatus status = ScoreStatus::Evaluated;
  TrussDesign design;  // empty when the response did not parse
  std::optional<AnalysisResult> analysis;
  std::optional<double> total_mass;  // known for any design that validated
  ConstraintReport report;
  Rationale rationale;
  std::string defect;  // human-readable reason when status != Evaluated
};

/// True when `candidate` should replace `incumbent` as best so far.
bool ranks_better(const SolutionScore& candidate, const SolutionScore& incumbent,
                  const ConstraintSpec& constraints);

/// Values substituted into the feedback prompt.
struct FeedbackFields {
  std::string generated_node_dict;
  std::string generated_members_dict;
  std::string structure_mass;
  std::string generated_max_stress;  // signed stress of the extreme member
  std::string max_member_stress;     // that member's id
  std::string generated_stress;
  std::string member_mass;
};

FeedbackFields to_feedback_fields(const SolutionScore& score);

}  // namespace trussloop
