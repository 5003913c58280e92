#include "trussloop/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trussloop/format.hpp"

namespace trussloop {

ConstraintReport evaluate(const AnalysisResult& analysis, const ConstraintSpec& constraints) {
  ConstraintReport report;
  report.total_mass = analysis.total_mass;
  report.max_abs_stress = analysis.max_abs_stress;
  report.mass_margin = constraints.max_mass - analysis.total_mass;
  report.mass_ok = analysis.total_mass <= constraints.max_mass;

  report.stress_applicable = constraints.max_abs_stress.has_value();
  report.stress_ok = true;
  if (report.stress_applicable) {
    report.stress_margin = *constraints.max_abs_stress - analysis.max_abs_stress;
    report.stress_ok = analysis.max_abs_stress <= *constraints.max_abs_stress;
  }

  if (analysis.total_mass > 0.0) report.ratio_value = analysis.max_abs_stress / analysis.total_mass;

  report.ratio_applicable = constraints.task == Task::StressToWeight;
  report.ratio_ok = true;
  if (report.ratio_applicable) {
    report.ratio_ok = report.ratio_value.has_value() && *report.ratio_value <= *constraints.ratio_target;
  }

  report.feasible = report.mass_ok && report.stress_ok && report.ratio_ok;
  return report;
}

ConstraintReport evaluate_unsolvable(const ConstraintSpec& constraints) {
  ConstraintReport report;
  report.unsolvable = true;
  report.stress_applicable = constraints.max_abs_stress.has_value();
  report.ratio_applicable = constraints.task == Task::StressToWeight;
  return report;
}

ConstraintReport evaluate(const SolutionMetrics& metrics, const ConstraintSpec& constraints) {
  if (metrics.analysis) return evaluate(*metrics.analysis, constraints);
  ConstraintReport report = evaluate_unsolvable(constraints);
  report.total_mass = metrics.mass.total;
  return report;
}

double violation_measure(const ConstraintReport& report, const ConstraintSpec& constraints) {
  if (report.unsolvable || !report.total_mass) return std::numeric_limits<double>::infinity();
  double excess = std::max(0.0, *report.total_mass / constraints.max_mass - 1.0);
  if (report.stress_applicable && report.max_abs_stress) {
    excess += std::max(0.0, *report.max_abs_stress / *constraints.max_abs_stress - 1.0);
  }
  if (report.ratio_applicable) {
    if (!report.ratio_value) return std::numeric_limits<double>::infinity();
    excess += std::max(0.0, *report.ratio_value / *constraints.ratio_target - 1.0);
  }
  return excess;
}

std::string to_string(ScoreStatus status) {
  switch (status) {
    case ScoreStatus::Evaluated: return "evaluated";
    case ScoreStatus::Unsolvable: return "unsolvable";
    case ScoreStatus::Invalid: return "invalid";
    case ScoreStatus::ParseFailed: return "parse_failed";
  }
  return "unknown";
}

bool ranks_better(const SolutionScore& candidate, const SolutionScore& incumbent,
                  const ConstraintSpec& constraints) {
  const double a = violation_measure(candidate.report, constraints);
  const double b = violation_measure(incumbent.report, constraints);
  if (a != b) return a < b;
  // Equal standing: the lighter design wins; otherwise keep the incumbent.
  if (candidate.report.total_mass && incumbent.report.total_mass) {
    return *candidate.report.total_mass < *incumbent.report.total_mass;
  }
  return false;
}

FeedbackFields to_feedback_fields(const SolutionScore& score) {
  FeedbackFields fields;
  fields.generated_node_dict = format_literal(score.design.nodes);
  fields.generated_members_dict = format_literal(score.design.members);
  if (score.analysis) {
    const AnalysisResult& a = *score.analysis;
    fields.structure_mass = format_number(a.total_mass);
    fields.generated_max_stress = format_number(a.extreme_stress());
    fields.max_member_stress = a.max_stress_member;
    fields.generated_stress = format_literal(a.member_stress);
    fields.member_mass = format_literal(a.member_mass);
    return fields;
  }
  std::string unavailable(kUnstableSentinel);
  if (score.status == ScoreStatus::Invalid) unavailable = "not analyzed (the design is invalid)";
  if (score.status == ScoreStatus::ParseFailed) unavailable = "not analyzed (the response could not be parsed)";
  fields.structure_mass = score.total_mass ? format_number(*score.total_mass) : "unknown";
  fields.generated_max_stress = unavailable;
  fields.max_member_stress = "none";
  fields.generated_stress = unavailable;
  fields.member_mass = unavailable;
  return fields;
}

}  // namespace trussloop
