#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "test_support.hpp"
#include "trussloop/constraints.hpp"

using namespace trussloop;
using namespace testing_support;

namespace {

AnalysisResult fake_analysis(double mass, double max_stress) {
  AnalysisResult a;
  a.total_mass = mass;
  a.max_abs_stress = max_stress;
  a.max_stress_member = "m";
  a.member_stress.insert_or_assign("m", -max_stress);
  return a;
}

SolutionScore scored(double mass, double stress, const ConstraintSpec& spec, int iteration = 1) {
  SolutionScore s;
  s.iteration = iteration;
  s.analysis = fake_analysis(mass, stress);
  s.total_mass = mass;
  s.report = evaluate(*s.analysis, spec);
  return s;
}

}  // namespace

TEST(Evaluate, TriangleIsFeasibleForTask1Var3) {
  const auto spec = ConstraintSpec::max_stress(30, 30);
  const auto r = evaluate(solve(triangle_design(), triangle_problem()), spec);
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(r.mass_ok);
  EXPECT_TRUE(r.stress_ok);
  EXPECT_TRUE(r.ratio_ok);
  EXPECT_FALSE(r.ratio_applicable);
  EXPECT_NEAR(*r.max_abs_stress, std::numbers::sqrt2 / 2, 1e-9);
  EXPECT_NEAR(*r.mass_margin, 30 - (2 * std::numbers::sqrt2 + 2), 1e-12);
}

TEST(Evaluate, LimitsAreInclusive) {
  const auto spec = ConstraintSpec::max_stress(15, 30);
  EXPECT_TRUE(evaluate(fake_analysis(30, 15), spec).feasible);
  EXPECT_FALSE(evaluate(fake_analysis(std::nextafter(30.0, 31.0), 15), spec).mass_ok);
  EXPECT_FALSE(evaluate(fake_analysis(30, std::nextafter(15.0, 16.0)), spec).stress_ok);
}

TEST(Evaluate, SampleDesignTooHeavyForTask1) {
  const auto r = evaluate(solve(fig5_design(), task1_problem(15)), ConstraintSpec::max_stress(15, 30));
  EXPECT_FALSE(r.mass_ok);
  EXPECT_FALSE(r.feasible);
  EXPECT_LT(*r.mass_margin, 0);
}

TEST(Evaluate, StressToWeightRatio) {
  const auto spec = ConstraintSpec::stress_to_weight(0.5, 30);
  const auto ok = evaluate(fake_analysis(20, 10), spec);
  EXPECT_TRUE(ok.ratio_applicable);
  EXPECT_FALSE(ok.stress_applicable);
  EXPECT_DOUBLE_EQ(*ok.ratio_value, 0.5);
  EXPECT_TRUE(ok.feasible);
  const auto high = evaluate(fake_analysis(10, 10), spec);
  EXPECT_FALSE(high.ratio_ok);
  EXPECT_TRUE(high.mass_ok);
  const auto heavy = evaluate(fake_analysis(40, 1), spec);
  EXPECT_TRUE(heavy.ratio_ok);
  EXPECT_FALSE(heavy.feasible);
}

TEST(Evaluate, StressToWeightWithStressCap) {
  const auto spec = ConstraintSpec::stress_to_weight(1.0, 30, 5);
  const auto r = evaluate(fake_analysis(20, 10), spec);
  EXPECT_TRUE(r.ratio_ok);
  EXPECT_FALSE(r.stress_ok);
  EXPECT_FALSE(r.feasible);
}

TEST(Evaluate, ZeroMassHasNoRatio) {
  const auto r = evaluate(fake_analysis(0, 0), ConstraintSpec::stress_to_weight(0.5, 30));
  EXPECT_FALSE(r.ratio_value);
  EXPECT_FALSE(r.ratio_ok);
  EXPECT_FALSE(r.feasible);
}

TEST(Evaluate, UnsolvableKeepsMassButFailsEverything) {
  const auto spec = ConstraintSpec::max_stress(15, 30);
  SolutionMetrics m;
  m.mass.total = 12;
  m.failure = "structure is unstable (singular stiffness matrix)";
  const auto r = evaluate(m, spec);
  EXPECT_TRUE(r.unsolvable);
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(r.mass_ok);
  EXPECT_FALSE(r.stress_ok);
  EXPECT_EQ(*r.total_mass, 12);
  EXPECT_FALSE(r.max_abs_stress);
}

TEST(Evaluate, FeasibleIffAllApplicableChecksPass) {
  // Property over a grid: feasible == mass_ok && stress_ok && ratio_ok, and
  // the non-applicable checks are vacuously true.
  const ConstraintSpec specs[] = {ConstraintSpec::max_stress(15, 30), ConstraintSpec::stress_to_weight(0.75, 30),
                                  ConstraintSpec::stress_to_weight(0.75, 30, 12)};
  for (const auto& spec : specs) {
    for (double mass = 0.5; mass < 60; mass += 3.7) {
      for (double stress = 0; stress < 40; stress += 2.3) {
        const auto r = evaluate(fake_analysis(mass, stress), spec);
        EXPECT_EQ(r.feasible, r.mass_ok && r.stress_ok && r.ratio_ok);
        if (!r.stress_applicable) EXPECT_TRUE(r.stress_ok);
        if (!r.ratio_applicable) EXPECT_TRUE(r.ratio_ok);
        EXPECT_EQ(r.feasible, violation_measure(r, spec) == 0.0);
      }
    }
  }
}

TEST(ViolationMeasure, SumsRelativeExcess) {
  const auto spec = ConstraintSpec::max_stress(20, 30);
  EXPECT_DOUBLE_EQ(violation_measure(evaluate(fake_analysis(45, 30), spec), spec), 0.5 + 0.5);
  EXPECT_EQ(violation_measure(evaluate_unsolvable(spec), spec), std::numeric_limits<double>::infinity());
}

TEST(RanksBetter, LessViolationThenLessMass) {
  const auto spec = ConstraintSpec::max_stress(20, 30);
  const auto bad = scored(45, 30, spec);
  const auto better = scored(35, 30, spec);
  EXPECT_TRUE(ranks_better(better, bad, spec));
  EXPECT_FALSE(ranks_better(bad, better, spec));
  const auto feasible_heavy = scored(25, 10, spec);
  const auto feasible_light = scored(15, 19, spec);
  EXPECT_TRUE(ranks_better(feasible_light, feasible_heavy, spec));
  EXPECT_FALSE(ranks_better(feasible_heavy, feasible_heavy, spec));
  SolutionScore unsolved;
  unsolved.report = evaluate_unsolvable(spec);
  EXPECT_TRUE(ranks_better(bad, unsolved, spec));
  EXPECT_FALSE(ranks_better(unsolved, bad, spec));
}

TEST(FeedbackFields, SolvedDesign) {
  SolutionScore s;
  s.design = triangle_design();
  s.analysis = solve(s.design, triangle_problem());
  s.report = evaluate(*s.analysis, triangle_problem().constraints);
  const auto f = to_feedback_fields(s);
  EXPECT_EQ(f.generated_node_dict, "{'n1': (0, 0), 'n2': (2, 0), 'n3': (1, 1)}");
  EXPECT_EQ(f.generated_members_dict,
            "{'m1': ('n1', 'n3', '0'), 'm2': ('n2', 'n3', '0'), 'm3': ('n1', 'n2', '0')}");
  EXPECT_EQ(f.structure_mass, "4.82843");
  EXPECT_EQ(f.generated_max_stress, "-0.707107");
  EXPECT_EQ(f.max_member_stress, "m1");
  EXPECT_EQ(f.generated_stress, "{'m1': -0.707107, 'm2': -0.707107, 'm3': 0.5}");
  EXPECT_EQ(f.member_mass, "{'m1': 1.41421, 'm2': 1.41421, 'm3': 2}");
}

TEST(FeedbackFields, SentinelsWithoutAnalysis) {
  SolutionScore s;
  s.status = ScoreStatus::Unsolvable;
  s.design = triangle_design();
  s.total_mass = 3.5;
  auto f = to_feedback_fields(s);
  EXPECT_EQ(f.generated_max_stress, std::string(kUnstableSentinel));
  EXPECT_EQ(f.generated_stress, std::string(kUnstableSentinel));
  EXPECT_EQ(f.structure_mass, "3.5");
  EXPECT_EQ(f.max_member_stress, "none");
  s.status = ScoreStatus::ParseFailed;
  s.total_mass.reset();
  f = to_feedback_fields(s);
  EXPECT_EQ(f.structure_mass, "unknown");
  EXPECT_NE(f.generated_stress.find("could not be parsed"), std::string::npos);
}
