#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_support.hpp"
#include "trussloop/fem.hpp"

using namespace trussloop;
using namespace testing_support;

namespace {

AnalysisResult solve_truss(const RandomTruss& t, double E = 1.0) {
  return solve(t.design, default_area_table(), t.loads, t.supports, E);
}

ProblemSpec collinear_chain() {
  ProblemSpec p;
  p.given_nodes = {{"a", {0, 0}}, {"b", {1, 0}}, {"c", {2, 0}}};
  p.loads = {Load::cartesian("b", 0, -1)};
  p.supports = {{"a", SupportKind::Pinned, {}}, {"c", SupportKind::Roller, {}}};
  p.constraints = ConstraintSpec::max_stress(30, 30);
  return p;
}

TrussDesign collinear_chain_design() {
  TrussDesign d;
  d.nodes = {{"a", {0, 0}}, {"b", {1, 0}}, {"c", {2, 0}}};
  d.members = {{"ab", {"a", "b", "0"}}, {"bc", {"b", "c", "0"}}};
  return d;
}

}  // namespace

TEST(DofMap, NumbersNodesInDesignOrder) {
  const TrussDesign d = triangle_design();
  const auto p = triangle_problem();
  const DofMap dofs(d, p.supports);
  EXPECT_EQ(dofs.size(), 6u);
  EXPECT_EQ(dofs.index("n3", Axis::Y), 5u);
  EXPECT_EQ(dofs.constrained(), (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_EQ(dofs.free(), (std::vector<std::size_t>{2, 4, 5}));
  EXPECT_THROW((void)dofs.index("zz", Axis::X), UnloadableError);
}

TEST(Stiffness, SingleBarMatrix) {
  TrussDesign d;
  d.nodes = {{"a", {0, 0}}, {"b", {3, 4}}};
  d.members = {{"m", {"a", "b", "0"}}};
  const Eigen::MatrixXd K = assemble_stiffness(d, default_area_table(), 10.0);
  // EA/L = 2, direction (0.6, 0.8).
  EXPECT_NEAR(K(0, 0), 2 * 0.36, 1e-14);
  EXPECT_NEAR(K(0, 1), 2 * 0.48, 1e-14);
  EXPECT_NEAR(K(1, 1), 2 * 0.64, 1e-14);
  EXPECT_NEAR(K(0, 2), -2 * 0.36, 1e-14);
  EXPECT_TRUE(K.isApprox(K.transpose()));
}

TEST(Solve, TriangleMatchesJoints) {
  const auto r = solve(triangle_design(), triangle_problem());
  EXPECT_NEAR(r.member_stress.at("m1"), -std::numbers::sqrt2 / 2, 1e-9);
  EXPECT_NEAR(r.member_stress.at("m2"), -std::numbers::sqrt2 / 2, 1e-9);
  EXPECT_NEAR(r.member_stress.at("m3"), 0.5, 1e-9);
  EXPECT_NEAR(r.total_mass, 2 * std::numbers::sqrt2 + 2, 1e-12);
  EXPECT_NEAR(r.reactions.at("n1").y, 0.5, 1e-9);
  EXPECT_NEAR(r.reactions.at("n2").y, 0.5, 1e-9);
  EXPECT_NEAR(r.reactions.at("n1").x, 0.0, 1e-9);
}

TEST(Solve, TriangleTieBreakPicksSmallestId) {
  const auto r = solve(triangle_design(), triangle_problem());
  EXPECT_EQ(r.max_stress_member, "m1");
  EXPECT_NEAR(r.max_abs_stress, std::numbers::sqrt2 / 2, 1e-9);
  EXPECT_NEAR(r.extreme_stress(), -std::numbers::sqrt2 / 2, 1e-9);
}

TEST(Solve, SingleBarUnitStress) {
  TrussDesign d;
  d.nodes = {{"a", {0, 0}}, {"b", {1, 0}}};
  d.members = {{"m", {"a", "b", "0"}}};
  const std::vector<Support> supports{{"a", SupportKind::Pinned, {}}, {"b", SupportKind::Roller, {}}};
  const std::vector<Load> loads{Load::cartesian("b", 1, 0)};
  // Roller at b only holds y, so the x load pulls the bar.
  const auto r = solve(d, default_area_table(), loads, supports, 1.0);
  EXPECT_NEAR(r.member_stress.at("m"), 1.0, 1e-12);
  EXPECT_NEAR(r.member_force.at("m"), 1.0, 1e-12);
  EXPECT_NEAR(r.displacements.at("b").x, 1.0, 1e-12);
}

TEST(Solve, MatchesJointsOracleOnRandomDeterminateTrusses) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const RandomTruss t = random_truss(rng, 4 + trial % 7);
    const auto oracle = joints_oracle(t.design, default_area_table(), t.loads, t.supports);
    ASSERT_TRUE(oracle.determinate);
    const auto r = solve_truss(t);
    for (std::size_t k = 0; k < t.design.members.size(); ++k) {
      const auto& id = t.design.members.entry(k).first;
      EXPECT_NEAR(r.member_force.at(id), oracle.member_force[k], 1e-7 * std::max(1.0, std::abs(oracle.member_force[k])))
          << "trial " << trial << " member " << id;
    }
  }
}

TEST(Solve, EquilibriumAndReactionBalanceIncludingRedundantTrusses) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomTruss t = random_truss(rng, 4 + trial % 7, trial % 3);
    const auto r = solve_truss(t);
    const DofMap dofs(t.design, t.supports);
    const Eigen::MatrixXd K = assemble_stiffness(t.design, default_area_table(), 1.0);
    const Eigen::VectorXd f = assemble_loads(dofs, t.loads);
    Eigen::VectorXd u(dofs.size());
    for (std::size_t i = 0; i < dofs.node_count(); ++i) {
      const Vec2 v = r.displacements.at(dofs.node_at(i));
      u(2 * i) = v.x;
      u(2 * i + 1) = v.y;
    }
    const Eigen::VectorXd Ku = K * u;
    for (std::size_t dof : dofs.free()) {
      EXPECT_NEAR(Ku(dof), f(dof), 1e-9 * std::max(1.0, f.norm()));
    }
    double sx = 0, sy = 0;
    for (const auto& [id, v] : r.reactions) {
      sx += v.x;
      sy += v.y;
    }
    for (const auto& l : t.loads) {
      sx += l.fx();
      sy += l.fy();
    }
    EXPECT_NEAR(sx, 0.0, 1e-9);
    EXPECT_NEAR(sy, 0.0, 1e-9);
  }
}

TEST(Solve, StressIndependentOfModulusForDeterminateTrusses) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const RandomTruss t = random_truss(rng, 5);
    const auto a = solve_truss(t, 1.0);
    const auto b = solve_truss(t, 1000.0);
    for (const auto& [id, s] : a.member_stress) {
      EXPECT_NEAR(b.member_stress.at(id), s, 1e-9 * std::max(1.0, std::abs(s)));
    }
    for (const auto& [id, v] : a.displacements) {
      EXPECT_NEAR(b.displacements.at(id).x * 1000.0, v.x, 1e-8 * std::max(1.0, std::abs(v.x)));
    }
  }
}

TEST(Solve, Superposition) {
  std::mt19937_64 rng(21);
  const RandomTruss t = random_truss(rng, 7, 2);
  RandomTruss a = t, b = t, both = t;
  a.loads = {t.loads[0]};
  b.loads = {t.loads[1]};
  const auto ra = solve_truss(a);
  const auto rb = solve_truss(b);
  const auto rab = solve_truss(both);
  for (const auto& [id, s] : rab.member_stress) {
    EXPECT_NEAR(s, ra.member_stress.at(id) + rb.member_stress.at(id), 1e-9 * std::max(1.0, std::abs(s)));
  }
}

TEST(Solve, LinearInLoadScale) {
  std::mt19937_64 rng(3);
  RandomTruss t = random_truss(rng, 6, 1);
  const auto base = solve_truss(t);
  for (auto& l : t.loads) l = Load::cartesian(l.node(), -2.5 * l.fx(), -2.5 * l.fy());
  const auto scaled = solve_truss(t);
  for (const auto& [id, s] : base.member_stress) {
    EXPECT_NEAR(scaled.member_stress.at(id), -2.5 * s, 1e-9 * std::max(1.0, std::abs(s)));
  }
}

TEST(Solve, RotationByNinetyDegreesKeepsStresses) {
  std::mt19937_64 rng(13);
  const RandomTruss t = random_truss(rng, 6, 1);
  RandomTruss r = t;
  for (std::size_t i = 0; i < r.design.nodes.size(); ++i) {
    auto& p = r.design.nodes.at(r.design.nodes.entry(i).first);
    p = {-p.y, p.x};
  }
  for (auto& l : r.loads) l = Load::cartesian(l.node(), -l.fy(), l.fx());
  // The roller's track turns with the structure: it now holds x.
  r.supports[1].axes = Support::Axes{true, false};
  const auto a = solve_truss(t);
  const auto b = solve_truss(r);
  for (const auto& [id, s] : a.member_stress) {
    EXPECT_NEAR(b.member_stress.at(id), s, 1e-9 * std::max(1.0, std::abs(s)));
  }
}

TEST(Solve, SampleDesignUnderTask1Load) {
  const auto p = task1_problem(15);
  const auto r = solve(fig5_design(), p);
  EXPECT_NEAR(r.total_mass, 38.7856, 1e-4);
  double sum = 0;
  for (const auto& [id, m] : r.member_mass) sum += m;
  EXPECT_EQ(sum, r.total_mass);
  const auto oracle = joints_oracle(fig5_design(), p.area_table, p.loads, p.supports);
  if (oracle.determinate) {
    for (std::size_t k = 0; k < oracle.member_stress.size(); ++k) {
      EXPECT_NEAR(r.member_stress.entry(k).second, oracle.member_stress[k], 1e-9);
    }
  }
}

TEST(Mechanism, CollinearChainIsRejected) {
  const auto p = collinear_chain();
  try {
    (void)solve(collinear_chain_design(), p);
    FAIL() << "expected MechanismError";
  } catch (const MechanismError& e) {
    EXPECT_NE(std::string(e.what()).find("structure is unstable (singular stiffness matrix)"), std::string::npos);
  }
  const auto metrics = analyze(collinear_chain_design(), p);
  EXPECT_TRUE(metrics.unsolvable());
  EXPECT_NEAR(metrics.mass.total, 2.0, 1e-12);
  EXPECT_FALSE(metrics.failure.empty());
}

TEST(Mechanism, FreeHangingNodeIsRejected) {
  const auto p = task1_problem(30);
  TrussDesign d;
  d.nodes = p.given_nodes;
  d.members = {{"m1", {"node_1", "node_3", "2"}}, {"m2", {"node_3", "node_2", "2"}}};
  EXPECT_THROW((void)solve(d, p), MechanismError);
}

TEST(Mechanism, InsufficientSupportsAreRejected) {
  TrussDesign d = triangle_design();
  const std::vector<Support> rollers{{"n1", SupportKind::Roller, {}}, {"n2", SupportKind::Roller, {}}};
  const std::vector<Load> loads{Load::cartesian("n3", 1, -1)};
  EXPECT_THROW((void)solve(d, default_area_table(), loads, rollers, 1.0), MechanismError);
}

TEST(Solve, MissingLoadNodeIsUnloadable) {
  ProblemSpec p = triangle_problem();
  TrussDesign d = triangle_design();
  p.loads = {Load::cartesian("n9", 0, -1)};
  EXPECT_THROW((void)solve(d, p), UnloadableError);
}

TEST(Solve, DesignWithoutMembersHasZeroExtremes) {
  TrussDesign d;
  d.nodes = {{"n1", {0, 0}}, {"n2", {2, 0}}};
  const std::vector<Support> supports{{"n1", SupportKind::Pinned, {}}, {"n2", SupportKind::Pinned, {}}};
  const auto r = solve(d, default_area_table(), {}, supports, 1.0);
  EXPECT_TRUE(r.max_stress_member.empty());
  EXPECT_EQ(r.max_abs_stress, 0.0);
  EXPECT_EQ(r.total_mass, 0.0);
}
