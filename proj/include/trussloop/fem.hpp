#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trussloop/model.hpp"

namespace trussloop {

/// The free-free stiffness block is singular or too ill-conditioned to trust:
/// the structure can move without straining its members.
class MechanismError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A load targets a node the design does not contain.
class UnloadableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Axis { X = 0, Y = 1 };

/// Global DOF numbering: node i in design order owns indices 2i (x) and 2i+1 (y).
class DofMap {
 public:
  DofMap(const TrussDesign& design, std::span<const Support> supports);

  [[nodiscard]] std::size_t size() const noexcept { return 2 * node_ids_.size(); }
  [[nodiscard]] std::size_t node_count() const noexcept { return node_ids_.size(); }
  [[nodiscard]] std::optional<std::size_t> node_index(const NodeId& id) const;
  /// Throws UnloadableError when the node is not part of the design.
  [[nodiscard]] std::size_t index(const NodeId& id, Axis axis) const;
  [[nodiscard]] const NodeId& node_at(std::size_t node_index) const { return node_ids_.at(node_index); }
  [[nodiscard]] const std::vector<std::size_t>& free() const noexcept { return free_; }
  [[nodiscard]] const std::vector<std::size_t>& constrained() const noexcept { return constrained_; }
  [[nodiscard]] bool is_constrained(std::size_t dof) const { return constrained_mask_.at(dof); }

 private:
  std::vector<NodeId> node_ids_;
  std::vector<std::size_t> free_;
  std::vector<std::size_t> constrained_;
  std::vector<bool> constrained_mask_;
};

/// Global 2n x 2n stiffness in DofMap order. Throws ModelError on a
/// zero-length member or an unknown area/endpoint.
Eigen::MatrixXd assemble_stiffness(const TrussDesign& design, const AreaTable& table,
                                   double elastic_modulus);

/// Global load vector in DofMap order.
Eigen::VectorXd assemble_loads(const DofMap& dofs, std::span<const Load> loads);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct AnalysisResult {
  OrderedMap<NodeId, Vec2> displacements;
  OrderedMap<MemberId, double> member_stress;  // tension positive
  OrderedMap<MemberId, double> member_force;   // stress * area
  OrderedMap<MemberId, double> member_mass;
  double total_mass = 0.0;
  OrderedMap<NodeId, Vec2> reactions;  // supported nodes only
  MemberId max_stress_member;          // empty when there are no members
  double max_abs_stress = 0.0;

  /// Signed stress of max_stress_member (0 when there are no members).
  [[nodiscard]] double extreme_stress() const;
};

struct SolverOptions {
  /// Smallest admissible LDLT pivot, relative to the largest diagonal of K_ff.
  double pivot_tolerance = 1e-10;
  /// Largest admissible condition-number estimate of K_ff.
  double max_condition = 1e12;
};

/// Direct stiffness solve with explicit loads and supports.
AnalysisResult solve(const TrussDesign& design, const AreaTable& table, std::span<const Load> loads,
                     std::span<const Support> supports, double elastic_modulus,
                     const SolverOptions& options = {});

AnalysisResult solve(const TrussDesign& design, const ProblemSpec& problem,
                     const SolverOptions& options = {});

/// Mass plus, when the structure is stable, the full analysis.
struct SolutionMetrics {
  MassBreakdown mass;
  std::optional<AnalysisResult> analysis;
  std::string failure;  // MechanismError text when unsolvable

  [[nodiscard]] bool unsolvable() const noexcept { return !analysis.has_value(); }
};

/// solve + total_mass in one call; a mechanism becomes an unsolvable record.
SolutionMetrics analyze(const TrussDesign& design, const ProblemSpec& problem,
                        const SolverOptions& options = {});

}  // namespace trussloop
