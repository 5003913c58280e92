#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trussloop/ordered_map.hpp"

namespace trussloop {

using NodeId = std::string;
using MemberId = std::string;
using AreaId = std::string;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

using NodeMap = OrderedMap<NodeId, Point2>;

/// Cross-section table keyed by area id. Order is the catalogue order.
using AreaTable = OrderedMap<AreaId, double>;

/// The eleven-entry catalogue used by every benchmark task.
AreaTable default_area_table();

struct CartesianForce {
  double fx = 0.0;
  double fy = 0.0;
};

/// Signed magnitude and direction in degrees, counterclockwise from +x.
struct PolarForce {
  double magnitude = 0.0;
  double direction_deg = 0.0;
};

CartesianForce polar_to_cartesian(const PolarForce& polar);
PolarForce cartesian_to_polar(const CartesianForce& force);

/// Point load on a node. A polar load is converted to components once, at
/// construction; the polar form is kept only so prompts can echo it back.
class Load {
 public:
  static Load polar(NodeId node, double magnitude, double direction_deg);
  static Load cartesian(NodeId node, double fx, double fy);

  [[nodiscard]] const NodeId& node() const noexcept { return node_; }
  [[nodiscard]] double fx() const noexcept { return force_.fx; }
  [[nodiscard]] double fy() const noexcept { return force_.fy; }
  [[nodiscard]] const CartesianForce& force() const noexcept { return force_; }
  [[nodiscard]] const std::optional<PolarForce>& polar_form() const noexcept { return polar_; }

 private:
  Load(NodeId node, CartesianForce force, std::optional<PolarForce> polar);

  NodeId node_;
  CartesianForce force_;
  std::optional<PolarForce> polar_;
};

CartesianForce load_components(const Load& load);

enum class SupportKind { Pinned, Roller };

struct Support {
  NodeId node;
  SupportKind kind = SupportKind::Pinned;
  // Explicit fixed axes; overrides the kind. Used to express rollers on a
  // vertical track.
  struct Axes {
    bool x = false;
    bool y = false;
  };
  std::optional<Axes> axes;

  [[nodiscard]] bool fixes_x() const noexcept { return axes ? axes->x : kind == SupportKind::Pinned; }
  [[nodiscard]] bool fixes_y() const noexcept { return axes ? axes->y : true; }
};

std::string to_string(SupportKind kind);
SupportKind support_kind_from_string(const std::string& text);

enum class Task { MaxStress, StressToWeight };

std::string to_string(Task task);
Task task_from_string(const std::string& text);

struct ConstraintSpec {
  Task task = Task::MaxStress;
  /// Required for MaxStress; an optional extra cap for StressToWeight.
  std::optional<double> max_abs_stress;
  /// StressToWeight only: upper bound on max|stress| / total mass.
  std::optional<double> ratio_target;
  double max_mass = 0.0;

  static ConstraintSpec max_stress(double stress_limit, double mass_limit);
  static ConstraintSpec stress_to_weight(double ratio, double mass_limit,
                                         std::optional<double> stress_cap = std::nullopt);

  /// Throws ModelError when a limit is missing, misplaced or not positive.
  void validate() const;
};

struct ProblemSpec {
  NodeMap given_nodes;
  std::vector<Load> loads;
  std::vector<Support> supports;
  AreaTable area_table = default_area_table();
  ConstraintSpec constraints;
  int max_iterations = 30;
  double elastic_modulus = 1.0;

  /// Throws ModelError on any broken invariant.
  void validate() const;
  [[nodiscard]] const Support* support_at(const NodeId& node) const;
};

struct Member {
  NodeId a;
  NodeId b;
  AreaId area;

  friend bool operator==(const Member&, const Member&) = default;
};

using MemberMap = OrderedMap<MemberId, Member>;

struct TrussDesign {
  NodeMap nodes;
  MemberMap members;

  friend bool operator==(const TrussDesign&, const TrussDesign&) = default;
};

/// Comments a proposer attached to individual nodes and members.
struct Rationale {
  OrderedMap<NodeId, std::string> nodes;
  OrderedMap<MemberId, std::string> members;

  [[nodiscard]] std::size_t size() const noexcept { return nodes.size() + members.size(); }
  friend bool operator==(const Rationale&, const Rationale&) = default;
};

enum class ViolationKind {
  MissingEndpoint,
  SelfMember,
  DuplicatePair,
  UnknownAreaId,
  MovedGivenNode,
  DeletedGivenNode,
  ZeroLengthMember,
  NonFiniteCoordinate,
  Disconnected,
};

enum class Severity { Error, Warning };

std::string to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  Severity severity = Severity::Error;
  std::string subject;  // offending node or member id
  std::string detail;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  /// True when no violation has Error severity.
  [[nodiscard]] bool ok() const;
  [[nodiscard]] std::size_t count(ViolationKind kind) const;
  [[nodiscard]] std::vector<Violation> errors() const;

  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

struct ValidateOptions {
  /// Promote a disconnected member graph from warning to error.
  bool strict_connectivity = false;
  /// Given nodes may drift by this much (relative to max(1, |coordinate|))
  /// before they count as moved; covers the 6-significant-digit echo.
  double given_node_tolerance = 1e-6;
};

ValidationReport validate_design(const TrussDesign& design, const ProblemSpec& problem,
                                 const ValidateOptions& options = {});

/// Euclidean length. Throws ModelError for an unknown member or endpoint.
double member_length(const TrussDesign& design, const MemberId& id);

struct MassBreakdown {
  OrderedMap<MemberId, double> per_member;
  double total = 0.0;
};

/// Sum of length times area over all members, in member order.
/// Throws ModelError on an unknown area id or endpoint.
MassBreakdown total_mass(const TrussDesign& design, const AreaTable& table);

}  // namespace trussloop
