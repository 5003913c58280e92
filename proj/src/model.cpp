#include "trussloop/model.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <utility>

namespace trussloop {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw ModelError(std::string("non-finite ") + what);
}

bool close_enough(double a, double b, double tolerance) {
  return std::abs(a - b) <= tolerance * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

AreaTable default_area_table() {
  return AreaTable{{"0", 1.0},    {"1", 0.195},  {"2", 0.782},  {"3", 1.759},
                   {"4", 3.128},  {"5", 4.887},  {"6", 7.037},  {"7", 9.578},
                   {"8", 12.511}, {"9", 15.834}, {"10", 19.548}};
}

CartesianForce polar_to_cartesian(const PolarForce& polar) {
  require_finite(polar.magnitude, "load magnitude");
  require_finite(polar.direction_deg, "load direction");
  const double theta = polar.direction_deg * kDegToRad;
  return {polar.magnitude * std::cos(theta), polar.magnitude * std::sin(theta)};
}

PolarForce cartesian_to_polar(const CartesianForce& force) {
  require_finite(force.fx, "load component");
  require_finite(force.fy, "load component");
  return {std::hypot(force.fx, force.fy), std::atan2(force.fy, force.fx) / kDegToRad};
}

Load::Load(NodeId node, CartesianForce force, std::optional<PolarForce> polar)
    : node_(std::move(node)), force_(force), polar_(polar) {}

Load Load::polar(NodeId node, double magnitude, double direction_deg) {
  const PolarForce polar{magnitude, direction_deg};
  return Load(std::move(node), polar_to_cartesian(polar), polar);
}

Load Load::cartesian(NodeId node, double fx, double fy) {
  require_finite(fx, "load component");
  require_finite(fy, "load component");
  return Load(std::move(node), {fx, fy}, std::nullopt);
}

CartesianForce load_components(const Load& load) { return load.force(); }

std::string to_string(SupportKind kind) {
  return kind == SupportKind::Pinned ? "pinned" : "roller";
}

SupportKind support_kind_from_string(const std::string& text) {
  if (text == "pinned") return SupportKind::Pinned;
  if (text == "roller") return SupportKind::Roller;
  throw ModelError("unknown support type '" + text + "'");
}

std::string to_string(Task task) {
  return task == Task::MaxStress ? "max_stress" : "stress_to_weight";
}

Task task_from_string(const std::string& text) {
  if (text == "max_stress") return Task::MaxStress;
  if (text == "stress_to_weight") return Task::StressToWeight;
  throw ModelError("unknown task '" + text + "'");
}

ConstraintSpec ConstraintSpec::max_stress(double stress_limit, double mass_limit) {
  ConstraintSpec spec;
  spec.task = Task::MaxStress;
  spec.max_abs_stress = stress_limit;
  spec.max_mass = mass_limit;
  return spec;
}

ConstraintSpec ConstraintSpec::stress_to_weight(double ratio, double mass_limit,
                                                std::optional<double> stress_cap) {
  ConstraintSpec spec;
  spec.task = Task::StressToWeight;
  spec.ratio_target = ratio;
  spec.max_mass = mass_limit;
  spec.max_abs_stress = stress_cap;
  return spec;
}

void ConstraintSpec::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(max_mass)) throw ModelError("max_mass must be positive");
  if (max_abs_stress && !positive(*max_abs_stress)) {
    throw ModelError("max_abs_stress must be positive");
  }
  switch (task) {
    case Task::MaxStress:
      if (!max_abs_stress) throw ModelError("max_stress task requires max_abs_stress");
      if (ratio_target) throw ModelError("ratio_target is only valid for stress_to_weight");
      break;
    case Task::StressToWeight:
      if (!ratio_target) throw ModelError("stress_to_weight task requires ratio_target");
      if (!positive(*ratio_target)) throw ModelError("ratio_target must be positive");
      break;
  }
}

const Support* ProblemSpec::support_at(const NodeId& node) const {
  for (const auto& support : supports) {
    if (support.node == node) return &support;
  }
  return nullptr;
}

void ProblemSpec::validate() const {
  for (const auto& [id, point] : given_nodes) {
    if (id.empty()) throw ModelError("empty node id");
    require_finite(point.x, "node coordinate");
    require_finite(point.y, "node coordinate");
  }
  for (const auto& load : loads) {
    if (!given_nodes.contains(load.node())) {
      throw ModelError("load references unknown node '" + load.node() + "'");
    }
  }
  std::set<NodeId> supported;
  bool has_pinned = false;
  for (const auto& support : supports) {
    if (!given_nodes.contains(support.node)) {
      throw ModelError("support references unknown node '" + support.node + "'");
    }
    if (!supported.insert(support.node).second) {
      throw ModelError("more than one support on node '" + support.node + "'");
    }
    has_pinned = has_pinned || (support.fixes_x() && support.fixes_y());
  }
  if (supported.size() < 2 || !has_pinned) {
    throw ModelError("need at least two supported nodes including one pinned support");
  }
  if (area_table.empty()) throw ModelError("area table is empty");
  for (const auto& [id, area] : area_table) {
    if (id.empty()) throw ModelError("empty area id");
    if (!std::isfinite(area) || area <= 0.0) throw ModelError("area '" + id + "' must be positive");
  }
  constraints.validate();
  if (max_iterations < 1) throw ModelError("max_iterations must be at least 1");
  if (!std::isfinite(elastic_modulus) || elastic_modulus <= 0.0) {
    throw ModelError("elastic_modulus must be positive");
  }
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::MissingEndpoint: return "missing_endpoint";
    case ViolationKind::SelfMember: return "self_member";
    case ViolationKind::DuplicatePair: return "duplicate_pair";
    case ViolationKind::UnknownAreaId: return "unknown_area_id";
    case ViolationKind::MovedGivenNode: return "moved_given_node";
    case ViolationKind::DeletedGivenNode: return "deleted_given_node";
    case ViolationKind::ZeroLengthMember: return "zero_length_member";
    case ViolationKind::NonFiniteCoordinate: return "non_finite_coordinate";
    case ViolationKind::Disconnected: return "disconnected";
  }
  return "unknown";
}

bool ValidationReport::ok() const {
  for (const auto& v : violations) {
    if (v.severity == Severity::Error) return false;
  }
  return true;
}

std::size_t ValidationReport::count(ViolationKind kind) const {
  std::size_t n = 0;
  for (const auto& v : violations) n += v.kind == kind ? 1 : 0;
  return n;
}

std::vector<Violation> ValidationReport::errors() const {
  std::vector<Violation> out;
  for (const auto& v : violations) {
    if (v.severity == Severity::Error) out.push_back(v);
  }
  return out;
}

ValidationReport validate_design(const TrussDesign& design, const ProblemSpec& problem,
                                 const ValidateOptions& options) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, const std::string& subject, std::string detail,
                 Severity severity = Severity::Error) {
    report.violations.push_back({kind, severity, subject, std::move(detail)});
  };

  for (const auto& [id, point] : design.nodes) {
    if (!std::isfinite(point.x) || !std::isfinite(point.y)) {
      add(ViolationKind::NonFiniteCoordinate, id, "node " + id + " has a non-finite coordinate");
    }
  }

  for (const auto& [id, given] : problem.given_nodes) {
    const Point2* placed = design.nodes.find(id);
    if (placed == nullptr) {
      add(ViolationKind::DeletedGivenNode, id, "given node " + id + " is missing");
    } else if (!close_enough(placed->x, given.x, options.given_node_tolerance) ||
               !close_enough(placed->y, given.y, options.given_node_tolerance)) {
      add(ViolationKind::MovedGivenNode, id, "given node " + id + " was moved");
    }
  }

  std::set<std::pair<NodeId, NodeId>> pairs;
  for (const auto& [id, member] : design.members) {
    const Point2* a = design.nodes.find(member.a);
    const Point2* b = design.nodes.find(member.b);
    if (a == nullptr || b == nullptr) {
      const NodeId& missing = a == nullptr ? member.a : member.b;
      add(ViolationKind::MissingEndpoint, id, "member " + id + " references unknown node " + missing);
    }
    if (!problem.area_table.contains(member.area)) {
      add(ViolationKind::UnknownAreaId, id, "member " + id + " uses unknown area id " + member.area);
    }
    if (member.a == member.b) {
      add(ViolationKind::SelfMember, id, "member " + id + " connects " + member.a + " to itself");
      continue;
    }
    auto key = std::minmax(member.a, member.b);
    if (!pairs.emplace(key.first, key.second).second) {
      add(ViolationKind::DuplicatePair, id,
          "member " + id + " duplicates the connection " + member.a + "-" + member.b);
    }
    if (a != nullptr && b != nullptr && std::hypot(b->x - a->x, b->y - a->y) <= 1e-12) {
      add(ViolationKind::ZeroLengthMember, id, "member " + id + " has zero length");
    }
  }

  // Connectivity over nodes that exist; union-find on node indices.
  const std::size_t n = design.nodes.size();
  if (n > 1) {
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    auto index_of = [&](const NodeId& id) -> std::optional<std::size_t> {
      for (std::size_t i = 0; i < n; ++i) {
        if (design.nodes.entry(i).first == id) return i;
      }
      return std::nullopt;
    };
    auto root = [&](std::size_t i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    for (const auto& [id, member] : design.members) {
      auto ia = index_of(member.a);
      auto ib = index_of(member.b);
      if (ia && ib) parent[root(*ia)] = root(*ib);
    }
    std::set<std::size_t> components;
    for (std::size_t i = 0; i < n; ++i) components.insert(root(i));
    if (components.size() > 1) {
      add(ViolationKind::Disconnected, "",
          "the structure has " + std::to_string(components.size()) + " disconnected parts",
          options.strict_connectivity ? Severity::Error : Severity::Warning);
    }
  }
  return report;
}

double member_length(const TrussDesign& design, const MemberId& id) {
  const Member* member = design.members.find(id);
  if (member == nullptr) throw ModelError("unknown member '" + id + "'");
  const Point2* a = design.nodes.find(member->a);
  const Point2* b = design.nodes.find(member->b);
  if (a == nullptr || b == nullptr) throw ModelError("member '" + id + "' has a missing endpoint");
  return std::hypot(b->x - a->x, b->y - a->y);
}

MassBreakdown total_mass(const TrussDesign& design, const AreaTable& table) {
  MassBreakdown mass;
  for (const auto& [id, member] : design.members) {
    const double* area = table.find(member.area);
    if (area == nullptr) throw ModelError("member '" + id + "' uses unknown area id '" + member.area + "'");
    const double m = member_length(design, id) * *area;
    mass.per_member.insert_or_assign(id, m);
    mass.total += m;
  }
  return mass;
}

}  // namespace trussloop
