#include "trussloop/fem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace trussloop {
namespace {

struct ElementGeometry {
  double length;
  double c;
  double s;
};

ElementGeometry geometry(const TrussDesign& design, const MemberId& id, const Member& member) {
  const Point2* a = design.nodes.find(member.a);
  const Point2* b = design.nodes.find(member.b);
  if (a == nullptr || b == nullptr) throw ModelError("member '" + id + "' has a missing endpoint");
  const double dx = b->x - a->x;
  const double dy = b->y - a->y;
  const double length = std::hypot(dx, dy);
  if (!(length > 0.0)) throw ModelError("member '" + id + "' has zero length");
  return {length, dx / length, dy / length};
}

double area_of(const AreaTable& table, const MemberId& id, const Member& member) {
  const double* area = table.find(member.area);
  if (area == nullptr) throw ModelError("member '" + id + "' uses unknown area id '" + member.area + "'");
  return *area;
}

}  // namespace

DofMap::DofMap(const TrussDesign& design, std::span<const Support> supports) {
  node_ids_.reserve(design.nodes.size());
  for (const auto& [id, point] : design.nodes) node_ids_.push_back(id);
  constrained_mask_.assign(size(), false);
  for (const auto& support : supports) {
    auto node = node_index(support.node);
    if (!node) continue;  // a support on an absent node constrains nothing
    if (support.fixes_x()) constrained_mask_[2 * *node] = true;
    if (support.fixes_y()) constrained_mask_[2 * *node + 1] = true;
  }
  for (std::size_t dof = 0; dof < size(); ++dof) {
    (constrained_mask_[dof] ? constrained_ : free_).push_back(dof);
  }
}

std::optional<std::size_t> DofMap::node_index(const NodeId& id) const {
  for (std::size_t i = 0; i < node_ids_.size(); ++i) {
    if (node_ids_[i] == id) return i;
  }
  return std::nullopt;
}

std::size_t DofMap::index(const NodeId& id, Axis axis) const {
  auto node = node_index(id);
  if (!node) throw UnloadableError("node '" + id + "' is not part of the design");
  return 2 * *node + static_cast<std::size_t>(axis);
}

Eigen::MatrixXd assemble_stiffness(const TrussDesign& design, const AreaTable& table,
                                   double elastic_modulus) {
  const DofMap dofs(design, {});
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(dofs.size(), dofs.size());
  for (const auto& [id, member] : design.members) {
    const auto [length, c, s] = geometry(design, id, member);
    const double axial = elastic_modulus * area_of(table, id, member) / length;
    Eigen::Matrix2d block;
    block << c * c, c * s, c * s, s * s;
    block *= axial;
    const std::size_t ia = 2 * *dofs.node_index(member.a);
    const std::size_t ib = 2 * *dofs.node_index(member.b);
    k.block<2, 2>(ia, ia) += block;
    k.block<2, 2>(ib, ib) += block;
    k.block<2, 2>(ia, ib) -= block;
    k.block<2, 2>(ib, ia) -= block;
  }
  return k;
}

Eigen::VectorXd assemble_loads(const DofMap& dofs, std::span<const Load> loads) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(dofs.size());
  for (const auto& load : loads) {
    f[dofs.index(load.node(), Axis::X)] += load.fx();
    f[dofs.index(load.node(), Axis::Y)] += load.fy();
  }
  return f;
}

double AnalysisResult::extreme_stress() const {
  if (max_stress_member.empty()) return 0.0;
  return member_stress.at(max_stress_member);
}

AnalysisResult solve(const TrussDesign& design, const AreaTable& table, std::span<const Load> loads,
                     std::span<const Support> supports, double elastic_modulus,
                     const SolverOptions& options) {
  const DofMap dofs(design, supports);
  const Eigen::MatrixXd k = assemble_stiffness(design, table, elastic_modulus);
  const Eigen::VectorXd f = assemble_loads(dofs, loads);

  const auto& free = dofs.free();
  const auto& fixed = dofs.constrained();
  const auto nf = static_cast<Eigen::Index>(free.size());
  const auto nc = static_cast<Eigen::Index>(fixed.size());

  Eigen::MatrixXd k_ff(nf, nf);
  Eigen::VectorXd f_f(nf);
  for (Eigen::Index i = 0; i < nf; ++i) {
    f_f[i] = f[free[i]];
    for (Eigen::Index j = 0; j < nf; ++j) k_ff(i, j) = k(free[i], free[j]);
  }

  Eigen::VectorXd u_f = Eigen::VectorXd::Zero(nf);
  if (nf > 0) {
    const double largest_diagonal = k_ff.diagonal().maxCoeff();
    if (!(largest_diagonal > 0.0)) throw MechanismError("structure is unstable: no stiffness on free DOFs");
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(k_ff);
    const double smallest_pivot = ldlt.vectorD().cwiseAbs().minCoeff();
    if (ldlt.info() != Eigen::Success || smallest_pivot < options.pivot_tolerance * largest_diagonal) {
      // The DOF whose diagonal is smallest is usually the one left unbraced.
      Eigen::Index weakest = 0;
      k_ff.diagonal().minCoeff(&weakest);
      const std::size_t dof = free[static_cast<std::size_t>(weakest)];
      std::ostringstream msg;
      msg << "structure is unstable (singular stiffness matrix); weakest free DOF is "
          << dofs.node_at(dof / 2) << (dof % 2 == 0 ? ".x" : ".y");
      throw MechanismError(msg.str());
    }
    const double rcond = ldlt.rcond();
    if (!(rcond * options.max_condition >= 1.0)) {
      std::ostringstream msg;
      msg << "structure is unstable (stiffness condition estimate " << (rcond > 0 ? 1.0 / rcond : INFINITY)
          << " exceeds " << options.max_condition << ")";
      throw MechanismError(msg.str());
    }
    u_f = ldlt.solve(f_f);
  }

  Eigen::VectorXd u = Eigen::VectorXd::Zero(dofs.size());
  for (Eigen::Index i = 0; i < nf; ++i) u[free[i]] = u_f[i];

  AnalysisResult result;
  for (std::size_t n = 0; n < dofs.node_count(); ++n) {
    result.displacements.insert_or_assign(dofs.node_at(n), Vec2{u[2 * n], u[2 * n + 1]});
  }

  // r_c = K_cf u_f - f_c
  Eigen::VectorXd r_c = Eigen::VectorXd::Zero(nc);
  for (Eigen::Index i = 0; i < nc; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < nf; ++j) sum += k(fixed[i], free[j]) * u_f[j];
    r_c[i] = sum - f[fixed[i]];
  }
  for (const auto& support : supports) {
    auto node = dofs.node_index(support.node);
    if (!node) continue;
    Vec2 reaction;
    for (Eigen::Index i = 0; i < nc; ++i) {
      if (fixed[i] == 2 * *node) reaction.x = r_c[i];
      if (fixed[i] == 2 * *node + 1) reaction.y = r_c[i];
    }
    result.reactions.insert_or_assign(support.node, reaction);
  }

  for (const auto& [id, member] : design.members) {
    const auto [length, c, s] = geometry(design, id, member);
    const double area = area_of(table, id, member);
    const std::size_t ia = 2 * *dofs.node_index(member.a);
    const std::size_t ib = 2 * *dofs.node_index(member.b);
    const double elongation = -c * u[ia] - s * u[ia + 1] + c * u[ib] + s * u[ib + 1];
    const double stress = elastic_modulus / length * elongation;
    result.member_stress.insert_or_assign(id, stress);
    result.member_force.insert_or_assign(id, stress * area);
    const double mass = length * area;
    result.member_mass.insert_or_assign(id, mass);
    result.total_mass += mass;
  }

  // Largest |stress|; near-ties (1e-12 relative) go to the smallest member id
  // so feedback text does not depend on rounding noise.
  double largest = 0.0;
  for (const auto& [id, stress] : result.member_stress) largest = std::max(largest, std::abs(stress));
  // Zero-force members come out as round-off (~1e-16 of the largest); clear them.
  for (std::size_t i = 0; i < result.member_stress.size(); ++i) {
    const MemberId& id = result.member_stress.entry(i).first;
    if (std::abs(result.member_stress.at(id)) <= largest * 1e-12) {
      result.member_stress.at(id) = 0.0;
      result.member_force.at(id) = 0.0;
    }
  }
  for (const auto& [id, stress] : result.member_stress) {
    if (std::abs(stress) >= largest * (1.0 - 1e-12) &&
        (result.max_stress_member.empty() || id < result.max_stress_member)) {
      result.max_stress_member = id;
    }
  }
  if (!result.max_stress_member.empty()) {
    result.max_abs_stress = std::abs(result.member_stress.at(result.max_stress_member));
  }
  return result;
}

AnalysisResult solve(const TrussDesign& design, const ProblemSpec& problem, const SolverOptions& options) {
  for (const auto& load : problem.loads) {
    if (!design.nodes.contains(load.node())) {
      throw UnloadableError("load targets node '" + load.node() + "' which the design does not contain");
    }
  }
  return solve(design, problem.area_table, problem.loads, problem.supports, problem.elastic_modulus,
               options);
}

SolutionMetrics analyze(const TrussDesign& design, const ProblemSpec& problem, const SolverOptions& options) {
  SolutionMetrics metrics;
  metrics.mass = total_mass(design, problem.area_table);
  try {
    metrics.analysis = solve(design, problem, options);
  } catch (const MechanismError& e) {
    metrics.failure = e.what();
  }
  return metrics;
}

}  // namespace trussloop
