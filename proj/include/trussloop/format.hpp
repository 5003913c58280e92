#pragma once

#include <span>
#include <string>
#include <string_view>

#include "trussloop/model.hpp"

namespace trussloop {

// Dict-literal rendering used in prompts. Keys are single-quoted, nodes are
// 2-tuples, members 3-tuples, and numbers carry at most 6 significant digits
// with trailing zeros dropped. Output is deterministic and keeps map order.

std::string format_number(double value);
std::string format_string(std::string_view text);

std::string format_literal(const NodeMap& nodes);
std::string format_literal(const MemberMap& members);
/// Area tables, per-member stress and mass maps.
std::string format_literal(const OrderedMap<std::string, double>& values);
/// Polar loads render as (magnitude, direction); cartesian ones as (fx, fy).
std::string format_literal(std::span<const Load> loads);
std::string format_literal(std::span<const Support> supports);

/// A complete python code block (fenced) holding node_dict and member_dict,
/// one entry per line, with rationale comments when given.
std::string format_design_code(const TrussDesign& design, const Rationale* rationale = nullptr);

}  // namespace trussloop
