#include "trussloop/format.hpp"

#include <cmath>
#include <cstdio>

namespace trussloop {
namespace {

std::string tuple(std::initializer_list<std::string> parts) {
  std::string out = "(";
  bool first = true;
  for (const auto& part : parts) {
    if (!first) out += ", ";
    out += part;
    first = false;
  }
  return out + ")";
}

template <typename Map, typename Render>
std::string dict(const Map& map, Render render) {
  std::string out = "{";
  bool first = true;
  for (const auto& [key, value] : map) {
    if (!first) out += ", ";
    out += format_string(key) + ": " + render(value);
    first = false;
  }
  return out + "}";
}

std::string one_line(std::string_view text) {
  std::string out;
  for (char ch : text) out += (ch == '\n' || ch == '\r') ? ' ' : ch;
  return out;
}

}  // namespace

std::string format_number(double value) {
  if (value == 0.0) return "0";  // also folds -0
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.6g", value);
  return buffer;
}

std::string format_string(std::string_view text) {
  std::string out = "'";
  for (char ch : text) {
    if (ch == '\'' || ch == '\\') out += '\\';
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out += ch;
  }
  return out + "'";
}

std::string format_literal(const NodeMap& nodes) {
  return dict(nodes, [](const Point2& p) { return tuple({format_number(p.x), format_number(p.y)}); });
}

std::string format_literal(const MemberMap& members) {
  return dict(members, [](const Member& m) {
    return tuple({format_string(m.a), format_string(m.b), format_string(m.area)});
  });
}

std::string format_literal(const OrderedMap<std::string, double>& values) {
  return dict(values, [](double v) { return format_number(v); });
}

std::string format_literal(std::span<const Load> loads) {
  std::string out = "{";
  bool first = true;
  for (const auto& load : loads) {
    if (!first) out += ", ";
    first = false;
    out += format_string(load.node()) + ": ";
    if (const auto& polar = load.polar_form()) {
      out += tuple({format_number(polar->magnitude), format_number(polar->direction_deg)});
    } else {
      out += tuple({format_number(load.fx()), format_number(load.fy())});
    }
  }
  return out + "}";
}

std::string format_literal(std::span<const Support> supports) {
  std::string out = "{";
  bool first = true;
  for (const auto& support : supports) {
    if (!first) out += ", ";
    first = false;
    out += format_string(support.node) + ": " + format_string(to_string(support.kind));
  }
  return out + "}";
}

std::string format_design_code(const TrussDesign& design, const Rationale* rationale) {
  std::string out = "```python\nnode_dict = {\n";
  for (const auto& [id, p] : design.nodes) {
    out += "    " + format_string(id) + ": " + tuple({format_number(p.x), format_number(p.y)}) + ",";
    if (rationale != nullptr) {
      if (const std::string* note = rationale->nodes.find(id)) out += "  # " + one_line(*note);
    }
    out += "\n";
  }
  out += "}\nmember_dict = {\n";
  for (const auto& [id, m] : design.members) {
    out += "    " + format_string(id) + ": " +
           tuple({format_string(m.a), format_string(m.b), format_string(m.area)}) + ",";
    if (rationale != nullptr) {
      if (const std::string* note = rationale->members.find(id)) out += "  # " + one_line(*note);
    }
    out += "\n";
  }
  out += "}\n```\n";
  return out;
}

}  // namespace trussloop
