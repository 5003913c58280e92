#include "trussloop/prompt.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "trussloop/format.hpp"

#ifndef TRUSSLOOP_PROMPT_DIR
#define TRUSSLOOP_PROMPT_DIR "assets/prompts"
#endif

namespace trussloop {
namespace {

bool is_placeholder_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Length of the placeholder name starting at text[open + 1], 0 if none.
std::size_t placeholder_length(const std::string& text, std::size_t open) {
  std::size_t j = open + 1;
  while (j < text.size() && is_placeholder_char(text[j])) ++j;
  if (j == open + 1 || j >= text.size() || text[j] != '}') return 0;
  return j - open - 1;
}

std::string clause_name(Task task, ConstraintFocus focus) {
  if (task == Task::MaxStress) return "max_stress";
  switch (focus) {
    case ConstraintFocus::Full: return "ratio";
    case ConstraintFocus::MassFirst: return "mass_first";
    case ConstraintFocus::RatioKeepMass: return "ratio_keep_mass";
  }
  return "ratio";
}

// Problem-level placeholder values shared by both prompts.
std::map<std::string, std::string> problem_values(const ProblemSpec& problem) {
  const ConstraintSpec& c = problem.constraints;
  std::map<std::string, std::string> values{
      {"given_node_dict", format_literal(problem.given_nodes)},
      {"load", format_literal(std::span<const Load>(problem.loads))},
      {"supports", format_literal(std::span<const Support>(problem.supports))},
      {"area_id", format_literal(problem.area_table)},
      {"max_allow_structure_mass", format_number(c.max_mass)},
  };
  if (c.max_abs_stress) {
    values["max_stress_all"] = format_number(*c.max_abs_stress);
    values["max_allow_stress"] = format_number(*c.max_abs_stress);
  }
  if (c.ratio_target) values["ratio_target"] = format_number(*c.ratio_target);
  return values;
}

std::string constraint_clause(const PromptTemplate& tmpl, const ProblemSpec& problem, ConstraintFocus focus,
                              const std::map<std::string, std::string>& values) {
  const ConstraintSpec& c = problem.constraints;
  std::string clause = PromptTemplate::substitute(tmpl.section("clause " + clause_name(c.task, focus)), values);
  if (c.task == Task::StressToWeight && c.max_abs_stress && focus != ConstraintFocus::MassFirst) {
    clause += " " + PromptTemplate::substitute(tmpl.section("clause stress_cap"), values);
  }
  return clause;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PromptError("cannot read prompt template " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string name, const std::string& text) {
  PromptTemplate tmpl;
  tmpl.name_ = std::move(name);
  std::istringstream in(text);
  std::string line;
  std::string current;
  std::string content;
  bool in_header = true;
  auto flush = [&] {
    if (current.empty()) return;
    if (!content.empty() && content.back() == '\n') content.pop_back();
    tmpl.sections_[current] = content;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.starts_with("=== ") && line.ends_with(" ===") && line.size() > 8) {
      flush();
      current = line.substr(4, line.size() - 8);
      content.clear();
      in_header = false;
      continue;
    }
    if (in_header) continue;  // comment or blank lines before the first marker
    content += line + "\n";
  }
  flush();
  if (!tmpl.sections_.contains("body")) throw PromptError("prompt template '" + tmpl.name_ + "' has no body section");
  return tmpl;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  return parse(path.stem().string(), read_file(path));
}

const std::string& PromptTemplate::section(const std::string& section) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) throw PromptError("prompt template '" + name_ + "' has no section '" + section + "'");
  return it->second;
}

std::string PromptTemplate::substitute(const std::string& text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size() * 2);
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '{') {
      if (const std::size_t len = placeholder_length(text, i)) {
        const std::string key = text.substr(i + 1, len);
        auto it = values.find(key);
        if (it == values.end()) throw PromptError("unresolved placeholder {" + key + "}");
        out += it->second;
        i += len + 2;
        continue;
      }
    }
    out += text[i++];
  }
  return out;
}

std::vector<std::string> PromptTemplate::placeholders(const std::string& text) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    if (const std::size_t len = placeholder_length(text, i)) {
      std::string key = text.substr(i + 1, len);
      if (std::find(names.begin(), names.end(), key) == names.end()) names.push_back(std::move(key));
    }
  }
  return names;
}

PromptLibrary::PromptLibrary(PromptTemplate initial, PromptTemplate feedback)
    : initial_(std::move(initial)), feedback_(std::move(feedback)) {}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  return PromptLibrary(PromptTemplate::load(dir / "initial.txt"), PromptTemplate::load(dir / "feedback.txt"));
}

std::filesystem::path PromptLibrary::default_dir() {
  if (const char* env = std::getenv("TRUSSLOOP_PROMPT_DIR"); env != nullptr && *env != '\0') return env;
  return TRUSSLOOP_PROMPT_DIR;
}

std::string render_initial(const PromptLibrary& library, const ProblemSpec& problem, const RenderOptions& options) {
  const PromptTemplate& tmpl = library.initial();
  auto values = problem_values(problem);
  values["example_members"] = options.example_members;
  values["constraint_clause"] = constraint_clause(tmpl, problem, options.focus, values);
  return PromptTemplate::substitute(tmpl.body(), values);
}

std::string history_line(const SolutionScore& score) {
  std::ostringstream line;
  line << "- iteration " << score.iteration << ": ";
  switch (score.status) {
    case ScoreStatus::ParseFailed:
      line << "no structure (the response could not be parsed)";
      return line.str();
    case ScoreStatus::Invalid:
      line << "invalid structure (" << score.defect << ")";
      return line.str();
    default:
      break;
  }
  line << "mass " << (score.total_mass ? format_number(*score.total_mass) : std::string("unknown"))
       << ", max stress "
       << (score.analysis ? format_number(score.analysis->extreme_stress()) : std::string("unstable"))
       << ", feasible " << (score.report.feasible ? "yes" : "no");
  return line.str();
}

std::string render_feedback(const PromptLibrary& library, const RenderContext& context) {
  if (context.problem == nullptr) throw PromptError("feedback rendering needs a problem");
  if (context.latest == nullptr) throw PromptError("feedback rendering needs the latest attempt");
  const PromptTemplate& tmpl = library.feedback();
  const ProblemSpec& problem = *context.problem;
  const SolutionScore& latest = *context.latest;

  auto values = problem_values(problem);
  const FeedbackFields fields = to_feedback_fields(latest);
  values["generated_node_dict"] = fields.generated_node_dict;
  values["generated_members_dict"] = fields.generated_members_dict;
  values["structure_mass"] = fields.structure_mass;
  values["generated_max_stress"] = fields.generated_max_stress;
  values["max_member_stress"] = fields.max_member_stress;
  values["generated_stress"] = fields.generated_stress;
  values["member_mass"] = fields.member_mass;
  values["constraint_clause"] = constraint_clause(tmpl, problem, context.options.focus, values);

  std::string text = PromptTemplate::substitute(tmpl.body(), values);
  if (tmpl.has_section("reminder")) {
    values["initial_clause"] = constraint_clause(library.initial(), problem, context.options.focus, values);
    text += "\n" + PromptTemplate::substitute(tmpl.section("reminder"), values);
  }

  if (!context.history.empty()) {
    text += "\n\n" + PromptTemplate::substitute(tmpl.section("history"), values);
    for (const auto& score : context.history) text += "\n" + history_line(score);

    // Best over every attempt including the latest; only solved ones qualify.
    const SolutionScore* best = nullptr;
    auto consider = [&](const SolutionScore& s) {
      if (!s.analysis) return;
      if (best == nullptr || ranks_better(s, *best, problem.constraints)) best = &s;
    };
    for (const auto& score : context.history) consider(score);
    consider(latest);
    if (best != nullptr) {
      values["best_iteration"] = std::to_string(best->iteration);
      values["best_mass"] = format_number(best->analysis->total_mass);
      values["best_max_stress"] = format_number(best->analysis->max_abs_stress);
      text += "\n\n" + PromptTemplate::substitute(tmpl.section("best"), values);
    }

    if (context.history_full_k > 0) {
      std::vector<const SolutionScore*> solved;
      for (const auto& score : context.history) {
        if (score.analysis) solved.push_back(&score);
      }
      std::stable_sort(solved.begin(), solved.end(), [&](const SolutionScore* a, const SolutionScore* b) {
        return ranks_better(*a, *b, problem.constraints);
      });
      solved.resize(std::min(solved.size(), context.history_full_k));
      for (const SolutionScore* s : solved) {
        text += "\n\nIteration " + std::to_string(s->iteration) +
                " structure: node_dict = " + format_literal(s->design.nodes) +
                ", member_dict = " + format_literal(s->design.members);
      }
    }
  }

  if (context.mass_regressed) text += "\n\n" + PromptTemplate::substitute(tmpl.section("mass_regression"), values);
  if (!context.corrective.empty()) text += "\n\n" + context.corrective;
  return text;
}

}  // namespace trussloop
