#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trussloop/constraints.hpp"
#include "trussloop/model.hpp"

namespace trussloop {

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A prompt asset: a body plus named sections, each with `{placeholder}` slots.
class PromptTemplate {
 public:
  /// Parses the asset text format (see assets/prompts/initial.txt).
  static PromptTemplate parse(std::string name, const std::string& text);
  static PromptTemplate load(const std::filesystem::path& path);

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] const std::string& body() const { return section("body"); }
  [[nodiscard]] bool has_section(const std::string& section) const { return sections_.contains(section); }
  /// Throws PromptError when the section does not exist.
  [[nodiscard]] const std::string& section(const std::string& section) const;

  /// Substitutes every `{name}` in `text` in a single pass; substituted
  /// values are not rescanned. Throws PromptError on an unknown placeholder.
  static std::string substitute(const std::string& text, const std::map<std::string, std::string>& values);
  /// Placeholder names used by `text`, in order of first appearance.
  static std::vector<std::string> placeholders(const std::string& text);

 private:
  std::string name_;
  std::map<std::string, std::string> sections_;
};

class PromptLibrary {
 public:
  PromptLibrary(PromptTemplate initial, PromptTemplate feedback);

  /// Loads initial.txt and feedback.txt from `dir`.
  static PromptLibrary load(const std::filesystem::path& dir);
  /// $TRUSSLOOP_PROMPT_DIR when set, otherwise the assets shipped with the build.
  static std::filesystem::path default_dir();

  [[nodiscard]] const PromptTemplate& initial() const noexcept { return initial_; }
  [[nodiscard]] const PromptTemplate& feedback() const noexcept { return feedback_; }

 private:
  PromptTemplate initial_;
  PromptTemplate feedback_;
};

/// Which constraint sentence a prompt states.
enum class ConstraintFocus {
  Full,           // every constraint of the task
  MassFirst,      // stress-to-weight task, mass phase
  RatioKeepMass,  // stress-to-weight task, ratio phase
};

inline constexpr const char* kDefaultExampleMembers =
    "{'member_1': ('node_1', 'node_2', '4'), 'member_2': ('node_2', 'node_3', '2')}";

struct RenderOptions {
  ConstraintFocus focus = ConstraintFocus::Full;
  std::string example_members = kDefaultExampleMembers;
};

std::string render_initial(const PromptLibrary& library, const ProblemSpec& problem,
                           const RenderOptions& options = {});

struct RenderContext {
  const ProblemSpec* problem = nullptr;
  const SolutionScore* latest = nullptr;
  /// Earlier attempts, oldest first; the latest is not repeated here.
  std::span<const SolutionScore> history;
  RenderOptions options;
  /// Inline the full dicts of this many best earlier attempts.
  std::size_t history_full_k = 0;
  /// Ratio phase only: the latest attempt broke the mass limit again.
  bool mass_regressed = false;
  /// Appended verbatim after everything else (defect explanations).
  std::string corrective;
};

/// Throws PromptError when `latest` or `problem` is missing.
std::string render_feedback(const PromptLibrary& library, const RenderContext& context);

/// One compact "previous attempts" line for a score.
std::string history_line(const SolutionScore& score);

}  // namespace trussloop
