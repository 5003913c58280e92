#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "trussloop/constraints.hpp"
#include "trussloop/fem.hpp"
#include "trussloop/http_proposer.hpp"
#include "trussloop/loop.hpp"
#include "trussloop/model.hpp"
#include "trussloop/response_parser.hpp"

namespace trussloop {

using Json = nlohmann::ordered_json;

/// Version of every JSON document this library writes.
inline constexpr int kSchemaVersion = 1;

/// Bad or missing configuration. Maps to exit code 2 on the command line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Problem: {"given_nodes": {"node_1": [0, 0]}, "loads": [{"node": .., "magnitude": .., "direction_deg": ..}
// or {"node": .., "fx": .., "fy": ..}], "supports": [{"node": .., "kind": "pinned"}] or {"node_1": "pinned"},
// "area_table": {"0": 1}, "constraints": {"task": .., "max_abs_stress": .., "ratio_target": .., "max_mass": ..},
// "max_iterations": 30, "elastic_modulus": 1}
ProblemSpec problem_from_json(const Json& doc);
Json to_json(const ProblemSpec& problem);

// Design: {"nodes": {"node_1": [0, 0]}, "members": {"member_1": ["node_1", "node_2", "4"]}}
TrussDesign design_from_json(const Json& doc);
Json to_json(const TrussDesign& design);
Json to_json(const Rationale& rationale);

Json to_json(const AnalysisResult& analysis);
Json to_json(const ConstraintReport& report);
Json to_json(const SolutionScore& score);
/// Rebuilds design, rationale, iteration and status. Analysis and report
/// are recomputed by the caller from the design.
SolutionScore score_from_json(const Json& doc);
Json to_json(const ParseError& error);

/// Timing fields vary between executions and are left out unless asked for,
/// so that the canonical form is reproducible.
Json to_json(const RunResult& result, bool include_timing = false);

enum class ProposerKind { Llm, Replay, Baseline };

std::string to_string(ProposerKind kind);
ProposerKind proposer_kind_from_string(const std::string& text);

struct ProposerConfig {
  ProposerKind kind = ProposerKind::Baseline;
  LlmConfig llm;
  /// Replay script: a JSON array file or a directory of text files. For
  /// experiments a directory of per-trial scripts is also accepted (see
  /// experiment.hpp).
  std::filesystem::path replay;
};

ProposerConfig proposer_config_from_json(const Json& doc, const std::filesystem::path& base_dir);
Json to_json(const ProposerConfig& config);

struct RunFile {
  RunConfig run;
  ProposerConfig proposer;
};

/// {"problem": <problem object or path>, "proposer": {...}, "max_iterations": ..,
/// "parse_retry_limit": .., "seed": .., "phase_policy": "auto", "history_full_k": 0,
/// "system_text": "", "temperature": 1.0}. Relative paths resolve against base_dir.
RunFile run_file_from_json(const Json& doc, const std::filesystem::path& base_dir);
Json to_json(const RunConfig& config);

}  // namespace trussloop
