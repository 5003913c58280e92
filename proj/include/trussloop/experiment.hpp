#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trussloop/io.hpp"
#include "trussloop/loop.hpp"
#include "trussloop/prompt.hpp"
#include "trussloop/proposer.hpp"

namespace trussloop {

struct ExperimentCell {
  std::string label;
  ProblemSpec problem;
};

struct ExperimentConfig {
  std::vector<ExperimentCell> cells;
  int trials = 10;
  int parallelism = 1;
  std::uint64_t master_seed = 0;
  std::filesystem::path output_dir = "results";
  ProposerConfig proposer;
  /// Shared by every trial; problem and seed are filled in per trial.
  /// max_iterations <= 0 means "use the cell problem's own limit".
  RunConfig run_template;
  std::optional<std::filesystem::path> transcript;

  /// Throws ConfigError.
  void validate() const;
  /// Run configuration of one trial (1-based index).
  [[nodiscard]] RunConfig trial_config(const ExperimentCell& cell, int trial) const;
};

/// {"cells": [{"label": .., "problem": <object or path>}], "trials": 10, "parallelism": 1,
/// "master_seed": 0, "output_dir": "results", "proposer": {...}, "max_iterations": ..,
/// "parse_retry_limit": 2, "phase_policy": "auto", "history_full_k": 0, "system_text": "",
/// "temperature": 1.0, "transcript": null}
ExperimentConfig experiment_config_from_json(const Json& doc, const std::filesystem::path& base_dir);
Json to_json(const ExperimentConfig& config);

/// SHA-256 (hex) of the canonical config serialization.
std::string config_hash(const ExperimentConfig& config);

struct TrialRecord {
  std::string label;
  int trial = 0;  // 1-based
  std::uint64_t seed = 0;
  RunResult result;
};

struct IterationStats {
  std::size_t count = 0;
  std::optional<double> mean;  // absent for no values
  std::optional<double> std;   // sample std; absent for fewer than 2 values
};

/// Mean and sample standard deviation of integer samples, from exact integer
/// sums.
IterationStats iteration_stats(const std::vector<int>& values);

struct CellSummary {
  std::string label;
  int trials_requested = 0;
  int trials_run = 0;
  int successes = 0;
  double success_rate_percent = 0.0;  // over trials_run
  IterationStats successful;          // iterations_used of successful runs
  IterationStats all;                 // iterations_used of every run
  bool incomplete = false;
  std::string abort_reason;
};

struct ExperimentSummary {
  std::string config_hash;
  std::string backend_id;
  std::uint64_t master_seed = 0;
  std::vector<CellSummary> cells;
  std::vector<TrialRecord> records;  // cell order, then trial order
};

/// Builds the proposer of one trial.
using ProposerFactory =
    std::function<std::unique_ptr<Proposer>(const ExperimentCell& cell, int trial, std::uint64_t seed)>;

/// Backends from a ProposerConfig. The HTTP backend shares one in-flight
/// limiter across all trials. Replay: when the path is a directory holding
/// <label>/trial_<k>.json (or <label>/trial_<k>/), each trial gets its own
/// script; otherwise every trial replays the same script.
ProposerFactory make_proposer_factory(const ProposerConfig& config,
                                      std::shared_ptr<TranscriptLog> transcript = nullptr);

/// Runs every (cell, trial) on a bounded worker pool. A transport, auth or
/// budget failure skips the remaining trials of that cell, which is then
/// flagged incomplete.
ExperimentSummary run_experiment(const ExperimentConfig& config, const ProposerFactory& factory,
                                 const PromptLibrary& library);

/// Recomputes per-cell statistics from trial records.
std::vector<CellSummary> summarize(const ExperimentConfig& config, const std::vector<TrialRecord>& records,
                                   const std::vector<std::string>& abort_reasons);

Json to_json(const ExperimentSummary& summary, int trials_per_cell);
Json to_json(const TrialRecord& record);

inline constexpr const char* kSummaryCsvHeader =
    "label,trials_requested,trials_run,successes,success_rate_percent,iterations_mean_successful,"
    "iterations_std_successful,iterations_mean_all,iterations_std_all,incomplete";
inline constexpr const char* kTrajectoryCsvHeader =
    "label,trial,iteration,total_mass,max_abs_stress,ratio_value,feasible,unsolvable";

std::string summary_csv(const ExperimentSummary& summary);

struct TrajectorySet {
  std::string label;
  ConstraintSpec constraints;
  std::vector<std::pair<int, const RunResult*>> runs;  // (trial, result)
};

/// One row per attempt plus a leading "zone" row per cell holding the limits.
std::string export_trajectories(const std::vector<TrajectorySet>& sets);

/// Writes trials/<label>/trial_<k>.json, summary.json, summary.csv,
/// trajectories.csv and provenance.json under config.output_dir.
void write_experiment_outputs(const ExperimentConfig& config, const ExperimentSummary& summary,
                              const Json& provenance);

}  // namespace trussloop
