#include "trussloop/experiment.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "trussloop/http_proposer.hpp"
#include "trussloop/seed.hpp"

namespace trussloop {
namespace {

std::string trial_name(int trial) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%02d", trial);
  return buf;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string csv_optional(const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); }

Json stats_json(const IterationStats& s) {
  Json out;
  out["count"] = s.count;
  out["mean"] = s.mean ? Json(*s.mean) : Json(nullptr);
  out["std"] = s.std ? Json(*s.std) : Json(nullptr);
  return out;
}

bool is_outage(ProposerErrorKind kind) { return kind != ProposerErrorKind::ReplayExhausted; }

}  // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (cells.empty()) throw ConfigError("experiment needs at least one cell");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  std::set<std::string> labels;
  for (const auto& cell : cells) {
    if (cell.label.empty()) throw ConfigError("cell labels must be non-empty");
    if (cell.label.find_first_of("/\\,\"\n") != std::string::npos) {
      throw ConfigError("cell label '" + cell.label + "' contains a reserved character");
    }
    if (!labels.insert(cell.label).second) throw ConfigError("duplicate cell label '" + cell.label + "'");
    try {
      trial_config(cell, 1).validate();
    } catch (const std::exception& e) {
      throw ConfigError("cell " + cell.label + ": " + e.what());
    }
  }
}

RunConfig ExperimentConfig::trial_config(const ExperimentCell& cell, int trial) const {
  RunConfig run = run_template;
  run.problem = cell.problem;
  if (run.max_iterations <= 0) run.max_iterations = cell.problem.max_iterations;
  run.seed = derive_trial_seed(master_seed, cell.label, static_cast<std::uint64_t>(trial));
  return run;
}

ExperimentConfig experiment_config_from_json(const Json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig config;
  try {
    const auto cells = doc.find("cells");
    if (cells == doc.end() || !cells->is_array()) throw ConfigError("experiment config needs a \"cells\" array");
    for (const auto& cell : *cells) {
      ExperimentCell c;
      c.label = cell.at("label").get<std::string>();
      const Json& problem = cell.at("problem");
      if (problem.is_string()) {
        std::filesystem::path p = problem.get<std::string>();
        c.problem = problem_from_json(read_json_file(p.is_absolute() ? p : base_dir / p));
      } else {
        c.problem = problem_from_json(problem);
      }
      config.cells.push_back(std::move(c));
    }
    config.trials = doc.value("trials", config.trials);
    config.parallelism = doc.value("parallelism", config.parallelism);
    if (doc.contains("master_seed")) {
      const Json& s = doc["master_seed"];
      if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
        throw ConfigError("master_seed must be a non-negative integer");
      }
      config.master_seed = s.get<std::uint64_t>();
    }
    if (doc.contains("output_dir")) {
      std::filesystem::path p = doc["output_dir"].get<std::string>();
      config.output_dir = p.is_absolute() ? p : base_dir / p;
    }
    config.proposer = proposer_config_from_json(doc.value("proposer", Json()), base_dir);
    RunConfig& run = config.run_template;
    run.max_iterations = doc.value("max_iterations", 0);
    run.parse_retry_limit = doc.value("parse_retry_limit", run.parse_retry_limit);
    run.phase_policy = phase_policy_from_string(doc.value("phase_policy", std::string("auto")));
    run.history_full_k = doc.value("history_full_k", run.history_full_k);
    run.system_text = doc.value("system_text", run.system_text);
    run.temperature = doc.value("temperature", config.proposer.llm.temperature);
    run.example_members = doc.value("example_members", run.example_members);
    if (doc.contains("transcript") && !doc["transcript"].is_null()) {
      std::filesystem::path p = doc["transcript"].get<std::string>();
      config.transcript = p.is_absolute() ? p : base_dir / p;
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  config.validate();
  return config;
}

Json to_json(const ExperimentConfig& c) {
  Json out;
  Json cells = Json::array();
  for (const auto& cell : c.cells) cells.push_back({{"label", cell.label}, {"problem", to_json(cell.problem)}});
  out["cells"] = std::move(cells);
  out["trials"] = c.trials;
  out["master_seed"] = c.master_seed;
  out["proposer"] = to_json(c.proposer);
  out["max_iterations"] = c.run_template.max_iterations;
  out["parse_retry_limit"] = c.run_template.parse_retry_limit;
  out["phase_policy"] = to_string(c.run_template.phase_policy);
  out["history_full_k"] = c.run_template.history_full_k;
  out["system_text"] = c.run_template.system_text;
  out["temperature"] = c.run_template.temperature;
  out["example_members"] = c.run_template.example_members;
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  // Output location and parallelism do not change results and are left out.
  const std::string canonical = to_json(config).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

// ---------------------------------------------------------------- statistics

IterationStats iteration_stats(const std::vector<int>& values) {
  IterationStats s;
  s.count = values.size();
  if (values.empty()) return s;
  long long sum = 0;
  long long sum_sq = 0;
  for (int v : values) {
    sum += v;
    sum_sq += static_cast<long long>(v) * v;
  }
  const auto n = static_cast<long long>(values.size());
  s.mean = static_cast<double>(sum) / static_cast<double>(n);
  if (n >= 2) {
    const long long numerator = n * sum_sq - sum * sum;  // exact, >= 0
    s.std = std::sqrt(static_cast<double>(numerator) / static_cast<double>(n * (n - 1)));
  }
  return s;
}

std::vector<CellSummary> summarize(const ExperimentConfig& config, const std::vector<TrialRecord>& records,
                                   const std::vector<std::string>& abort_reasons) {
  std::vector<CellSummary> cells;
  for (std::size_t c = 0; c < config.cells.size(); ++c) {
    CellSummary cell;
    cell.label = config.cells[c].label;
    cell.trials_requested = config.trials;
    std::vector<int> successful;
    std::vector<int> all;
    for (const auto& r : records) {
      if (r.label != cell.label) continue;
      ++cell.trials_run;
      all.push_back(r.result.iterations_used);
      if (r.result.succeeded) {
        ++cell.successes;
        successful.push_back(r.result.iterations_used);
      }
    }
    cell.success_rate_percent =
        cell.trials_run == 0 ? 0.0 : 100.0 * cell.successes / static_cast<double>(cell.trials_run);
    cell.successful = iteration_stats(successful);
    cell.all = iteration_stats(all);
    if (c < abort_reasons.size()) cell.abort_reason = abort_reasons[c];
    cell.incomplete = !cell.abort_reason.empty() || cell.trials_run < cell.trials_requested;
    cells.push_back(std::move(cell));
  }
  return cells;
}

// ---------------------------------------------------------------- execution

ProposerFactory make_proposer_factory(const ProposerConfig& config, std::shared_ptr<TranscriptLog> transcript) {
  std::shared_ptr<InFlightLimiter> limiter;
  if (config.kind == ProposerKind::Llm) {
    config.llm.validate();
    limiter = std::make_shared<InFlightLimiter>(config.llm.max_in_flight);
  }
  return [config, limiter, transcript](const ExperimentCell& cell, int trial,
                                       std::uint64_t seed) -> std::unique_ptr<Proposer> {
    std::unique_ptr<Proposer> proposer;
    switch (config.kind) {
      case ProposerKind::Llm:
        proposer = std::make_unique<HttpChatProposer>(config.llm, limiter, seed);
        break;
      case ProposerKind::Replay: {
        std::filesystem::path script = config.replay;
        const auto per_trial = config.replay / cell.label / trial_name(trial);
        if (std::filesystem::is_directory(config.replay)) {
          if (std::filesystem::exists(per_trial.string() + ".json")) {
            script = per_trial.string() + ".json";
          } else if (std::filesystem::is_directory(per_trial)) {
            script = per_trial;
          }
        }
        proposer = std::make_unique<ReplayProposer>(ReplayProposer::load(script));
        break;
      }
      case ProposerKind::Baseline:
        proposer = std::make_unique<BaselineProposer>(cell.problem, seed);
        break;
    }
    if (transcript) proposer = std::make_unique<TranscriptingProposer>(std::move(proposer), transcript);
    return proposer;
  };
}

ExperimentSummary run_experiment(const ExperimentConfig& config, const ProposerFactory& factory,
                                 const PromptLibrary& library) {
  config.validate();
  struct Job {
    std::size_t cell;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < config.cells.size(); ++c) {
    for (int t = 1; t <= config.trials; ++t) jobs.push_back({c, t});
  }

  std::vector<std::optional<TrialRecord>> slots(jobs.size());
  std::vector<std::string> abort_reasons(config.cells.size());
  std::unique_ptr<std::atomic<bool>[]> aborted(new std::atomic<bool>[config.cells.size()]);
  for (std::size_t c = 0; c < config.cells.size(); ++c) aborted[c] = false;
  std::atomic<std::size_t> next{0};
  std::mutex mutex;  // guards abort_reasons and first_error
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= jobs.size()) return;
      const Job job = jobs[index];
      if (aborted[job.cell]) continue;
      const ExperimentCell& cell = config.cells[job.cell];
      try {
        const RunConfig run_config = config.trial_config(cell, job.trial);
        auto proposer = factory(cell, job.trial, run_config.seed);
        TrialRecord record{cell.label, job.trial, run_config.seed, run(run_config, *proposer, library)};
        const auto& result = record.result;
        if (result.termination == Termination::ProposerFailure && result.failure_kind &&
            is_outage(*result.failure_kind)) {
          std::lock_guard lock(mutex);
          if (!aborted[job.cell].exchange(true)) {
            abort_reasons[job.cell] = to_string(*result.failure_kind) + ": " + result.failure_detail;
          }
          continue;  // an interrupted trial is neither a success nor a failure
        }
        slots[index] = std::move(record);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!first_error) first_error = std::current_exception();
        for (std::size_t c = 0; c < config.cells.size(); ++c) aborted[c] = true;
      }
    }
  };

  const int workers = std::min<int>(config.parallelism, static_cast<int>(jobs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExperimentSummary summary;
  summary.config_hash = config_hash(config);
  summary.master_seed = config.master_seed;
  for (auto& slot : slots) {
    if (!slot) continue;
    if (summary.backend_id.empty()) summary.backend_id = slot->result.backend_id;
    summary.records.push_back(std::move(*slot));
  }
  if (summary.backend_id.empty()) summary.backend_id = to_string(config.proposer.kind);
  summary.cells = summarize(config, summary.records, abort_reasons);
  return summary;
}

// ---------------------------------------------------------------- outputs

Json to_json(const TrialRecord& record) {
  Json out;
  out["label"] = record.label;
  out["trial"] = record.trial;
  out["seed"] = record.seed;
  out["result"] = to_json(record.result);
  return out;
}

Json to_json(const ExperimentSummary& summary, int trials_per_cell) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["config_hash"] = summary.config_hash;
  out["backend_id"] = summary.backend_id;
  out["master_seed"] = summary.master_seed;
  out["trials_per_cell"] = trials_per_cell;
  Json cells = Json::array();
  for (const auto& cell : summary.cells) {
    Json c;
    c["label"] = cell.label;
    c["trials_requested"] = cell.trials_requested;
    c["trials_run"] = cell.trials_run;
    c["successes"] = cell.successes;
    c["success_rate_percent"] = cell.success_rate_percent;
    c["iterations_successful"] = stats_json(cell.successful);
    c["iterations_all"] = stats_json(cell.all);
    c["incomplete"] = cell.incomplete;
    c["abort_reason"] = cell.abort_reason.empty() ? Json(nullptr) : Json(cell.abort_reason);
    Json trials = Json::array();
    for (const auto& r : summary.records) {
      if (r.label != cell.label) continue;
      Json t;
      t["trial"] = r.trial;
      t["seed"] = r.seed;
      t["succeeded"] = r.result.succeeded;
      t["iterations_used"] = r.result.iterations_used;
      t["termination"] = to_string(r.result.termination);
      t["final_mass"] = r.result.final && r.result.final->total_mass ? Json(*r.result.final->total_mass)
                                                                      : Json(nullptr);
      trials.push_back(std::move(t));
    }
    c["trials"] = std::move(trials);
    cells.push_back(std::move(c));
  }
  out["cells"] = std::move(cells);
  return out;
}

std::string summary_csv(const ExperimentSummary& summary) {
  std::ostringstream out;
  out << kSummaryCsvHeader << '\n';
  for (const auto& c : summary.cells) {
    out << c.label << ',' << c.trials_requested << ',' << c.trials_run << ',' << c.successes << ','
        << fixed6(c.success_rate_percent) << ',' << csv_optional(c.successful.mean) << ','
        << csv_optional(c.successful.std) << ',' << csv_optional(c.all.mean) << ',' << csv_optional(c.all.std) << ','
        << (c.incomplete ? "true" : "false") << '\n';
  }
  return out.str();
}

std::string export_trajectories(const std::vector<TrajectorySet>& sets) {
  std::ostringstream out;
  out << kTrajectoryCsvHeader << '\n';
  for (const auto& set : sets) {
    out << set.label << ",zone,," << fixed6(set.constraints.max_mass) << ','
        << csv_optional(set.constraints.max_abs_stress) << ',' << csv_optional(set.constraints.ratio_target)
        << ",,\n";
    for (const auto& [trial, result] : set.runs) {
      for (const auto& s : result->trajectory) {
        out << set.label << ',' << trial << ',' << s.iteration << ',';
        if (s.analysis) {
          out << fixed6(s.analysis->total_mass) << ',' << fixed6(s.analysis->max_abs_stress) << ','
              << csv_optional(s.report.ratio_value);
        } else {
          out << ",,";
        }
        out << ',' << (s.report.feasible ? "true" : "false") << ',' << (s.report.unsolvable ? "true" : "false")
            << '\n';
      }
    }
  }
  return out.str();
}

void write_experiment_outputs(const ExperimentConfig& config, const ExperimentSummary& summary,
                              const Json& provenance) {
  const auto& dir = config.output_dir;
  std::vector<TrajectorySet> sets;
  for (const auto& cell : config.cells) sets.push_back({cell.label, cell.problem.constraints, {}});
  for (const auto& r : summary.records) {
    write_text_file(dir / "trials" / r.label / (trial_name(r.trial) + ".json"), to_json(r).dump(2) + "\n");
    for (auto& set : sets) {
      if (set.label == r.label) set.runs.emplace_back(r.trial, &r.result);
    }
  }
  write_text_file(dir / "summary.json", to_json(summary, config.trials).dump(2) + "\n");
  write_text_file(dir / "summary.csv", summary_csv(summary));
  write_text_file(dir / "trajectories.csv", export_trajectories(sets));
  write_text_file(dir / "provenance.json", provenance.dump(2) + "\n");
}

}  // namespace trussloop
