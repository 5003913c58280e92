// trussloop: command-line front end. See README.md for file formats.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "trussloop/experiment.hpp"
#include "trussloop/format.hpp"
#include "trussloop/io.hpp"
#include "trussloop/loop.hpp"
#include "trussloop/prompt.hpp"
#include "trussloop/response_parser.hpp"

using namespace trussloop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;  // infeasible result, parse failure, exhausted replay
constexpr int kExitError = 2;   // configuration or transport problems

struct Globals {
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::string proposer;
  std::string replay;
  std::string transcript;
  std::string prompt_dir;
};

int report_error(const std::string& kind, const std::string& message, int code) {
  Json err;
  err["error"] = {{"kind", kind}, {"message", message}};
  std::cerr << err.dump() << std::endl;
  return code;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::filesystem::path parent_of(const std::string& path) {
  auto p = std::filesystem::absolute(path).parent_path();
  return p.empty() ? std::filesystem::current_path() : p;
}

PromptLibrary load_prompts(const Globals& g) {
  return PromptLibrary::load(g.prompt_dir.empty() ? PromptLibrary::default_dir() : std::filesystem::path(g.prompt_dir));
}

void apply_proposer_overrides(const Globals& g, ProposerConfig& config) {
  if (!g.proposer.empty()) config.kind = proposer_kind_from_string(g.proposer);
  if (!g.replay.empty()) config.replay = g.replay;
  if (config.kind == ProposerKind::Replay && config.replay.empty()) {
    throw ConfigError("the replay proposer needs a script (--replay or proposer.replay)");
  }
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int cmd_evaluate(const std::string& design_path, const std::string& problem_path) {
  const ProblemSpec problem = problem_from_json(read_json_file(problem_path));
  const TrussDesign design = design_from_json(read_json_file(design_path));
  const SolutionScore score = score_design(design, {}, 1, problem);
  Json out;
  out["status"] = to_string(score.status);
  out["defect"] = score.defect;
  Json violations = Json::array();
  for (const auto& v : validate_design(design, problem).violations) {
    violations.push_back({{"kind", to_string(v.kind)},
                          {"severity", v.severity == Severity::Error ? "error" : "warning"},
                          {"subject", v.subject},
                          {"detail", v.detail}});
  }
  out["violations"] = std::move(violations);
  out["analysis"] = score.analysis ? to_json(*score.analysis) : Json(nullptr);
  out["report"] = to_json(score.report);
  std::cout << out.dump(2) << std::endl;
  return score.report.feasible ? kExitOk : kExitFailed;
}

int cmd_parse(const std::string& response_path) {
  const std::string text = read_text(response_path);
  auto parsed = parse_response(text);
  if (const auto* error = std::get_if<ParseError>(&parsed)) {
    Json err;
    err["error"] = to_json(*error);
    std::cerr << err.dump() << std::endl;
    return kExitFailed;
  }
  const auto& response = std::get<ParsedResponse>(parsed);
  Json out = to_json(response.design);
  out["rationale"] = to_json(response.rationale);
  out["diagnostics"] = response.diagnostics;
  std::cout << out.dump(2) << std::endl;
  return kExitOk;
}

int cmd_render(const Globals& g, const std::string& problem_path, const std::string& feedback_path,
               const std::string& focus_name) {
  const ProblemSpec problem = problem_from_json(read_json_file(problem_path));
  const PromptLibrary library = load_prompts(g);
  RenderOptions options;
  if (focus_name == "mass_first") options.focus = ConstraintFocus::MassFirst;
  else if (focus_name == "ratio_keep_mass") options.focus = ConstraintFocus::RatioKeepMass;
  else if (focus_name != "full") throw ConfigError("unknown focus '" + focus_name + "'");
  if (feedback_path.empty()) {
    std::cout << render_initial(library, problem, options);
    return kExitOk;
  }
  const SolutionScore stored = score_from_json(read_json_file(feedback_path));
  std::string corrective;
  SolutionScore score = stored.status == ScoreStatus::ParseFailed
                            ? stored
                            : score_design(stored.design, stored.rationale, stored.iteration, problem, &corrective);
  if (stored.status == ScoreStatus::ParseFailed) score.report = evaluate_unsolvable(problem.constraints);
  RenderContext context;
  context.problem = &problem;
  context.latest = &score;
  context.options = options;
  context.corrective = corrective;
  std::cout << render_feedback(library, context);
  return kExitOk;
}

int exit_for_failure(const RunResult& result) {
  if (result.succeeded) return kExitOk;
  if (result.failure_kind && *result.failure_kind != ProposerErrorKind::ReplayExhausted) return kExitError;
  return kExitFailed;
}

int cmd_run(const Globals& g, const std::string& config_path) {
  RunFile file = run_file_from_json(read_json_file(config_path), parent_of(config_path));
  if (g.seed) file.run.seed = *g.seed;
  apply_proposer_overrides(g, file.proposer);
  const PromptLibrary library = load_prompts(g);

  std::shared_ptr<TranscriptLog> transcript;
  if (!g.transcript.empty()) transcript = std::make_shared<TranscriptLog>(g.transcript);
  const ExperimentCell cell{"run", file.run.problem};
  auto proposer = make_proposer_factory(file.proposer, transcript)(cell, 1, file.run.seed);

  const RunResult result = run(file.run, *proposer, library);
  const Json doc = to_json(result, true);
  if (!g.output_dir.empty()) {
    const std::filesystem::path dir = g.output_dir;
    write_text_file(dir / "run_result.json", to_json(result).dump(2) + "\n");
    TrajectorySet set{"run", file.run.problem.constraints, {{1, &result}}};
    write_text_file(dir / "trajectory.csv", export_trajectories({set}));
  }
  std::cout << doc.dump(2) << std::endl;
  if (result.failure_kind) {
    return report_error(to_string(*result.failure_kind), result.failure_detail, exit_for_failure(result));
  }
  return exit_for_failure(result);
}

int cmd_experiment(const Globals& g, const std::string& config_path) {
  ExperimentConfig config = experiment_config_from_json(read_json_file(config_path), parent_of(config_path));
  if (g.seed) config.master_seed = *g.seed;
  if (!g.output_dir.empty()) config.output_dir = g.output_dir;
  if (!g.transcript.empty()) config.transcript = g.transcript;
  apply_proposer_overrides(g, config.proposer);
  const PromptLibrary library = load_prompts(g);

  std::shared_ptr<TranscriptLog> transcript;
  if (config.transcript) transcript = std::make_shared<TranscriptLog>(*config.transcript);
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentSummary summary = run_experiment(config, make_proposer_factory(config.proposer, transcript), library);
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);

  Json provenance;
  provenance["schema_version"] = kSchemaVersion;
  provenance["config_hash"] = summary.config_hash;
  provenance["backend_id"] = summary.backend_id;
  provenance["started_at"] = iso_time(started);
  provenance["finished_at"] = iso_time(std::chrono::system_clock::now());
  provenance["wall_time_ms"] = elapsed.count();
  provenance["parallelism"] = config.parallelism;
  write_experiment_outputs(config, summary, provenance);

  std::cout << to_json(summary, config.trials).dump(2) << std::endl;
  for (const auto& cell : summary.cells) {
    if (!cell.abort_reason.empty()) return report_error("outage", cell.label + ": " + cell.abort_reason, kExitError);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-driven truss design loop: evaluate, run and benchmark proposers"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--output-dir", g.output_dir, "Directory for result files");
  app.add_option("--seed", g.seed, "Run seed (run) or master seed (experiment)");
  app.add_option("--proposer", g.proposer, "Proposer backend")->check(CLI::IsMember({"llm", "replay", "baseline"}));
  app.add_option("--replay", g.replay, "Replay script (JSON array file or directory)");
  app.add_option("--transcript", g.transcript, "Append every prompt/response pair to this JSON-lines file");
  app.add_option("--prompt-dir", g.prompt_dir, "Directory with initial.txt and feedback.txt");

  std::string design_path, problem_path, config_path, response_path, feedback_path, focus = "full";
  auto* evaluate = app.add_subcommand("evaluate", "Analyze a design against a problem");
  evaluate->add_option("design", design_path, "Design JSON")->required();
  evaluate->add_option("problem", problem_path, "Problem JSON")->required();

  auto* run_cmd = app.add_subcommand("run", "Run one optimization loop");
  run_cmd->add_option("config", config_path, "Run config JSON")->required();

  auto* experiment = app.add_subcommand("experiment", "Run repeated trials over benchmark cells");
  experiment->add_option("config", config_path, "Experiment config JSON")->required();

  auto* render = app.add_subcommand("render-prompt", "Print the initial or a feedback prompt");
  render->add_option("problem", problem_path, "Problem JSON")->required();
  render->add_option("--feedback", feedback_path, "Score JSON of the latest attempt");
  render->add_option("--focus", focus, "Constraint emphasis")
      ->check(CLI::IsMember({"full", "mass_first", "ratio_keep_mass"}));

  auto* parse = app.add_subcommand("parse", "Extract a design from a model response");
  parse->add_option("response", response_path, "Response text file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("usage", e.what(), kExitError);
  }

  try {
    if (*evaluate) return cmd_evaluate(design_path, problem_path);
    if (*run_cmd) return cmd_run(g, config_path);
    if (*experiment) return cmd_experiment(g, config_path);
    if (*render) return cmd_render(g, problem_path, feedback_path, focus);
    if (*parse) return cmd_parse(response_path);
  } catch (const ConfigError& e) {
    return report_error("config", e.what(), kExitError);
  } catch (const ModelError& e) {
    return report_error("config", e.what(), kExitError);
  } catch (const PromptError& e) {
    return report_error("prompt", e.what(), kExitError);
  } catch (const ProposerError& e) {
    return report_error(to_string(e.kind()), e.what(), kExitError);
  } catch (const std::exception& e) {
    return report_error("error", e.what(), kExitError);
  }
  return kExitError;
}
