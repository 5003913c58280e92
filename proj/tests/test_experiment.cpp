#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_support.hpp"
#include "trussloop/experiment.hpp"
#include "trussloop/seed.hpp"

using namespace trussloop;
using namespace testing_support;

namespace {

const PromptLibrary& library() {
  static const PromptLibrary lib = PromptLibrary::load(PromptLibrary::default_dir());
  return lib;
}

TrussDesign light_design() {
  TrussDesign d;
  d.nodes = {{"node_1", {0, 0}}, {"node_2", {6, 0}}, {"node_3", {2, 0}}, {"node_4", {2, 2.5}}};
  d.members = {{"member_1", {"node_1", "node_3", "2"}}, {"member_2", {"node_3", "node_2", "2"}},
               {"member_3", {"node_1", "node_4", "2"}}, {"member_4", {"node_4", "node_2", "2"}},
               {"member_5", {"node_3", "node_4", "2"}}};
  return d;
}

/// Trial k of 1..succeed_upto succeeds on iteration k; later trials never do.
ProposerFactory scripted_factory(int succeed_upto, int budget) {
  return [=](const ExperimentCell&, int trial, std::uint64_t) -> std::unique_ptr<Proposer> {
    std::vector<std::string> script;
    const int heavy = trial <= succeed_upto ? trial - 1 : budget;
    for (int i = 0; i < heavy; ++i) script.push_back(response_text(fig5_design()));
    if (trial <= succeed_upto) script.push_back(response_text(light_design()));
    return std::make_unique<ReplayProposer>(std::move(script));
  };
}

class FailingProposer final : public Proposer {
 public:
  ProposerResponse propose(const ProposerRequest&) override {
    throw ProposerError(ProposerErrorKind::Transport, "connection refused");
  }
  [[nodiscard]] std::string backend_id() const override { return "down"; }
};

ExperimentConfig config_with(std::vector<ExperimentCell> cells, int trials, int max_iterations) {
  ExperimentConfig c;
  c.cells = std::move(cells);
  c.trials = trials;
  c.master_seed = 2024;
  c.proposer.kind = ProposerKind::Replay;
  c.proposer.replay = "unused";
  c.run_template.max_iterations = max_iterations;
  return c;
}

/// Two-pass floating point mean and sample std: independent of the exact
/// integer-sum formula under test.
std::pair<double, double> two_pass(const std::vector<int>& v) {
  double mean = 0;
  for (int x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (int x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Seeds, DerivationIsOrderFreeAndDistinct) {
  std::set<std::uint64_t> seen;
  for (const char* label : {"task1_var1", "task1_var2", "task2_var1"}) {
    for (int trial = 1; trial <= 10; ++trial) seen.insert(derive_trial_seed(2024, label, trial));
  }
  EXPECT_EQ(seen.size(), 30u);
  static_assert(derive_trial_seed(1, "a", 3) == derive_trial_seed(1, "a", 3));
  EXPECT_NE(derive_trial_seed(1, "a", 3), derive_trial_seed(2, "a", 3));

  ExperimentConfig c = config_with({{"a", task1_problem(15)}, {"b", task1_problem(20)}}, 3, 5);
  ExperimentConfig reordered = c;
  std::swap(reordered.cells[0], reordered.cells[1]);
  EXPECT_EQ(c.trial_config(c.cells[0], 2).seed, reordered.trial_config(reordered.cells[1], 2).seed);
}

TEST(Stats, MatchesTwoPassOracle) {
  std::mt19937_64 rng(3);
  for (int n = 2; n < 40; ++n) {
    std::vector<int> v;
    for (int i = 0; i < n; ++i) v.push_back(1 + static_cast<int>(rng() % 200));
    const auto stats = iteration_stats(v);
    const auto [mean, sd] = two_pass(v);
    EXPECT_EQ(stats.count, v.size());
    EXPECT_NEAR(*stats.mean, mean, 1e-12);
    EXPECT_NEAR(*stats.std, sd, 1e-9);
  }
}

TEST(Stats, SmallSamples) {
  EXPECT_FALSE(iteration_stats({}).mean);
  const auto one = iteration_stats({7});
  EXPECT_EQ(*one.mean, 7.0);
  EXPECT_FALSE(one.std);
  EXPECT_EQ(*iteration_stats({5, 5, 5}).std, 0.0);
}

TEST(Experiment, SevenOfTenScriptedSuccesses) {
  const int budget = 10;
  auto config = config_with({{"task1_var3", task1_problem(30)}}, 10, budget);
  const auto summary = run_experiment(config, scripted_factory(7, budget), library());
  ASSERT_EQ(summary.cells.size(), 1u);
  const auto& cell = summary.cells[0];
  EXPECT_EQ(cell.trials_run, 10);
  EXPECT_EQ(cell.successes, 7);
  EXPECT_DOUBLE_EQ(cell.success_rate_percent, 70.0);
  EXPECT_FALSE(cell.incomplete);

  const auto [mean_s, sd_s] = two_pass({1, 2, 3, 4, 5, 6, 7});
  EXPECT_NEAR(*cell.successful.mean, mean_s, 1e-12);
  EXPECT_NEAR(*cell.successful.std, sd_s, 1e-12);
  const auto [mean_a, sd_a] = two_pass({1, 2, 3, 4, 5, 6, 7, 10, 10, 10});
  EXPECT_NEAR(*cell.all.mean, mean_a, 1e-12);
  EXPECT_NEAR(*cell.all.std, sd_a, 1e-12);

  ASSERT_EQ(summary.records.size(), 10u);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(summary.records[k].trial, k + 1);
  EXPECT_EQ(summary.backend_id, "replay");

  const Json doc = to_json(summary, config.trials);
  EXPECT_EQ(doc["cells"][0]["success_rate_percent"], 70.0);
  EXPECT_EQ(doc["cells"][0]["trials"].size(), 10u);
}

TEST(Experiment, SingleTrialHasNullStd) {
  auto config = config_with({{"c", task1_problem(30)}}, 1, 5);
  const auto summary = run_experiment(config, scripted_factory(1, 5), library());
  const Json doc = to_json(summary, 1);
  EXPECT_TRUE(doc["cells"][0]["iterations_successful"]["std"].is_null());
  EXPECT_EQ(doc["cells"][0]["iterations_successful"]["mean"], 1.0);
  const auto csv = lines_of(summary_csv(summary));
  ASSERT_EQ(csv.size(), 2u);
  EXPECT_EQ(csv[1], "c,1,1,1,100.000000,1.000000,,1.000000,,false");
}

TEST(Experiment, ParallelRunMatchesSequential) {
  auto config = config_with({{"a", task1_problem(30)}, {"b", task1_problem(15)}}, 6, 8);
  const auto sequential = run_experiment(config, scripted_factory(4, 8), library());
  config.parallelism = 3;
  const auto parallel = run_experiment(config, scripted_factory(4, 8), library());
  EXPECT_EQ(to_json(sequential, 6), to_json(parallel, 6));
}

TEST(Experiment, BaselineSummaryIsByteReproducible) {
  auto make = [] {
    auto config = config_with({{"task1_var3", task1_problem(30)}}, 3, 40);
    config.proposer.kind = ProposerKind::Baseline;
    const auto summary = run_experiment(config, make_proposer_factory(config.proposer), library());
    return to_json(summary, config.trials).dump(2) + summary_csv(summary);
  };
  EXPECT_EQ(make(), make());
}

TEST(Experiment, OutageFlagsCellIncomplete) {
  auto config = config_with({{"up", task1_problem(30)}, {"down", task1_problem(30)}}, 4, 5);
  ProposerFactory factory = [](const ExperimentCell& cell, int trial, std::uint64_t seed) -> std::unique_ptr<Proposer> {
    if (cell.label == "down" && trial >= 2) return std::make_unique<FailingProposer>();
    return scripted_factory(4, 5)(cell, trial, seed);
  };
  const auto summary = run_experiment(config, factory, library());
  ASSERT_EQ(summary.cells.size(), 2u);
  EXPECT_FALSE(summary.cells[0].incomplete);
  EXPECT_EQ(summary.cells[0].trials_run, 4);
  const auto& down = summary.cells[1];
  EXPECT_TRUE(down.incomplete);
  EXPECT_EQ(down.trials_run, 1);  // the interrupted trial is not counted
  EXPECT_EQ(down.successes, 1);
  EXPECT_DOUBLE_EQ(down.success_rate_percent, 100.0);
  EXPECT_NE(down.abort_reason.find("transport"), std::string::npos);
  EXPECT_NE(down.abort_reason.find("connection refused"), std::string::npos);
}

TEST(Experiment, ReplayExhaustionIsAnOrdinaryFailure) {
  auto config = config_with({{"c", task1_problem(30)}}, 2, 5);
  ProposerFactory factory = [](const ExperimentCell&, int, std::uint64_t) -> std::unique_ptr<Proposer> {
    return std::make_unique<ReplayProposer>(std::vector<std::string>{response_text(fig5_design())});
  };
  const auto summary = run_experiment(config, factory, library());
  EXPECT_FALSE(summary.cells[0].incomplete);
  EXPECT_EQ(summary.cells[0].trials_run, 2);
  EXPECT_EQ(summary.cells[0].successes, 0);
}

TEST(Experiment, ConfigHashIgnoresOutputLocationAndParallelism) {
  auto a = config_with({{"c", task1_problem(30)}}, 2, 5);
  auto b = a;
  b.output_dir = "/elsewhere";
  b.parallelism = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
  b.master_seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Csv, HeadersAreFrozen) {
  EXPECT_STREQ(kSummaryCsvHeader,
               "label,trials_requested,trials_run,successes,success_rate_percent,iterations_mean_successful,"
               "iterations_std_successful,iterations_mean_all,iterations_std_all,incomplete");
  EXPECT_STREQ(kTrajectoryCsvHeader, "label,trial,iteration,total_mass,max_abs_stress,ratio_value,feasible,unsolvable");
}

TEST(Csv, TriangleTrajectoryRows) {
  RunResult result;
  SolutionScore s;
  s.iteration = 1;
  s.design = triangle_design();
  s.analysis = solve(s.design, triangle_problem());
  s.total_mass = s.analysis->total_mass;
  s.report = evaluate(*s.analysis, triangle_problem().constraints);
  result.trajectory.push_back(s);

  SolutionScore broken;
  broken.iteration = 2;
  broken.status = ScoreStatus::Unsolvable;
  broken.report = evaluate_unsolvable(triangle_problem().constraints);
  result.trajectory.push_back(broken);

  const TrajectorySet set{"tri", ConstraintSpec::max_stress(15, 30), {{1, &result}}};
  const auto rows = lines_of(export_trajectories({set}));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], kTrajectoryCsvHeader);
  EXPECT_EQ(rows[1], "tri,zone,,30.000000,15.000000,,,");
  // mass 2 + 2*sqrt(2); |stress| sqrt(2)/2; ratio their quotient.
  EXPECT_EQ(rows[2], "tri,1,1,4.828427,0.707107,0.146447,true,false");
  EXPECT_EQ(rows[3], "tri,1,2,,,,false,true");
}

TEST(Csv, StressToWeightZoneRow) {
  const TrajectorySet set{"t2", ConstraintSpec::stress_to_weight(0.75, 30), {}};
  EXPECT_EQ(lines_of(export_trajectories({set}))[1], "t2,zone,,30.000000,,0.750000,,");
}

TEST(Outputs, WritesEveryFile) {
  const auto dir = std::filesystem::temp_directory_path() / "trussloop_outputs_test";
  std::filesystem::remove_all(dir);
  auto config = config_with({{"task1_var3", task1_problem(30)}}, 2, 5);
  config.output_dir = dir;
  const auto summary = run_experiment(config, scripted_factory(2, 5), library());
  Json provenance;
  provenance["config_hash"] = summary.config_hash;
  write_experiment_outputs(config, summary, provenance);
  for (const char* name : {"summary.json", "summary.csv", "trajectories.csv", "provenance.json",
                           "trials/task1_var3/trial_01.json", "trials/task1_var3/trial_02.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  const Json doc = read_json_file(dir / "summary.json");
  EXPECT_EQ(doc["schema_version"], kSchemaVersion);
  EXPECT_EQ(doc["config_hash"], summary.config_hash);
  EXPECT_EQ(read_file(dir / "summary.json").find("_at\""), std::string::npos);  // no timestamps
  const Json trial = read_json_file(dir / "trials/task1_var3/trial_02.json");
  EXPECT_EQ(trial["result"]["iterations_used"], 2);
  std::filesystem::remove_all(dir);
}

TEST(ConfigFile, ParsesCellsAndRelativeProblemPaths) {
  const auto dir = std::filesystem::temp_directory_path() / "trussloop_config_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "problems");
  write_text_file(dir / "problems" / "p.json", to_json(task1_problem(20)).dump());
  const Json doc = Json::parse(R"({
    "cells": [{"label": "from_file", "problem": "problems/p.json"}],
    "trials": 3, "master_seed": 9, "parallelism": 2,
    "proposer": {"kind": "baseline"}, "max_iterations": 12
  })");
  const auto config = experiment_config_from_json(doc, dir);
  ASSERT_EQ(config.cells.size(), 1u);
  EXPECT_EQ(config.cells[0].problem.constraints.max_abs_stress, 20);
  EXPECT_EQ(config.trials, 3);
  EXPECT_EQ(config.parallelism, 2);
  EXPECT_EQ(config.proposer.kind, ProposerKind::Baseline);
  EXPECT_EQ(config.trial_config(config.cells[0], 1).max_iterations, 12);
  EXPECT_THROW(experiment_config_from_json(Json::parse(R"({"cells": []})"), dir), ConfigError);
  EXPECT_THROW(experiment_config_from_json(Json::parse(R"({"cells": [{"label": "x", "problem": "missing.json"}]})"), dir),
               ConfigError);
  std::filesystem::remove_all(dir);
}
