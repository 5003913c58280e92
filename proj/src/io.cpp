#include "trussloop/io.hpp"

#include <fstream>
#include <sstream>

namespace trussloop {
namespace {

const Json& require(const Json& doc, const char* key, const std::string& where) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ConfigError(where + ": missing \"" + key + "\"");
  return *it;
}

double number(const Json& value, const std::string& where) {
  if (!value.is_number()) throw ConfigError(where + " must be a number");
  return value.get<double>();
}

std::string text(const Json& value, const std::string& where) {
  if (!value.is_string()) throw ConfigError(where + " must be a string");
  return value.get<std::string>();
}

Point2 point(const Json& value, const std::string& where) {
  if (!value.is_array() || value.size() != 2) throw ConfigError(where + " must be [x, y]");
  return {number(value[0], where + "[0]"), number(value[1], where + "[1]")};
}

Json point_json(const Point2& p) { return Json::array({p.x, p.y}); }

NodeMap nodes_from_json(const Json& value, const std::string& where) {
  if (!value.is_object()) throw ConfigError(where + " must be an object");
  NodeMap nodes;
  for (const auto& [id, p] : value.items()) nodes.insert_or_assign(id, point(p, where + "." + id));
  return nodes;
}

Json nodes_json(const NodeMap& nodes) {
  Json out = Json::object();
  for (const auto& [id, p] : nodes) out[id] = point_json(p);
  return out;
}

template <typename T>
Json map_json(const OrderedMap<std::string, T>& map) {
  Json out = Json::object();
  for (const auto& [id, v] : map) out[id] = v;
  return out;
}

Json vec2_map_json(const OrderedMap<NodeId, Vec2>& map) {
  Json out = Json::object();
  for (const auto& [id, v] : map) out[id] = Json::array({v.x, v.y});
  return out;
}

Load load_from_json(const Json& value, const std::string& where) {
  if (!value.is_object()) throw ConfigError(where + " must be an object");
  const std::string node = text(require(value, "node", where), where + ".node");
  if (value.contains("magnitude") || value.contains("direction_deg")) {
    return Load::polar(node, number(require(value, "magnitude", where), where + ".magnitude"),
                       number(require(value, "direction_deg", where), where + ".direction_deg"));
  }
  return Load::cartesian(node, number(require(value, "fx", where), where + ".fx"),
                         number(require(value, "fy", where), where + ".fy"));
}

Json load_json(const Load& load) {
  Json out;
  out["node"] = load.node();
  if (load.polar_form()) {
    out["magnitude"] = load.polar_form()->magnitude;
    out["direction_deg"] = load.polar_form()->direction_deg;
  } else {
    out["fx"] = load.fx();
    out["fy"] = load.fy();
  }
  return out;
}

Support support_from(const std::string& node, const Json& value, const std::string& where) {
  Support s;
  s.node = node;
  if (value.is_string()) {
    s.kind = support_kind_from_string(value.get<std::string>());
    return s;
  }
  if (!value.is_object()) throw ConfigError(where + " must be a kind string or an object");
  if (value.contains("kind")) s.kind = support_kind_from_string(text(value["kind"], where + ".kind"));
  if (value.contains("fix_x") || value.contains("fix_y")) {
    s.axes = Support::Axes{value.value("fix_x", false), value.value("fix_y", false)};
  }
  return s;
}

Json support_json(const Support& s) {
  Json out;
  out["node"] = s.node;
  out["kind"] = to_string(s.kind);
  if (s.axes) {
    out["fix_x"] = s.axes->x;
    out["fix_y"] = s.axes->y;
  }
  return out;
}

Json optional_number(const std::optional<double>& value) { return value ? Json(*value) : Json(nullptr); }

std::uint64_t seed_from_json(const Json& value, const std::string& where) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer() && value.get<std::int64_t>() >= 0) return value.get<std::uint64_t>();
  throw ConfigError(where + " must be a non-negative integer");
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

// ---------------------------------------------------------------- problem

ProblemSpec problem_from_json(const Json& doc) {
  const std::string where = "problem";
  if (!doc.is_object()) throw ConfigError("problem must be a JSON object");
  ProblemSpec problem;
  try {
    problem.given_nodes = nodes_from_json(require(doc, "given_nodes", where), "given_nodes");
    const Json& loads = require(doc, "loads", where);
    if (!loads.is_array()) throw ConfigError("loads must be an array");
    for (std::size_t i = 0; i < loads.size(); ++i) {
      problem.loads.push_back(load_from_json(loads[i], "loads[" + std::to_string(i) + "]"));
    }
    const Json& supports = require(doc, "supports", where);
    if (supports.is_array()) {
      for (std::size_t i = 0; i < supports.size(); ++i) {
        const std::string w = "supports[" + std::to_string(i) + "]";
        problem.supports.push_back(support_from(text(require(supports[i], "node", w), w + ".node"), supports[i], w));
      }
    } else if (supports.is_object()) {
      for (const auto& [node, value] : supports.items()) {
        problem.supports.push_back(support_from(node, value, "supports." + node));
      }
    } else {
      throw ConfigError("supports must be an array or an object");
    }
    if (doc.contains("area_table")) {
      const Json& table = doc["area_table"];
      if (!table.is_object()) throw ConfigError("area_table must be an object");
      problem.area_table.clear();
      for (const auto& [id, a] : table.items()) problem.area_table.insert_or_assign(id, number(a, "area_table." + id));
    }
    const Json& c = require(doc, "constraints", where);
    problem.constraints.task = task_from_string(text(require(c, "task", "constraints"), "constraints.task"));
    if (c.contains("max_abs_stress") && !c["max_abs_stress"].is_null()) {
      problem.constraints.max_abs_stress = number(c["max_abs_stress"], "constraints.max_abs_stress");
    }
    if (c.contains("ratio_target") && !c["ratio_target"].is_null()) {
      problem.constraints.ratio_target = number(c["ratio_target"], "constraints.ratio_target");
    }
    problem.constraints.max_mass = number(require(c, "max_mass", "constraints"), "constraints.max_mass");
    if (doc.contains("max_iterations")) problem.max_iterations = doc["max_iterations"].get<int>();
    if (doc.contains("elastic_modulus")) problem.elastic_modulus = number(doc["elastic_modulus"], "elastic_modulus");
    problem.validate();
  } catch (const ModelError& e) {
    throw ConfigError(std::string("invalid problem: ") + e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid problem: ") + e.what());
  }
  return problem;
}

Json to_json(const ProblemSpec& problem) {
  Json out;
  out["given_nodes"] = nodes_json(problem.given_nodes);
  out["loads"] = Json::array();
  for (const auto& l : problem.loads) out["loads"].push_back(load_json(l));
  out["supports"] = Json::array();
  for (const auto& s : problem.supports) out["supports"].push_back(support_json(s));
  out["area_table"] = map_json(problem.area_table);
  Json c;
  c["task"] = to_string(problem.constraints.task);
  c["max_abs_stress"] = optional_number(problem.constraints.max_abs_stress);
  c["ratio_target"] = optional_number(problem.constraints.ratio_target);
  c["max_mass"] = problem.constraints.max_mass;
  out["constraints"] = std::move(c);
  out["max_iterations"] = problem.max_iterations;
  out["elastic_modulus"] = problem.elastic_modulus;
  return out;
}

// ---------------------------------------------------------------- design

TrussDesign design_from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("design must be a JSON object");
  TrussDesign design;
  design.nodes = nodes_from_json(require(doc, "nodes", "design"), "nodes");
  const Json& members = require(doc, "members", "design");
  if (!members.is_object()) throw ConfigError("members must be an object");
  for (const auto& [id, m] : members.items()) {
    const std::string where = "members." + id;
    if (!m.is_array() || m.size() != 3) throw ConfigError(where + " must be [node_a, node_b, area_id]");
    design.members.insert_or_assign(id, Member{text(m[0], where + "[0]"), text(m[1], where + "[1]"),
                                               text(m[2], where + "[2]")});
  }
  return design;
}

Json to_json(const TrussDesign& design) {
  Json out;
  out["nodes"] = nodes_json(design.nodes);
  Json members = Json::object();
  for (const auto& [id, m] : design.members) members[id] = Json::array({m.a, m.b, m.area});
  out["members"] = std::move(members);
  return out;
}

Json to_json(const Rationale& rationale) {
  Json out;
  out["nodes"] = map_json(rationale.nodes);
  out["members"] = map_json(rationale.members);
  return out;
}

// ---------------------------------------------------------------- results

Json to_json(const AnalysisResult& a) {
  Json out;
  out["total_mass"] = a.total_mass;
  out["max_abs_stress"] = a.max_abs_stress;
  out["max_stress_member"] = a.max_stress_member;
  out["member_stress"] = map_json(a.member_stress);
  out["member_force"] = map_json(a.member_force);
  out["member_mass"] = map_json(a.member_mass);
  out["displacements"] = vec2_map_json(a.displacements);
  out["reactions"] = vec2_map_json(a.reactions);
  return out;
}

Json to_json(const ConstraintReport& r) {
  Json out;
  out["feasible"] = r.feasible;
  out["mass_ok"] = r.mass_ok;
  out["stress_ok"] = r.stress_ok;
  out["ratio_ok"] = r.ratio_ok;
  out["unsolvable"] = r.unsolvable;
  out["stress_applicable"] = r.stress_applicable;
  out["ratio_applicable"] = r.ratio_applicable;
  out["total_mass"] = optional_number(r.total_mass);
  out["max_abs_stress"] = optional_number(r.max_abs_stress);
  out["mass_margin"] = optional_number(r.mass_margin);
  out["stress_margin"] = optional_number(r.stress_margin);
  out["ratio_value"] = optional_number(r.ratio_value);
  return out;
}

Json to_json(const SolutionScore& s) {
  Json out;
  out["iteration"] = s.iteration;
  out["status"] = to_string(s.status);
  out["design"] = to_json(s.design);
  out["rationale"] = to_json(s.rationale);
  out["total_mass"] = optional_number(s.total_mass);
  out["analysis"] = s.analysis ? to_json(*s.analysis) : Json(nullptr);
  out["report"] = to_json(s.report);
  out["defect"] = s.defect;
  return out;
}

SolutionScore score_from_json(const Json& doc) {
  SolutionScore s;
  if (!doc.is_object()) throw ConfigError("score must be a JSON object");
  s.iteration = doc.value("iteration", 1);
  const std::string status = doc.value("status", std::string("evaluated"));
  if (status == "evaluated") s.status = ScoreStatus::Evaluated;
  else if (status == "unsolvable") s.status = ScoreStatus::Unsolvable;
  else if (status == "invalid") s.status = ScoreStatus::Invalid;
  else if (status == "parse_failed") s.status = ScoreStatus::ParseFailed;
  else throw ConfigError("unknown score status '" + status + "'");
  s.design = design_from_json(require(doc, "design", "score"));
  if (doc.contains("rationale") && doc["rationale"].is_object()) {
    for (const auto& [id, t] : doc["rationale"].value("nodes", Json::object()).items()) {
      s.rationale.nodes.insert_or_assign(id, t.get<std::string>());
    }
    for (const auto& [id, t] : doc["rationale"].value("members", Json::object()).items()) {
      s.rationale.members.insert_or_assign(id, t.get<std::string>());
    }
  }
  s.defect = doc.value("defect", std::string());
  return s;
}

Json to_json(const ParseError& e) {
  Json out;
  out["kind"] = to_string(e.kind);
  out["line"] = e.position.line;
  out["column"] = e.position.column;
  out["detail"] = e.detail;
  out["message"] = e.describe();
  return out;
}

Json to_json(const RunResult& r, bool include_timing) {
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["succeeded"] = r.succeeded;
  out["termination"] = to_string(r.termination);
  out["iterations_used"] = r.iterations_used;
  out["feedback_prompts"] = r.feedback_prompts;
  out["proposer_calls"] = r.proposer_calls;
  out["backend_id"] = r.backend_id;
  out["phase_b_from"] = r.phase_b_from ? Json(*r.phase_b_from) : Json(nullptr);
  out["failure_kind"] = r.failure_kind ? Json(to_string(*r.failure_kind)) : Json(nullptr);
  out["failure_detail"] = r.failure_detail;
  Json phases = Json::array();
  for (Phase p : r.phases) phases.push_back(p == Phase::A ? "A" : "B");
  out["phases"] = std::move(phases);
  out["final"] = r.final ? to_json(*r.final) : Json(nullptr);
  Json trajectory = Json::array();
  for (const auto& s : r.trajectory) trajectory.push_back(to_json(s));
  out["trajectory"] = std::move(trajectory);
  if (include_timing) {
    out["wall_time_ms"] = r.wall_time.count();
    out["proposer_latency_ms"] = r.proposer_latency.count();
  }
  return out;
}

// ---------------------------------------------------------------- configs

std::string to_string(ProposerKind kind) {
  switch (kind) {
    case ProposerKind::Llm: return "llm";
    case ProposerKind::Replay: return "replay";
    case ProposerKind::Baseline: return "baseline";
  }
  return "baseline";
}

ProposerKind proposer_kind_from_string(const std::string& t) {
  if (t == "llm") return ProposerKind::Llm;
  if (t == "replay") return ProposerKind::Replay;
  if (t == "baseline") return ProposerKind::Baseline;
  throw ConfigError("unknown proposer '" + t + "' (expected llm, replay or baseline)");
}

ProposerConfig proposer_config_from_json(const Json& doc, const std::filesystem::path& base_dir) {
  ProposerConfig config;
  if (doc.is_null()) return config;
  if (!doc.is_object()) throw ConfigError("proposer must be an object");
  try {
    config.kind = proposer_kind_from_string(doc.value("kind", std::string("baseline")));
    if (doc.contains("replay")) {
      std::filesystem::path p = text(doc["replay"], "proposer.replay");
      config.replay = p.is_absolute() ? p : base_dir / p;
    }
    LlmConfig& llm = config.llm;
    llm.endpoint = doc.value("endpoint", llm.endpoint);
    llm.model = doc.value("model", llm.model);
    llm.temperature = doc.value("temperature", llm.temperature);
    llm.timeout = std::chrono::milliseconds(doc.value("timeout_ms", llm.timeout.count()));
    llm.max_retries = doc.value("max_retries", llm.max_retries);
    llm.backoff_base = std::chrono::milliseconds(doc.value("backoff_base_ms", llm.backoff_base.count()));
    llm.backoff_cap = std::chrono::milliseconds(doc.value("backoff_cap_ms", llm.backoff_cap.count()));
    llm.credential_env = doc.value("credential_env", llm.credential_env);
    llm.max_in_flight = doc.value("max_in_flight", llm.max_in_flight);
    if (doc.contains("token_budget") && !doc["token_budget"].is_null()) {
      llm.token_budget = doc["token_budget"].get<long>();
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid proposer config: ") + e.what());
  }
  return config;
}

Json to_json(const ProposerConfig& c) {
  Json out;
  out["kind"] = to_string(c.kind);
  if (c.kind == ProposerKind::Replay) out["replay"] = c.replay.string();
  if (c.kind == ProposerKind::Llm) {
    out["endpoint"] = c.llm.endpoint;
    out["model"] = c.llm.model;
    out["temperature"] = c.llm.temperature;
    out["timeout_ms"] = c.llm.timeout.count();
    out["max_retries"] = c.llm.max_retries;
    out["backoff_base_ms"] = c.llm.backoff_base.count();
    out["backoff_cap_ms"] = c.llm.backoff_cap.count();
    out["credential_env"] = c.llm.credential_env;
    out["max_in_flight"] = c.llm.max_in_flight;
    out["token_budget"] = c.llm.token_budget ? Json(*c.llm.token_budget) : Json(nullptr);
  }
  return out;
}

RunFile run_file_from_json(const Json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
  RunFile file;
  RunConfig& run = file.run;
  const Json& problem = require(doc, "problem", "run config");
  if (problem.is_string()) {
    std::filesystem::path p = problem.get<std::string>();
    run.problem = problem_from_json(read_json_file(p.is_absolute() ? p : base_dir / p));
  } else {
    run.problem = problem_from_json(problem);
  }
  try {
    run.max_iterations = doc.value("max_iterations", run.problem.max_iterations);
    run.parse_retry_limit = doc.value("parse_retry_limit", run.parse_retry_limit);
    if (doc.contains("seed")) run.seed = seed_from_json(doc["seed"], "seed");
    run.phase_policy = phase_policy_from_string(doc.value("phase_policy", std::string("auto")));
    run.history_full_k = doc.value("history_full_k", run.history_full_k);
    run.system_text = doc.value("system_text", run.system_text);
    run.temperature = doc.value("temperature", run.temperature);
    run.example_members = doc.value("example_members", run.example_members);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  file.proposer = proposer_config_from_json(doc.value("proposer", Json()), base_dir);
  if (doc.contains("proposer") && doc["proposer"].contains("temperature")) {
    run.temperature = file.proposer.llm.temperature;
  }
  try {
    run.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  return file;
}

Json to_json(const RunConfig& c) {
  Json out;
  out["problem"] = to_json(c.problem);
  out["max_iterations"] = c.max_iterations;
  out["parse_retry_limit"] = c.parse_retry_limit;
  out["seed"] = c.seed;
  out["phase_policy"] = to_string(c.phase_policy);
  out["history_full_k"] = c.history_full_k;
  out["system_text"] = c.system_text;
  out["temperature"] = c.temperature;
  out["example_members"] = c.example_members;
  return out;
}

}  // namespace trussloop
