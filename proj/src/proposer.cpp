#include "trussloop/proposer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "trussloop/format.hpp"
#include "trussloop/seed.hpp"

namespace trussloop {

std::string to_string(ProposerErrorKind kind) {
  switch (kind) {
    case ProposerErrorKind::Transport: return "transport";
    case ProposerErrorKind::Auth: return "auth";
    case ProposerErrorKind::ReplayExhausted: return "replay_exhausted";
    case ProposerErrorKind::BudgetExceeded: return "budget_exceeded";
  }
  return "unknown";
}

// ---------------------------------------------------------------- replay

ReplayProposer::ReplayProposer(std::vector<std::string> script) : script_(std::move(script)) {}

ReplayProposer ReplayProposer::load(const std::filesystem::path& path) {
  std::vector<std::string> script;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file, std::ios::binary);
      std::ostringstream text;
      text << in.rdbuf();
      script.push_back(text.str());
    }
    return ReplayProposer(std::move(script));
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read replay script " + path.string());
  const auto doc = nlohmann::json::parse(in);
  if (!doc.is_array()) throw std::runtime_error("replay script " + path.string() + " must be a JSON array");
  for (const auto& item : doc) script.push_back(item.get<std::string>());
  return ReplayProposer(std::move(script));
}

ProposerResponse ReplayProposer::propose(const ProposerRequest&) {
  if (next_ >= script_.size()) {
    throw ProposerError(ProposerErrorKind::ReplayExhausted,
                        "replay script exhausted after " + std::to_string(script_.size()) + " responses");
  }
  return {script_[next_++], backend_id(), std::chrono::milliseconds(0), std::nullopt};
}

// ---------------------------------------------------------------- baseline

namespace {

std::string unused_id(const std::string& prefix, std::size_t start, auto&& taken) {
  for (std::size_t k = start;; ++k) {
    std::string id = prefix + std::to_string(k);
    if (!taken(id)) return id;
  }
}

double round_to(double value, double step) { return std::round(value / step) * step; }

bool has_pair(const TrussDesign& design, const NodeId& a, const NodeId& b) {
  for (const auto& [id, m] : design.members) {
    if ((m.a == a && m.b == b) || (m.a == b && m.b == a)) return true;
  }
  return false;
}

// Connected after removing `skip` (and its members)?
bool connected_without(const TrussDesign& design, const NodeId& skip) {
  std::vector<NodeId> nodes;
  for (const auto& [id, p] : design.nodes) {
    if (id != skip) nodes.push_back(id);
  }
  if (nodes.size() <= 1) return true;
  std::set<NodeId> seen{nodes.front()};
  std::vector<NodeId> stack{nodes.front()};
  while (!stack.empty()) {
    NodeId at = stack.back();
    stack.pop_back();
    for (const auto& [id, m] : design.members) {
      if (m.a == skip || m.b == skip) continue;
      const NodeId* other = m.a == at ? &m.b : m.b == at ? &m.a : nullptr;
      if (other != nullptr && seen.insert(*other).second) stack.push_back(*other);
    }
  }
  return seen.size() == nodes.size();
}

class Mutator {
 public:
  Mutator(const ProblemSpec& problem, TrussDesign design, std::uint64_t seed)
      : problem_(problem), design_(std::move(design)), rng_(seed) {}

  TrussDesign mutate() {
    std::vector<int> moves{0, 1, 2, 3};
    std::shuffle(moves.begin(), moves.end(), rng_);
    for (int move : moves) {
      const bool applied = move == 0   ? add_node()
                           : move == 1 ? reconnect_member()
                           : move == 2 ? bump_area()
                                       : delete_node();
      if (applied) break;
    }
    return design_;
  }

  bool add_node() {
    double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
    for (const auto& [id, p] : problem_.given_nodes) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    // Bounding box inflated by 50%; a degenerate axis borrows the other span.
    double span_x = max_x - min_x;
    double span_y = max_y - min_y;
    if (!(span_x > 0.0)) span_x = span_y;
    if (!(span_y > 0.0)) span_y = span_x;
    if (!(span_x > 0.0)) span_x = span_y = 1.0;
    const double cx = 0.5 * (min_x + max_x);
    const double cy = 0.5 * (min_y + max_y);
    const double half_x = 0.75 * span_x;
    const double half_y = 0.75 * span_y;
    std::uniform_real_distribution<double> ux(cx - half_x, cx + half_x);
    std::uniform_real_distribution<double> uy(cy - half_y, cy + half_y);
    const Point2 p{round_to(ux(rng_), 0.01), round_to(uy(rng_), 0.01)};

    std::vector<std::pair<double, NodeId>> nearest;
    for (const auto& [id, q] : design_.nodes) {
      const double d = std::hypot(q.x - p.x, q.y - p.y);
      if (d < 1e-6) return false;
      nearest.emplace_back(d, id);
    }
    if (nearest.size() < 2) return false;
    std::sort(nearest.begin(), nearest.end());

    const NodeId node = unused_id("node_", design_.nodes.size() + 1,
                                  [&](const std::string& id) { return design_.nodes.contains(id); });
    design_.nodes.insert_or_assign(node, p);
    for (std::size_t k = 0; k < 2; ++k) add_member(node, nearest[k].second, random_area());
    return true;
  }

  bool reconnect_member() {
    if (design_.members.empty() || design_.nodes.size() < 3) return false;
    const MemberId id = pick_member();
    Member m = design_.members.at(id);
    const bool move_a = coin();
    const NodeId& keep = move_a ? m.b : m.a;
    std::vector<NodeId> options;
    for (const auto& [node, p] : design_.nodes) {
      if (node != keep && node != (move_a ? m.a : m.b) && !has_pair(design_, keep, node)) options.push_back(node);
    }
    std::shuffle(options.begin(), options.end(), rng_);
    for (const auto& target : options) {
      TrussDesign trial = design_;
      Member moved = m;
      (move_a ? moved.a : moved.b) = target;
      trial.members.at(id) = moved;
      if (!connected_without(trial, NodeId{})) continue;  // never strand a node
      design_ = std::move(trial);
      return true;
    }
    return false;
  }

  bool bump_area() {
    if (design_.members.empty()) return false;
    const MemberId id = pick_member();
    Member& m = design_.members.at(id);
    const auto& table = problem_.area_table;
    std::size_t position = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (table.entry(i).first == m.area) position = i;
    }
    const bool up = coin();
    if (up) {
      position = std::min(position + 1, table.size() - 1);
    } else if (position > 0) {
      --position;
    }
    m.area = table.entry(position).first;
    return true;
  }

  bool delete_node() {
    std::vector<NodeId> candidates;
    for (const auto& [id, p] : design_.nodes) {
      if (!problem_.given_nodes.contains(id) && connected_without(design_, id)) candidates.push_back(id);
    }
    if (candidates.empty()) return false;
    const NodeId victim = candidates[uniform_index(candidates.size())];
    std::vector<MemberId> doomed;
    for (const auto& [id, m] : design_.members) {
      if (m.a == victim || m.b == victim) doomed.push_back(id);
    }
    for (const auto& id : doomed) design_.members.erase(id);
    design_.nodes.erase(victim);
    return true;
  }

 private:
  void add_member(const NodeId& a, const NodeId& b, const AreaId& area) {
    if (has_pair(design_, a, b)) return;
    const MemberId id = unused_id("member_", design_.members.size() + 1,
                                  [&](const std::string& m) { return design_.members.contains(m); });
    design_.members.insert_or_assign(id, Member{a, b, area});
  }

  AreaId random_area() { return problem_.area_table.entry(uniform_index(problem_.area_table.size())).first; }
  MemberId pick_member() { return design_.members.entry(uniform_index(design_.members.size())).first; }
  bool coin() { return uniform_index(2) == 1; }
  std::size_t uniform_index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  const ProblemSpec& problem_;
  TrussDesign design_;
  std::mt19937_64 rng_;
};

TrussDesign cold_start(const ProblemSpec& problem) {
  TrussDesign design;
  design.nodes = problem.given_nodes;
  const AreaId mid = problem.area_table.entry(problem.area_table.size() / 2).first;
  std::size_t k = 1;
  for (std::size_t i = 0; i < design.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < design.nodes.size(); ++j) {
      design.members.insert_or_assign("member_" + std::to_string(k++),
                                      Member{design.nodes.entry(i).first, design.nodes.entry(j).first, mid});
    }
  }
  return design;
}

}  // namespace

std::string baseline_propose(const SolutionScore* state, const ProblemSpec& problem, std::uint64_t seed) {
  if (state == nullptr || state->design.nodes.empty()) return format_design_code(cold_start(problem));
  return format_design_code(Mutator(problem, state->design, seed).mutate());
}

BaselineProposer::BaselineProposer(ProblemSpec problem, std::uint64_t seed)
    : problem_(std::move(problem)), seed_(seed) {}

ProposerResponse BaselineProposer::propose(const ProposerRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  std::string text = baseline_propose(request.best, problem_, mix_seed(seed_, calls_++));
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return {std::move(text), backend_id(), elapsed, std::nullopt};
}

// ---------------------------------------------------------------- limiter

InFlightLimiter::InFlightLimiter(int max_in_flight) : max_(std::max(1, max_in_flight)) {}

InFlightLimiter::Slot InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return current_ < max_; });
  ++current_;
  peak_ = std::max(peak_, current_);
  return Slot(*this);
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --current_;
  }
  cv_.notify_one();
}

int InFlightLimiter::in_flight() const {
  std::lock_guard lock(mutex_);
  return current_;
}

int InFlightLimiter::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

// ---------------------------------------------------------------- transcript

TranscriptLog::TranscriptLog(const std::filesystem::path& path) : out_(path, std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open transcript " + path.string());
}

void TranscriptLog::record(const std::string& backend_id, const ProposerRequest& request,
                           const ProposerResponse* response, const std::string& error) {
  nlohmann::ordered_json line;
  std::lock_guard lock(mutex_);
  line["sequence"] = sequence_++;
  line["backend"] = backend_id;
  if (!request.system_text.empty()) line["system"] = request.system_text;
  auto turns = nlohmann::ordered_json::array();
  for (const auto& turn : request.conversation) turns.push_back({{"role", turn.role}, {"content", turn.text}});
  line["conversation"] = std::move(turns);
  line["prompt"] = request.user_text;
  if (response != nullptr) {
    line["response"] = response->raw_text;
    line["latency_ms"] = response->latency.count();
    if (response->token_usage) {
      line["usage"] = {{"prompt_tokens", response->token_usage->prompt},
                       {"completion_tokens", response->token_usage->completion}};
    }
  }
  if (!error.empty()) line["error"] = error;
  out_ << line.dump() << '\n';
  out_.flush();
}

TranscriptingProposer::TranscriptingProposer(std::unique_ptr<Proposer> inner, std::shared_ptr<TranscriptLog> log)
    : inner_(std::move(inner)), log_(std::move(log)) {}

ProposerResponse TranscriptingProposer::propose(const ProposerRequest& request) {
  try {
    ProposerResponse response = inner_->propose(request);
    log_->record(inner_->backend_id(), request, &response, "");
    return response;
  } catch (const ProposerError& e) {
    log_->record(inner_->backend_id(), request, nullptr, to_string(e.kind()) + ": " + e.what());
    throw;
  }
}

}  // namespace trussloop
