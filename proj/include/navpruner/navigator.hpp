#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "navpruner/rng.hpp"
#include "navpruner/world.hpp"

namespace navpruner {

// Either `finished` or a move to a presented viewpoint.
struct Action {
  bool finished = false;
  ViewpointId target;
  static Action finish() { return {true, {}}; }
  static Action move(ViewpointId id) { return {false, std::move(id)}; }
  std::string text() const { return finished ? "finished" : target; }
  bool operator==(const Action& o) const {
    return finished == o.finished && target == o.target;
  }
};

struct TrajectoryStep {
  int index = 0;
  ViewpointId viewpoint_before;
  Action action;
  std::optional<std::string> thought;
  std::string observation_summary;
  std::vector<int> prune_selection;  // presented sector indices
};

// Append-only per-episode record with a bounded summary window.
struct History {
  std::vector<TrajectoryStep> steps;
  int window = 5;
};

struct AgentState {
  std::string instruction;
  PrunedObservation observation;
  const History* history = nullptr;
};

struct TrajectoryResult {
  std::string episode_id;
  std::vector<ViewpointId> path;
  std::vector<TrajectoryStep> steps;
  bool terminated_with_finished = false;
  std::string termination_reason;  // "finished" | "step_cap" | "error: ..."
  std::vector<std::string> retrieved_exemplars;  // source episode ids
};

// Renders the last min(window, n) steps as Thought/Action/Observation blocks
// in chronological order; empty history renders as "".
std::string summarize_history(const History& history);

// Full-trace variant used for exemplar records.
std::string render_trace(const std::vector<TrajectoryStep>& steps);

// Fixed navigation rules included in every prompt.
const std::string& system_rules();

// Assembles the prompt sections in fixed order: Rules, Examples (omitted when
// the block is empty), Instruction, Observation, History.
std::string build_prompt(const std::string& system_rules_text,
                         const std::string& examples_block,
                         const std::string& instruction,
                         const PrunedObservation& observation,
                         const History& history);

// --- Policies ---

// Follows graph geodesics toward the goal; `finished` exactly at the goal.
// With every candidate pruned away it falls back to `finished` and marks the
// step as a forced stop.
Action oracle_policy(const AgentState& state, const World& world,
                     const ViewpointId& goal);

// Scripted instruction follower. Consumes one clause per step; with
// probability epsilon it moves uniformly at random among presented
// viewpoints instead of the clause's sector (also the fallback when the
// clause's sector was pruned away). Stop clauses always terminate.
Action follower_policy(const AgentState& state, double epsilon, Rng& rng);

// Abstract per-episode policy used by the runner.
class Policy {
 public:
  virtual ~Policy() = default;
  // Called once before step 0.
  virtual void begin_episode(const World& world, const Episode& episode,
                             std::uint64_t seed) {}
  // `prompt` is the fully assembled text; scripted policies ignore it.
  virtual Action act(const AgentState& state, const std::string& prompt,
                     int step) = 0;
  virtual std::optional<std::string> last_thought() const { return std::nullopt; }
};

class OraclePolicy final : public Policy {
 public:
  void begin_episode(const World& world, const Episode& episode,
                     std::uint64_t) override {
    world_ = &world;
    goal_ = episode.goal;
    dist_to_goal_.clear();
  }
  Action act(const AgentState& state, const std::string&, int) override;
  std::optional<std::string> last_thought() const override { return thought_; }

 private:
  const World* world_ = nullptr;
  ViewpointId goal_;
  std::vector<double> dist_to_goal_;  // lazily filled per episode
  std::optional<std::string> thought_;
};

class FollowerPolicy final : public Policy {
 public:
  explicit FollowerPolicy(double epsilon) : epsilon_(epsilon) {}
  void begin_episode(const World&, const Episode&, std::uint64_t seed) override {
    rng_ = std::make_unique<Rng>(seed);
  }
  Action act(const AgentState& state, const std::string&, int) override {
    return follower_policy(state, epsilon_, *rng_);
  }

 private:
  double epsilon_;
  std::unique_ptr<Rng> rng_;
};

// Line-delimited JSON transport for an external navigator. One request line
// {"episode_id","step","prompt"} per step; one response line
// {"action": "finished"|"<viewpoint_id>", "thought": "..."} in order.
class NdjsonTransport {
 public:
  virtual ~NdjsonTransport() = default;
  virtual void send_line(const std::string& line) = 0;
  // Reads one line; throws TimeoutError after timeout_ms.
  virtual std::string recv_line(int timeout_ms) = 0;
};

// endpoint: "tcp:<host>:<port>" or "cmd:<shell command>" (stdio subprocess).
std::unique_ptr<NdjsonTransport> open_transport(const std::string& endpoint);

class RemotePolicy final : public Policy {
 public:
  explicit RemotePolicy(std::string endpoint, int timeout_ms = 60000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}
  void begin_episode(const World&, const Episode& episode,
                     std::uint64_t) override;
  Action act(const AgentState& state, const std::string& prompt,
             int step) override;
  std::optional<std::string> last_thought() const override { return thought_; }

 private:
  std::string endpoint_;
  int timeout_ms_;
  std::string episode_id_;
  std::unique_ptr<NdjsonTransport> transport_;
  std::optional<std::string> thought_;
};

// "oracle" | "follower:<epsilon>" | "remote:<endpoint>"
std::unique_ptr<Policy> make_policy(const std::string& spec);

}  // namespace navpruner
