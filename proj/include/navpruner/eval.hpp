#pragma once

#include <optional>
#include <string>
#include <vector>

#include "navpruner/exemplar.hpp"
#include "navpruner/navigator.hpp"
#include "navpruner/retriever.hpp"
#include "navpruner/world.hpp"

namespace navpruner {

struct RunConfig {
  int max_steps = 20;
  int prune_k = 5;       // 1..8
  int exemplar_k = 3;
  double success_radius = 3.0;  // meters
  int history_window = 5;
  std::uint64_t global_seed = 0;
};

struct EpisodeMetrics {
  std::string episode_id;
  int steps = 0;        // executed actions (viewpoint transitions)
  double tl_m = 0.0;    // executed path length, meters
  double ne = 0.0;      // geodesic(final, goal)
  bool success = false;
  bool oracle_success = false;
  double spl = 0.0;
  std::string termination_reason;
};

struct MetricsReport {
  std::vector<EpisodeMetrics> episodes;
  int n = 0;
  double tl_m_mean = 0.0;
  double steps_mean = 0.0;
  double ne_mean = 0.0;
  double sr_pct = 0.0;
  double osr_pct = 0.0;
  double spl_mean = 0.0;
  int warnings = 0;  // unreadable inputs skipped by run_split
};

bool is_success(const World& world, const Episode& episode,
                const TrajectoryResult& result, double radius = 3.0);

// Closed loop: exemplar block once per episode, then per step render ->
// prune -> prompt -> policy -> validate -> move. Policy errors terminate the
// episode with an error reason rather than propagating.
TrajectoryResult run_episode(const World& world, const Episode& episode,
                             Policy& policy,
                             const RetrieverModel* retriever,
                             const ExemplarMemory* memory,
                             const RunConfig& cfg);

MetricsReport compute_metrics(const std::vector<TrajectoryResult>& results,
                              const World& world,
                              const std::vector<Episode>& episodes,
                              const RunConfig& cfg);

struct SplitResult {
  MetricsReport report;
  // Aligned with report.episodes.
  std::vector<TrajectoryResult> trajectories;
};

// Evaluates every episode in every readable world file. Episodes run
// independently with per-episode RNG streams derived from
// (global_seed, episode_id), so results do not depend on `parallelism`.
SplitResult run_split(const std::vector<std::string>& world_files,
                      const std::string& policy_spec,
                      const RetrieverModel* retriever,
                      const ExemplarMemory* memory, const RunConfig& cfg,
                      int parallelism = 1);

// Report serialization: JSON {"aggregate", "episodes"} plus an aligned CSV.
std::string report_to_json(const MetricsReport& report,
                           const std::vector<TrajectoryResult>* trajectories);
std::string report_to_csv(const MetricsReport& report);
void save_report(const MetricsReport& report,
                 const std::vector<TrajectoryResult>* trajectories,
                 const std::string& json_path, const std::string& csv_path);

}  // namespace navpruner
