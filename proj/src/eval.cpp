#include "navpruner/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <thread>

#include "json.hpp"

#include "navpruner/errors.hpp"

namespace navpruner {

namespace {

std::string format_double(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

bool is_success(const World& world, const Episode& episode,
                const TrajectoryResult& result, double radius) {
  if (!result.terminated_with_finished) return false;
  const ViewpointId& final_vp =
      result.path.empty() ? episode.start : result.path.back();
  return geodesic(world, final_vp, episode.goal) < radius;
}

TrajectoryResult run_episode(const World& world, const Episode& episode,
                             Policy& policy, const RetrieverModel* retriever,
                             const ExemplarMemory* memory,
                             const RunConfig& cfg) {
  validate_episode(world, episode);
  if (cfg.max_steps < 1) throw InvalidConfig("max_steps must be >= 1");
  if (cfg.prune_k < 1 || cfg.prune_k > kNumSectors)
    throw InvalidConfig("prune_k must be in 1..8");

  TrajectoryResult result;
  result.episode_id = episode.id;
  result.path.push_back(episode.start);

  policy.begin_episode(world, episode,
                       mix_seed(cfg.global_seed, fnv1a64(episode.id)));

  std::string examples_block;
  if (memory) {
    const auto exemplars =
        retrieve_exemplars(*memory, episode.instruction, cfg.exemplar_k);
    examples_block = format_examples_block(exemplars);
    for (const auto& rec : exemplars)
      result.retrieved_exemplars.push_back(rec.source_episode_id);
  }

  History history;
  history.window = cfg.history_window;
  ViewpointId current = episode.start;
  double heading = episode.start_heading;

  for (int step = 0; step < cfg.max_steps; ++step) {
    const Observation obs = render_observation(world, current, heading);
    PrunedObservation presented;
    if (retriever) {
      const auto scores = score_directions(
          *retriever, build_context(episode.instruction, history), obs);
      presented = prune_observation(obs, select_topk(scores, cfg.prune_k));
    } else {
      presented = full_presented(obs);
    }

    const std::string prompt = build_prompt(
        system_rules(), examples_block, episode.instruction, presented, history);
    AgentState state{episode.instruction, presented, &history};

    Action action;
    try {
      action = policy.act(state, prompt, step);
    } catch (const NavError& e) {
      result.termination_reason = std::string("error: ") + e.what();
      return result;
    }
    if (!action.finished && !presented.presents(action.target)) {
      result.termination_reason =
          "error: action " + action.target + " is not presented";
      return result;
    }

    TrajectoryStep record;
    record.index = step;
    record.viewpoint_before = current;
    record.action = action;
    record.thought = policy.last_thought();
    record.observation_summary = obs.scene_summary;
    record.prune_selection = presented.selected_indices;
    result.steps.push_back(record);
    history.steps.push_back(std::move(record));

    if (action.finished) {
      result.terminated_with_finished = true;
      result.termination_reason = "finished";
      return result;
    }

    heading = bearing_deg(world.position(current), world.position(action.target));
    current = action.target;
    result.path.push_back(current);
  }
  result.termination_reason = "step_cap";
  return result;
}

MetricsReport compute_metrics(const std::vector<TrajectoryResult>& results,
                              const World& world,
                              const std::vector<Episode>& episodes,
                              const RunConfig& cfg) {
  if (results.size() != episodes.size())
    throw Misalignment("results and episodes differ in length");

  MetricsReport report;
  report.n = static_cast<int>(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& traj = results[i];
    const auto& ep = episodes[i];
    if (traj.episode_id != ep.id)
      throw Misalignment("result " + traj.episode_id +
                         " does not match episode " + ep.id);

    const auto dist_to_goal = geodesics_from(world, ep.goal);
    const auto dist_of = [&](const ViewpointId& v) {
      return dist_to_goal[viewpoint_index(world, v)];
    };

    EpisodeMetrics m;
    m.episode_id = ep.id;
    m.steps = static_cast<int>(traj.path.size()) - 1;
    m.tl_m = path_length(world, traj.path);
    const ViewpointId& final_vp =
        traj.path.empty() ? ep.start : traj.path.back();
    m.ne = dist_of(final_vp);
    m.success = traj.terminated_with_finished && m.ne < cfg.success_radius;
    m.oracle_success = false;
    for (const auto& v : traj.path)
      if (dist_of(v) < cfg.success_radius) {
        m.oracle_success = true;
        break;
      }
    const double l = dist_of(ep.start);
    if (!m.success)
      m.spl = 0.0;
    else if (l == 0.0)
      m.spl = 1.0;
    else
      m.spl = l / std::max(l, m.tl_m);
    m.termination_reason = traj.termination_reason;

    report.tl_m_mean += m.tl_m;
    report.steps_mean += m.steps;
    report.ne_mean += m.ne;
    report.sr_pct += m.success ? 1.0 : 0.0;
    report.osr_pct += m.oracle_success ? 1.0 : 0.0;
    report.spl_mean += m.spl;
    report.episodes.push_back(std::move(m));
  }

  if (report.n > 0) {
    const double inv = 1.0 / report.n;
    report.tl_m_mean *= inv;
    report.steps_mean *= inv;
    report.ne_mean *= inv;
    report.sr_pct *= 100.0 * inv;
    report.osr_pct *= 100.0 * inv;
    report.spl_mean *= inv;
  }
  return report;
}

SplitResult run_split(const std::vector<std::string>& world_files,
                      const std::string& policy_spec,
                      const RetrieverModel* retriever,
                      const ExemplarMemory* memory, const RunConfig& cfg,
                      int parallelism) {
  if (parallelism < 1) throw InvalidConfig("parallelism must be >= 1");

  int warnings = 0;
  std::deque<WorldFile> worlds;
  struct Task {
    const World* world;
    const Episode* episode;
  };
  std::vector<Task> tasks;
  for (const auto& path : world_files) {
    try {
      worlds.push_back(load_world(path));
    } catch (const NavError& e) {
      std::fprintf(stderr, "warning: skipping %s: %s\n", path.c_str(), e.what());
      ++warnings;
      continue;
    }
    for (const auto& ep : worlds.back().episodes)
      tasks.push_back({&worlds.back().world, &ep});
  }

  std::vector<TrajectoryResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      const auto policy = make_policy(policy_spec);
      try {
        results[i] = run_episode(*tasks[i].world, *tasks[i].episode, *policy,
                                 retriever, memory, cfg);
      } catch (const NavError& e) {
        TrajectoryResult r;
        r.episode_id = tasks[i].episode->id;
        r.path.push_back(tasks[i].episode->start);
        r.termination_reason = std::string("error: ") + e.what();
        results[i] = std::move(r);
      }
    }
  };
  if (parallelism == 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(parallelism, tasks.size());
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Aggregation is order-insensitive: sort rows by episode id, stable on
  // task order so duplicate ids across files stay deterministic.
  std::vector<std::size_t> order(tasks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tasks[a].episode->id < tasks[b].episode->id;
  });

  SplitResult split;
  split.report.warnings = warnings;
  // Per-world metric pass keeps world lookups valid for episodes.
  MetricsReport& agg = split.report;
  agg.n = static_cast<int>(tasks.size());
  for (const std::size_t i : order) {
    const std::vector<TrajectoryResult> one_result = {results[i]};
    const std::vector<Episode> one_episode = {*tasks[i].episode};
    MetricsReport r = compute_metrics(one_result, *tasks[i].world, one_episode, cfg);
    agg.episodes.push_back(r.episodes[0]);
    split.trajectories.push_back(results[i]);
  }
  agg.tl_m_mean = agg.steps_mean = agg.ne_mean = 0.0;
  agg.sr_pct = agg.osr_pct = agg.spl_mean = 0.0;
  for (const auto& m : agg.episodes) {
    agg.tl_m_mean += m.tl_m;
    agg.steps_mean += m.steps;
    agg.ne_mean += m.ne;
    agg.sr_pct += m.success ? 1.0 : 0.0;
    agg.osr_pct += m.oracle_success ? 1.0 : 0.0;
    agg.spl_mean += m.spl;
  }
  if (agg.n > 0) {
    const double inv = 1.0 / agg.n;
    agg.tl_m_mean *= inv;
    agg.steps_mean *= inv;
    agg.ne_mean *= inv;
    agg.sr_pct *= 100.0 * inv;
    agg.osr_pct *= 100.0 * inv;
    agg.spl_mean *= inv;
  }
  return split;
}

std::string report_to_json(const MetricsReport& report,
                           const std::vector<TrajectoryResult>* trajectories) {
  nlohmann::ordered_json doc;
  doc["aggregate"] = {{"n", report.n},
                      {"tl_m_mean", report.tl_m_mean},
                      {"steps_mean", report.steps_mean},
                      {"ne_mean", report.ne_mean},
                      {"sr_pct", report.sr_pct},
                      {"osr_pct", report.osr_pct},
                      {"spl_mean", report.spl_mean},
                      {"warnings", report.warnings}};
  if (trajectories) {
    std::map<std::string, int> usage;
    for (const auto& traj : *trajectories)
      for (const auto& id : traj.retrieved_exemplars) ++usage[id];
    nlohmann::ordered_json usage_json = nlohmann::ordered_json::object();
    for (const auto& [id, count] : usage) usage_json[id] = count;
    doc["aggregate"]["exemplar_usage"] = usage_json;
  }
  doc["episodes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.episodes.size(); ++i) {
    const auto& m = report.episodes[i];
    nlohmann::ordered_json row = {
        {"episode_id", m.episode_id},
        {"steps", m.steps},
        {"tl_m", m.tl_m},
        {"ne", m.ne},
        {"success", m.success},
        {"oracle_success", m.oracle_success},
        {"spl", m.spl},
        {"termination_reason", m.termination_reason}};
    if (trajectories && i < trajectories->size()) {
      const auto& traj = (*trajectories)[i];
      row["retrieved_exemplars"] = traj.retrieved_exemplars;
      nlohmann::ordered_json selections = nlohmann::ordered_json::array();
      for (const auto& step : traj.steps)
        selections.push_back(step.prune_selection);
      row["prune_selections"] = selections;
      nlohmann::ordered_json actions = nlohmann::ordered_json::array();
      for (const auto& step : traj.steps) actions.push_back(step.action.text());
      row["actions"] = actions;
    }
    doc["episodes"].push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

std::string report_to_csv(const MetricsReport& report) {
  std::string out =
      "episode_id,steps,tl_m,ne,success,oracle_success,spl,termination_reason\n";
  for (const auto& m : report.episodes) {
    out += m.episode_id + "," + std::to_string(m.steps) + "," +
           format_double(m.tl_m) + "," + format_double(m.ne) + "," +
           (m.success ? "true" : "false") + "," +
           (m.oracle_success ? "true" : "false") + "," + format_double(m.spl) +
           "," + m.termination_reason + "\n";
  }
  return out;
}

void save_report(const MetricsReport& report,
                 const std::vector<TrajectoryResult>* trajectories,
                 const std::string& json_path, const std::string& csv_path) {
  {
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + json_path);
    out << report_to_json(report, trajectories);
    if (!out) throw IoError("write failed: " + json_path);
  }
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + csv_path);
    out << report_to_csv(report);
    if (!out) throw IoError("write failed: " + csv_path);
  }
}

}  // namespace navpruner
