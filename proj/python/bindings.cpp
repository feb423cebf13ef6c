#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"

#include "navpruner/errors.hpp"
#include "navpruner/eval.hpp"
#include "navpruner/exemplar.hpp"
#include "navpruner/instructions.hpp"
#include "navpruner/retriever.hpp"
#include "navpruner/text_encoder.hpp"
#include "navpruner/world.hpp"

namespace py = pybind11;
using namespace navpruner;

namespace {

py::object json_to_py(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

TrajectoryResult run_episode_spec(const World& world, const Episode& episode,
                                  const std::string& policy_spec,
                                  const RetrieverModel* model,
                                  const ExemplarMemory* memory,
                                  const RunConfig& cfg) {
  const auto policy = make_policy(policy_spec);
  return run_episode(world, episode, *policy, model, memory, cfg);
}

ExemplarMemory build_memory_from_oracle(const WorldFile& wf, int cap, int dim) {
  RunConfig rc;
  std::vector<TrajectoryResult> successes;
  std::vector<Episode> episodes;
  for (const auto& ep : wf.episodes) {
    OraclePolicy oracle;
    auto traj = run_episode(wf.world, ep, oracle, nullptr, nullptr, rc);
    if (is_success(wf.world, ep, traj, rc.success_radius)) {
      successes.push_back(std::move(traj));
      episodes.push_back(ep);
    }
  }
  EncoderConfig enc;
  enc.dim = dim;
  return build_memory(successes, episodes, wf.world, TextEncoder(enc), cap);
}

}  // namespace

PYBIND11_MODULE(_navpruner, m) {
  m.doc() = "Dual-level retrieval test-bed for instruction-following graph "
            "navigation";

  py::register_exception<NavError>(m, "NavError");

  // --- world ---
  py::class_<Position>(m, "Position")
      .def(py::init<>())
      .def(py::init([](double x, double y, double z) {
             return Position{x, y, z};
           }),
           py::arg("x"), py::arg("y"), py::arg("z") = 0.0)
      .def_readwrite("x", &Position::x)
      .def_readwrite("y", &Position::y)
      .def_readwrite("z", &Position::z);

  py::class_<World>(m, "World")
      .def(py::init<>())
      .def("add_viewpoint", &World::add_viewpoint)
      .def("add_edge", &World::add_edge)
      .def("has", &World::has)
      .def("num_viewpoints", &World::num_viewpoints)
      .def("num_edges", &World::num_edges)
      .def("viewpoint_ids", &World::viewpoint_ids)
      .def("neighbors", &World::neighbors)
      .def("room", &World::room)
      .def("position", &World::position)
      .def("is_connected", &World::is_connected);

  py::class_<Episode>(m, "Episode")
      .def(py::init<>())
      .def_readwrite("id", &Episode::id)
      .def_readwrite("instruction", &Episode::instruction)
      .def_readwrite("start", &Episode::start)
      .def_readwrite("start_heading", &Episode::start_heading)
      .def_readwrite("goal", &Episode::goal)
      .def_readwrite("reference_path", &Episode::reference_path);

  py::class_<WorldFile>(m, "WorldFile")
      .def(py::init<>())
      .def_readwrite("world", &WorldFile::world)
      .def_readwrite("episodes", &WorldFile::episodes);

  py::class_<NavigableEntry>(m, "NavigableEntry")
      .def_readonly("viewpoint", &NavigableEntry::viewpoint)
      .def_readonly("rel_heading", &NavigableEntry::rel_heading)
      .def_readonly("distance", &NavigableEntry::distance);

  py::class_<DirectionalSector>(m, "DirectionalSector")
      .def_readonly("index", &DirectionalSector::index)
      .def_readonly("name", &DirectionalSector::name)
      .def_readonly("scene_text", &DirectionalSector::scene_text)
      .def_readonly("objects_text", &DirectionalSector::objects_text)
      .def_readonly("navigable", &DirectionalSector::navigable)
      .def_readonly("rendered", &DirectionalSector::rendered);

  py::class_<Observation>(m, "Observation")
      .def_readonly("viewpoint", &Observation::viewpoint)
      .def_readonly("heading", &Observation::heading)
      .def_readonly("scene_summary", &Observation::scene_summary)
      .def_readonly("sectors", &Observation::sectors)
      .def("text", [](const Observation& o) { return observation_text(o); });

  py::class_<PrunedObservation>(m, "PrunedObservation")
      .def_readonly("viewpoint", &PrunedObservation::viewpoint)
      .def_readonly("scene_summary", &PrunedObservation::scene_summary)
      .def_readonly("sectors", &PrunedObservation::sectors)
      .def_readonly("selected_indices", &PrunedObservation::selected_indices)
      .def("navigable", &PrunedObservation::navigable)
      .def("text",
           [](const PrunedObservation& o) { return observation_text(o); });

  py::class_<WorldConfig>(m, "WorldConfig")
      .def(py::init<>())
      .def_readwrite("num_viewpoints", &WorldConfig::num_viewpoints)
      .def_readwrite("box_size", &WorldConfig::box_size)
      .def_readwrite("connection_radius", &WorldConfig::connection_radius)
      .def_readwrite("z_jitter", &WorldConfig::z_jitter)
      .def_readwrite("num_objects", &WorldConfig::num_objects);

  py::class_<EpisodeConfig>(m, "EpisodeConfig")
      .def(py::init<>())
      .def_readwrite("num_episodes", &EpisodeConfig::num_episodes)
      .def_readwrite("min_len", &EpisodeConfig::min_len)
      .def_readwrite("max_len", &EpisodeConfig::max_len)
      .def_readwrite("id_prefix", &EpisodeConfig::id_prefix);

  m.def("generate_world", &generate_world, py::arg("config"), py::arg("seed"));
  m.def("generate_episodes", &generate_episodes, py::arg("world"),
        py::arg("config"), py::arg("seed"));
  m.def("load_world", &load_world);
  m.def("save_world", &save_world);
  m.def("geodesic", &geodesic);
  m.def("shortest_path", &shortest_path);
  m.def("path_length", &path_length);
  m.def("relative_heading", &relative_heading);
  m.def("render_observation", &render_observation);
  m.def("full_presented", &full_presented);

  // --- text encoder / exemplars ---
  py::class_<EncoderConfig>(m, "EncoderConfig")
      .def(py::init<>())
      .def_readwrite("dim", &EncoderConfig::dim)
      .def_readwrite("max_ngram", &EncoderConfig::max_ngram)
      .def_readwrite("hash_seed", &EncoderConfig::hash_seed);

  m.def(
      "encode_text",
      [](const std::string& text, const EncoderConfig& cfg) {
        return TextEncoder(cfg).encode(text);
      },
      py::arg("text"), py::arg("config") = EncoderConfig());
  m.def("cosine_sim", &cosine_sim);

  py::class_<ExemplarRecord>(m, "ExemplarRecord")
      .def_readonly("instruction", &ExemplarRecord::instruction)
      .def_readonly("trace", &ExemplarRecord::trace)
      .def_readonly("embedding", &ExemplarRecord::embedding)
      .def_readonly("source_episode_id", &ExemplarRecord::source_episode_id);

  py::class_<ExemplarMemory>(m, "ExemplarMemory")
      .def_readonly("records", &ExemplarMemory::records)
      .def("__len__",
           [](const ExemplarMemory& mem) { return mem.records.size(); });

  m.def("build_memory_from_oracle", &build_memory_from_oracle, py::arg("wf"),
        py::arg("cap") = kDefaultMemoryCap, py::arg("dim") = 256);
  m.def("save_memory", &save_memory);
  m.def(
      "load_memory",
      [](const std::string& path, const EncoderConfig& cfg) {
        return load_memory(path, TextEncoder(cfg));
      },
      py::arg("path"), py::arg("config") = EncoderConfig());
  m.def("retrieve_exemplars", &retrieve_exemplars, py::arg("memory"),
        py::arg("instruction"), py::arg("k") = kDefaultExemplarK);
  m.def("format_examples_block", &format_examples_block);

  // --- candidate retriever ---
  py::class_<RetrieverModel>(m, "RetrieverModel")
      .def_readonly("encoder_config", &RetrieverModel::encoder_config)
      .def_readonly("hidden", &RetrieverModel::hidden);

  py::class_<TrainingExample>(m, "TrainingExample")
      .def_readonly("context", &TrainingExample::context)
      .def_readonly("direction_texts", &TrainingExample::direction_texts)
      .def_readonly("mask", &TrainingExample::mask)
      .def_readonly("label", &TrainingExample::label);

  py::class_<DirectionScores>(m, "DirectionScores")
      .def_readonly("logits", &DirectionScores::logits)
      .def_readonly("mask", &DirectionScores::mask);

  py::class_<PruneSelection>(m, "PruneSelection")
      .def(py::init<>())
      .def_readwrite("indices", &PruneSelection::indices);

  py::class_<TrainingConfig>(m, "TrainingConfig")
      .def(py::init<>())
      .def_readwrite("encoder", &TrainingConfig::encoder)
      .def_readwrite("hidden", &TrainingConfig::hidden)
      .def_readwrite("epochs", &TrainingConfig::epochs)
      .def_readwrite("batch_size", &TrainingConfig::batch_size)
      .def_readwrite("learning_rate", &TrainingConfig::learning_rate)
      .def_readwrite("weight_decay", &TrainingConfig::weight_decay);

  py::class_<TrainingRun>(m, "TrainingRun")
      .def_readonly("model", &TrainingRun::model)
      .def_readonly("epoch_losses", &TrainingRun::epoch_losses);

  m.def("make_training_examples", &make_training_examples, py::arg("world"),
        py::arg("episodes"), py::arg("history_window") = 5);
  m.def("train_retriever", &train_retriever, py::arg("dataset"),
        py::arg("config"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());
  m.def("save_model", &save_model);
  m.def("load_model", &load_model);
  m.def("score_directions", &score_directions);
  m.def("select_topk", &select_topk, py::arg("scores"), py::arg("k") = 5);
  m.def("prune_observation", &prune_observation);

  // --- evaluation ---
  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("max_steps", &RunConfig::max_steps)
      .def_readwrite("prune_k", &RunConfig::prune_k)
      .def_readwrite("exemplar_k", &RunConfig::exemplar_k)
      .def_readwrite("success_radius", &RunConfig::success_radius)
      .def_readwrite("history_window", &RunConfig::history_window)
      .def_readwrite("global_seed", &RunConfig::global_seed);

  py::class_<TrajectoryResult>(m, "TrajectoryResult")
      .def_readonly("episode_id", &TrajectoryResult::episode_id)
      .def_readonly("path", &TrajectoryResult::path)
      .def_readonly("terminated_with_finished",
                    &TrajectoryResult::terminated_with_finished)
      .def_readonly("termination_reason", &TrajectoryResult::termination_reason)
      .def_readonly("retrieved_exemplars",
                    &TrajectoryResult::retrieved_exemplars)
      .def("actions", [](const TrajectoryResult& t) {
        std::vector<std::string> out;
        for (const auto& s : t.steps) out.push_back(s.action.text());
        return out;
      });

  m.def("run_episode", &run_episode_spec, py::arg("world"), py::arg("episode"),
        py::arg("policy"), py::arg("model") = nullptr,
        py::arg("memory") = nullptr, py::arg("config") = RunConfig());

  m.def(
      "run_split",
      [](const std::vector<std::string>& world_files,
         const std::string& policy_spec, const RetrieverModel* model,
         const ExemplarMemory* memory, const RunConfig& cfg, int jobs,
         bool full_logs) {
        SplitResult split;
        {
          py::gil_scoped_release release;
          split = run_split(world_files, policy_spec, model, memory, cfg, jobs);
        }
        return json_to_py(report_to_json(
            split.report, full_logs ? &split.trajectories : nullptr));
      },
      py::arg("world_files"), py::arg("policy"), py::arg("model") = nullptr,
      py::arg("memory") = nullptr, py::arg("config") = RunConfig(),
      py::arg("jobs") = 1, py::arg("full_logs") = false);

  m.def(
      "compute_metrics",
      [](const std::vector<TrajectoryResult>& results, const World& world,
         const std::vector<Episode>& episodes, const RunConfig& cfg) {
        return json_to_py(report_to_json(
            compute_metrics(results, world, episodes, cfg), nullptr));
      },
      py::arg("results"), py::arg("world"), py::arg("episodes"),
      py::arg("config") = RunConfig());

  m.def("system_rules", []() { return system_rules(); });
  m.def("parse_instruction", [](const std::string& text) {
    std::vector<py::dict> out;
    for (const auto& c : parse_instruction(text)) {
      py::dict d;
      d["stop"] = c.stop;
      d["sector"] = c.sector_name;
      d["target"] = c.target;
      out.push_back(std::move(d));
    }
    return out;
  });
}
