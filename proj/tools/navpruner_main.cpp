#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "navpruner/errors.hpp"
#include "navpruner/eval.hpp"
#include "navpruner/exemplar.hpp"
#include "navpruner/retriever.hpp"
#include "navpruner/world.hpp"

namespace {

using navpruner::IoError;
using navpruner::NavError;

constexpr int kExitBadConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNoSuccesses = 4;
constexpr int kExitRemoteProtocol = 5;

int exit_code_for(const NavError& e) {
  if (dynamic_cast<const navpruner::InvalidConfig*>(&e) ||
      dynamic_cast<const navpruner::NoFeasiblePair*>(&e))
    return kExitBadConfig;
  if (dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const navpruner::FormatVersionMismatch*>(&e) ||
      dynamic_cast<const navpruner::DimensionMismatch*>(&e))
    return kExitIo;
  return 1;
}

nlohmann::json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const std::exception& e) {
    throw IoError("config file is not valid JSON: " + std::string(e.what()));
  }
}

// Values from --config apply to every flag not given on the command line;
// NAVPRUNER_SEED, when set, wins over both.
struct ConfigOverride {
  CLI::App* sub = nullptr;
  nlohmann::json values;

  template <typename T>
  void apply(const std::string& flag, T& var) const {
    if (values.is_null()) return;
    const std::string key = flag.substr(2);
    if (sub->count(flag) == 0 && values.contains(key))
      var = values.at(key).get<T>();
  }
};

void apply_env_seed(std::uint64_t& seed) {
  if (const char* env = std::getenv("NAVPRUNER_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') seed = v;
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

std::string format_double(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

// --- gen-world ---

int cmd_gen_world(const ConfigOverride& cfg, int viewpoints, int episodes,
                  std::uint64_t seed, double box, double radius, int objects,
                  double z_jitter, double min_len, double max_len,
                  std::string id_prefix, const std::string& out_path) {
  navpruner::WorldConfig wc;
  wc.num_viewpoints = viewpoints;
  wc.box_size = box;
  wc.connection_radius = radius;
  wc.num_objects = objects;
  wc.z_jitter = z_jitter;

  navpruner::EpisodeConfig ec;
  ec.num_episodes = episodes;
  ec.min_len = min_len;
  ec.max_len = max_len;
  if (id_prefix == "auto") id_prefix = "w" + std::to_string(seed) + "_";
  ec.id_prefix = id_prefix;

  navpruner::WorldFile wf;
  wf.world = navpruner::generate_world(wc, seed);
  wf.episodes = navpruner::generate_episodes(wf.world, ec, seed);
  navpruner::save_world(wf, out_path);
  std::printf("wrote %s: viewpoints=%zu edges=%zu episodes=%zu\n",
              out_path.c_str(), wf.world.num_viewpoints(),
              wf.world.num_edges(), wf.episodes.size());
  return 0;
}

// --- build-memory ---

int cmd_build_memory(const std::string& world_path, const std::string& out_path,
                     int cap, std::uint64_t seed, int dim,
                     const std::string& embeddings_path) {
  const auto wf = navpruner::load_world(world_path);

  navpruner::RunConfig rc;
  rc.global_seed = seed;
  std::vector<navpruner::TrajectoryResult> successes;
  std::vector<navpruner::Episode> success_episodes;
  for (const auto& ep : wf.episodes) {
    navpruner::OraclePolicy oracle;
    auto traj = navpruner::run_episode(wf.world, ep, oracle, nullptr, nullptr, rc);
    if (navpruner::is_success(wf.world, ep, traj, rc.success_radius)) {
      successes.push_back(std::move(traj));
      success_episodes.push_back(ep);
    }
  }
  if (successes.empty()) {
    std::fprintf(stderr, "no successful trajectories; memory not written\n");
    return kExitNoSuccesses;
  }

  navpruner::EncoderConfig enc;
  enc.dim = dim;
  navpruner::TextEncoder encoder(enc);
  if (!embeddings_path.empty()) encoder.load_overrides(embeddings_path);

  const auto memory = navpruner::build_memory(successes, success_episodes,
                                              wf.world, encoder, cap);
  navpruner::save_memory(memory, out_path);
  std::printf("wrote %s: records=%zu (from %zu successes, cap %d)\n",
              out_path.c_str(), memory.records.size(), successes.size(), cap);
  return 0;
}

// --- train-retriever ---

int cmd_train(const std::vector<std::string>& world_paths,
              const std::string& out_path, const std::string& loss_csv_path,
              const std::string& dump_examples_path, int epochs, int batch,
              double lr, double weight_decay, int dim, int hidden,
              std::uint64_t seed) {
  std::vector<navpruner::TrainingExample> dataset;
  for (const auto& path : world_paths) {
    const auto wf = navpruner::load_world(path);
    auto examples = navpruner::make_training_examples(wf.world, wf.episodes);
    dataset.insert(dataset.end(), std::make_move_iterator(examples.begin()),
                   std::make_move_iterator(examples.end()));
  }
  if (!dump_examples_path.empty())
    navpruner::save_training_examples(dataset, dump_examples_path);

  navpruner::TrainingConfig tc;
  tc.encoder.dim = dim;
  tc.hidden = hidden;
  tc.epochs = epochs;
  tc.batch_size = batch;
  tc.learning_rate = lr;
  tc.weight_decay = weight_decay;

  const auto run = navpruner::train_retriever(dataset, tc, seed);
  navpruner::save_model(run.model, out_path);

  std::string csv = "epoch,mean_loss\n";
  for (std::size_t i = 0; i < run.epoch_losses.size(); ++i)
    csv += std::to_string(i + 1) + "," +
           format_double(run.epoch_losses[i], 6) + "\n";
  if (!loss_csv_path.empty()) write_text(loss_csv_path, csv);

  std::printf("wrote %s: examples=%zu final_loss=%s\n", out_path.c_str(),
              dataset.size(),
              format_double(run.epoch_losses.back(), 6).c_str());
  return 0;
}

// --- eval ---

int cmd_eval(const std::vector<std::string>& world_paths,
             const std::string& policy_spec, const std::string& mode,
             const std::string& model_path, const std::string& memory_path,
             int prune_k, int exemplar_k, int max_steps, int jobs,
             std::uint64_t seed, const std::string& out_path,
             std::string csv_path) {
  const bool use_model = (mode == "prune-only" || mode == "full");
  const bool use_memory = (mode == "exemplar-only" || mode == "full");
  if (mode != "baseline" && !use_model && !use_memory)
    throw navpruner::InvalidConfig(
        "mode must be baseline, exemplar-only, prune-only, or full");
  if (use_model && model_path.empty())
    throw navpruner::InvalidConfig("--mode " + mode + " requires --model");
  if (use_memory && memory_path.empty())
    throw navpruner::InvalidConfig("--mode " + mode + " requires --memory");

  std::optional<navpruner::RetrieverModel> model;
  if (use_model) model = navpruner::load_model(model_path);

  std::optional<navpruner::ExemplarMemory> memory;
  if (use_memory) {
    navpruner::EncoderConfig enc;
    if (model) enc = model->encoder_config;
    memory = navpruner::load_memory(memory_path, navpruner::TextEncoder(enc));
  }

  navpruner::RunConfig rc;
  rc.max_steps = max_steps;
  rc.prune_k = prune_k;
  rc.exemplar_k = exemplar_k;
  rc.global_seed = seed;

  const auto split = navpruner::run_split(
      world_paths, policy_spec, model ? &*model : nullptr,
      memory ? &*memory : nullptr, rc, jobs);

  if (csv_path.empty()) {
    csv_path = out_path;
    const auto dot = csv_path.rfind('.');
    if (dot != std::string::npos) csv_path.resize(dot);
    csv_path += ".csv";
  }
  const bool full_logs = (mode == "full");
  navpruner::save_report(split.report, full_logs ? &split.trajectories : nullptr,
                         out_path, csv_path);

  const auto& agg = split.report;
  std::printf(
      "n=%d TL_m=%.2f steps=%.2f NE=%.2f SR=%.2f OSR=%.2f SPL=%.4f -> %s\n",
      agg.n, agg.tl_m_mean, agg.steps_mean, agg.ne_mean, agg.sr_pct,
      agg.osr_pct, agg.spl_mean, out_path.c_str());

  if (policy_spec.rfind("remote:", 0) == 0) {
    int protocol_errors = 0;
    for (const auto& m : agg.episodes)
      if (m.termination_reason.rfind("error:", 0) == 0) ++protocol_errors;
    if (protocol_errors > 0) {
      std::fprintf(stderr, "%d episode(s) aborted on navigator errors\n",
                   protocol_errors);
      return kExitRemoteProtocol;
    }
  }
  return 0;
}

// --- report ---

int cmd_report(const std::vector<std::string>& report_paths) {
  std::printf("%-40s %8s %7s %7s %7s %7s %7s\n", "report", "TL_m", "steps",
              "NE", "SR", "OSR", "SPL");
  for (const auto& path : report_paths) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(ss.str());
    } catch (const std::exception& e) {
      throw IoError(path + " is not valid JSON: " + e.what());
    }
    const auto& agg = doc.at("aggregate");
    std::printf("%-40s %8.2f %7.2f %7.2f %7.2f %7.2f %7.2f\n", path.c_str(),
                agg.at("tl_m_mean").get<double>(),
                agg.at("steps_mean").get<double>(),
                agg.at("ne_mean").get<double>(), agg.at("sr_pct").get<double>(),
                agg.at("osr_pct").get<double>(),
                agg.at("spl_mean").get<double>());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-level retrieval test-bed for instruction-following graph "
               "navigation"};
  app.require_subcommand(1);

  // gen-world
  auto* gen = app.add_subcommand("gen-world",
                                 "Generate a synthetic world with episodes");
  int gw_viewpoints = 60, gw_episodes = 50, gw_objects = 20;
  std::uint64_t gw_seed = 0;
  double gw_box = 30.0, gw_radius = 6.0, gw_zjitter = 0.2;
  double gw_min_len = 8.0, gw_max_len = 20.0;
  std::string gw_prefix = "auto", gw_out = "world.json", gw_config;
  gen->add_option("--viewpoints", gw_viewpoints, "Number of viewpoints");
  gen->add_option("--episodes", gw_episodes, "Number of episodes");
  gen->add_option("--seed", gw_seed, "Generator seed");
  gen->add_option("--box", gw_box, "Box side length, meters");
  gen->add_option("--radius", gw_radius, "Connection radius, meters");
  gen->add_option("--objects", gw_objects, "Number of placed objects");
  gen->add_option("--z-jitter", gw_zjitter, "Elevation noise, meters");
  gen->add_option("--min-len", gw_min_len, "Minimum episode geodesic, meters");
  gen->add_option("--max-len", gw_max_len, "Maximum episode geodesic, meters");
  gen->add_option("--id-prefix", gw_prefix,
                  "Episode id prefix ('auto' = w<seed>_)");
  gen->add_option("--out", gw_out, "Output world file");
  gen->add_option("--config", gw_config, "JSON config file");

  // build-memory
  auto* bm = app.add_subcommand("build-memory",
                                "Build an exemplar memory from oracle runs");
  std::string bm_world, bm_out = "memory.jsonl", bm_embeddings, bm_config;
  int bm_cap = navpruner::kDefaultMemoryCap, bm_dim = 256;
  std::uint64_t bm_seed = 0;
  bm->add_option("--world", bm_world, "World file")->required();
  bm->add_option("--out", bm_out, "Output memory file (JSON lines)");
  bm->add_option("--cap", bm_cap, "Maximum number of records");
  bm->add_option("--dim", bm_dim, "Encoder dimension");
  bm->add_option("--seed", bm_seed, "Run seed");
  bm->add_option("--embeddings", bm_embeddings,
                 "Optional precomputed-embedding JSONL file");
  bm->add_option("--config", bm_config, "JSON config file");

  // train-retriever
  auto* tr = app.add_subcommand("train-retriever",
                                "Train the direction-scoring MLP head");
  std::vector<std::string> tr_worlds;
  std::string tr_out = "model.json", tr_loss_csv = "loss.csv";
  std::string tr_dump, tr_config;
  int tr_epochs = 10, tr_batch = 32, tr_dim = 256, tr_hidden = 128;
  double tr_lr = 1e-3, tr_wd = 0.01;
  std::uint64_t tr_seed = 0;
  tr->add_option("--world", tr_worlds, "Training world file(s)")->required();
  tr->add_option("--out", tr_out, "Output model file");
  tr->add_option("--loss-csv", tr_loss_csv, "Per-epoch loss CSV");
  tr->add_option("--dump-examples", tr_dump,
                 "Optional JSONL dump of training examples");
  tr->add_option("--epochs", tr_epochs, "Training epochs");
  tr->add_option("--batch", tr_batch, "Minibatch size");
  tr->add_option("--lr", tr_lr, "Learning rate");
  tr->add_option("--weight-decay", tr_wd, "AdamW weight decay");
  tr->add_option("--dim", tr_dim, "Encoder dimension");
  tr->add_option("--hidden", tr_hidden, "Hidden layer width");
  tr->add_option("--seed", tr_seed, "Training seed");
  tr->add_option("--config", tr_config, "JSON config file");

  // eval
  auto* ev = app.add_subcommand("eval", "Run an evaluation split");
  std::vector<std::string> ev_worlds;
  std::string ev_policy = "oracle", ev_mode = "baseline";
  std::string ev_model, ev_memory, ev_out = "report.json", ev_csv, ev_config;
  int ev_k = 5, ev_exemplar_k = navpruner::kDefaultExemplarK;
  int ev_max_steps = 20, ev_jobs = 1;
  std::uint64_t ev_seed = 0;
  ev->add_option("--world", ev_worlds, "World file(s)")->required();
  ev->add_option("--policy", ev_policy,
                 "oracle | follower:<eps> | remote:<endpoint>");
  ev->add_option("--mode", ev_mode,
                 "baseline | exemplar-only | prune-only | full");
  ev->add_option("--model", ev_model, "Retriever model file");
  ev->add_option("--memory", ev_memory, "Exemplar memory file");
  ev->add_option("--k", ev_k, "Prune top-k sectors");
  ev->add_option("--exemplar-k", ev_exemplar_k, "Exemplars per episode");
  ev->add_option("--max-steps", ev_max_steps, "Step cap per episode");
  ev->add_option("--jobs", ev_jobs, "Parallel episode runners");
  ev->add_option("--seed", ev_seed, "Global evaluation seed");
  ev->add_option("--out", ev_out, "Output report JSON");
  ev->add_option("--csv", ev_csv, "Output report CSV (default: out with .csv)");
  ev->add_option("--config", ev_config, "JSON config file");

  // report
  auto* rp = app.add_subcommand("report", "Render a summary table of reports");
  std::vector<std::string> rp_files;
  rp->add_option("files", rp_files, "Report JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadConfig;
  }

  try {
    if (gen->parsed()) {
      ConfigOverride cfg{gen, gw_config.empty() ? nlohmann::json()
                                                : load_config_json(gw_config)};
      cfg.apply("--viewpoints", gw_viewpoints);
      cfg.apply("--episodes", gw_episodes);
      cfg.apply("--seed", gw_seed);
      cfg.apply("--box", gw_box);
      cfg.apply("--radius", gw_radius);
      cfg.apply("--objects", gw_objects);
      cfg.apply("--z-jitter", gw_zjitter);
      cfg.apply("--min-len", gw_min_len);
      cfg.apply("--max-len", gw_max_len);
      cfg.apply("--id-prefix", gw_prefix);
      cfg.apply("--out", gw_out);
      apply_env_seed(gw_seed);
      return cmd_gen_world(cfg, gw_viewpoints, gw_episodes, gw_seed, gw_box,
                           gw_radius, gw_objects, gw_zjitter, gw_min_len,
                           gw_max_len, gw_prefix, gw_out);
    }
    if (bm->parsed()) {
      ConfigOverride cfg{bm, bm_config.empty() ? nlohmann::json()
                                               : load_config_json(bm_config)};
      cfg.apply("--world", bm_world);
      cfg.apply("--out", bm_out);
      cfg.apply("--cap", bm_cap);
      cfg.apply("--dim", bm_dim);
      cfg.apply("--seed", bm_seed);
      cfg.apply("--embeddings", bm_embeddings);
      apply_env_seed(bm_seed);
      return cmd_build_memory(bm_world, bm_out, bm_cap, bm_seed, bm_dim,
                              bm_embeddings);
    }
    if (tr->parsed()) {
      ConfigOverride cfg{tr, tr_config.empty() ? nlohmann::json()
                                               : load_config_json(tr_config)};
      cfg.apply("--world", tr_worlds);
      cfg.apply("--out", tr_out);
      cfg.apply("--loss-csv", tr_loss_csv);
      cfg.apply("--dump-examples", tr_dump);
      cfg.apply("--epochs", tr_epochs);
      cfg.apply("--batch", tr_batch);
      cfg.apply("--lr", tr_lr);
      cfg.apply("--weight-decay", tr_wd);
      cfg.apply("--dim", tr_dim);
      cfg.apply("--hidden", tr_hidden);
      cfg.apply("--seed", tr_seed);
      apply_env_seed(tr_seed);
      return cmd_train(tr_worlds, tr_out, tr_loss_csv, tr_dump, tr_epochs,
                       tr_batch, tr_lr, tr_wd, tr_dim, tr_hidden, tr_seed);
    }
    if (ev->parsed()) {
      ConfigOverride cfg{ev, ev_config.empty() ? nlohmann::json()
                                               : load_config_json(ev_config)};
      cfg.apply("--world", ev_worlds);
      cfg.apply("--policy", ev_policy);
      cfg.apply("--mode", ev_mode);
      cfg.apply("--model", ev_model);
      cfg.apply("--memory", ev_memory);
      cfg.apply("--k", ev_k);
      cfg.apply("--exemplar-k", ev_exemplar_k);
      cfg.apply("--max-steps", ev_max_steps);
      cfg.apply("--jobs", ev_jobs);
      cfg.apply("--seed", ev_seed);
      cfg.apply("--out", ev_out);
      cfg.apply("--csv", ev_csv);
      apply_env_seed(ev_seed);
      return cmd_eval(ev_worlds, ev_policy, ev_mode, ev_model, ev_memory, ev_k,
                      ev_exemplar_k, ev_max_steps, ev_jobs, ev_seed, ev_out,
                      ev_csv);
    }
    if (rp->parsed()) return cmd_report(rp_files);
  } catch (const NavError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
