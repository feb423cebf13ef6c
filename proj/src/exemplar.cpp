#include "navpruner/exemplar.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "json.hpp"

#include "navpruner/errors.hpp"
#include "navpruner/eval.hpp"

namespace navpruner {

ExemplarMemory build_memory(const std::vector<TrajectoryResult>& trajectories,
                            const std::vector<Episode>& episodes,
                            const World& world, const TextEncoder& encoder,
                            int cap, double success_radius) {
  std::unordered_map<std::string, const Episode*> by_id;
  for (const auto& ep : episodes) by_id[ep.id] = &ep;

  ExemplarMemory memory;
  memory.encoder = encoder;
  for (const auto& traj : trajectories) {
    const auto it = by_id.find(traj.episode_id);
    if (it == by_id.end())
      throw Misalignment("no episode with id " + traj.episode_id);
    const Episode& ep = *it->second;
    if (!is_success(world, ep, traj, success_radius))
      throw NotSuccessful("trajectory " + traj.episode_id +
                          " did not succeed");
    if (static_cast<int>(memory.records.size()) >= cap) continue;
    ExemplarRecord rec;
    rec.instruction = ep.instruction;
    rec.trace = render_trace(traj.steps);
    rec.embedding = encoder.encode(rec.instruction);
    rec.source_episode_id = traj.episode_id;
    memory.records.push_back(std::move(rec));
  }
  return memory;
}

std::vector<ExemplarRecord> retrieve_exemplars(const ExemplarMemory& memory,
                                               const std::string& instruction,
                                               int k) {
  if (k <= 0 || memory.records.empty()) return {};
  const Embedding query = memory.encoder.encode(instruction);

  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(memory.records.size());
  for (std::size_t i = 0; i < memory.records.size(); ++i)
    ranked.emplace_back(cosine_sim(query, memory.records[i].embedding), i);
  // Stable on insertion index: equal similarities keep earlier records first.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<ExemplarRecord> out;
  const std::size_t take = std::min<std::size_t>(k, ranked.size());
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back(memory.records[ranked[i].second]);
  return out;
}

std::string format_examples_block(const std::vector<ExemplarRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i) out += "\n\n";
    out += "Example " + std::to_string(i + 1) + ":\nInstruction: " +
           records[i].instruction + "\n" + records[i].trace;
  }
  return out;
}

void save_memory(const ExemplarMemory& memory, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& rec : memory.records) {
    nlohmann::ordered_json line = {{"instruction", rec.instruction},
                                   {"trace", rec.trace},
                                   {"embedding", rec.embedding},
                                   {"source_episode_id", rec.source_episode_id}};
    out << line.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

ExemplarMemory load_memory(const std::string& path, const TextEncoder& encoder) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  ExemplarMemory memory;
  memory.encoder = encoder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json entry;
    try {
      entry = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": invalid JSON: " + e.what());
    }
    ExemplarRecord rec;
    rec.instruction = entry.at("instruction").get<std::string>();
    rec.trace = entry.at("trace").get<std::string>();
    for (const auto& x : entry.at("embedding"))
      rec.embedding.push_back(x.get<double>());
    rec.source_episode_id = entry.at("source_episode_id").get<std::string>();
    if (static_cast<int>(rec.embedding.size()) != encoder.config().dim)
      throw DimensionMismatch(path + ":" + std::to_string(line_no) +
                              ": embedding dimension " +
                              std::to_string(rec.embedding.size()) +
                              " does not match encoder dim " +
                              std::to_string(encoder.config().dim));
    memory.records.push_back(std::move(rec));
  }
  return memory;
}

}  // namespace navpruner
