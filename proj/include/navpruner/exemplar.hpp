#pragma once

#include <string>
#include <vector>

#include "navpruner/navigator.hpp"
#include "navpruner/text_encoder.hpp"
#include "navpruner/world.hpp"

namespace navpruner {

struct ExemplarRecord {
  std::string instruction;
  std::string trace;  // Thought/Action/Observation transcript
  Embedding embedding;
  std::string source_episode_id;
};

// Memory of successful trajectories; immutable after construction.
struct ExemplarMemory {
  std::vector<ExemplarRecord> records;
  TextEncoder encoder;
};

inline constexpr int kDefaultMemoryCap = 20;
inline constexpr int kDefaultExemplarK = 3;

// Converts the first `cap` successful trajectories into exemplar records.
// Episodes supply instructions and goals; every trajectory must satisfy the
// success predicate or NotSuccessful is thrown.
ExemplarMemory build_memory(const std::vector<TrajectoryResult>& trajectories,
                            const std::vector<Episode>& episodes,
                            const World& world, const TextEncoder& encoder,
                            int cap = kDefaultMemoryCap,
                            double success_radius = 3.0);

// Top-k records by cosine similarity to the query instruction, descending;
// equal similarities keep memory insertion order.
std::vector<ExemplarRecord> retrieve_exemplars(const ExemplarMemory& memory,
                                               const std::string& instruction,
                                               int k = kDefaultExemplarK);

// "Example {i}:\nInstruction: {...}\n{trace}" sections joined by blank lines.
std::string format_examples_block(const std::vector<ExemplarRecord>& records);

// JSON-lines persistence, one record per line.
void save_memory(const ExemplarMemory& memory, const std::string& path);
ExemplarMemory load_memory(const std::string& path, const TextEncoder& encoder);

}  // namespace navpruner
