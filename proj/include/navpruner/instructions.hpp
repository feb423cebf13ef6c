#pragma once

#include <optional>
#include <string>
#include <vector>

#include "navpruner/world.hpp"

namespace navpruner {

// One clause of the synthetic instruction grammar. Instructions look like
//   "walk Front to the kitchen, then walk Rear-Left to the hallway,
//    then stop near the lamp."
// with exactly one walk clause per reference step and a final stop clause.
struct InstructionClause {
  bool stop = false;
  std::string sector_name;     // walk clauses only
  std::string target;          // room label, or object/room for stop clauses
};

std::string build_instruction(const std::vector<InstructionClause>& clauses);

// Parses an instruction produced by build_instruction. Returns an empty
// vector for text the grammar does not cover.
std::vector<InstructionClause> parse_instruction(const std::string& text);

// Deterministic follow rule shared by the episode generator and the scripted
// follower: among presented viewpoints in the clause's sector, the nearest
// wins, with lexicographically smaller ids breaking exact distance ties.
// Empty result when the sector is absent from the presented observation or
// has no navigable viewpoints.
std::optional<ViewpointId> clause_target(const PrunedObservation& presented,
                                         const std::string& sector_name);

}  // namespace navpruner
