#include "navpruner/instructions.hpp"

#include <algorithm>

namespace navpruner {

namespace {
constexpr const char* kWalkPrefix = "walk ";
constexpr const char* kWalkInfix = " to the ";
constexpr const char* kStopPrefix = "stop near the ";
constexpr const char* kJoiner = ", then ";
}  // namespace

std::string build_instruction(const std::vector<InstructionClause>& clauses) {
  std::string out;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    if (i) out += kJoiner;
    const auto& c = clauses[i];
    if (c.stop)
      out += kStopPrefix + c.target;
    else
      out += kWalkPrefix + c.sector_name + kWalkInfix + c.target;
  }
  out += ".";
  return out;
}

std::vector<InstructionClause> parse_instruction(const std::string& text) {
  std::string body = text;
  if (!body.empty() && body.back() == '.') body.pop_back();

  std::vector<std::string> parts;
  std::size_t pos = 0;
  const std::string joiner = kJoiner;
  while (true) {
    const std::size_t next = body.find(joiner, pos);
    if (next == std::string::npos) {
      parts.push_back(body.substr(pos));
      break;
    }
    parts.push_back(body.substr(pos, next - pos));
    pos = next + joiner.size();
  }

  std::vector<InstructionClause> clauses;
  for (const auto& part : parts) {
    InstructionClause c;
    if (part.rfind(kWalkPrefix, 0) == 0) {
      const std::string rest = part.substr(std::string(kWalkPrefix).size());
      const std::size_t at = rest.find(kWalkInfix);
      if (at == std::string::npos) return {};
      c.sector_name = rest.substr(0, at);
      c.target = rest.substr(at + std::string(kWalkInfix).size());
    } else if (part.rfind(kStopPrefix, 0) == 0) {
      c.stop = true;
      c.target = part.substr(std::string(kStopPrefix).size());
    } else {
      return {};
    }
    clauses.push_back(std::move(c));
  }
  return clauses;
}

std::optional<ViewpointId> clause_target(const PrunedObservation& presented,
                                         const std::string& sector_name) {
  for (const auto& sector : presented.sectors) {
    if (sector.name != sector_name || sector.navigable.empty()) continue;
    const auto best = std::min_element(
        sector.navigable.begin(), sector.navigable.end(),
        [](const NavigableEntry& a, const NavigableEntry& b) {
          if (a.distance != b.distance) return a.distance < b.distance;
          return a.viewpoint < b.viewpoint;
        });
    return best->viewpoint;
  }
  return std::nullopt;
}

}  // namespace navpruner
