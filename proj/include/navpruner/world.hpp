#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "navpruner/geometry.hpp"

namespace navpruner {

using ViewpointId = std::string;

struct WorldObject {
  std::string name;
  Position position;
  ViewpointId near;  // anchor viewpoint
};

// Discrete viewpoint graph. Immutable after construction; edges are
// undirected with implied Euclidean length.
class World {
 public:
  // Adds a viewpoint; returns false if the id already exists.
  bool add_viewpoint(const ViewpointId& id, Position pos, std::string room);
  // Adds an undirected edge. Self-edges and duplicates are rejected.
  bool add_edge(const ViewpointId& a, const ViewpointId& b);
  void add_object(WorldObject obj);

  bool has(const ViewpointId& id) const { return index_.count(id) > 0; }
  std::size_t num_viewpoints() const { return ids_.size(); }
  std::size_t num_edges() const;

  const Position& position(const ViewpointId& id) const;
  const std::string& room(const ViewpointId& id) const;
  // Neighbor ids in ascending lexicographic order.
  const std::vector<ViewpointId>& neighbors(const ViewpointId& id) const;
  bool has_edge(const ViewpointId& a, const ViewpointId& b) const;

  // Viewpoint ids in ascending lexicographic order.
  const std::vector<ViewpointId>& viewpoint_ids() const { return ids_; }
  const std::vector<WorldObject>& objects() const { return objects_; }

  bool is_connected() const;

 private:
  int require(const ViewpointId& id) const;

  std::vector<ViewpointId> ids_;  // sorted
  std::unordered_map<std::string, int> index_;
  std::vector<Position> positions_;
  std::vector<std::string> rooms_;
  std::vector<std::vector<int>> adjacency_;  // sorted by neighbor id
  mutable std::vector<std::vector<ViewpointId>> neighbor_ids_;
  std::vector<WorldObject> objects_;
};

struct Episode {
  std::string id;
  std::string instruction;
  ViewpointId start;
  double start_heading = 0.0;  // degrees in [0, 360)
  ViewpointId goal;
  std::vector<ViewpointId> reference_path;  // start .. goal, geodesic
};

struct NavigableEntry {
  ViewpointId viewpoint;
  double rel_heading = 0.0;  // degrees in [0, 360)
  double distance = 0.0;     // meters
};

struct DirectionalSector {
  int index = 0;          // 0..7
  std::string name;       // Front .. Front-Left
  std::string scene_text;
  std::string objects_text;  // comma list or "none"
  std::vector<NavigableEntry> navigable;
  std::string rendered;  // full sector line
};

struct Observation {
  ViewpointId viewpoint;
  double heading = 0.0;
  std::string scene_summary;
  std::vector<DirectionalSector> sectors;  // exactly 8, ordered by index
};

// Observation restricted to a subset of sectors (ascending index). A full
// selection renders byte-identically to the source observation.
struct PrunedObservation {
  ViewpointId viewpoint;
  double heading = 0.0;
  std::string scene_summary;
  std::vector<DirectionalSector> sectors;   // retained, ascending index
  std::vector<int> selected_indices;        // ascending

  // Union of retained sectors' navigable viewpoints.
  std::vector<ViewpointId> navigable() const;
  bool presents(const ViewpointId& id) const;
};

// --- Geometry over the graph ---

// Shortest-path distance in meters by Euclidean edge weights.
double geodesic(const World& world, const ViewpointId& a, const ViewpointId& b);

// Distances from `source` to every viewpoint, aligned with viewpoint_ids().
std::vector<double> geodesics_from(const World& world, const ViewpointId& source);

// Index of `id` within viewpoint_ids().
int viewpoint_index(const World& world, const ViewpointId& id);

// Shortest path from a to b; at equal distance the lexicographically
// smaller predecessor id wins, making the path deterministic.
std::vector<ViewpointId> shortest_path(const World& world, const ViewpointId& a,
                                       const ViewpointId& b);

// Sum of edge lengths along the path; 0 for paths of length <= 1.
double path_length(const World& world, const std::vector<ViewpointId>& path);

// Clockwise angle from agent_heading to the bearing of target, in [0, 360).
double relative_heading(const World& world, const ViewpointId& at,
                        double agent_heading, const ViewpointId& target);

// Assigns every neighbor of `at` to one of the 8 directional sectors.
std::array<std::vector<NavigableEntry>, kNumSectors> bin_directions(
    const World& world, const ViewpointId& at, double heading);

// Deterministic textualization of the panorama at `at`.
Observation render_observation(const World& world, const ViewpointId& at,
                               double heading);

// Presented-observation helpers.
PrunedObservation full_presented(const Observation& obs);
std::string observation_text(const Observation& obs);
std::string observation_text(const PrunedObservation& obs);

// --- Synthetic generation ---

struct WorldConfig {
  int num_viewpoints = 60;
  double box_size = 30.0;          // positions uniform in [0, box]^2
  double connection_radius = 6.0;  // meters
  double z_jitter = 0.2;           // uniform elevation noise
  int num_objects = 20;
};

struct EpisodeConfig {
  int num_episodes = 50;
  double min_len = 8.0;   // geodesic band, meters
  double max_len = 20.0;
  std::string id_prefix;  // prepended to generated episode ids
};

World generate_world(const WorldConfig& config, std::uint64_t seed);

// Samples episodes whose geodesic lies in the configured band. Instructions
// come from the template grammar ("walk <sector> to the <room>, then ...,
// then stop near the <object-or-room>.") and are kept only when the scripted
// follower rule reproduces the reference path exactly.
std::vector<Episode> generate_episodes(const World& world,
                                       const EpisodeConfig& config,
                                       std::uint64_t seed);

// Episode-invariant check used by loaders and tests.
void validate_episode(const World& world, const Episode& episode);

// --- World file I/O (single JSON document) ---

struct WorldFile {
  World world;
  std::vector<Episode> episodes;
};

void save_world(const WorldFile& wf, const std::string& path);
WorldFile load_world(const std::string& path);
std::string world_to_json(const WorldFile& wf);
WorldFile world_from_json(const std::string& text);

}  // namespace navpruner
