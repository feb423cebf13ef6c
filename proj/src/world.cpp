#include "navpruner/world.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

#include "navpruner/errors.hpp"
#include "navpruner/instructions.hpp"
#include "navpruner/rng.hpp"

namespace navpruner {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_num(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

const std::vector<std::string>& room_vocab() {
  static const std::vector<std::string> rooms = {
      "kitchen",  "hallway", "bedroom",  "bathroom", "office",   "library",
      "pantry",   "garage",  "attic",    "basement", "lobby",    "balcony",
      "workshop", "nursery", "closet",   "den",      "foyer",    "gym",
      "parlor",   "cellar",  "sunroom",  "laundry",  "studio",   "lounge"};
  return rooms;
}

const std::vector<std::string>& object_vocab() {
  static const std::vector<std::string> objects = {
      "lamp",  "sofa",    "table",   "mirror",   "plant",     "clock",
      "vase",  "rug",     "shelf",   "piano",    "desk",      "chair",
      "cabinet", "painting", "stool", "bench",   "fireplace", "bookcase",
      "wardrobe", "fan"};
  return objects;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool merge(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

// --- World ---

bool World::add_viewpoint(const ViewpointId& id, Position pos, std::string room) {
  if (index_.count(id)) return false;
  const int idx = static_cast<int>(positions_.size());
  index_[id] = idx;
  positions_.push_back(pos);
  rooms_.push_back(std::move(room));
  adjacency_.emplace_back();
  ids_.insert(std::lower_bound(ids_.begin(), ids_.end(), id), id);
  neighbor_ids_.clear();
  return true;
}

bool World::add_edge(const ViewpointId& a, const ViewpointId& b) {
  if (a == b) return false;
  const int ia = require(a);
  const int ib = require(b);
  auto& na = adjacency_[ia];
  if (std::find(na.begin(), na.end(), ib) != na.end()) return false;
  na.push_back(ib);
  adjacency_[ib].push_back(ia);
  neighbor_ids_.clear();
  return true;
}

void World::add_object(WorldObject obj) {
  require(obj.near);
  objects_.push_back(std::move(obj));
}

int World::require(const ViewpointId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw UnknownViewpoint(id);
  return it->second;
}

std::size_t World::num_edges() const {
  std::size_t total = 0;
  for (const auto& adj : adjacency_) total += adj.size();
  return total / 2;
}

const Position& World::position(const ViewpointId& id) const {
  return positions_[require(id)];
}

const std::string& World::room(const ViewpointId& id) const {
  return rooms_[require(id)];
}

const std::vector<ViewpointId>& World::neighbors(const ViewpointId& id) const {
  const int idx = require(id);
  if (neighbor_ids_.empty()) {
    std::vector<ViewpointId> by_index(adjacency_.size());
    for (const auto& [vid, vidx] : index_) by_index[vidx] = vid;
    neighbor_ids_.resize(adjacency_.size());
    for (std::size_t i = 0; i < adjacency_.size(); ++i) {
      auto& out = neighbor_ids_[i];
      out.reserve(adjacency_[i].size());
      for (const int n : adjacency_[i]) out.push_back(by_index[n]);
      std::sort(out.begin(), out.end());
    }
  }
  return neighbor_ids_[idx];
}

bool World::has_edge(const ViewpointId& a, const ViewpointId& b) const {
  const int ia = require(a);
  const int ib = require(b);
  const auto& na = adjacency_[ia];
  return std::find(na.begin(), na.end(), ib) != na.end();
}

bool World::is_connected() const {
  if (positions_.empty()) return true;
  std::vector<bool> seen(positions_.size(), false);
  std::vector<int> stack = {0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const int v : adjacency_[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == positions_.size();
}

// --- PrunedObservation ---

std::vector<ViewpointId> PrunedObservation::navigable() const {
  std::vector<ViewpointId> out;
  for (const auto& sector : sectors)
    for (const auto& entry : sector.navigable) out.push_back(entry.viewpoint);
  return out;
}

bool PrunedObservation::presents(const ViewpointId& id) const {
  for (const auto& sector : sectors)
    for (const auto& entry : sector.navigable)
      if (entry.viewpoint == id) return true;
  return false;
}

// --- Graph geometry ---

namespace {

// Dijkstra keyed by (distance, id) so equal-distance nodes settle in
// lexicographic order; exact distance ties prefer the smaller predecessor.
struct DijkstraResult {
  std::vector<double> dist;
  std::vector<int> pred;
};

DijkstraResult dijkstra(const World& world, const ViewpointId& source) {
  const auto& ids = world.viewpoint_ids();
  const int n = static_cast<int>(ids.size());
  std::unordered_map<std::string, int> pos_of;
  pos_of.reserve(ids.size());
  for (int i = 0; i < n; ++i) pos_of[ids[i]] = i;

  DijkstraResult r;
  r.dist.assign(n, std::numeric_limits<double>::infinity());
  r.pred.assign(n, -1);
  const int src = pos_of.at(source);
  r.dist[src] = 0.0;

  using Item = std::pair<double, int>;  // (dist, sorted-id index)
  auto cmp = [](const Item& a, const Item& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second > b.second;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(cmp)> queue(cmp);
  queue.push({0.0, src});
  std::vector<bool> done(n, false);

  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (done[u]) continue;
    done[u] = true;
    const auto& u_id = ids[u];
    const Position& u_pos = world.position(u_id);
    for (const auto& v_id : world.neighbors(u_id)) {
      const int v = pos_of.at(v_id);
      if (done[v]) continue;
      const double nd = d + euclidean(u_pos, world.position(v_id));
      if (nd < r.dist[v]) {
        r.dist[v] = nd;
        r.pred[v] = u;
        queue.push({nd, v});
      } else if (nd == r.dist[v] && r.pred[v] >= 0 && u_id < ids[r.pred[v]]) {
        r.pred[v] = u;
      }
    }
  }
  return r;
}

int id_index(const World& world, const ViewpointId& id) {
  const auto& ids = world.viewpoint_ids();
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) throw UnknownViewpoint(id);
  return static_cast<int>(it - ids.begin());
}

}  // namespace

double geodesic(const World& world, const ViewpointId& a, const ViewpointId& b) {
  if (!world.has(a)) throw UnknownViewpoint(a);
  if (!world.has(b)) throw UnknownViewpoint(b);
  if (a == b) return 0.0;
  const auto r = dijkstra(world, a);
  return r.dist[id_index(world, b)];
}

std::vector<double> geodesics_from(const World& world,
                                   const ViewpointId& source) {
  if (!world.has(source)) throw UnknownViewpoint(source);
  return dijkstra(world, source).dist;
}

int viewpoint_index(const World& world, const ViewpointId& id) {
  return id_index(world, id);
}

std::vector<ViewpointId> shortest_path(const World& world, const ViewpointId& a,
                                       const ViewpointId& b) {
  if (!world.has(a)) throw UnknownViewpoint(a);
  if (!world.has(b)) throw UnknownViewpoint(b);
  const auto& ids = world.viewpoint_ids();
  if (a == b) return {a};
  const auto r = dijkstra(world, a);
  int cur = id_index(world, b);
  if (r.pred[cur] < 0) return {};  // unreachable
  std::vector<ViewpointId> path;
  while (cur >= 0) {
    path.push_back(ids[cur]);
    if (ids[cur] == a) break;
    cur = r.pred[cur];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double path_length(const World& world, const std::vector<ViewpointId>& path) {
  if (path.size() <= 1) {
    for (const auto& id : path)
      if (!world.has(id)) throw UnknownViewpoint(id);
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (!world.has_edge(path[i - 1], path[i]))
      throw NonAdjacentStep(path[i - 1], path[i]);
    total += euclidean(world.position(path[i - 1]), world.position(path[i]));
  }
  return total;
}

double relative_heading(const World& world, const ViewpointId& at,
                        double agent_heading, const ViewpointId& target) {
  const Position& a = world.position(at);
  const Position& t = world.position(target);
  if (t.x == a.x && t.y == a.y)
    throw DegeneratePosition("zero horizontal displacement from " + at +
                             " to " + target);
  return normalize_deg(bearing_deg(a, t) - agent_heading);
}

std::array<std::vector<NavigableEntry>, kNumSectors> bin_directions(
    const World& world, const ViewpointId& at, double heading) {
  std::array<std::vector<NavigableEntry>, kNumSectors> sectors;
  const Position& here = world.position(at);
  for (const auto& n : world.neighbors(at)) {
    const double rel = relative_heading(world, at, heading, n);
    const int k = sector_of(rel);
    sectors[k].push_back({n, rel, euclidean(here, world.position(n))});
  }
  return sectors;
}

Observation render_observation(const World& world, const ViewpointId& at,
                               double heading) {
  if (!world.has(at)) throw UnknownViewpoint(at);
  Observation obs;
  obs.viewpoint = at;
  obs.heading = heading;
  obs.scene_summary = "You are in a " + world.room(at) + ".";

  auto binned = bin_directions(world, at, heading);
  const Position& here = world.position(at);

  // Nearby objects binned by bearing; one at the exact viewpoint position
  // has no bearing and goes to Front.
  std::array<std::vector<std::string>, kNumSectors> sector_objects;
  for (const auto& obj : world.objects()) {
    if (euclidean(obj.position, here) >= 3.0) continue;
    int k = 0;
    if (obj.position.x != here.x || obj.position.y != here.y)
      k = sector_of(normalize_deg(bearing_deg(here, obj.position) - heading));
    sector_objects[k].push_back(obj.name);
  }

  obs.sectors.resize(kNumSectors);
  for (int k = 0; k < kNumSectors; ++k) {
    DirectionalSector& sec = obs.sectors[k];
    sec.index = k;
    sec.name = sector_names()[k];
    sec.navigable = std::move(binned[k]);

    // Scene text: room labels visible in this direction, first occurrence
    // order, deduplicated.
    std::vector<std::string> rooms;
    for (const auto& entry : sec.navigable) {
      const std::string& room = world.room(entry.viewpoint);
      if (std::find(rooms.begin(), rooms.end(), room) == rooms.end())
        rooms.push_back(room);
    }
    if (rooms.empty()) {
      sec.scene_text = "open space";
    } else {
      std::string joined;
      for (std::size_t i = 0; i < rooms.size(); ++i) {
        if (i) joined += ", ";
        joined += rooms[i];
      }
      sec.scene_text = joined;
    }

    if (sector_objects[k].empty()) {
      sec.objects_text = "none";
    } else {
      std::string joined;
      for (std::size_t i = 0; i < sector_objects[k].size(); ++i) {
        if (i) joined += ", ";
        joined += sector_objects[k][i];
      }
      sec.objects_text = joined;
    }

    std::string nav;
    if (sec.navigable.empty()) {
      nav = "none";
    } else {
      for (std::size_t i = 0; i < sec.navigable.size(); ++i) {
        const auto& e = sec.navigable[i];
        if (i) nav += "; ";
        nav += e.viewpoint + " (heading " + format_num("%.0f", e.rel_heading) +
               " deg, distance " + format_num("%.1f", e.distance) + " m)";
      }
    }
    sec.rendered = "Direction: " + sec.name + ". Scene: " + sec.scene_text +
                   ". Objects within 3m: " + sec.objects_text +
                   ". Navigable: " + nav + ".";
  }
  return obs;
}

PrunedObservation full_presented(const Observation& obs) {
  PrunedObservation p;
  p.viewpoint = obs.viewpoint;
  p.heading = obs.heading;
  p.scene_summary = obs.scene_summary;
  p.sectors = obs.sectors;
  p.selected_indices.resize(obs.sectors.size());
  std::iota(p.selected_indices.begin(), p.selected_indices.end(), 0);
  return p;
}

namespace {
std::string sectors_text(const std::string& scene_summary,
                         const std::vector<DirectionalSector>& sectors) {
  std::string out = scene_summary;
  for (const auto& sec : sectors) {
    out += "\n";
    out += sec.rendered;
  }
  return out;
}
}  // namespace

std::string observation_text(const Observation& obs) {
  return sectors_text(obs.scene_summary, obs.sectors);
}

std::string observation_text(const PrunedObservation& obs) {
  return sectors_text(obs.scene_summary, obs.sectors);
}

// --- Generators ---

World generate_world(const WorldConfig& config, std::uint64_t seed) {
  if (config.num_viewpoints < 2)
    throw InvalidConfig("num_viewpoints must be >= 2");
  if (config.connection_radius <= 0.0)
    throw InvalidConfig("connection_radius must be > 0");
  if (config.box_size <= 0.0) throw InvalidConfig("box_size must be > 0");
  if (config.z_jitter < 0.0) throw InvalidConfig("z_jitter must be >= 0");
  if (config.num_objects < 0) throw InvalidConfig("num_objects must be >= 0");

  Rng rng(seed);
  World world;
  const int n = config.num_viewpoints;

  std::vector<ViewpointId> ids(n);
  std::vector<Position> pos(n);
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "vp_%04d", i);
    ids[i] = buf;
    pos[i].x = rng.uniform(0.0, config.box_size);
    pos[i].y = rng.uniform(0.0, config.box_size);
    pos[i].z = rng.uniform(0.0, config.z_jitter);
  }

  const auto& rooms = room_vocab();
  for (int i = 0; i < n; ++i)
    world.add_viewpoint(ids[i], pos[i],
                        rooms[rng.uniform_int(rooms.size())]);

  UnionFind uf(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (euclidean(pos[i], pos[j]) <= config.connection_radius) {
        world.add_edge(ids[i], ids[j]);
        uf.merge(i, j);
      }

  // Stitch remaining components along a random spanning order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (int i = 1; i < n; ++i)
    if (uf.merge(order[i - 1], order[i]))
      world.add_edge(ids[order[i - 1]], ids[order[i]]);

  const auto& objects = object_vocab();
  for (int i = 0; i < config.num_objects; ++i) {
    const int anchor = static_cast<int>(rng.uniform_int(n));
    const std::string name = objects[rng.uniform_int(objects.size())];
    const double angle = rng.uniform(0.0, 360.0);
    const double radius = rng.uniform(0.6, 2.5);
    Position p = pos[anchor];
    p.x += radius * std::sin(angle * M_PI / 180.0);
    p.y += radius * std::cos(angle * M_PI / 180.0);
    world.add_object({name, p, ids[anchor]});
  }
  return world;
}

namespace {

// First object anchored at the viewpoint, else its room label.
std::string stop_target(const World& world, const ViewpointId& goal) {
  for (const auto& obj : world.objects())
    if (obj.near == goal) return obj.name;
  return world.room(goal);
}

// Walks the reference path with oracle heading updates. Emits the walk
// clauses and verifies the scripted follow rule reproduces the path.
bool realize_instruction(const World& world,
                         const std::vector<ViewpointId>& path,
                         double start_heading,
                         std::vector<InstructionClause>& clauses) {
  clauses.clear();
  double heading = start_heading;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto& at = path[i - 1];
    const auto& next = path[i];
    const double rel = relative_heading(world, at, heading, next);
    const int k = sector_of(rel);
    const std::string& sector = sector_names()[k];

    const auto presented = full_presented(render_observation(world, at, heading));
    const auto chosen = clause_target(presented, sector);
    if (!chosen || *chosen != next) return false;

    clauses.push_back({false, sector, world.room(next)});
    heading = bearing_deg(world.position(at), world.position(next));
  }
  clauses.push_back({true, "", stop_target(world, path.back())});
  return true;
}

}  // namespace

std::vector<Episode> generate_episodes(const World& world,
                                       const EpisodeConfig& config,
                                       std::uint64_t seed) {
  if (config.num_episodes < 0) throw InvalidConfig("num_episodes must be >= 0");
  if (config.min_len < 0.0 || config.max_len < config.min_len)
    throw InvalidConfig("episode length band is invalid");
  if (!world.is_connected()) throw InvalidConfig("world is not connected");

  const auto& ids = world.viewpoint_ids();
  const int n = static_cast<int>(ids.size());

  // All-pairs geodesics; the worlds here are small.
  std::vector<std::vector<double>> dist(n);
  for (int i = 0; i < n; ++i) dist[i] = dijkstra(world, ids[i]).dist;

  std::vector<std::pair<int, int>> feasible;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && dist[i][j] >= config.min_len && dist[i][j] <= config.max_len)
        feasible.emplace_back(i, j);
  if (feasible.empty())
    throw NoFeasiblePair("no viewpoint pair with geodesic in [" +
                         format_num("%.1f", config.min_len) + ", " +
                         format_num("%.1f", config.max_len) + "] m");

  Rng rng(seed);
  std::vector<Episode> episodes;
  episodes.reserve(config.num_episodes);
  long long budget = 1000LL * std::max(config.num_episodes, 1);

  while (static_cast<int>(episodes.size()) < config.num_episodes) {
    if (budget-- <= 0)
      throw NoFeasiblePair(
          "no realizable episode found: every sampled pair produced an "
          "ambiguous instruction");
    const auto [si, gi] = feasible[rng.uniform_int(feasible.size())];
    const double heading = rng.uniform(0.0, 360.0);
    const auto path = shortest_path(world, ids[si], ids[gi]);

    std::vector<InstructionClause> clauses;
    if (!realize_instruction(world, path, heading, clauses)) continue;

    Episode ep;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "ep%04d", static_cast<int>(episodes.size()));
    ep.id = config.id_prefix + buf;
    ep.instruction = build_instruction(clauses);
    ep.start = ids[si];
    ep.start_heading = heading;
    ep.goal = ids[gi];
    ep.reference_path = path;
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

void validate_episode(const World& world, const Episode& episode) {
  if (episode.reference_path.empty())
    throw InvalidEpisode(episode.id + ": empty reference path");
  if (episode.reference_path.front() != episode.start)
    throw InvalidEpisode(episode.id + ": reference path does not start at start");
  if (episode.reference_path.back() != episode.goal)
    throw InvalidEpisode(episode.id + ": reference path does not end at goal");
  if (episode.start_heading < 0.0 || episode.start_heading >= 360.0)
    throw InvalidEpisode(episode.id + ": start_heading outside [0, 360)");
  double len = 0.0;
  try {
    len = path_length(world, episode.reference_path);
  } catch (const NavError& e) {
    throw InvalidEpisode(episode.id + ": " + e.what());
  }
  const double geo = geodesic(world, episode.start, episode.goal);
  if (std::abs(len - geo) > 1e-9)
    throw InvalidEpisode(episode.id + ": reference path is not a geodesic");
}

// --- World file I/O ---

std::string world_to_json(const WorldFile& wf) {
  ordered_json doc;
  doc["viewpoints"] = ordered_json::array();
  for (const auto& id : wf.world.viewpoint_ids()) {
    const Position& p = wf.world.position(id);
    doc["viewpoints"].push_back({{"id", id},
                                 {"x", p.x},
                                 {"y", p.y},
                                 {"z", p.z},
                                 {"room", wf.world.room(id)}});
  }
  std::set<std::pair<std::string, std::string>> edges;
  for (const auto& a : wf.world.viewpoint_ids())
    for (const auto& b : wf.world.neighbors(a))
      edges.insert(a < b ? std::make_pair(a, b) : std::make_pair(b, a));
  doc["edges"] = ordered_json::array();
  for (const auto& [a, b] : edges) doc["edges"].push_back({a, b});
  doc["objects"] = ordered_json::array();
  for (const auto& obj : wf.world.objects())
    doc["objects"].push_back({{"name", obj.name},
                              {"x", obj.position.x},
                              {"y", obj.position.y},
                              {"z", obj.position.z},
                              {"near", obj.near}});
  doc["episodes"] = ordered_json::array();
  for (const auto& ep : wf.episodes)
    doc["episodes"].push_back({{"id", ep.id},
                               {"instruction", ep.instruction},
                               {"start", ep.start},
                               {"start_heading", ep.start_heading},
                               {"goal", ep.goal},
                               {"reference_path", ep.reference_path}});
  return doc.dump(2) + "\n";
}

WorldFile world_from_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw IoError(std::string("world file is not valid JSON: ") + e.what());
  }
  WorldFile wf;
  try {
    for (const auto& v : doc.at("viewpoints"))
      wf.world.add_viewpoint(
          v.at("id").get<std::string>(),
          {v.at("x").get<double>(), v.at("y").get<double>(),
           v.at("z").get<double>()},
          v.at("room").get<std::string>());
    for (const auto& e : doc.at("edges"))
      wf.world.add_edge(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    for (const auto& o : doc.value("objects", ordered_json::array()))
      wf.world.add_object({o.at("name").get<std::string>(),
                           {o.at("x").get<double>(), o.at("y").get<double>(),
                            o.at("z").get<double>()},
                           o.at("near").get<std::string>()});
    for (const auto& e : doc.value("episodes", ordered_json::array())) {
      Episode ep;
      ep.id = e.at("id").get<std::string>();
      ep.instruction = e.at("instruction").get<std::string>();
      ep.start = e.at("start").get<std::string>();
      ep.start_heading = e.at("start_heading").get<double>();
      ep.goal = e.at("goal").get<std::string>();
      for (const auto& v : e.at("reference_path"))
        ep.reference_path.push_back(v.get<std::string>());
      wf.episodes.push_back(std::move(ep));
    }
  } catch (const NavError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(std::string("world file is malformed: ") + e.what());
  }
  if (!wf.world.is_connected())
    throw InvalidConfig("world file describes a disconnected graph");
  for (const auto& ep : wf.episodes) validate_episode(wf.world, ep);
  return wf;
}

void save_world(const WorldFile& wf, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << world_to_json(wf);
  if (!out) throw IoError("write failed: " + path);
}

WorldFile load_world(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return world_from_json(ss.str());
}

}  // namespace navpruner
