#include "navpruner/navigator.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <limits>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

#include "navpruner/errors.hpp"
#include "navpruner/instructions.hpp"

namespace navpruner {

namespace {

std::string step_block(const TrajectoryStep& step) {
  return "Thought: " + (step.thought ? *step.thought : std::string("-")) +
         "\nAction: " + step.action.text() +
         "\nObservation: " + step.observation_summary;
}

}  // namespace

std::string summarize_history(const History& history) {
  const std::size_t n = history.steps.size();
  const std::size_t window =
      std::min<std::size_t>(n, std::max(history.window, 0));
  std::string out;
  for (std::size_t i = n - window; i < n; ++i) {
    if (!out.empty()) out += "\n";
    out += step_block(history.steps[i]);
  }
  return out;
}

std::string render_trace(const std::vector<TrajectoryStep>& steps) {
  std::string out;
  for (const auto& step : steps) {
    if (!out.empty()) out += "\n";
    out += step_block(step);
  }
  return out;
}

const std::string& system_rules() {
  static const std::string rules =
      "You are a navigation agent moving between viewpoints of an indoor "
      "graph.\n"
      "1. Follow the instruction clause by clause.\n"
      "2. Each turn, answer with exactly one action: a navigable viewpoint "
      "id from the observation, or finished.\n"
      "3. Only viewpoint ids listed in the current observation are valid "
      "moves.\n"
      "4. Use the directional sectors and nearby objects to ground the "
      "instruction.\n"
      "5. Answer finished once the instruction is complete and you are at "
      "the goal.";
  return rules;
}

std::string build_prompt(const std::string& system_rules_text,
                         const std::string& examples_block,
                         const std::string& instruction,
                         const PrunedObservation& observation,
                         const History& history) {
  std::string prompt = "### Rules\n" + system_rules_text;
  if (!examples_block.empty()) prompt += "\n\n### Examples\n" + examples_block;
  prompt += "\n\n### Instruction\n" + instruction;
  prompt += "\n\n### Observation\n" + observation_text(observation);
  prompt += "\n\n### History\n" + summarize_history(history);
  return prompt;
}

// --- Oracle ---

Action oracle_policy(const AgentState& state, const World& world,
                     const ViewpointId& goal) {
  if (state.observation.viewpoint == goal) return Action::finish();
  const auto dist_to_goal = geodesics_from(world, goal);

  const ViewpointId* best = nullptr;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& sector : state.observation.sectors) {
    for (const auto& entry : sector.navigable) {
      const double cost =
          entry.distance + dist_to_goal[viewpoint_index(world, entry.viewpoint)];
      if (cost < best_cost ||
          (cost == best_cost && best && entry.viewpoint < *best)) {
        best_cost = cost;
        best = &entry.viewpoint;
      }
    }
  }
  if (!best) return Action::finish();  // everything pruned away: forced stop
  return Action::move(*best);
}

Action OraclePolicy::act(const AgentState& state, const std::string&, int) {
  thought_.reset();
  if (state.observation.viewpoint == goal_) return Action::finish();
  if (dist_to_goal_.empty()) dist_to_goal_ = geodesics_from(*world_, goal_);

  const ViewpointId* best = nullptr;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& sector : state.observation.sectors) {
    for (const auto& entry : sector.navigable) {
      const double cost =
          entry.distance + dist_to_goal_[viewpoint_index(*world_, entry.viewpoint)];
      if (cost < best_cost ||
          (cost == best_cost && best && entry.viewpoint < *best)) {
        best_cost = cost;
        best = &entry.viewpoint;
      }
    }
  }
  if (!best) {
    thought_ = "forced stop: no presented candidates";
    return Action::finish();
  }
  return Action::move(*best);
}

// --- Follower ---

Action follower_policy(const AgentState& state, double epsilon, Rng& rng) {
  const auto clauses = parse_instruction(state.instruction);
  const std::size_t step = state.history ? state.history->steps.size() : 0;
  if (step >= clauses.size() || clauses[step].stop) return Action::finish();

  const auto presented = state.observation.navigable();
  if (presented.empty()) return Action::finish();

  const bool explore = epsilon > 0.0 && rng.next_double() < epsilon;
  if (!explore) {
    const auto target = clause_target(state.observation, clauses[step].sector_name);
    if (target) return Action::move(*target);
  }
  return Action::move(presented[rng.uniform_int(presented.size())]);
}

// --- Remote navigator transport ---

namespace {

class FdTransport : public NdjsonTransport {
 public:
  FdTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

  void send_line(const std::string& line) override {
    std::string payload = line;
    payload += "\n";
    std::size_t sent = 0;
    while (sent < payload.size()) {
      const ssize_t n =
          ::write(write_fd_, payload.data() + sent, payload.size() - sent);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("write to navigator failed: ") +
                            std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string recv_line(int timeout_ms) override {
    while (true) {
      const auto newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      struct pollfd pfd = {read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, timeout_ms);
      if (ready == 0)
        throw TimeoutError("navigator did not respond within " +
                           std::to_string(timeout_ms) + " ms");
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("read from navigator failed: ") +
                            std::strerror(errno));
      }
      if (n == 0) throw ProtocolError("navigator closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

class SubprocessTransport final : public FdTransport {
 public:
  explicit SubprocessTransport(const std::string& command) : FdTransport(-1, -1) {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
      throw ProtocolError("cannot create pipes for navigator subprocess");
    pid_ = ::fork();
    if (pid_ < 0) throw ProtocolError("fork failed");
    if (pid_ == 0) {
      ::setpgid(0, 0);  // own process group so teardown reaches grandchildren
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), nullptr);
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    read_fd_ = from_child[0];
    write_fd_ = to_child[1];
  }

  ~SubprocessTransport() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      // Closed pipes end well-behaved children; stuck ones are terminated.
      int status = 0;
      for (int i = 0; i < 20; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) != 0) {
          ::kill(-pid_, SIGKILL);  // orphaned grandchildren, if any
          return;
        }
        if (i == 0) ::kill(-pid_, SIGTERM);
        ::usleep(50 * 1000);
      }
      ::kill(-pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
  }

 private:
  pid_t pid_ = -1;
};

class TcpTransport final : public FdTransport {
 public:
  TcpTransport(const std::string& host, const std::string& port)
      : FdTransport(-1, -1) {
    struct addrinfo hints = {};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    struct addrinfo* info = nullptr;
    if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &info) != 0)
      throw ProtocolError("cannot resolve navigator endpoint " + host + ":" +
                          port);
    int fd = -1;
    for (auto* p = info; p; p = p->ai_next) {
      fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(info);
    if (fd < 0)
      throw ProtocolError("cannot connect to navigator at " + host + ":" + port);
    read_fd_ = fd;
    write_fd_ = fd;
  }

  ~TcpTransport() override {
    if (read_fd_ >= 0) ::close(read_fd_);
  }
};

}  // namespace

std::unique_ptr<NdjsonTransport> open_transport(const std::string& endpoint) {
  if (endpoint.rfind("tcp:", 0) == 0) {
    const std::string rest = endpoint.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos)
      throw InvalidConfig("tcp endpoint must be tcp:<host>:<port>");
    return std::make_unique<TcpTransport>(rest.substr(0, colon),
                                          rest.substr(colon + 1));
  }
  if (endpoint.rfind("cmd:", 0) == 0)
    return std::make_unique<SubprocessTransport>(endpoint.substr(4));
  throw InvalidConfig("unknown endpoint '" + endpoint +
                      "'; use tcp:<host>:<port> or cmd:<command>");
}

void RemotePolicy::begin_episode(const World&, const Episode& episode,
                                 std::uint64_t) {
  episode_id_ = episode.id;
  transport_ = open_transport(endpoint_);
}

Action RemotePolicy::act(const AgentState& state, const std::string& prompt,
                         int step) {
  thought_.reset();
  if (!transport_) throw ProtocolError("remote policy has no open transport");

  nlohmann::ordered_json request = {
      {"episode_id", episode_id_}, {"step", step}, {"prompt", prompt}};
  transport_->send_line(request.dump());

  const std::string line = transport_->recv_line(timeout_ms_);
  nlohmann::json response;
  try {
    response = nlohmann::json::parse(line);
  } catch (const std::exception&) {
    throw ProtocolError("navigator response is not valid JSON: " + line);
  }
  if (!response.contains("action") || !response["action"].is_string())
    throw ProtocolError("navigator response lacks an action field");
  if (response.contains("thought") && response["thought"].is_string())
    thought_ = response["thought"].get<std::string>();

  const std::string action = response["action"].get<std::string>();
  if (action == "finished") return Action::finish();
  if (!state.observation.presents(action))
    throw InvalidAction("navigator chose " + action +
                        ", which is not presented");
  return Action::move(action);
}

std::unique_ptr<Policy> make_policy(const std::string& spec) {
  if (spec == "oracle") return std::make_unique<OraclePolicy>();
  if (spec.rfind("follower:", 0) == 0) {
    const std::string arg = spec.substr(9);
    double epsilon = 0.0;
    try {
      epsilon = std::stod(arg);
    } catch (const std::exception&) {
      throw InvalidConfig("bad follower epsilon: " + arg);
    }
    if (epsilon < 0.0 || epsilon > 1.0)
      throw InvalidConfig("follower epsilon must be in [0, 1]");
    return std::make_unique<FollowerPolicy>(epsilon);
  }
  if (spec == "follower") return std::make_unique<FollowerPolicy>(0.0);
  if (spec.rfind("remote:", 0) == 0)
    return std::make_unique<RemotePolicy>(spec.substr(7));
  throw InvalidConfig("unknown policy '" + spec +
                      "'; use oracle, follower:<eps>, or remote:<endpoint>");
}

}  // namespace navpruner
