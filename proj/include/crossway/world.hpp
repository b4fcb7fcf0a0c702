#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crossway/lane_graph.hpp"

namespace crossway {

enum class Action { Stop = 0, Go = 1 };

struct SimParams {
  double dt = 0.1;              // seconds per step
  int t_max = 200;              // timeout horizon, steps
  double vehicle_length = 4.6;  // footprint, meters
  double vehicle_width = 2.0;
  double obs_radius = 10.0;       // Euclidean observation radius
  int stalemate_window = 5;       // consecutive standstill steps
  double follow_delta = 5.0;      // follow-penalty activation gap, meters
  int ttc_horizon = 100;          // rollout bound for time-to-collision, steps
  double lateral_tol = 1.75;      // corridor membership tolerance
};

// speed law: v = 2.7 * beta + 8.3
double nominal_speed(double beta);

struct AgentState {
  int id = 0;
  double beta = 0.0;  // driver type in [-1, 1]
  std::shared_ptr<const RoutePlan> route;
  double s = 0.0;      // arc length along route
  bool done = false;   // reached route end (leaves the map)
  bool moved = false;  // advanced during the most recent step
  Vec2 goal;

  Pose pose() const { return route->pose_at(s); }
  double speed() const { return moved ? nominal_speed(beta) : 0.0; }
};

enum class EpisodeStatus { Running, Success, Collision, Timeout };

std::string to_string(EpisodeStatus s);

struct WorldState {
  int t = 0;
  std::vector<AgentState> agents;  // unique ids, ascending
  EpisodeStatus status = EpisodeStatus::Running;
  int ego_id = 0;
  int standstill_run = 0;  // consecutive steps with ego + all neighbors stationary

  const AgentState* find(int id) const;
  AgentState* find(int id);
};

struct StepEvents {
  bool moved = false;
  bool timeout = false;
  bool stalemate = false;
  bool collision = false;
  std::optional<double> follow_gap;  // bumper-to-bumper gap to the front agent
};

struct RewardBreakdown {
  double time_penalty = 0.0;      // always
  double speed_reward = 0.0;      // if ego moved
  double timeout_penalty = 0.0;   // if episode timed out
  double stalemate_penalty = 0.0; // if mutual standstill persisted
  double collision_penalty = 0.0; // if ego collided
  double follow_penalty = 0.0;    // if tailgating within follow_delta

  double total() const {
    return time_penalty + speed_reward + timeout_penalty + stalemate_penalty +
           collision_penalty + follow_penalty;
  }
};

// Advance one timestep. Every non-done agent needs an action
// (std::invalid_argument otherwise). Pure: returns the successor state.
WorldState step(const WorldState& w, const std::map<int, Action>& actions, const SimParams& p);

// All colliding pairs (i < j) among non-done agents, strict footprint overlap.
std::vector<std::pair<int, int>> detect_collisions(const WorldState& w, const SimParams& p);

// First time agents i and j collide if i holds a_i and j holds a_j forever
// (everyone else frozen), up to p.ttc_horizon steps; +infinity if never.
double time_to_collision(const WorldState& w, int i, int j, Action a_i, Action a_j,
                         const SimParams& p);

// Ego events for the transition before -> after.
StepEvents ego_events(const WorldState& before, const WorldState& after, const SimParams& p);

// Per-term ego reward for one step's events.
RewardBreakdown ego_reward(double beta, const StepEvents& events, const SimParams& p);

using Policy = std::function<Action(const WorldState&, int agent_id)>;

struct StepRecord {
  int t;  // world time after the step
  struct AgentSnapshot {
    int id;
    double s;
    Vec2 pos;
    double heading;
    Action action;
    bool done;
  };
  std::vector<AgentSnapshot> agents;
  RewardBreakdown reward;
  StepEvents events;
};

struct EpisodeResult {
  EpisodeStatus status = EpisodeStatus::Running;
  int length = 0;
  double ego_return = 0.0;
  std::vector<RewardBreakdown> rewards;  // one per step
  std::vector<StepRecord> trace;         // filled when keep_trace
};

// Run to termination: ego reaches goal (Success), ego collides (Collision),
// or t reaches t_max (Timeout). Deterministic given (initial, policies).
EpisodeResult run_episode(WorldState initial, const Policy& ego_policy,
                          const Policy& other_policy, const SimParams& p,
                          bool keep_trace = false);

// JSON-lines trace export: one record per step.
void write_trace_jsonl(const EpisodeResult& result, const std::string& path);

}  // namespace crossway
