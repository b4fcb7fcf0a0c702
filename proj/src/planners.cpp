#include "crossway/planners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <vector>

#include "crossway/geom.hpp"
#include "crossway/rng.hpp"

namespace crossway {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Polyline of the next `range` meters of an agent's route, starting at its
// current position. Always returns at least two points (possibly coincident)
// so callers can treat the result as a list of segments.
std::vector<Vec2> clip_route_ahead(const RoutePlan& route, double s0, double range) {
  std::vector<Vec2> pts;
  const double s_end = std::min(route.total_length, s0 + range);
  pts.push_back(route.pose_at(s0).pos);
  for (std::size_t k = 0; k < route.cum.size(); ++k) {
    if (route.cum[k] > s0 && route.cum[k] < s_end) pts.push_back(route.waypoints[k]);
  }
  pts.push_back(route.pose_at(s_end).pos);
  return pts;
}

}  // namespace

bool routes_conflict_within(const WorldState& w, int i, int j, double range,
                            const SimParams& p) {
  const AgentState& a = *w.find(i);
  const AgentState& b = *w.find(j);
  // Two corridors can only conflict inside the scanned windows if the agents
  // themselves are within twice the range plus the lateral tolerance.
  if (dist(a.pose().pos, b.pose().pos) > 2.0 * range + p.lateral_tol + p.vehicle_length)
    return false;
  // Each window starts half a vehicle length behind the agent's center: the
  // tail still occupies the corridor there, and a conflict must not expire
  // until it has cleared.
  const double tail = p.vehicle_length / 2.0;
  const std::vector<Vec2> pa = clip_route_ahead(*a.route, std::max(0.0, a.s - tail), range + tail);
  const std::vector<Vec2> pb = clip_route_ahead(*b.route, std::max(0.0, b.s - tail), range + tail);
  for (std::size_t u = 0; u + 1 < pa.size(); ++u) {
    for (std::size_t v = 0; v + 1 < pb.size(); ++v) {
      if (segment_segment_dist(pa[u], pa[u + 1], pb[v], pb[v + 1]) <= p.lateral_tol) {
        return true;
      }
    }
  }
  return false;
}

Action oracle_action(const WorldState& w, int i, const OracleConfig& cfg,
                     const SimParams& p) {
  const AgentState& me = *w.find(i);
  if (me.done) return Action::Stop;
  SimParams q = p;
  q.ttc_horizon = cfg.ttc_horizon;
  for (const AgentState& other : w.agents) {
    if (other.id == i || other.done) continue;
    if (!routes_conflict_within(w, i, other.id, cfg.observation_travel_distance, p)) {
      continue;
    }
    const double t_yield = time_to_collision(w, i, other.id, Action::Stop, Action::Go, q);
    const double t_claim = time_to_collision(w, i, other.id, Action::Go, Action::Stop, q);
    // Yield when the other agent reaches the shared corridor first; on exact
    // ties the smaller id has priority.
    if (t_yield > t_claim || (t_yield == t_claim && other.id < i)) return Action::Stop;
  }
  return Action::Go;
}

Action car_follower_action(const WorldState& w, int i,
                           const CarFollowerConfig& cfg, const SimParams& p) {
  const AgentState& me = *w.find(i);
  if (me.done) return Action::Stop;
  double nearest = kInf;
  for (const AgentState& other : w.agents) {
    if (other.id == i || other.done) continue;
    const auto d = travel_distance(*me.route, me.s, other.pose().pos, p.lateral_tol);
    if (d && *d > 1e-9) nearest = std::min(nearest, *d);
  }
  if (!std::isfinite(nearest)) return Action::Go;
  const double gap = std::max(0.0, nearest - p.vehicle_length);
  return gap <= cfg.min_gap ? Action::Stop : Action::Go;
}

Policy make_oracle(OracleConfig cfg, SimParams p) {
  return [cfg, p](const WorldState& w, int id) { return oracle_action(w, id, cfg, p); };
}

Policy make_car_follower(CarFollowerConfig cfg, SimParams p) {
  return [cfg, p](const WorldState& w, int id) {
    return car_follower_action(w, id, cfg, p);
  };
}

Policy always_go() {
  return [](const WorldState&, int) { return Action::Go; };
}

Policy always_stop() {
  return [](const WorldState&, int) { return Action::Stop; };
}

Policy with_action_noise(Policy inner, double flip_prob, std::uint64_t seed) {
  auto streams = std::make_shared<std::map<int, Rng>>();
  return [inner = std::move(inner), flip_prob, seed, streams](const WorldState& w,
                                                              int id) {
    Action a = inner(w, id);
    auto it = streams->find(id);
    if (it == streams->end()) {
      it = streams->emplace(id, Rng(mix_seed(seed, static_cast<std::uint64_t>(id)))).first;
    }
    if (it->second.bernoulli(flip_prob)) {
      a = (a == Action::Go) ? Action::Stop : Action::Go;
    }
    return a;
  };
}

}  // namespace crossway
