#include "crossway/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace crossway {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double nominal_speed(double beta) {
  if (beta < -1.0 || beta > 1.0) throw std::domain_error("driver type outside [-1, 1]");
  return 2.7 * beta + 8.3;
}

std::string to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Running: return "running";
    case EpisodeStatus::Success: return "success";
    case EpisodeStatus::Collision: return "collision";
    case EpisodeStatus::Timeout: return "timeout";
  }
  return "?";
}

const AgentState* WorldState::find(int id) const {
  for (const AgentState& a : agents)
    if (a.id == id) return &a;
  return nullptr;
}

AgentState* WorldState::find(int id) {
  for (AgentState& a : agents)
    if (a.id == id) return &a;
  return nullptr;
}

std::vector<std::pair<int, int>> detect_collisions(const WorldState& w, const SimParams& p) {
  std::vector<std::pair<int, int>> pairs;
  for (size_t i = 0; i < w.agents.size(); ++i) {
    const AgentState& a = w.agents[i];
    if (a.done) continue;
    const Pose pa = a.pose();
    for (size_t j = i + 1; j < w.agents.size(); ++j) {
      const AgentState& b = w.agents[j];
      if (b.done) continue;
      // quick reject: farther apart than the footprint diagonal
      if (dist(pa.pos, b.pose().pos) > std::hypot(p.vehicle_length, p.vehicle_width)) continue;
      if (rects_overlap(pa, b.pose(), p.vehicle_length, p.vehicle_width))
        pairs.emplace_back(a.id, b.id);
    }
  }
  return pairs;
}

WorldState step(const WorldState& w, const std::map<int, Action>& actions, const SimParams& p) {
  if (w.status != EpisodeStatus::Running)
    throw std::logic_error("step on a terminated world");
  WorldState next = w;
  next.t = w.t + 1;

  for (AgentState& a : next.agents) {
    if (a.done) {
      a.moved = false;
      continue;
    }
    const auto it = actions.find(a.id);
    if (it == actions.end())
      throw std::invalid_argument("missing action for agent " + std::to_string(a.id));
    if (it->second == Action::Go) {
      a.s = std::min(a.s + nominal_speed(a.beta) * p.dt, a.route->total_length);
      a.moved = true;
    } else {
      a.moved = false;
    }
    if (a.s >= a.route->total_length - 1e-12) {
      a.s = a.route->total_length;
      a.done = true;
    }
  }

  // mutual standstill bookkeeping (ego + everyone within observation radius)
  const AgentState* ego = next.find(next.ego_id);
  if (ego && !ego->done) {
    const Vec2 ego_pos = ego->pose().pos;
    bool any_neighbor = false, all_still = !ego->moved;
    for (const AgentState& a : next.agents) {
      if (a.id == ego->id || a.done) continue;
      if (dist(a.pose().pos, ego_pos) <= p.obs_radius) {
        any_neighbor = true;
        if (a.moved) all_still = false;
      }
    }
    next.standstill_run = (any_neighbor && all_still) ? next.standstill_run + 1 : 0;
  } else {
    next.standstill_run = 0;
  }

  if (ego && ego->done) {
    next.status = EpisodeStatus::Success;
  } else {
    bool ego_hit = false;
    for (const auto& [i, j] : detect_collisions(next, p))
      if (i == next.ego_id || j == next.ego_id) ego_hit = true;
    if (ego_hit)
      next.status = EpisodeStatus::Collision;
    else if (next.t >= p.t_max)
      next.status = EpisodeStatus::Timeout;
  }
  return next;
}

double time_to_collision(const WorldState& w, int i, int j, Action a_i, Action a_j,
                         const SimParams& p) {
  const AgentState* ai = w.find(i);
  const AgentState* aj = w.find(j);
  if (!ai || !aj || ai->done || aj->done || i == j) return kInf;

  double si = ai->s, sj = aj->s;
  const double vi = nominal_speed(ai->beta) * p.dt;
  const double vj = nominal_speed(aj->beta) * p.dt;

  if (rects_overlap(ai->route->pose_at(si), aj->route->pose_at(sj), p.vehicle_length,
                    p.vehicle_width))
    return 0.0;
  if (a_i == Action::Stop && a_j == Action::Stop) return kInf;

  for (int k = 1; k <= p.ttc_horizon; ++k) {
    if (a_i == Action::Go) si = std::min(si + vi, ai->route->total_length);
    if (a_j == Action::Go) sj = std::min(sj + vj, aj->route->total_length);
    // an agent reaching its route end leaves the map and can no longer collide
    if (si >= ai->route->total_length - 1e-12 || sj >= aj->route->total_length - 1e-12)
      return kInf;
    if (rects_overlap(ai->route->pose_at(si), aj->route->pose_at(sj), p.vehicle_length,
                      p.vehicle_width))
      return k * p.dt;
  }
  return kInf;
}

StepEvents ego_events(const WorldState& before, const WorldState& after, const SimParams& p) {
  StepEvents ev;
  const AgentState* ego = after.find(after.ego_id);
  if (!ego) return ev;
  ev.moved = ego->moved;
  ev.timeout = after.status == EpisodeStatus::Timeout;
  ev.stalemate = after.standstill_run >= p.stalemate_window;
  ev.collision = after.status == EpisodeStatus::Collision;

  if (!ego->done) {
    double nearest = kInf;
    for (const AgentState& a : after.agents) {
      if (a.id == ego->id || a.done) continue;
      const auto d = travel_distance(*ego->route, ego->s, a.pose().pos, p.lateral_tol);
      if (d && *d > 1e-9 && *d < nearest) nearest = *d;
    }
    if (std::isfinite(nearest))
      ev.follow_gap = std::max(0.0, nearest - p.vehicle_length);
  }
  (void)before;
  return ev;
}

RewardBreakdown ego_reward(double beta, const StepEvents& ev, const SimParams& p) {
  if (beta < -1.0 || beta > 1.0) throw std::domain_error("driver type outside [-1, 1]");
  RewardBreakdown r;
  r.time_penalty = -0.05 * beta - 0.15;
  if (ev.moved) r.speed_reward = 0.5 * beta + 1.5;
  if (ev.timeout) r.timeout_penalty = -5.0 * beta - 20.0;
  if (ev.stalemate) r.stalemate_penalty = -0.5 * beta - 1.5;
  if (ev.collision) r.collision_penalty = -5.0 * beta - 45.0;
  if (ev.follow_gap && *ev.follow_gap <= p.follow_delta)
    r.follow_penalty = -2.0 + 2.0 / (1.0 + std::exp(-*ev.follow_gap));
  return r;
}

EpisodeResult run_episode(WorldState w, const Policy& ego_policy, const Policy& other_policy,
                          const SimParams& p, bool keep_trace) {
  EpisodeResult result;
  const AgentState* ego = w.find(w.ego_id);
  if (!ego) throw std::invalid_argument("initial state lacks the ego agent");
  const double ego_beta = ego->beta;

  while (w.status == EpisodeStatus::Running) {
    std::map<int, Action> actions;
    for (const AgentState& a : w.agents) {
      if (a.done) continue;
      actions[a.id] = a.id == w.ego_id ? ego_policy(w, a.id) : other_policy(w, a.id);
    }
    WorldState next = step(w, actions, p);
    const StepEvents ev = ego_events(w, next, p);
    const RewardBreakdown rb = ego_reward(ego_beta, ev, p);
    result.rewards.push_back(rb);
    result.ego_return += rb.total();

    if (keep_trace) {
      StepRecord rec;
      rec.t = next.t;
      for (const AgentState& a : next.agents) {
        const Pose pose = a.pose();
        const auto it = actions.find(a.id);
        rec.agents.push_back({a.id, a.s, pose.pos, pose.heading,
                              it == actions.end() ? Action::Stop : it->second, a.done});
      }
      rec.reward = rb;
      rec.events = ev;
      result.trace.push_back(std::move(rec));
    }
    w = std::move(next);
  }
  result.status = w.status;
  result.length = w.t;
  return result;
}

void write_trace_jsonl(const EpisodeResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  for (const StepRecord& rec : result.trace) {
    nlohmann::ordered_json j;
    j["t"] = rec.t;
    j["agents"] = nlohmann::ordered_json::array();
    for (const auto& a : rec.agents)
      j["agents"].push_back({{"id", a.id},
                             {"s", a.s},
                             {"x", a.pos.x},
                             {"y", a.pos.y},
                             {"heading", a.heading},
                             {"action", a.action == Action::Go ? 1 : 0},
                             {"done", a.done}});
    j["reward"] = {{"time", rec.reward.time_penalty},
                   {"speed", rec.reward.speed_reward},
                   {"timeout", rec.reward.timeout_penalty},
                   {"stalemate", rec.reward.stalemate_penalty},
                   {"collision", rec.reward.collision_penalty},
                   {"follow", rec.reward.follow_penalty},
                   {"total", rec.reward.total()}};
    nlohmann::ordered_json ev{{"moved", rec.events.moved},
                              {"timeout", rec.events.timeout},
                              {"stalemate", rec.events.stalemate},
                              {"collision", rec.events.collision}};
    if (rec.events.follow_gap) ev["follow_gap"] = *rec.events.follow_gap;
    j["events"] = std::move(ev);
    out << j.dump() << "\n";
  }
}

}  // namespace crossway
