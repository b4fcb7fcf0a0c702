#include "crossway/observe.hpp"

#include <cmath>
#include <stdexcept>

namespace crossway {

ObservationSet encode(const WorldState& world, int ego, double radius, int K,
                      double waypoint_spacing) {
  const AgentState* me = world.find(ego);
  if (!me || me->done) throw std::invalid_argument("encode: ego missing or done");
  const Pose ep = me->pose();
  const double c = std::cos(ep.heading), s = std::sin(ep.heading);
  const auto to_ego = [&](Vec2 p) {
    const Vec2 d = p - ep.pos;
    return Vec2{c * d.x + s * d.y, -s * d.x + c * d.y};
  };

  ObservationSet o;
  o.dim = 6 + 2 * K;

  const auto push_row = [&](const AgentState& a) {
    const Pose ap = a.pose();
    const bool is_ego = a.id == ego;
    const Vec2 rel = to_ego(ap.pos);
    const double dh = ap.heading - ep.heading;
    o.data.push_back(rel.x);
    o.data.push_back(rel.y);
    o.data.push_back(std::sin(dh));
    o.data.push_back(std::cos(dh));
    o.data.push_back(a.speed());
    o.data.push_back(is_ego ? 1.0 : 0.0);
    for (int k = 1; k <= K; ++k) {
      const double sk = a.s + waypoint_spacing * k;
      if (is_ego && sk <= a.route->total_length) {
        const Vec2 wp = to_ego(a.route->pose_at(sk).pos);
        o.data.push_back(wp.x);
        o.data.push_back(wp.y);
      } else {
        o.data.push_back(0.0);
        o.data.push_back(0.0);
      }
    }
    ++o.rows;
  };

  push_row(*me);
  for (const AgentState& a : world.agents) {
    if (a.id == ego || a.done) continue;
    if (dist(a.pose().pos, ep.pos) <= radius) push_row(a);
  }
  return o;
}

std::vector<double> pad_fixed(const ObservationSet& obs, int max_agents) {
  if (obs.rows > max_agents) {
    throw TooManyAgents("observation has " + std::to_string(obs.rows) +
                        " rows, limit " + std::to_string(max_agents));
  }
  std::vector<double> flat(static_cast<std::size_t>(max_agents) * obs.dim, 0.0);
  std::copy(obs.data.begin(), obs.data.end(), flat.begin());
  return flat;
}

}  // namespace crossway
