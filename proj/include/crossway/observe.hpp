#pragma once

#include <stdexcept>
#include <vector>

#include "crossway/world.hpp"

namespace crossway {

// Ego-centric set observation: one feature row per visible agent, ego row
// first, remaining rows ordered by agent id. Row layout:
//   [rel_x, rel_y, sin_rel, cos_rel, speed, is_ego, wp1_x, wp1_y, ..., wpK_y]
// Positions are in the ego frame (ego at the origin, heading along +x). Only
// the ego row carries route waypoints; the slots are zero on other rows.
struct ObservationSet {
  int rows = 0;
  int dim = 0;
  std::vector<double> data;  // row-major, rows * dim

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * dim; }
  const double* row(int r) const {
    return data.data() + static_cast<std::size_t>(r) * dim;
  }
};

struct TooManyAgents : std::runtime_error {
  explicit TooManyAgents(const std::string& what) : std::runtime_error(what) {}
};

// Ego-row waypoint lookahead spacing, meters of arc length per slot.
inline constexpr double kWaypointLookaheadSpacing = 2.0;

// Observation of `world` from agent `ego`'s seat: every non-done agent within
// the closed Euclidean ball of `radius`, plus K upcoming waypoints of ego's
// route (zero-padded past the route end).
ObservationSet encode(const WorldState& world, int ego, double radius, int K,
                      double waypoint_spacing = kWaypointLookaheadSpacing);

// Row-major concatenation padded with zero rows to exactly max_agents rows.
// Throws TooManyAgents when the observation has more rows than that.
std::vector<double> pad_fixed(const ObservationSet& obs, int max_agents);

}  // namespace crossway
