#pragma once

#include <cstdint>

#include "crossway/world.hpp"

namespace crossway {

// Rule-based right-of-way planner. For every other live agent whose remaining
// route conflicts with ours within the observation travel distance, it
// compares the two one-sided time-to-collision values and yields to the agent
// that would reach the conflict first, breaking ties in favor of the smaller
// agent id.
struct OracleConfig {
  double observation_travel_distance = 9.2;  // m of forward travel, each route
  int ttc_horizon = 100;                     // rollout steps per TTC query
};

// Distance-triggered braking: stop whenever the nearest agent ahead on our
// corridor is within min_gap of our front bumper.
struct CarFollowerConfig {
  double min_gap = 4.0;  // m, bumper-to-bumper
};

// True when the remaining routes of i and j pass within the lateral tolerance
// of each other inside `range` meters of forward travel of both agents.
bool routes_conflict_within(const WorldState& w, int i, int j, double range,
                            const SimParams& p);

Action oracle_action(const WorldState& w, int i, const OracleConfig& cfg,
                     const SimParams& p);

Action car_follower_action(const WorldState& w, int i,
                           const CarFollowerConfig& cfg, const SimParams& p);

Policy make_oracle(OracleConfig cfg = {}, SimParams p = {});
Policy make_car_follower(CarFollowerConfig cfg = {}, SimParams p = {});
Policy always_go();
Policy always_stop();

// Wraps a policy so the emitted action is flipped with probability
// flip_prob, drawn from an independent per-agent stream derived from seed.
// flip_prob = 0 reproduces the wrapped policy exactly.
Policy with_action_noise(Policy inner, double flip_prob, std::uint64_t seed);

}  // namespace crossway
