#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "crossway/observe.hpp"
#include "crossway/world.hpp"

using namespace crossway;

namespace {

std::shared_ptr<RoutePlan> poly_route(std::vector<Vec2> pts) {
  auto route = std::make_shared<RoutePlan>();
  route->waypoints = std::move(pts);
  route->cum.assign(route->waypoints.size(), 0.0);
  for (std::size_t k = 1; k < route->waypoints.size(); ++k)
    route->cum[k] = route->cum[k - 1] + dist(route->waypoints[k - 1], route->waypoints[k]);
  route->total_length = route->cum.back();
  return route;
}

std::shared_ptr<RoutePlan> straight_route(Vec2 a, Vec2 b) {
  std::vector<Vec2> pts;
  const double len = dist(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / 0.5)));
  for (int k = 0; k <= n; ++k) pts.push_back(a + (b - a) * (static_cast<double>(k) / n));
  return poly_route(std::move(pts));
}

AgentState agent(int id, double beta, std::shared_ptr<const RoutePlan> route, double s) {
  AgentState a;
  a.id = id;
  a.beta = beta;
  a.route = std::move(route);
  a.s = s;
  a.goal = a.route->waypoints.back();
  return a;
}

WorldState world_of(std::vector<AgentState> agents, int ego_id) {
  WorldState w;
  w.agents = std::move(agents);
  w.ego_id = ego_id;
  return w;
}

}  // namespace

TEST(Encode, EgoRowLeadsWithCanonicalFeatures) {
  auto r = straight_route({0, 0}, {40, 0});
  WorldState w = world_of({agent(0, 0.0, r, 10.0)}, 0);
  const ObservationSet o = encode(w, 0, 10.0, 5);
  EXPECT_EQ(o.rows, 1);
  EXPECT_EQ(o.dim, 16);
  const double* ego = o.row(0);
  EXPECT_DOUBLE_EQ(ego[0], 0.0);  // rel_x
  EXPECT_DOUBLE_EQ(ego[1], 0.0);  // rel_y
  EXPECT_DOUBLE_EQ(ego[2], 0.0);  // sin of relative heading
  EXPECT_DOUBLE_EQ(ego[3], 1.0);  // cos of relative heading
  EXPECT_DOUBLE_EQ(ego[4], 0.0);  // stationary before the first step
  EXPECT_DOUBLE_EQ(ego[5], 1.0);  // is_ego
}

TEST(Encode, EgoWaypointsMarchAheadAtFixedSpacing) {
  auto r = straight_route({0, 0}, {40, 0});
  WorldState w = world_of({agent(0, 0.0, r, 10.0)}, 0);
  const ObservationSet o = encode(w, 0, 10.0, 5);
  const double* ego = o.row(0);
  for (int k = 1; k <= 5; ++k) {
    EXPECT_NEAR(ego[6 + 2 * (k - 1)], 2.0 * k, 1e-9) << "waypoint " << k;
    EXPECT_NEAR(ego[6 + 2 * (k - 1) + 1], 0.0, 1e-9);
  }
}

TEST(Encode, WaypointsZeroPadPastRouteEnd) {
  auto r = straight_route({0, 0}, {16, 0});
  WorldState w = world_of({agent(0, 0.0, r, 9.0)}, 0);
  const ObservationSet o = encode(w, 0, 10.0, 5);
  const double* ego = o.row(0);
  // slots at s = 11, 13, 15 exist; 17 and 19 are past the 16 m route end
  EXPECT_NEAR(ego[6], 2.0, 1e-9);
  EXPECT_NEAR(ego[8], 4.0, 1e-9);
  EXPECT_NEAR(ego[10], 6.0, 1e-9);
  EXPECT_DOUBLE_EQ(ego[12], 0.0);
  EXPECT_DOUBLE_EQ(ego[13], 0.0);
  EXPECT_DOUBLE_EQ(ego[14], 0.0);
  EXPECT_DOUBLE_EQ(ego[15], 0.0);
}

TEST(Encode, ClosedBallBoundary) {
  auto r = straight_route({0, 0}, {40, 0});
  auto far_lane = straight_route({10, 0}, {40, 30});
  WorldState w = world_of({agent(0, 0.0, r, 0.0), agent(1, 0.0, far_lane, 0.0)}, 0);
  // agent 1 sits at (10, 0): distance exactly the radius -> included
  EXPECT_EQ(encode(w, 0, 10.0, 5).rows, 2);
  // shrink the radius a hair -> excluded
  EXPECT_EQ(encode(w, 0, 10.0 - 1e-9, 5).rows, 1);
}

TEST(Encode, DoneAgentsVanish) {
  auto r = straight_route({0, 0}, {40, 0});
  WorldState w = world_of({agent(0, 0.0, r, 10.0), agent(1, 0.0, r, 14.0)}, 0);
  EXPECT_EQ(encode(w, 0, 10.0, 5).rows, 2);
  w.find(1)->done = true;
  EXPECT_EQ(encode(w, 0, 10.0, 5).rows, 1);
}

TEST(Encode, NonEgoRowsOrderedByIdWithZeroWaypointSlots) {
  auto r = straight_route({0, 0}, {40, 0});
  WorldState w = world_of(
      {agent(2, 0.0, r, 10.0), agent(5, 0.0, r, 16.0), agent(9, 0.0, r, 8.0)}, 5);
  const ObservationSet o = encode(w, 5, 10.0, 5);
  ASSERT_EQ(o.rows, 3);
  EXPECT_DOUBLE_EQ(o.row(0)[5], 1.0);  // ego first
  // then ids 2 and 9: row 1 is the agent 6 m behind, row 2 the one 8 m behind
  EXPECT_NEAR(o.row(1)[0], -6.0, 1e-9);
  EXPECT_NEAR(o.row(2)[0], -8.0, 1e-9);
  for (int row = 1; row < 3; ++row) {
    EXPECT_DOUBLE_EQ(o.row(row)[5], 0.0);
    for (int k = 6; k < o.dim; ++k) EXPECT_DOUBLE_EQ(o.row(row)[k], 0.0) << row << "," << k;
  }
}

TEST(Encode, SpeedReflectsLastStepMovement) {
  SimParams p;
  auto r = straight_route({0, 0}, {40, 0});
  WorldState w = world_of({agent(0, 0.0, r, 10.0), agent(1, 0.5, r, 16.0)}, 0);
  WorldState n = step(w, {{0, Action::Stop}, {1, Action::Go}}, p);
  const ObservationSet o = encode(n, 0, 10.0, 5);
  ASSERT_EQ(o.rows, 2);
  EXPECT_DOUBLE_EQ(o.row(0)[4], 0.0);
  EXPECT_DOUBLE_EQ(o.row(1)[4], nominal_speed(0.5));
}

TEST(Encode, RelativeGeometryInACurvedFrame) {
  // ego heads due north; an agent dead ahead must appear at (+d, 0)
  auto north = straight_route({0, 0}, {0, 40});
  WorldState w = world_of({agent(0, 0.0, north, 5.0), agent(1, 0.0, north, 12.0)}, 0);
  const ObservationSet o = encode(w, 0, 10.0, 5);
  ASSERT_EQ(o.rows, 2);
  EXPECT_NEAR(o.row(1)[0], 7.0, 1e-9);
  EXPECT_NEAR(o.row(1)[1], 0.0, 1e-9);
  EXPECT_NEAR(o.row(1)[2], 0.0, 1e-9);  // same heading
  EXPECT_NEAR(o.row(1)[3], 1.0, 1e-9);
}

TEST(Encode, TranslationInvariance) {
  const Vec2 shift{137.0, -54.0};
  auto build = [&](Vec2 t) {
    auto east = straight_route(Vec2{0, 0} + t, Vec2{40, 0} + t);
    auto north = straight_route(Vec2{20, -15} + t, Vec2{20, 25} + t);
    return world_of({agent(0, 0.2, east, 14.0), agent(1, -0.4, north, 9.0)}, 0);
  };
  const ObservationSet a = encode(build({0, 0}), 0, 10.0, 5);
  const ObservationSet b = encode(build(shift), 0, 10.0, 5);
  ASSERT_EQ(a.rows, b.rows);
  ASSERT_EQ(a.dim, b.dim);
  for (std::size_t k = 0; k < a.data.size(); ++k)
    EXPECT_NEAR(a.data[k], b.data[k], 1e-9) << "feature " << k;
}

TEST(Encode, RotationAboutEgoLeavesFeaturesUnchanged) {
  const double ang = 1.234;
  const double c = std::cos(ang), s = std::sin(ang);
  auto rot = [&](Vec2 p) { return Vec2{c * p.x - s * p.y, s * p.x + c * p.y}; };
  auto build = [&](bool rotated) {
    auto mk = [&](Vec2 a, Vec2 b) {
      return rotated ? straight_route(rot(a), rot(b)) : straight_route(a, b);
    };
    auto east = mk({0, 0}, {40, 0});
    auto north = mk({20, -15}, {20, 25});
    return world_of({agent(0, 0.2, east, 14.0), agent(1, -0.4, north, 9.0)}, 0);
  };
  const ObservationSet a = encode(build(false), 0, 10.0, 5);
  const ObservationSet b = encode(build(true), 0, 10.0, 5);
  ASSERT_EQ(a.rows, b.rows);
  for (std::size_t k = 0; k < a.data.size(); ++k)
    EXPECT_NEAR(a.data[k], b.data[k], 1e-9) << "feature " << k;
}

TEST(Encode, RequiresLiveEgo) {
  auto r = straight_route({0, 0}, {40, 0});
  WorldState w = world_of({agent(0, 0.0, r, 10.0)}, 0);
  w.find(0)->done = true;
  EXPECT_THROW(encode(w, 0, 10.0, 5), std::invalid_argument);
  EXPECT_THROW(encode(w, 3, 10.0, 5), std::invalid_argument);
}

TEST(PadFixed, AppendsZeroRowsToTheLimit) {
  auto r = straight_route({0, 0}, {40, 0});
  WorldState w = world_of({agent(0, 0.0, r, 10.0), agent(1, 0.0, r, 15.0)}, 0);
  const ObservationSet o = encode(w, 0, 10.0, 5);
  ASSERT_EQ(o.rows, 2);
  const std::vector<double> flat = pad_fixed(o, 8);
  ASSERT_EQ(flat.size(), 8u * 16u);
  for (int k = 0; k < o.rows * o.dim; ++k) EXPECT_DOUBLE_EQ(flat[k], o.data[k]);
  for (std::size_t k = o.data.size(); k < flat.size(); ++k) EXPECT_DOUBLE_EQ(flat[k], 0.0);
}

TEST(PadFixed, ExactFitAndOverflow) {
  auto r = straight_route({0, 0}, {40, 0});
  std::vector<AgentState> agents;
  for (int id = 0; id < 3; ++id) agents.push_back(agent(id, 0.0, r, 10.0 + id * 5.0));
  WorldState w = world_of(std::move(agents), 0);
  const ObservationSet o = encode(w, 0, 10.0, 5);
  ASSERT_EQ(o.rows, 3);
  EXPECT_EQ(pad_fixed(o, 3).size(), 3u * 16u);
  EXPECT_THROW(pad_fixed(o, 2), TooManyAgents);
}
