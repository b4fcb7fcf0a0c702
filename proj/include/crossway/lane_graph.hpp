#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossway/geom.hpp"

namespace crossway {

enum class JunctionKind { TIntersection, Corner, Roundabout };

std::string to_string(JunctionKind k);
JunctionKind junction_kind_from_string(const std::string& s);

struct Junction {
  Vec2 center;
  JunctionKind kind;
  double half_size = 0.0;  // junction occupies a square box of this half-width
};

// One directed piece of road: either a straight lane between two junction
// boxes or a connector curve inside a junction.
struct Segment {
  int id = -1;
  std::vector<Vec2> pts;    // polyline, at least 2 points
  std::vector<double> cum;  // cumulative chord length, cum[0] == 0
  std::string direction;    // "E"/"N"/"W"/"S" for lanes, movement tag otherwise
  int junction = -1;        // index into LaneGraph::junctions, -1 for lanes
  std::vector<int> next;    // successor segment ids (start touches our end)

  double length() const { return cum.back(); }
  Vec2 start() const { return pts.front(); }
  Vec2 end() const { return pts.back(); }
};

struct LaneGraph {
  std::vector<Segment> segments;
  std::vector<Junction> junctions;
  std::vector<Vec2> nodes;   // deduplicated segment endpoints
  std::vector<Vec2> spawns;  // published spawn positions
  std::vector<Vec2> goals;   // published goal positions (same set by default)

  // Closest (segment, arc) for a position on the network; throws
  // std::invalid_argument if farther than tol from every segment.
  struct Location {
    int segment;
    double s;
  };
  Location locate(Vec2 pos, double tol) const;
};

struct RoutePlan {
  std::vector<Vec2> waypoints;
  std::vector<double> cum;  // strictly increasing, cum.front() == 0
  double total_length = 0.0;
  std::vector<int> segment_ids;  // lane-graph path the route follows

  // Position + heading at arc length s; throws std::out_of_range outside
  // [0, total_length].
  Pose pose_at(double s) const;
};

struct NoRoute : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The bundled neighborhood map: 3x3 junction grid (4 corners,
// 4 T-intersections, 1 central roundabout), single-lane directed roads,
// right-hand traffic.
LaneGraph build_default_map();

// Minimal-arc-length directed route between two on-network positions.
// Deterministic: ties broken by lexicographically smallest segment-id
// sequence. Throws NoRoute if the goal is unreachable.
RoutePlan shortest_route(const LaneGraph& g, Vec2 spawn, Vec2 goal);

// Arc length from s_i forward along the route to the closest route point
// within lateral tolerance of pos_j; nullopt if never within tolerance.
std::optional<double> travel_distance(const RoutePlan& route, double s_i, Vec2 pos_j,
                                      double lateral_tol);

// Map file round-trip (schema_version 1).
void save_map(const LaneGraph& g, const std::string& path);
LaneGraph load_map(const std::string& path);

// Structural checks: junction census, segment contiguity and positive length,
// junction in/out degree, spawn-to-goal reachability. Empty result = valid.
std::vector<std::string> validate_map(const LaneGraph& g);

// Geometry/topology constants for the default map.
namespace map_defaults {
inline constexpr double kLaneWidth = 3.5;
inline constexpr double kLaneOffset = kLaneWidth / 2.0;  // lane center from road axis
inline constexpr double kBlockSpacing = 60.0;            // junction grid pitch
inline constexpr double kJunctionHalf = 14.0;
inline constexpr double kRightTurnRadius = kJunctionHalf - kLaneOffset;
inline constexpr double kLeftTurnRadius = kJunctionHalf + kLaneOffset;
inline constexpr double kRingRadius = 8.0;
inline constexpr double kRingEntryDeg = 35.0;  // merge angle off the approach bearing
inline constexpr double kWaypointSpacing = 0.5;
inline constexpr double kLateralTol = kLaneOffset;  // "on my corridor" tolerance
}  // namespace map_defaults

}  // namespace crossway
