#include "crossway/lane_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <tuple>

#include <json.hpp>

#include "crossway/textio.hpp"

namespace crossway {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieEps = 1e-9;
}  // namespace

std::string to_string(JunctionKind k) {
  switch (k) {
    case JunctionKind::TIntersection: return "t-intersection";
    case JunctionKind::Corner: return "corner";
    case JunctionKind::Roundabout: return "roundabout";
  }
  return "?";
}

JunctionKind junction_kind_from_string(const std::string& s) {
  if (s == "t-intersection") return JunctionKind::TIntersection;
  if (s == "corner") return JunctionKind::Corner;
  if (s == "roundabout") return JunctionKind::Roundabout;
  throw std::invalid_argument("unknown junction kind: " + s);
}

LaneGraph::Location LaneGraph::locate(Vec2 pos, double tol) const {
  double best = kInf;
  Location loc{-1, 0.0};
  for (const Segment& seg : segments) {
    for (size_t k = 0; k + 1 < seg.pts.size(); ++k) {
      double t = 0.0;
      const double d = point_segment_dist(pos, seg.pts[k], seg.pts[k + 1], &t);
      if (d < best - 1e-12) {
        best = d;
        loc = {seg.id, seg.cum[k] + t * (seg.cum[k + 1] - seg.cum[k])};
      }
    }
  }
  if (loc.segment < 0 || best > tol)
    throw std::invalid_argument("position is not on the lane network");
  return loc;
}

Pose RoutePlan::pose_at(double s) const {
  if (s < 0.0 || s > total_length) throw std::out_of_range("arc length outside route");
  if (waypoints.size() == 1) return {waypoints.front(), 0.0};
  // piece k covers [cum[k], cum[k+1]); s == total_length uses the last piece
  size_t k = std::upper_bound(cum.begin(), cum.end(), s) - cum.begin();
  k = (k == 0) ? 0 : k - 1;
  if (k + 1 >= waypoints.size()) k = waypoints.size() - 2;
  const Vec2 a = waypoints[k], b = waypoints[k + 1];
  const double len = cum[k + 1] - cum[k];
  const double t = len > 0.0 ? (s - cum[k]) / len : 0.0;
  return {a + (b - a) * t, std::atan2(b.y - a.y, b.x - a.x)};
}

std::optional<double> travel_distance(const RoutePlan& route, double s_i, Vec2 pos_j,
                                      double lateral_tol) {
  if (route.waypoints.size() < 2) return std::nullopt;
  const double s0 = std::clamp(s_i, 0.0, route.total_length);
  size_t k0 = std::upper_bound(route.cum.begin(), route.cum.end(), s0) - route.cum.begin();
  k0 = (k0 == 0) ? 0 : k0 - 1;
  if (k0 + 1 >= route.waypoints.size()) k0 = route.waypoints.size() - 2;

  double best_d = kInf, best_s = 0.0;
  for (size_t k = k0; k + 1 < route.waypoints.size(); ++k) {
    const Vec2 a = route.waypoints[k], b = route.waypoints[k + 1];
    const double piece = route.cum[k + 1] - route.cum[k];
    double t = 0.0;
    double d = point_segment_dist(pos_j, a, b, &t);
    double s = route.cum[k] + t * piece;
    if (s < s0) {  // first piece may be clipped at the agent's position
      s = s0;
      const double tc = piece > 0.0 ? (s0 - route.cum[k]) / piece : 0.0;
      d = dist(pos_j, a + (b - a) * tc);
    }
    if (d < best_d - 1e-12) {
      best_d = d;
      best_s = s;
    }
  }
  if (best_d > lateral_tol) return std::nullopt;
  return best_s - s0;
}

namespace {

// Sub-polyline of a segment between arc lengths [a, b].
void append_piece(const Segment& seg, double a, double b, std::vector<Vec2>* out) {
  const auto point_at = [&seg](double s) {
    size_t k = std::upper_bound(seg.cum.begin(), seg.cum.end(), s) - seg.cum.begin();
    k = (k == 0) ? 0 : k - 1;
    if (k + 1 >= seg.pts.size()) k = seg.pts.size() - 2;
    const double len = seg.cum[k + 1] - seg.cum[k];
    const double t = len > 0.0 ? (s - seg.cum[k]) / len : 0.0;
    return seg.pts[k] + (seg.pts[k + 1] - seg.pts[k]) * t;
  };
  out->push_back(point_at(a));
  for (size_t k = 0; k < seg.pts.size(); ++k)
    if (seg.cum[k] > a + 1e-12 && seg.cum[k] < b - 1e-12) out->push_back(seg.pts[k]);
  if (b > a + 1e-12) out->push_back(point_at(b));
}

RoutePlan assemble_route(const std::vector<Vec2>& raw, std::vector<int> path) {
  // drop duplicate consecutive points, then resample at uniform spacing
  std::vector<Vec2> pts;
  for (const Vec2& p : raw)
    if (pts.empty() || dist(pts.back(), p) > 1e-12) pts.push_back(p);

  RoutePlan route;
  route.segment_ids = std::move(path);
  if (pts.size() <= 1) {
    route.waypoints = {pts.empty() ? Vec2{} : pts.front()};
    route.cum = {0.0};
    route.total_length = 0.0;
    return route;
  }

  std::vector<double> cum(pts.size(), 0.0);
  for (size_t k = 1; k < pts.size(); ++k) cum[k] = cum[k - 1] + dist(pts[k - 1], pts[k]);
  const double total = cum.back();
  const int n = std::max(1, static_cast<int>(std::ceil(total / map_defaults::kWaypointSpacing)));
  const double step = total / n;

  route.waypoints.reserve(n + 1);
  size_t k = 0;
  for (int i = 0; i <= n; ++i) {
    if (i == n) {
      route.waypoints.push_back(pts.back());
      break;
    }
    const double s = i * step;
    while (k + 1 < cum.size() && cum[k + 1] < s) ++k;
    const double len = cum[k + 1] - cum[k];
    const double t = len > 0.0 ? (s - cum[k]) / len : 0.0;
    route.waypoints.push_back(pts[k] + (pts[k + 1] - pts[k]) * t);
  }

  route.cum.resize(route.waypoints.size(), 0.0);
  for (size_t i = 1; i < route.waypoints.size(); ++i)
    route.cum[i] = route.cum[i - 1] + dist(route.waypoints[i - 1], route.waypoints[i]);
  route.total_length = route.cum.back();
  return route;
}

}  // namespace

RoutePlan shortest_route(const LaneGraph& g, Vec2 spawn, Vec2 goal) {
  const auto from = g.locate(spawn, map_defaults::kLateralTol);
  const auto to = g.locate(goal, map_defaults::kLateralTol);

  if (from.segment == to.segment && std::fabs(from.s - to.s) < 1e-12) {
    RoutePlan r;
    r.waypoints = {spawn};
    r.cum = {0.0};
    r.total_length = 0.0;
    r.segment_ids = {from.segment};
    return r;
  }

  const Segment& seg0 = g.segments[from.segment];
  const Segment& segG = g.segments[to.segment];

  double best_total = kInf;
  std::vector<int> best_path;

  // forward on the spawn segment itself
  if (from.segment == to.segment && to.s >= from.s) {
    best_total = to.s - from.s;
    best_path = {from.segment};
  }

  // Dijkstra over segments; dist = arc length from the spawn to a segment's
  // END, ties broken by lexicographically smallest id sequence.
  struct Best {
    double dist = kInf;
    std::vector<int> path;
  };
  std::vector<Best> best(g.segments.size());
  using Entry = std::tuple<double, std::vector<int>, int>;
  auto cmp = [](const Entry& a, const Entry& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::get<1>(a) > std::get<1>(b);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> pq(cmp);

  auto relax = [&](int seg, double nd, std::vector<int> npath) {
    Best& b = best[seg];
    const bool better = nd < b.dist - kTieEps ||
                        (nd < b.dist + kTieEps &&
                         std::lexicographical_compare(npath.begin(), npath.end(),
                                                      b.path.begin(), b.path.end()));
    if (!better) return;
    b.dist = nd;
    b.path = npath;
    pq.emplace(nd, std::move(npath), seg);
  };

  const double base = seg0.length() - from.s;
  for (int succ : seg0.next)
    relax(succ, base + g.segments[succ].length(), {from.segment, succ});

  while (!pq.empty()) {
    auto [d, path, seg] = pq.top();
    pq.pop();
    if (d > best[seg].dist + kTieEps || path != best[seg].path) continue;  // stale
    if (d > best_total + kTieEps) break;  // everything further can't win
    for (int succ : g.segments[seg].next) {
      std::vector<int> npath = path;
      npath.push_back(succ);
      relax(succ, d + g.segments[succ].length(), std::move(npath));
    }
  }

  const Best& bg = best[to.segment];
  if (bg.dist < kInf) {
    const double total = bg.dist - (segG.length() - to.s);
    const bool better = total < best_total - kTieEps ||
                        (total < best_total + kTieEps &&
                         std::lexicographical_compare(bg.path.begin(), bg.path.end(),
                                                      best_path.begin(), best_path.end()));
    if (better) {
      best_total = total;
      best_path = bg.path;
    }
  }

  if (best_path.empty()) throw NoRoute("no directed route between the given positions");

  std::vector<Vec2> raw;
  if (best_path.size() == 1) {
    append_piece(seg0, from.s, to.s, &raw);
  } else {
    append_piece(seg0, from.s, seg0.length(), &raw);
    for (size_t i = 1; i + 1 < best_path.size(); ++i) {
      const Segment& s = g.segments[best_path[i]];
      append_piece(s, 0.0, s.length(), &raw);
    }
    append_piece(segG, 0.0, to.s, &raw);
  }
  RoutePlan route = assemble_route(raw, best_path);
  // pin exact endpoints (resampling interpolates, spawn/goal must be exact)
  route.waypoints.front() = spawn;
  route.waypoints.back() = goal;
  return route;
}

std::vector<std::string> validate_map(const LaneGraph& g) {
  std::vector<std::string> problems;

  int census[3] = {0, 0, 0};
  for (const Junction& j : g.junctions) census[static_cast<int>(j.kind)]++;
  if (census[static_cast<int>(JunctionKind::TIntersection)] != 4 ||
      census[static_cast<int>(JunctionKind::Corner)] != 4 ||
      census[static_cast<int>(JunctionKind::Roundabout)] != 1)
    problems.push_back("junction census is not {t-intersection:4, corner:4, roundabout:1}");

  for (const Segment& s : g.segments) {
    if (s.pts.size() < 2 || s.length() <= 0.0)
      problems.push_back("segment " + std::to_string(s.id) + " has no length");
    for (size_t k = 1; k < s.pts.size(); ++k)
      if (dist(s.pts[k - 1], s.pts[k]) <= 0.0) {
        problems.push_back("segment " + std::to_string(s.id) + " has duplicate points");
        break;
      }
    if (s.direction.empty())
      problems.push_back("segment " + std::to_string(s.id) + " has no direction tag");
  }

  for (size_t ji = 0; ji < g.junctions.size(); ++ji) {
    bool has_in = false, has_out = false;
    for (const Segment& s : g.segments) {
      if (s.junction != static_cast<int>(ji)) continue;
      for (const Segment& t : g.segments) {
        if (t.junction == static_cast<int>(ji)) continue;
        if (std::find(t.next.begin(), t.next.end(), s.id) != t.next.end()) has_in = true;
        if (std::find(s.next.begin(), s.next.end(), t.id) != s.next.end()) has_out = true;
      }
    }
    if (!has_in || !has_out)
      problems.push_back("junction " + std::to_string(ji) + " lacks incoming or outgoing lanes");
  }

  // reach[s] = segments reachable from s's successors (transitively)
  const size_t n = g.segments.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (size_t s = 0; s < n; ++s) {
    std::vector<int> stack(g.segments[s].next.begin(), g.segments[s].next.end());
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      if (reach[s][v]) continue;
      reach[s][v] = true;
      for (int w : g.segments[v].next) stack.push_back(w);
    }
  }

  int unreachable = 0;
  for (const Vec2& spawn : g.spawns) {
    for (const Vec2& goal : g.goals) {
      const auto from = g.locate(spawn, map_defaults::kLateralTol);
      const auto to = g.locate(goal, map_defaults::kLateralTol);
      const bool ok = (from.segment == to.segment && to.s >= from.s - 1e-12) ||
                      reach[from.segment][to.segment];
      if (!ok) ++unreachable;
    }
  }
  if (unreachable > 0)
    problems.push_back(std::to_string(unreachable) + " spawn/goal pairs have no route");

  return problems;
}

void save_map(const LaneGraph& g, const std::string& path) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  auto vec = [](Vec2 v) { return nlohmann::ordered_json::array({v.x, v.y}); };
  j["nodes"] = nlohmann::ordered_json::array();
  for (const Vec2& n : g.nodes) j["nodes"].push_back(vec(n));
  j["junctions"] = nlohmann::ordered_json::array();
  for (const Junction& jc : g.junctions)
    j["junctions"].push_back({{"center", vec(jc.center)},
                              {"kind", to_string(jc.kind)},
                              {"half_size", jc.half_size}});
  j["segments"] = nlohmann::ordered_json::array();
  for (const Segment& s : g.segments) {
    nlohmann::ordered_json poly = nlohmann::ordered_json::array();
    for (const Vec2& p : s.pts) poly.push_back(vec(p));
    j["segments"].push_back({{"id", s.id},
                             {"polyline", std::move(poly)},
                             {"direction", s.direction},
                             {"junction", s.junction},
                             {"next", s.next}});
  }
  j["spawns"] = nlohmann::ordered_json::array();
  for (const Vec2& p : g.spawns) j["spawns"].push_back(vec(p));
  j["goals"] = nlohmann::ordered_json::array();
  for (const Vec2& p : g.goals) j["goals"].push_back(vec(p));

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write map file: " + path);
  out << j.dump(1) << "\n";
}

LaneGraph load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map file: " + path);
  nlohmann::json j;
  in >> j;
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
    throw std::runtime_error("unsupported map schema_version");

  LaneGraph g;
  auto vec = [](const nlohmann::json& a) { return Vec2{a[0].get<double>(), a[1].get<double>()}; };
  for (const auto& n : j["nodes"]) g.nodes.push_back(vec(n));
  for (const auto& jc : j["junctions"])
    g.junctions.push_back({vec(jc["center"]), junction_kind_from_string(jc["kind"]),
                           jc["half_size"].get<double>()});
  for (const auto& js : j["segments"]) {
    Segment s;
    s.id = js["id"].get<int>();
    for (const auto& p : js["polyline"]) s.pts.push_back(vec(p));
    s.direction = js["direction"].get<std::string>();
    s.junction = js["junction"].get<int>();
    s.next = js["next"].get<std::vector<int>>();
    s.cum.resize(s.pts.size(), 0.0);
    for (size_t k = 1; k < s.pts.size(); ++k)
      s.cum[k] = s.cum[k - 1] + dist(s.pts[k - 1], s.pts[k]);
    g.segments.push_back(std::move(s));
  }
  for (const auto& p : j["spawns"]) g.spawns.push_back(vec(p));
  for (const auto& p : j["goals"]) g.goals.push_back(vec(p));
  return g;
}

}  // namespace crossway
