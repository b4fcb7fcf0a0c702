#include <cassert>
#include <cmath>
#include <map>

#include "crossway/lane_graph.hpp"

namespace crossway {

namespace {

using namespace map_defaults;

constexpr double kPi = 3.14159265358979323846;

// compass order: E, N, W, S
const Vec2 kCompass[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
const char* kCompassName[4] = {"E", "N", "W", "S"};

int compass_index(Vec2 v) {
  for (int i = 0; i < 4; ++i)
    if (dist(v, kCompass[i]) < 1e-9) return i;
  return -1;
}

struct Builder {
  LaneGraph g;

  int add_segment(std::vector<Vec2> pts, std::string dir, int junction) {
    Segment s;
    s.id = static_cast<int>(g.segments.size());
    s.pts = std::move(pts);
    s.direction = std::move(dir);
    s.junction = junction;
    s.cum.resize(s.pts.size(), 0.0);
    for (size_t k = 1; k < s.pts.size(); ++k)
      s.cum[k] = s.cum[k - 1] + dist(s.pts[k - 1], s.pts[k]);
    assert(s.cum.back() > 0.0);
    g.segments.push_back(std::move(s));
    return g.segments.back().id;
  }
};

std::vector<Vec2> sample_arc(Vec2 center, double r, double a0, double a1, bool ccw,
                             double max_step) {
  double sweep = ccw ? a1 - a0 : a0 - a1;
  while (sweep < 0) sweep += 2 * kPi;
  while (sweep >= 2 * kPi) sweep -= 2 * kPi;
  const int n = std::max(2, static_cast<int>(std::ceil(r * sweep / max_step)));
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double a = ccw ? a0 + sweep * i / n : a0 - sweep * i / n;
    pts.push_back(center + Vec2{r * std::cos(a), r * std::sin(a)});
  }
  return pts;
}

std::vector<Vec2> sample_hermite(Vec2 p0, Vec2 t0, Vec2 p1, Vec2 t1, int n) {
  const double scale = dist(p0, p1);
  const Vec2 m0 = t0 * scale, m1 = t1 * scale;
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    pts.push_back(p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11);
  }
  return pts;
}

// Quarter-circle turn between an entry pose and an exit pose on the junction
// boundary; radius chosen so the arc spans the box exactly.
std::vector<Vec2> sample_turn(Vec2 entry, Vec2 v_in, Vec2 exit, Vec2 v_out) {
  const bool left = cross(v_in, v_out) > 0;
  const double r = left ? kLeftTurnRadius : kRightTurnRadius;
  const Vec2 center = entry + (left ? left_of(v_in) : right_of(v_in)) * r;
  assert(std::fabs(dist(center, exit) - r) < 1e-6);
  const double a0 = std::atan2(entry.y - center.y, entry.x - center.x);
  const double a1 = std::atan2(exit.y - center.y, exit.x - center.x);
  auto pts = sample_arc(center, r, a0, a1, left, 0.25);
  pts.front() = entry;
  pts.back() = exit;
  return pts;
}

}  // namespace

LaneGraph build_default_map() {
  Builder b;

  // 3x3 junction grid: corners at the grid corners, T-intersections at the
  // edge midpoints, roundabout in the middle.
  struct Cell {
    Vec2 center;
    JunctionKind kind;
  };
  std::vector<Cell> cells;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      JunctionKind kind;
      if (c == 1 && r == 1) kind = JunctionKind::Roundabout;
      else if (c == 1 || r == 1) kind = JunctionKind::TIntersection;
      else kind = JunctionKind::Corner;
      cells.push_back({{kBlockSpacing * c, kBlockSpacing * r}, kind});
    }
  }
  for (const Cell& c : cells) b.g.junctions.push_back({c.center, c.kind, kJunctionHalf});

  const auto cell_at = [&](int c, int r) -> int {
    if (c < 0 || c > 2 || r < 0 || r > 2) return -1;
    return r * 3 + c;
  };

  // Directed straight lanes between adjacent junction boxes, offset to the
  // right of the direction of travel (right-hand traffic).
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const int here = cell_at(c, r);
      const int pair_cells[2] = {cell_at(c + 1, r), cell_at(c, r + 1)};
      for (int neighbor : pair_cells) {
        if (neighbor < 0) continue;
        const Vec2 a = b.g.junctions[here].center;
        const Vec2 bb = b.g.junctions[neighbor].center;
        Vec2 d = bb - a;
        d = d * (1.0 / d.norm());
        for (int flip = 0; flip < 2; ++flip) {
          const Vec2 from = flip ? bb : a, to = flip ? a : bb;
          const Vec2 v = flip ? Vec2{-d.x, -d.y} : d;
          const Vec2 off = right_of(v) * kLaneOffset;
          b.add_segment({from + v * kJunctionHalf + off, to - v * kJunctionHalf + off},
                        kCompassName[compass_index(v)], -1);
        }
      }
    }
  }

  // Junction connectors.
  for (size_t ji = 0; ji < b.g.junctions.size(); ++ji) {
    const Junction& junc = b.g.junctions[ji];
    const int c = static_cast<int>(ji) % 3, r = static_cast<int>(ji) / 3;
    std::vector<int> sides;  // compass indices with a road on that side
    if (cell_at(c + 1, r) >= 0) sides.push_back(0);
    if (cell_at(c, r + 1) >= 0) sides.push_back(1);
    if (cell_at(c - 1, r) >= 0) sides.push_back(2);
    if (cell_at(c, r - 1) >= 0) sides.push_back(3);

    const auto entry_point = [&](int side) {
      const Vec2 v_in = kCompass[(side + 2) % 4];
      return junc.center + kCompass[side] * kJunctionHalf + right_of(v_in) * kLaneOffset;
    };
    const auto exit_point = [&](int side) {
      const Vec2 v_out = kCompass[side];
      return junc.center + kCompass[side] * kJunctionHalf + right_of(v_out) * kLaneOffset;
    };

    if (junc.kind != JunctionKind::Roundabout) {
      for (int sin : sides) {
        const Vec2 v_in = kCompass[(sin + 2) % 4];
        for (int sout : sides) {
          if (sout == sin) continue;  // no U-turns
          const Vec2 v_out = kCompass[sout];
          const std::string tag =
              std::string(kCompassName[(sin + 2) % 4]) + "->" + kCompassName[sout];
          if (compass_index(v_in) == sout) {
            b.add_segment({entry_point(sin), exit_point(sout)}, tag, static_cast<int>(ji));
          } else {
            b.add_segment(sample_turn(entry_point(sin), v_in, exit_point(sout), v_out), tag,
                          static_cast<int>(ji));
          }
        }
      }
      continue;
    }

    // Roundabout: CCW ring with one merge and one exit point per approach.
    const double entry_rad = kRingEntryDeg * kPi / 180.0;
    struct RingEvent {
      double angle;
      int side;
      bool is_entry;
    };
    std::vector<RingEvent> events;
    for (int side : sides) {
      const double bearing = side * kPi / 2.0;
      events.push_back({std::remainder(bearing + entry_rad, 2 * kPi), side, true});
      events.push_back({std::remainder(bearing - entry_rad, 2 * kPi), side, false});
    }
    for (RingEvent& e : events)
      if (e.angle < 0) e.angle += 2 * kPi;
    std::sort(events.begin(), events.end(),
              [](const RingEvent& a, const RingEvent& bb) { return a.angle < bb.angle; });

    const auto ring_point = [&](double a) {
      return junc.center + Vec2{kRingRadius * std::cos(a), kRingRadius * std::sin(a)};
    };
    const auto ring_tangent = [](double a) { return Vec2{-std::sin(a), std::cos(a)}; };

    // ring arcs between consecutive events
    for (size_t i = 0; i < events.size(); ++i) {
      const double a0 = events[i].angle;
      const double a1 = events[(i + 1) % events.size()].angle;
      auto pts = sample_arc(junc.center, kRingRadius, a0, a1, true, 0.25);
      pts.front() = ring_point(a0);
      pts.back() = ring_point(a1);
      b.add_segment(std::move(pts), "ring", static_cast<int>(ji));
    }
    // entry and exit curves
    for (const RingEvent& e : events) {
      if (e.is_entry) {
        const Vec2 v_in = kCompass[(e.side + 2) % 4];
        auto pts = sample_hermite(entry_point(e.side), v_in, ring_point(e.angle),
                                  ring_tangent(e.angle), 40);
        pts.back() = ring_point(e.angle);
        b.add_segment(std::move(pts),
                      std::string(kCompassName[(e.side + 2) % 4]) + "->ring",
                      static_cast<int>(ji));
      } else {
        const Vec2 v_out = kCompass[e.side];
        auto pts = sample_hermite(ring_point(e.angle), ring_tangent(e.angle),
                                  exit_point(e.side), v_out, 40);
        pts.front() = ring_point(e.angle);
        b.add_segment(std::move(pts), std::string("ring->") + kCompassName[e.side],
                      static_cast<int>(ji));
      }
    }
  }

  // adjacency by endpoint matching
  for (Segment& s : b.g.segments) {
    for (const Segment& t : b.g.segments) {
      if (t.id == s.id) continue;
      if (dist(s.end(), t.start()) < 1e-6) s.next.push_back(t.id);
    }
  }

  // deduplicated endpoint nodes
  for (const Segment& s : b.g.segments) {
    for (const Vec2 p : {s.start(), s.end()}) {
      bool seen = false;
      for (const Vec2& n : b.g.nodes)
        if (dist(n, p) < 1e-6) {
          seen = true;
          break;
        }
      if (!seen) b.g.nodes.push_back(p);
    }
  }

  // published spawn/goal anchors: three per straight lane
  for (const Segment& s : b.g.segments) {
    if (s.junction >= 0) continue;
    const Vec2 d = (s.end() - s.start()) * (1.0 / s.length());
    for (double arc : {8.0, 16.0, 24.0}) {
      b.g.spawns.push_back(s.start() + d * arc);
      b.g.goals.push_back(s.start() + d * arc);
    }
  }

  return b.g;
}

}  // namespace crossway
