#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace crossway {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double norm() const { return std::hypot(x, y); }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dist(Vec2 a, Vec2 b) { return (a - b).norm(); }

// Unit normals relative to a direction of travel.
inline Vec2 left_of(Vec2 v) { return {-v.y, v.x}; }
inline Vec2 right_of(Vec2 v) { return {v.y, -v.x}; }

struct Pose {
  Vec2 pos;
  double heading = 0.0;  // radians, CCW from +x
};

// Corners of an oriented length x width rectangle centered on the pose,
// length along the heading.
inline std::array<Vec2, 4> rect_corners(const Pose& p, double length, double width) {
  const double c = std::cos(p.heading), s = std::sin(p.heading);
  const Vec2 fwd{c, s}, side{-s, c};
  const Vec2 f = fwd * (length / 2.0), l = side * (width / 2.0);
  return {p.pos + f + l, p.pos + f - l, p.pos - f - l, p.pos - f + l};
}

// Strict overlap of two oriented rectangles (touching edges do not count),
// separating-axis test over both rectangles' axes.
inline bool rects_overlap(const Pose& a, const Pose& b, double length, double width) {
  const Vec2 d = b.pos - a.pos;
  const Vec2 ax[2] = {{std::cos(a.heading), std::sin(a.heading)},
                      {-std::sin(a.heading), std::cos(a.heading)}};
  const Vec2 bx[2] = {{std::cos(b.heading), std::sin(b.heading)},
                      {-std::sin(b.heading), std::cos(b.heading)}};
  const double ha = length / 2.0, hb = width / 2.0;
  const Vec2 axes[4] = {ax[0], ax[1], bx[0], bx[1]};
  for (const Vec2& u : axes) {
    const double ra = ha * std::fabs(dot(u, ax[0])) + hb * std::fabs(dot(u, ax[1]));
    const double rb = ha * std::fabs(dot(u, bx[0])) + hb * std::fabs(dot(u, bx[1]));
    if (std::fabs(dot(d, u)) >= ra + rb) return false;
  }
  return true;
}

// Distance from p to segment [a, b]; t_out gets the clamped parameter in [0, 1].
inline double point_segment_dist(Vec2 p, Vec2 a, Vec2 b, double* t_out = nullptr) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  if (t_out) *t_out = t;
  return dist(p, a + ab * t);
}

// Closest distance between segments [a0, a1] and [b0, b1]; zero when they
// properly cross.
inline double segment_segment_dist(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
  const Vec2 da = a1 - a0, db = b1 - b0;
  const double d1 = cross(db, a0 - b0);
  const double d2 = cross(db, a1 - b0);
  const double d3 = cross(da, b0 - a0);
  const double d4 = cross(da, b1 - a0);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return 0.0;
  }
  double best = point_segment_dist(a0, b0, b1);
  best = std::min(best, point_segment_dist(a1, b0, b1));
  best = std::min(best, point_segment_dist(b0, a0, a1));
  best = std::min(best, point_segment_dist(b1, a0, a1));
  return best;
}

}  // namespace crossway
