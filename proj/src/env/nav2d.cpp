#include "sept/env/nav2d.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sept::env::nav2d {

namespace {

double cross(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool on_segment(Vec2 p, const Segment& s) {
  return std::min(s.a.x, s.b.x) <= p.x && p.x <= std::max(s.a.x, s.b.x) && std::min(s.a.y, s.b.y) <= p.y &&
         p.y <= std::max(s.a.y, s.b.y);
}

Vec2 clamp_box(Vec2 p) {
  return {std::clamp(p.x, -kHalfExtent, kHalfExtent), std::clamp(p.y, -kHalfExtent, kHalfExtent)};
}

}  // namespace

Segment barrier(int z) {
  if (z == 0) return {{-1.5, 1.5}, {kHalfExtent, 1.5}};
  return {{1.5, -1.5}, {1.5, kHalfExtent}};
}

Vec2 wind(Vec2 p, int z) {
  const double r = p.y / kHalfExtent;
  const double mag = kWindStrength * r * r;
  return {z == 0 ? mag : -mag, 0.0};
}

Vec2 action_direction(int action, int z) {
  Vec2 d;
  switch (action) {
    case north: d = {0.0, 1.0}; break;
    case east: d = {1.0, 0.0}; break;
    case south: d = {0.0, -1.0}; break;
    case west: d = {-1.0, 0.0}; break;
    default: throw std::invalid_argument("nav2d: invalid action " + std::to_string(action));
  }
  if (z == 1) d = {-d.x, -d.y};
  return d;
}

// Closed-segment intersection; landing on the barrier counts as crossing it,
// so an agent can never rest on one.
bool crosses(Vec2 from, Vec2 to, const Segment& s) {
  const double d1 = cross(s.a, s.b, from);
  const double d2 = cross(s.a, s.b, to);
  const double d3 = cross(from, to, s.a);
  const double d4 = cross(from, to, s.b);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d2 == 0 && on_segment(to, s)) return true;
  if (d3 == 0 && on_segment(s.a, {from, to})) return true;
  if (d4 == 0 && on_segment(s.b, {from, to})) return true;
  return false;
}

bool in_goal(Vec2 p) { return std::hypot(p.x - kGoal.x, p.y - kGoal.y) <= kGoalRadius; }

MoveResult move(Vec2 p, int action, int z) {
  const Segment wall = barrier(z);
  const Vec2 dir = action_direction(action, z);
  Vec2 q = clamp_box({p.x + kStepSize * dir.x, p.y + kStepSize * dir.y});
  if (crosses(p, q, wall)) q = p;
  const Vec2 w = wind(p, z);
  if (w.x != 0.0 || w.y != 0.0) {
    const Vec2 blown = clamp_box({q.x + w.x, q.y + w.y});
    if (!crosses(q, blown, wall)) q = blown;
  }
  return {q, in_goal(q)};
}

}  // namespace sept::env::nav2d
