#pragma once

// Continuous 2D navigation with a binary hidden parameter.
//
// Geometry (fixed for every instance):
//   box [-5, 5]^2, start at the origin, step length 1, goal = disk of radius 1
//   around (3.5, 3.5), step cap 50.
// The hidden flag z changes three things:
//   * action direction: z = 1 maps every action to its opposite direction
//   * barrier: z = 0 blocks northward travel across y = 1.5 for x in [-1.5, 5];
//              z = 1 blocks eastward travel across x = 1.5 for y in [-1.5, 5]
//   * wind: horizontal drift kappa * (y / 5)^2, pointing east for z = 0 and
//           west for z = 1, evaluated at the pre-move position
// Each step: move (blocked moves leave the agent in place), then wind (skipped
// if it would cross the barrier), then clamp to the box. Reward is -0.1 per
// step and +1000 on entering the goal, which ends the episode.

#include <array>

namespace sept::env::nav2d {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

inline constexpr double kHalfExtent = 5.0;
inline constexpr double kStepSize = 1.0;
inline constexpr Vec2 kStart{0.0, 0.0};
inline constexpr Vec2 kGoal{3.5, 3.5};
inline constexpr double kGoalRadius = 1.0;
inline constexpr double kWindStrength = 0.4;
inline constexpr double kStepReward = -0.1;
inline constexpr double kGoalReward = 1000.0;
inline constexpr int kMaxSteps = 50;
inline constexpr int kSwitchStep = 10;

enum Action : int { north = 0, east = 1, south = 2, west = 3 };

Segment barrier(int z);
Vec2 wind(Vec2 p, int z);
/// Unit displacement of `action` under flag z (before scaling by kStepSize).
Vec2 action_direction(int action, int z);
bool crosses(Vec2 from, Vec2 to, const Segment& s);
bool in_goal(Vec2 p);

struct MoveResult {
  Vec2 position;
  bool reached_goal;
};

MoveResult move(Vec2 p, int action, int z);

}  // namespace sept::env::nav2d
