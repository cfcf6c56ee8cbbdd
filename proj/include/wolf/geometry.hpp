// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wolf::geometry {

using Vec2 = Eigen::Vector2d;

/// Ordered 2D points, one per row, in map-frame meters.
using Polyline = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

using LaneId = std::string;

inline constexpr double kDefaultMaxLateral = 2.0;
inline constexpr int kDefaultMaxHops = 8;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar angle) {
  constexpr Scalar kPi = Scalar(M_PI);
  constexpr Scalar kTwoPi = Scalar(2 * M_PI);
  angle = std::fmod(angle, kTwoPi);
  if (angle <= -kPi) angle += kTwoPi;
  if (angle > kPi) angle -= kTwoPi;
  return angle;
}

struct Pose {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  bool reversing = false;

  Vec2 position() const { return {x, y}; }
};

struct Trajectory {
  std::string agent_id;
  std::string category;
  std::vector<Pose> poses;

  double start_time() const { return poses.front().t; }
  double end_time() const { return poses.back().t; }
};

/// Throws kSchema when timestamps do not strictly increase or a heading is
/// outside (-pi, pi].
void validate_trajectory(const Trajectory& traj);

/// Linear interpolation of position and speed, shortest-arc interpolation of
/// heading. `t` is clamped to the trajectory span.
Pose interpolate(const Trajectory& traj, double t);

struct Lane {
  LaneId id;
  Polyline centerline;
  std::optional<LaneId> left;
  std::optional<LaneId> right;
  std::vector<LaneId> successors;
  std::vector<LaneId> predecessors;

  double length() const;
};

class LaneGraph {
 public:
  LaneGraph() = default;
  explicit LaneGraph(std::vector<Lane> lanes);

  void add(Lane lane);

  const Lane& at(const LaneId& id) const;
  const Lane* find(const LaneId& id) const;
  bool contains(const LaneId& id) const { return lanes_.count(id) != 0; }
  bool empty() const { return lanes_.empty(); }
  std::size_t size() const { return lanes_.size(); }
  const std::map<LaneId, Lane>& lanes() const { return lanes_; }

  /// Checks every referenced id resolves, neighbor relations are mutual and
  /// free of self-loops, and every centerline has at least two points.
  void validate() const;

 private:
  std::map<LaneId, Lane> lanes_;
};

struct FrenetPoint {
  LaneId lane_id;
  double s = 0.0;
  double d = 0.0;
};

/// Closest point of a polyline to a query point. `d` is the signed distance,
/// positive to the left of the local tangent, so |d| is the Euclidean
/// distance to the polyline.
struct Projection {
  double s = 0.0;
  double d = 0.0;
  double tangent_heading = 0.0;
  Vec2 closest = Vec2::Zero();
};

Projection project_onto(const Vec2& point, const Polyline& line);

FrenetPoint project_frenet(const Pose& pose, const Lane& lane);

struct LaneAssignment {
  LaneId lane_id;
  Projection projection;
  double heading_deviation = 0.0;
};

/// Lane with minimal |d|, ties (within 1e-9 m) broken by smaller heading
/// deviation from the lane tangent, then by lane id.
std::optional<LaneAssignment> locate(const Pose& pose, const LaneGraph& graph,
                                     double max_lateral = kDefaultMaxLateral);

std::optional<LaneId> assign_lane(const Pose& pose, const LaneGraph& graph,
                                  double max_lateral = kDefaultMaxLateral);

/// Successor and left/right neighbor edges, at most `max_hops` of them.
bool reachable(const LaneId& from, const LaneId& to, const LaneGraph& graph,
               int max_hops = kDefaultMaxHops);

/// True when `to` is reached from `from` by following a single relation
/// between 1 and `max_hops` times.
enum class Relation { kLeft, kRight, kSuccessor };
bool reachable_via(const LaneId& from, const LaneId& to, const LaneGraph& graph,
                   Relation relation, int max_hops = kDefaultMaxHops);

}  // namespace wolf::geometry
