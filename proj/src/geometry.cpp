// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/geometry.hpp"

#include "wolf/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <deque>
#include <limits>
#include <set>

namespace wolf::geometry {

namespace {

constexpr double kTieTolerance = 1e-9;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

void validate_trajectory(const Trajectory& traj) {
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    const Pose& p = traj.poses[i];
    if (!std::isfinite(p.t) || !std::isfinite(p.x) || !std::isfinite(p.y) ||
        !std::isfinite(p.heading) || !std::isfinite(p.speed)) {
      throw Error(ErrorCode::kSchema,
                  fmt::format("agent '{}': non-finite value at pose {}", traj.agent_id, i));
    }
    if (p.heading <= -M_PI || p.heading > M_PI) {
      throw Error(ErrorCode::kSchema,
                  fmt::format("agent '{}': heading {} at pose {} outside (-pi, pi]",
                              traj.agent_id, p.heading, i));
    }
    if (p.speed < 0.0 && !p.reversing) {
      throw Error(ErrorCode::kSchema,
                  fmt::format("agent '{}': negative speed at pose {} without reversing flag",
                              traj.agent_id, i));
    }
    if (i > 0 && !(p.t > traj.poses[i - 1].t)) {
      throw Error(ErrorCode::kSchema,
                  fmt::format("agent '{}': timestamps not strictly increasing at pose {}",
                              traj.agent_id, i));
    }
  }
}

Pose interpolate(const Trajectory& traj, double t) {
  const auto& poses = traj.poses;
  if (poses.empty()) {
    throw Error(ErrorCode::kInsufficientData,
                fmt::format("agent '{}': empty trajectory", traj.agent_id));
  }
  if (t <= poses.front().t) return poses.front();
  if (t >= poses.back().t) return poses.back();

  auto upper = std::upper_bound(poses.begin(), poses.end(), t,
                                [](double value, const Pose& p) { return value < p.t; });
  const Pose& b = *upper;
  const Pose& a = *(upper - 1);
  const double w = (t - a.t) / (b.t - a.t);

  Pose out;
  out.t = t;
  out.x = a.x + w * (b.x - a.x);
  out.y = a.y + w * (b.y - a.y);
  out.speed = a.speed + w * (b.speed - a.speed);
  out.heading = wrap_angle(a.heading + w * wrap_angle(b.heading - a.heading));
  out.reversing = w < 0.5 ? a.reversing : b.reversing;
  return out;
}

double Lane::length() const {
  double total = 0.0;
  for (Eigen::Index i = 1; i < centerline.rows(); ++i) {
    total += (centerline.row(i) - centerline.row(i - 1)).norm();
  }
  return total;
}

LaneGraph::LaneGraph(std::vector<Lane> lanes) {
  for (auto& lane : lanes) add(std::move(lane));
}

void LaneGraph::add(Lane lane) {
  LaneId id = lane.id;
  if (!lanes_.emplace(id, std::move(lane)).second) {
    throw Error(ErrorCode::kSchema, fmt::format("duplicate lane id '{}'", id));
  }
}

const Lane& LaneGraph::at(const LaneId& id) const {
  auto it = lanes_.find(id);
  if (it == lanes_.end()) {
    throw Error(ErrorCode::kLookup, fmt::format("unknown lane id '{}'", id));
  }
  return it->second;
}

const Lane* LaneGraph::find(const LaneId& id) const {
  auto it = lanes_.find(id);
  return it == lanes_.end() ? nullptr : &it->second;
}

void LaneGraph::validate() const {
  auto require = [this](const LaneId& owner, const LaneId& ref) {
    if (!contains(ref)) {
      throw Error(ErrorCode::kSchema,
                  fmt::format("lane '{}' references unknown lane '{}'", owner, ref));
    }
  };

  for (const auto& [id, lane] : lanes_) {
    if (lane.centerline.rows() < 2) {
      throw Error(ErrorCode::kSchema, fmt::format("lane '{}' centerline has < 2 points", id));
    }
    for (const auto& s : lane.successors) require(id, s);
    for (const auto& p : lane.predecessors) require(id, p);

    if (lane.left) {
      require(id, *lane.left);
      if (*lane.left == id) {
        throw Error(ErrorCode::kSchema, fmt::format("lane '{}' is its own left neighbor", id));
      }
      const Lane& other = lanes_.at(*lane.left);
      if (other.right != id) {
        throw Error(ErrorCode::kSchema,
                    fmt::format("lane '{}' left neighbor '{}' does not name it as right neighbor",
                                id, *lane.left));
      }
    }
    if (lane.right) {
      require(id, *lane.right);
      if (*lane.right == id) {
        throw Error(ErrorCode::kSchema, fmt::format("lane '{}' is its own right neighbor", id));
      }
      const Lane& other = lanes_.at(*lane.right);
      if (other.left != id) {
        throw Error(ErrorCode::kSchema,
                    fmt::format("lane '{}' right neighbor '{}' does not name it as left neighbor",
                                id, *lane.right));
      }
    }
  }
}

Projection project_onto(const Vec2& point, const Polyline& line) {
  Projection best;
  double best_distance = std::numeric_limits<double>::infinity();
  double arc = 0.0;

  for (Eigen::Index i = 1; i < line.rows(); ++i) {
    const Vec2 a = line.row(i - 1).transpose();
    const Vec2 b = line.row(i).transpose();
    const Vec2 seg = b - a;
    const double len2 = seg.squaredNorm();
    if (len2 == 0.0) continue;
    const double len = std::sqrt(len2);

    const double u = std::clamp((point - a).dot(seg) / len2, 0.0, 1.0);
    const Vec2 q = a + u * seg;
    const Vec2 offset = point - q;
    const double distance = offset.norm();
    if (distance < best_distance) {
      best_distance = distance;
      best.s = arc + u * len;
      best.d = cross(seg, offset) >= 0.0 ? distance : -distance;
      best.tangent_heading = std::atan2(seg.y(), seg.x());
      best.closest = q;
    }
    arc += len;
  }

  if (!std::isfinite(best_distance)) {
    throw Error(ErrorCode::kInvalidLane, "degenerate polyline with zero length");
  }
  return best;
}

FrenetPoint project_frenet(const Pose& pose, const Lane& lane) {
  if (lane.centerline.rows() < 2) {
    throw Error(ErrorCode::kInvalidLane,
                fmt::format("lane '{}' centerline has < 2 points", lane.id));
  }
  Projection proj;
  try {
    proj = project_onto(pose.position(), lane.centerline);
  } catch (const Error&) {
    throw Error(ErrorCode::kInvalidLane, fmt::format("lane '{}' has zero-length centerline", lane.id));
  }
  return {lane.id, proj.s, proj.d};
}

std::optional<LaneAssignment> locate(const Pose& pose, const LaneGraph& graph, double max_lateral) {
  if (!(max_lateral > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max_lateral must be positive");
  }
  std::optional<LaneAssignment> best;
  for (const auto& [id, lane] : graph.lanes()) {
    Projection proj;
    try {
      proj = project_onto(pose.position(), lane.centerline);
    } catch (const Error&) {
      continue;
    }
    const double deviation = std::abs(wrap_angle(pose.heading - proj.tangent_heading));
    if (!best) {
      best = LaneAssignment{id, proj, deviation};
      continue;
    }
    const double diff = std::abs(proj.d) - std::abs(best->projection.d);
    // Map iteration order makes the lane id the final tie-break.
    if (diff < -kTieTolerance ||
        (std::abs(diff) <= kTieTolerance && deviation < best->heading_deviation - kTieTolerance)) {
      best = LaneAssignment{id, proj, deviation};
    }
  }
  if (best && std::abs(best->projection.d) > max_lateral) return std::nullopt;
  return best;
}

std::optional<LaneId> assign_lane(const Pose& pose, const LaneGraph& graph, double max_lateral) {
  auto found = locate(pose, graph, max_lateral);
  if (!found) return std::nullopt;
  return found->lane_id;
}

namespace {

template <typename Expand>
bool bounded_search(const LaneId& from, const LaneId& to, int max_hops, Expand&& expand) {
  if (from == to) return true;
  std::set<LaneId> seen{from};
  std::deque<std::pair<LaneId, int>> frontier{{from, 0}};
  while (!frontier.empty()) {
    auto [current, depth] = frontier.front();
    frontier.pop_front();
    if (depth == max_hops) continue;
    bool found = false;
    expand(current, [&](const LaneId& next) {
      if (next == to) found = true;
      if (seen.insert(next).second) frontier.emplace_back(next, depth + 1);
    });
    if (found) return true;
  }
  return false;
}

}  // namespace

bool reachable(const LaneId& from, const LaneId& to, const LaneGraph& graph, int max_hops) {
  graph.at(from);
  graph.at(to);
  return bounded_search(from, to, max_hops, [&](const LaneId& id, auto&& visit) {
    const Lane& lane = graph.at(id);
    for (const auto& s : lane.successors) visit(s);
    if (lane.left) visit(*lane.left);
    if (lane.right) visit(*lane.right);
  });
}

bool reachable_via(const LaneId& from, const LaneId& to, const LaneGraph& graph,
                   Relation relation, int max_hops) {
  graph.at(from);
  graph.at(to);
  if (from == to) return false;
  return bounded_search(from, to, max_hops, [&](const LaneId& id, auto&& visit) {
    const Lane& lane = graph.at(id);
    switch (relation) {
      case Relation::kLeft:
        if (lane.left) visit(*lane.left);
        break;
      case Relation::kRight:
        if (lane.right) visit(*lane.right);
        break;
      case Relation::kSuccessor:
        for (const auto& s : lane.successors) visit(s);
        break;
    }
  });
}

}  // namespace wolf::geometry
