// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"
#include "wolf/geometry.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace wolf::motion {

/// Per-interval agent action. Longitudinal and lateral labels live on two
/// independent channels.
enum class ActionLabel {
  kStop,
  kAccelerate,
  kDecelerate,
  kCruise,
  kReverse,
  kKeepLane,
  kLeftLaneChange,
  kRightLaneChange,
  kLeftTurn,
  kRightTurn,
  kUTurn,
};

inline constexpr std::array<ActionLabel, 11> kAllLabels = {
    ActionLabel::kStop,           ActionLabel::kAccelerate,      ActionLabel::kDecelerate,
    ActionLabel::kCruise,         ActionLabel::kReverse,         ActionLabel::kKeepLane,
    ActionLabel::kLeftLaneChange, ActionLabel::kRightLaneChange, ActionLabel::kLeftTurn,
    ActionLabel::kRightTurn,      ActionLabel::kUTurn,
};

std::string_view to_string(ActionLabel label);
std::optional<ActionLabel> label_from_string(std::string_view text);
bool is_longitudinal(ActionLabel label);
bool is_lateral(ActionLabel label);
bool is_lane_change(ActionLabel label);

struct ActionSegment {
  ActionLabel label;
  double t_start = 0.0;
  double t_end = 0.0;

  bool operator==(const ActionSegment&) const = default;
};

struct MotionParams {
  double stop_speed = 0.5;                   // m/s
  double accel_threshold = 0.5;              // m/s^2
  double decel_threshold = 0.5;              // m/s^2
  double turn_heading_delta = M_PI / 3;      // rad
  double uturn_heading_delta = 5 * M_PI / 6; // rad
  double smoothing_window = 1.0;             // s
  double min_segment = 0.5;                  // s
  // Smoothed yaw rate above which a pose counts as turning.
  double yaw_rate_floor = 0.05;              // rad/s
  // Lateral speed relative to the lane tangent that marks a lane-change
  // maneuver in progress.
  double lateral_speed_floor = 0.2;          // m/s
  double max_lateral = geometry::kDefaultMaxLateral;

  void validate() const;
};

/// Centered moving average; the window shrinks symmetrically near the ends
/// so linear signals pass through unchanged on uniform grids.
std::vector<double> smooth(std::span<const double> times, std::span<const double> values,
                           double window);

/// Central differences inside, one-sided at the ends.
std::vector<double> gradient(std::span<const double> times, std::span<const double> values);

/// Duration attributed to each pose: from the midpoint with the previous
/// pose to the midpoint with the next, clipped to the trajectory span.
std::vector<double> pose_cells(const geometry::Trajectory& traj);

/// Per-pose labels after short-segment merging.
std::vector<ActionLabel> longitudinal_labels(const geometry::Trajectory& traj,
                                             const MotionParams& params);
std::vector<ActionLabel> lateral_labels(const geometry::Trajectory& traj,
                                        const geometry::LaneGraph& graph,
                                        const MotionParams& params);

/// Runs of equal per-pose labels, each covering the union of its pose cells.
std::vector<ActionSegment> segments_from_labels(const geometry::Trajectory& traj,
                                                std::span<const ActionLabel> labels);

std::vector<ActionSegment> classify_longitudinal(const geometry::Trajectory& traj,
                                                 const MotionParams& params);
std::vector<ActionSegment> classify_lateral(const geometry::Trajectory& traj,
                                            const geometry::LaneGraph& graph,
                                            const MotionParams& params);

struct AgentAnnotation {
  std::string agent_id;
  std::string category;
  std::vector<ActionSegment> longitudinal;
  std::vector<ActionSegment> lateral;
};

AgentAnnotation annotate_agent(const geometry::Trajectory& traj, const geometry::LaneGraph& graph,
                               const MotionParams& params);

/// True when any segment carrying one of `labels` overlaps [t0, t1].
bool overlaps(std::span<const ActionSegment> segments, std::span<const ActionLabel> labels,
              double t0, double t1);

nlohmann::json to_json(const ActionSegment& segment);
nlohmann::json to_json(std::span<const ActionSegment> segments);
nlohmann::json to_json(const AgentAnnotation& annotation);

}  // namespace wolf::motion
