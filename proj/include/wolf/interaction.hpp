// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"
#include "wolf/backends.hpp"
#include "wolf/geometry.hpp"
#include "wolf/motion.hpp"
#include "wolf/scene.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wolf::interaction {

/// Topological relation of an agent's lane to the ego lane.
enum class LaneMode { kLeft, kRight, kAhead, kBehind, kNoton };

/// Winding class of the agent-minus-ego relative position.
enum class Homotopy { kStatic, kClockwise, kCounterClockwise };

enum class InteractionCategory {
  kBypassCones,
  kYieldPedestrian,
  kYieldIncoming,
  kOvertakeStraddle,
  kOvertakeLaneChange,
  kOther,
};

std::string_view to_string(LaneMode mode);
std::string_view to_string(Homotopy homotopy);
std::string_view to_string(InteractionCategory category);

inline constexpr double kDefaultWindingThreshold = M_PI / 2;
inline constexpr double kMaxGridStep = 0.5;

struct InteractionParams {
  double max_lateral = geometry::kDefaultMaxLateral;
  int max_hops = geometry::kDefaultMaxHops;
  double winding_threshold = kDefaultWindingThreshold;
  double max_grid_step = kMaxGridStep;
  // Ego offset from its original lane centerline beyond which it straddles
  // the divider.
  double half_lane_width = 1.75;
  // Shortest straddle that counts.
  double min_straddle = 0.5;
  // |heading difference| above which two vehicles drive in opposite directions.
  double opposite_heading = 3 * M_PI / 4;
};

LaneMode lane_mode_at(const geometry::Pose& ego, const geometry::Pose& agent,
                      const geometry::LaneGraph& graph, int max_hops = geometry::kDefaultMaxHops,
                      double max_lateral = geometry::kDefaultMaxLateral);

/// Sum of per-step angle increments of a sampled 2D vector path (one sample
/// per row), each increment wrapped to (-pi, pi].
template <typename Derived>
typename Derived::Scalar winding_angle(const Eigen::MatrixBase<Derived>& relative) {
  using Scalar = typename Derived::Scalar;
  Scalar total = 0;
  for (Eigen::Index i = 1; i < relative.rows(); ++i) {
    const Scalar a0 = std::atan2(relative(i - 1, 1), relative(i - 1, 0));
    const Scalar a1 = std::atan2(relative(i, 1), relative(i, 0));
    total += geometry::wrap_angle(a1 - a0);
  }
  return total;
}

Homotopy homotopy_from_winding(double winding, double threshold = kDefaultWindingThreshold);

/// Uniform timestamps covering the overlap of both trajectories with a step
/// no larger than `max_step` or the finest native spacing.
std::vector<double> common_grid(const geometry::Trajectory& a, const geometry::Trajectory& b,
                                double max_step = kMaxGridStep);

struct HomotopyResult {
  Homotopy homotopy = Homotopy::kStatic;
  double winding = 0.0;
};

/// Throws kCoincidentAgents when the agents come within 1 cm of each other,
/// kInsufficientData when the trajectories do not overlap in time.
HomotopyResult classify_homotopy(const geometry::Trajectory& ego, const geometry::Trajectory& agent,
                                 double winding_threshold = kDefaultWindingThreshold,
                                 double max_step = kMaxGridStep);

/// Lane modes of `agent` sampled at each grid time. Times outside the
/// agent's span map to NOTON.
std::vector<LaneMode> lane_mode_sequence(const geometry::Trajectory& ego,
                                         const geometry::Trajectory& agent,
                                         const geometry::LaneGraph& graph,
                                         std::span<const double> grid,
                                         const InteractionParams& params = {});

struct EgoTrack {
  geometry::Trajectory traj;
  motion::AgentAnnotation annotation;
};

struct AgentTrack {
  geometry::Trajectory traj;
  motion::AgentAnnotation annotation;
  std::vector<LaneMode> lane_modes;  // on the ego timestamps
  HomotopyResult homotopy;
  std::string homotopy_note;
};

struct InteractionRecord {
  std::string agent_id;
  InteractionCategory category = InteractionCategory::kOther;
  std::vector<LaneMode> lane_mode_sequence;
  Homotopy homotopy = Homotopy::kStatic;
  double winding = 0.0;
  std::optional<LaneMode> transit_side;
  std::string evidence;
};

/// An AHEAD -> (LEFT | RIGHT) -> BEHIND passage of an agent along the ego.
struct Transit {
  LaneMode side = LaneMode::kLeft;
  double ahead_start = 0.0;
  double side_start = 0.0;
  double behind_start = 0.0;
  double behind_end = 0.0;
};

std::optional<Transit> find_transit(std::span<const double> grid, std::span<const LaneMode> modes);

/// Builds the per-agent inputs (motion annotation, lane modes on the ego
/// timestamps, homotopy) for interaction detection.
AgentTrack prepare_agent(const geometry::Trajectory& ego, const geometry::Trajectory& agent,
                         const geometry::LaneGraph& graph, const motion::MotionParams& motion_params,
                         const InteractionParams& params = {});

/// One record per agent, sorted by agent id. Rules are tried in order:
/// cones, pedestrians, incoming vehicles, straddle overtakes, lane-change
/// overtakes, then OTHER.
std::vector<InteractionRecord> detect_interactions(const EgoTrack& ego,
                                                   std::span<const AgentTrack> agents,
                                                   const geometry::LaneGraph& graph,
                                                   const SceneContext& context,
                                                   const InteractionParams& params = {});

struct Description {
  std::string text;
  std::string template_text;
  std::string source = "template";
  std::string digest;
  bool fallback = false;
  std::string warning;
};

std::string render_description(const motion::AgentAnnotation& ego,
                               std::span<const InteractionRecord> records,
                               const SceneContext& context);

/// Renders the template and, with an aggregator, asks it to rewrite the text.
/// Backend failures fall back to the template with `fallback` set.
Description aggregate_description(const motion::AgentAnnotation& ego,
                                  std::span<const InteractionRecord> records,
                                  const SceneContext& context,
                                  backends::Client* aggregator = nullptr);

nlohmann::json to_json(const InteractionRecord& record);
nlohmann::json to_json(const Description& description);

}  // namespace wolf::interaction
