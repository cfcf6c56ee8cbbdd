// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/motion.hpp"

#include "wolf/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

namespace wolf::motion {

using geometry::LaneGraph;
using geometry::LaneId;
using geometry::Trajectory;

std::string_view to_string(ActionLabel label) {
  switch (label) {
    case ActionLabel::kStop: return "STOP";
    case ActionLabel::kAccelerate: return "ACCELERATE";
    case ActionLabel::kDecelerate: return "DECELERATE";
    case ActionLabel::kCruise: return "CRUISE";
    case ActionLabel::kReverse: return "REVERSE";
    case ActionLabel::kKeepLane: return "KEEP-LANE";
    case ActionLabel::kLeftLaneChange: return "LEFT-LANE-CHANGE";
    case ActionLabel::kRightLaneChange: return "RIGHT-LANE-CHANGE";
    case ActionLabel::kLeftTurn: return "LEFT-TURN";
    case ActionLabel::kRightTurn: return "RIGHT-TURN";
    case ActionLabel::kUTurn: return "U-TURN";
  }
  return "UNKNOWN";
}

std::optional<ActionLabel> label_from_string(std::string_view text) {
  for (ActionLabel label : kAllLabels) {
    if (to_string(label) == text) return label;
  }
  return std::nullopt;
}

bool is_longitudinal(ActionLabel label) {
  switch (label) {
    case ActionLabel::kStop:
    case ActionLabel::kAccelerate:
    case ActionLabel::kDecelerate:
    case ActionLabel::kCruise:
    case ActionLabel::kReverse:
      return true;
    default:
      return false;
  }
}

bool is_lateral(ActionLabel label) { return !is_longitudinal(label); }

bool is_lane_change(ActionLabel label) {
  return label == ActionLabel::kLeftLaneChange || label == ActionLabel::kRightLaneChange;
}

void MotionParams::validate() const {
  const double values[] = {stop_speed,       accel_threshold, decel_threshold,     turn_heading_delta,
                           uturn_heading_delta, smoothing_window, min_segment, yaw_rate_floor,
                           lateral_speed_floor, max_lateral};
  for (double v : values) {
    if (!(v > 0.0)) throw Error(ErrorCode::kInvalidArgument, "motion parameters must be positive");
  }
  if (!(uturn_heading_delta > turn_heading_delta)) {
    throw Error(ErrorCode::kInvalidArgument, "uturn_heading_delta must exceed turn_heading_delta");
  }
}

std::vector<double> smooth(std::span<const double> times, std::span<const double> values,
                           double window) {
  const std::size_t n = values.size();
  std::vector<double> out(n);
  const double half_window = window / 2;
  constexpr double kEps = 1e-9;
  for (std::size_t i = 0; i < n; ++i) {
    const double half =
        std::min({half_window, times[i] - times.front(), times.back() - times[i]});
    double sum = 0.0;
    int count = 0;
    for (std::size_t j = i; j-- > 0 && times[i] - times[j] <= half + kEps;) {
      sum += values[j];
      ++count;
    }
    for (std::size_t j = i; j < n && times[j] - times[i] <= half + kEps; ++j) {
      sum += values[j];
      ++count;
    }
    out[i] = sum / count;
  }
  return out;
}

std::vector<double> gradient(std::span<const double> times, std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    out[i] = (values[hi] - values[lo]) / (times[hi] - times[lo]);
  }
  return out;
}

std::vector<double> pose_cells(const Trajectory& traj) {
  const auto& p = traj.poses;
  const std::size_t n = p.size();
  std::vector<double> cells(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i == 0 ? p[i].t : (p[i - 1].t + p[i].t) / 2;
    const double hi = i + 1 == n ? p[i].t : (p[i].t + p[i + 1].t) / 2;
    cells[i] = hi - lo;
  }
  return cells;
}

namespace {

void require_motion_data(const Trajectory& traj) {
  if (traj.poses.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                fmt::format("agent '{}': need at least 2 poses, got {}", traj.agent_id,
                            traj.poses.size()));
  }
  geometry::validate_trajectory(traj);
}

std::vector<double> times_of(const Trajectory& traj) {
  std::vector<double> t;
  t.reserve(traj.poses.size());
  for (const auto& p : traj.poses) t.push_back(p.t);
  return t;
}

struct Run {
  ActionLabel label;
  std::size_t first;
  std::size_t last;
};

std::vector<Run> runs_of(std::span<const ActionLabel> labels) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!runs.empty() && runs.back().label == labels[i]) {
      runs.back().last = i;
    } else {
      runs.push_back({labels[i], i, i});
    }
  }
  return runs;
}

// Repeatedly folds the shortest run below `min_segment` into the neighbor
// chosen by `pick_left` until every run is long enough.
template <typename PickLeft>
void merge_short_runs(std::vector<ActionLabel>& labels, std::span<const double> cells,
                      double min_segment, PickLeft&& pick_left) {
  constexpr double kEps = 1e-9;
  for (;;) {
    auto runs = runs_of(labels);
    if (runs.size() <= 1) return;
    std::optional<std::size_t> shortest;
    double shortest_duration = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      double duration = 0.0;
      for (std::size_t i = runs[r].first; i <= runs[r].last; ++i) duration += cells[i];
      if (duration < min_segment - kEps && (!shortest || duration < shortest_duration)) {
        shortest = r;
        shortest_duration = duration;
      }
    }
    if (!shortest) return;
    const std::size_t r = *shortest;
    bool use_left;
    if (r == 0) {
      use_left = false;
    } else if (r + 1 == runs.size()) {
      use_left = true;
    } else {
      use_left = pick_left(runs[r - 1], runs[r], runs[r + 1]);
    }
    const ActionLabel target = use_left ? runs[r - 1].label : runs[r + 1].label;
    for (std::size_t i = runs[r].first; i <= runs[r].last; ++i) labels[i] = target;
  }
}

double run_duration(const Run& run, std::span<const double> cells) {
  double d = 0.0;
  for (std::size_t i = run.first; i <= run.last; ++i) d += cells[i];
  return d;
}

// +1 when `to` lies on the left of `from`, -1 on the right, 0 otherwise.
// Neighbor chains of `from` and of its successors are considered, so a lane
// change that coincides with a lane-segment boundary is still recognized.
int lateral_side(const LaneId& from, const LaneId& to, const LaneGraph& graph) {
  using geometry::Relation;
  auto side_from = [&](const LaneId& base) {
    if (geometry::reachable_via(base, to, graph, Relation::kLeft)) return 1;
    if (geometry::reachable_via(base, to, graph, Relation::kRight)) return -1;
    return 0;
  };
  if (int s = side_from(from); s != 0) return s;
  for (const auto& succ : graph.at(from).successors) {
    if (int s = side_from(succ); s != 0) return s;
  }
  return 0;
}

}  // namespace

std::vector<ActionLabel> longitudinal_labels(const Trajectory& traj, const MotionParams& params) {
  require_motion_data(traj);
  params.validate();

  const auto times = times_of(traj);
  std::vector<double> speed;
  for (const auto& p : traj.poses) speed.push_back(p.speed);

  const auto smoothed_speed = smooth(times, speed, params.smoothing_window);
  const auto accel = smooth(times, gradient(times, speed), params.smoothing_window);

  const std::size_t n = traj.poses.size();
  std::vector<ActionLabel> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (traj.poses[i].reversing) {
      labels[i] = ActionLabel::kReverse;
    } else if (accel[i] > params.accel_threshold) {
      labels[i] = ActionLabel::kAccelerate;
    } else if (accel[i] < -params.decel_threshold) {
      labels[i] = ActionLabel::kDecelerate;
    } else if (std::abs(smoothed_speed[i]) < params.stop_speed) {
      labels[i] = ActionLabel::kStop;
    } else {
      labels[i] = ActionLabel::kCruise;
    }
  }

  const auto cells = pose_cells(traj);
  auto mean_accel = [&](const Run& run) {
    double sum = 0.0;
    for (std::size_t i = run.first; i <= run.last; ++i) sum += accel[i];
    return sum / static_cast<double>(run.last - run.first + 1);
  };
  merge_short_runs(labels, cells, params.min_segment,
                   [&](const Run& left, const Run& self, const Run& right) {
                     const double m = mean_accel(self);
                     return std::abs(mean_accel(left) - m) <= std::abs(mean_accel(right) - m);
                   });
  return labels;
}

std::vector<ActionLabel> lateral_labels(const Trajectory& traj, const LaneGraph& graph,
                                        const MotionParams& params) {
  require_motion_data(traj);
  params.validate();

  const std::size_t n = traj.poses.size();
  const auto times = times_of(traj);
  const auto cells = pose_cells(traj);

  // Turning: runs of same-signed smoothed yaw rate.
  std::vector<double> unwrapped(n);
  unwrapped[0] = traj.poses[0].heading;
  for (std::size_t i = 1; i < n; ++i) {
    unwrapped[i] = unwrapped[i - 1] +
                   geometry::wrap_angle(traj.poses[i].heading - traj.poses[i - 1].heading);
  }
  const auto yaw_rate = smooth(times, gradient(times, unwrapped), params.smoothing_window);

  std::vector<ActionLabel> labels(n, ActionLabel::kKeepLane);
  std::vector<bool> turning(n, false);
  for (std::size_t i = 0; i < n;) {
    if (std::abs(yaw_rate[i]) <= params.yaw_rate_floor) {
      ++i;
      continue;
    }
    const bool positive = yaw_rate[i] > 0;
    std::size_t j = i;
    while (j + 1 < n && std::abs(yaw_rate[j + 1]) > params.yaw_rate_floor &&
           (yaw_rate[j + 1] > 0) == positive) {
      ++j;
    }
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = j + 1 == n ? j : j + 1;
    const double swept = unwrapped[hi] - unwrapped[lo];
    std::optional<ActionLabel> turn;
    if (std::abs(swept) > params.uturn_heading_delta) {
      turn = ActionLabel::kUTurn;
    } else if (swept > params.turn_heading_delta) {
      turn = ActionLabel::kLeftTurn;
    } else if (swept < -params.turn_heading_delta) {
      turn = ActionLabel::kRightTurn;
    }
    if (turn) {
      for (std::size_t k = i; k <= j; ++k) {
        labels[k] = *turn;
        turning[k] = true;
      }
    }
    i = j + 1;
  }

  // Lane changes: debounced lane-id transitions to a neighbor lane, widened
  // to the span of consistent lateral motion.
  std::vector<std::optional<geometry::LaneAssignment>> where(n);
  std::vector<double> lateral_speed(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    where[i] = geometry::locate(traj.poses[i], graph, params.max_lateral);
    if (where[i]) {
      const auto& p = traj.poses[i];
      lateral_speed[i] = p.speed * std::sin(p.heading - where[i]->projection.tangent_heading);
    }
  }
  lateral_speed = smooth(times, lateral_speed, params.smoothing_window);

  struct LaneRun {
    LaneId lane;
    std::size_t first;
    std::size_t last;
    std::size_t count;
  };
  std::vector<LaneRun> lane_runs;
  for (std::size_t i = 0; i < n; ++i) {
    if (!where[i]) continue;
    if (!lane_runs.empty() && lane_runs.back().lane == where[i]->lane_id) {
      lane_runs.back().last = i;
      ++lane_runs.back().count;
    } else {
      lane_runs.push_back({where[i]->lane_id, i, i, 1});
    }
  }
  // A single stray pose between two runs of the same lane is noise.
  for (std::size_t r = 1; r + 1 < lane_runs.size();) {
    if (lane_runs[r].count == 1 && lane_runs[r - 1].lane == lane_runs[r + 1].lane) {
      lane_runs[r - 1].last = lane_runs[r + 1].last;
      lane_runs[r - 1].count += 1 + lane_runs[r + 1].count;
      lane_runs.erase(lane_runs.begin() + static_cast<std::ptrdiff_t>(r),
                      lane_runs.begin() + static_cast<std::ptrdiff_t>(r) + 2);
    } else {
      ++r;
    }
  }

  for (std::size_t r = 1; r < lane_runs.size(); ++r) {
    const int side = lateral_side(lane_runs[r - 1].lane, lane_runs[r].lane, graph);
    if (side == 0) continue;
    auto consistent = [&](std::size_t k) {
      return std::abs(lateral_speed[k]) > params.lateral_speed_floor &&
             (lateral_speed[k] > 0) == (side > 0);
    };
    const std::size_t before = lane_runs[r - 1].last;
    const std::size_t after = lane_runs[r].first;
    if (!consistent(before) && !consistent(after)) continue;

    std::size_t lo = before;
    while (lo > 0 && consistent(lo - 1)) --lo;
    std::size_t hi = after;
    while (hi + 1 < n && consistent(hi + 1)) ++hi;

    bool hits_turn = false;
    for (std::size_t k = lo; k <= hi; ++k) hits_turn = hits_turn || turning[k];
    if (hits_turn) continue;

    const ActionLabel change = side > 0 ? ActionLabel::kLeftLaneChange : ActionLabel::kRightLaneChange;
    for (std::size_t k = lo; k <= hi; ++k) labels[k] = change;
  }

  merge_short_runs(labels, cells, params.min_segment,
                   [&](const Run& left, const Run&, const Run& right) {
                     return run_duration(left, cells) >= run_duration(right, cells);
                   });
  return labels;
}

std::vector<ActionSegment> segments_from_labels(const Trajectory& traj,
                                                std::span<const ActionLabel> labels) {
  const auto& p = traj.poses;
  std::vector<ActionSegment> segments;
  for (const Run& run : runs_of(labels)) {
    const double start = run.first == 0 ? p.front().t : (p[run.first - 1].t + p[run.first].t) / 2;
    const double end = run.last + 1 == p.size() ? p.back().t : (p[run.last].t + p[run.last + 1].t) / 2;
    segments.push_back({run.label, start, end});
  }
  return segments;
}

std::vector<ActionSegment> classify_longitudinal(const Trajectory& traj, const MotionParams& params) {
  const auto labels = longitudinal_labels(traj, params);
  return segments_from_labels(traj, labels);
}

std::vector<ActionSegment> classify_lateral(const Trajectory& traj, const LaneGraph& graph,
                                            const MotionParams& params) {
  const auto labels = lateral_labels(traj, graph, params);
  return segments_from_labels(traj, labels);
}

AgentAnnotation annotate_agent(const Trajectory& traj, const LaneGraph& graph,
                               const MotionParams& params) {
  return {traj.agent_id, traj.category, classify_longitudinal(traj, params),
          classify_lateral(traj, graph, params)};
}

bool overlaps(std::span<const ActionSegment> segments, std::span<const ActionLabel> labels,
              double t0, double t1) {
  for (const auto& seg : segments) {
    if (std::find(labels.begin(), labels.end(), seg.label) == labels.end()) continue;
    if (seg.t_start <= t1 && seg.t_end >= t0) return true;
  }
  return false;
}

nlohmann::json to_json(const ActionSegment& segment) {
  return {{"label", to_string(segment.label)}, {"t_start", segment.t_start}, {"t_end", segment.t_end}};
}

nlohmann::json to_json(std::span<const ActionSegment> segments) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : segments) out.push_back(to_json(s));
  return out;
}

nlohmann::json to_json(const AgentAnnotation& annotation) {
  return {{"agent_id", annotation.agent_id},
          {"category", annotation.category},
          {"longitudinal", to_json(std::span<const ActionSegment>(annotation.longitudinal))},
          {"lateral", to_json(std::span<const ActionSegment>(annotation.lateral))}};
}

}  // namespace wolf::motion
