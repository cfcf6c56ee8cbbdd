// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/interaction.hpp"

#include "wolf/error.hpp"
#include "wolf/prompts.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>

namespace wolf::interaction {

using geometry::LaneGraph;
using geometry::Pose;
using geometry::Relation;
using geometry::Trajectory;
using motion::ActionLabel;
using motion::ActionSegment;

std::string_view to_string(LaneMode mode) {
  switch (mode) {
    case LaneMode::kLeft: return "LEFT";
    case LaneMode::kRight: return "RIGHT";
    case LaneMode::kAhead: return "AHEAD";
    case LaneMode::kBehind: return "BEHIND";
    case LaneMode::kNoton: return "NOTON";
  }
  return "NOTON";
}

std::string_view to_string(Homotopy homotopy) {
  switch (homotopy) {
    case Homotopy::kStatic: return "S";
    case Homotopy::kClockwise: return "CW";
    case Homotopy::kCounterClockwise: return "CCW";
  }
  return "S";
}

std::string_view to_string(InteractionCategory category) {
  switch (category) {
    case InteractionCategory::kBypassCones: return "BYPASS-CONES";
    case InteractionCategory::kYieldPedestrian: return "YIELD-PEDESTRIAN";
    case InteractionCategory::kYieldIncoming: return "YIELD-INCOMING";
    case InteractionCategory::kOvertakeStraddle: return "OVERTAKE-STRADDLE";
    case InteractionCategory::kOvertakeLaneChange: return "OVERTAKE-LANE-CHANGE";
    case InteractionCategory::kOther: return "OTHER";
  }
  return "OTHER";
}

LaneMode lane_mode_at(const Pose& ego, const Pose& agent, const LaneGraph& graph, int max_hops,
                      double max_lateral) {
  const auto ego_lane = geometry::locate(ego, graph, max_lateral);
  const auto agent_lane = geometry::locate(agent, graph, max_lateral);
  if (!ego_lane || !agent_lane) return LaneMode::kNoton;

  const auto& e = ego_lane->lane_id;
  const auto& a = agent_lane->lane_id;
  if (e == a) {
    return agent_lane->projection.s >= ego_lane->projection.s ? LaneMode::kAhead : LaneMode::kBehind;
  }
  const bool forward = geometry::reachable(e, a, graph, max_hops);
  const bool backward = geometry::reachable(a, e, graph, max_hops);
  if (!forward && !backward) return LaneMode::kNoton;
  if (geometry::reachable_via(e, a, graph, Relation::kLeft, max_hops)) return LaneMode::kLeft;
  if (geometry::reachable_via(e, a, graph, Relation::kRight, max_hops)) return LaneMode::kRight;
  if (geometry::reachable_via(e, a, graph, Relation::kSuccessor, max_hops)) return LaneMode::kAhead;
  if (geometry::reachable_via(a, e, graph, Relation::kSuccessor, max_hops)) return LaneMode::kBehind;
  // Mixed paths, e.g. a neighbor's successor.
  return forward ? LaneMode::kAhead : LaneMode::kBehind;
}

Homotopy homotopy_from_winding(double winding, double threshold) {
  if (std::abs(winding) < threshold) return Homotopy::kStatic;
  return winding < 0 ? Homotopy::kClockwise : Homotopy::kCounterClockwise;
}

namespace {

double finest_spacing(const Trajectory& traj) {
  double finest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < traj.poses.size(); ++i) {
    finest = std::min(finest, traj.poses[i].t - traj.poses[i - 1].t);
  }
  return finest;
}

}  // namespace

std::vector<double> common_grid(const Trajectory& a, const Trajectory& b, double max_step) {
  if (a.poses.empty() || b.poses.empty()) return {};
  const double start = std::max(a.start_time(), b.start_time());
  const double end = std::min(a.end_time(), b.end_time());
  if (end < start) return {};
  if (end == start) return {start};
  const double step = std::min({max_step, finest_spacing(a), finest_spacing(b)});
  const auto n = static_cast<std::size_t>(std::ceil((end - start) / step - 1e-9));
  std::vector<double> grid(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    grid[k] = start + (end - start) * static_cast<double>(k) / static_cast<double>(n);
  }
  return grid;
}

HomotopyResult classify_homotopy(const Trajectory& ego, const Trajectory& agent,
                                 double winding_threshold, double max_step) {
  const auto grid = common_grid(ego, agent, max_step);
  if (grid.size() < 2) {
    throw Error(ErrorCode::kInsufficientData,
                fmt::format("agent '{}' does not overlap the ego trajectory in time", agent.agent_id));
  }
  Eigen::Matrix<double, Eigen::Dynamic, 2> relative(static_cast<Eigen::Index>(grid.size()), 2);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const geometry::Vec2 r = geometry::interpolate(agent, grid[k]).position() -
                             geometry::interpolate(ego, grid[k]).position();
    if (r.norm() < 0.01) {
      throw Error(ErrorCode::kCoincidentAgents,
                  fmt::format("agent '{}' coincides with ego at t={}", agent.agent_id, grid[k]));
    }
    relative.row(static_cast<Eigen::Index>(k)) = r.transpose();
  }
  const double winding = winding_angle(relative);
  return {homotopy_from_winding(winding, winding_threshold), winding};
}

std::vector<LaneMode> lane_mode_sequence(const Trajectory& ego, const Trajectory& agent,
                                         const LaneGraph& graph, std::span<const double> grid,
                                         const InteractionParams& params) {
  constexpr double kEps = 1e-9;
  std::vector<LaneMode> modes;
  modes.reserve(grid.size());
  for (double t : grid) {
    if (agent.poses.empty() || t < agent.start_time() - kEps || t > agent.end_time() + kEps) {
      modes.push_back(LaneMode::kNoton);
      continue;
    }
    modes.push_back(lane_mode_at(geometry::interpolate(ego, t), geometry::interpolate(agent, t), graph,
                                 params.max_hops, params.max_lateral));
  }
  return modes;
}

std::optional<Transit> find_transit(std::span<const double> grid, std::span<const LaneMode> modes) {
  enum class State { kWaitAhead, kAhead, kBeside };
  State state = State::kWaitAhead;
  Transit cur;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const LaneMode m = modes[k];
    const bool side = m == LaneMode::kLeft || m == LaneMode::kRight;
    switch (state) {
      case State::kWaitAhead:
        if (m == LaneMode::kAhead) {
          state = State::kAhead;
          cur.ahead_start = grid[k];
        }
        break;
      case State::kAhead:
        if (side) {
          state = State::kBeside;
          cur.side = m;
          cur.side_start = grid[k];
        } else if (m != LaneMode::kAhead) {
          state = State::kWaitAhead;
        }
        break;
      case State::kBeside:
        if (m == LaneMode::kBehind) {
          std::size_t last = k;
          while (last + 1 < modes.size() && modes[last + 1] == LaneMode::kBehind) ++last;
          cur.behind_start = grid[k];
          cur.behind_end = grid[last];
          return cur;
        }
        if (m == LaneMode::kAhead) {
          state = State::kAhead;
        } else if (side && m != cur.side) {
          cur.side = m;
          cur.side_start = grid[k];
        } else if (m == LaneMode::kNoton) {
          state = State::kWaitAhead;
        }
        break;
    }
  }
  return std::nullopt;
}

AgentTrack prepare_agent(const Trajectory& ego, const Trajectory& agent, const LaneGraph& graph,
                         const motion::MotionParams& motion_params, const InteractionParams& params) {
  AgentTrack track;
  track.traj = agent;
  if (agent.poses.size() >= 2) {
    track.annotation = motion::annotate_agent(agent, graph, motion_params);
  } else {
    track.annotation.agent_id = agent.agent_id;
    track.annotation.category = agent.category;
  }
  std::vector<double> grid;
  for (const auto& p : ego.poses) grid.push_back(p.t);
  track.lane_modes = lane_mode_sequence(ego, agent, graph, grid, params);
  try {
    track.homotopy = classify_homotopy(ego, agent, params.winding_threshold, params.max_grid_step);
  } catch (const Error& e) {
    track.homotopy = {Homotopy::kStatic, 0.0};
    track.homotopy_note = fmt::format("homotopy undefined ({}): {}", to_string(e.code()), e.what());
  }
  return track;
}

namespace {

bool category_has(const std::string& category, std::initializer_list<std::string_view> needles) {
  std::string lower = category;
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return std::any_of(needles.begin(), needles.end(),
                     [&](std::string_view n) { return lower.find(n) != std::string::npos; });
}

bool is_cone(const std::string& c) { return category_has(c, {"cone"}); }
bool is_pedestrian(const std::string& c) { return category_has(c, {"pedestrian", "person"}); }
bool is_vehicle(const std::string& c) {
  return category_has(c, {"vehicle", "car", "truck", "bus", "motorcycle", "trailer", "van", "bicycle"});
}

constexpr ActionLabel kSlowing[] = {ActionLabel::kDecelerate, ActionLabel::kStop};
constexpr ActionLabel kLaneChanges[] = {ActionLabel::kLeftLaneChange, ActionLabel::kRightLaneChange};

std::string describe_modes(std::span<const double> grid, std::span<const LaneMode> modes) {
  std::string out;
  for (std::size_t k = 0; k < modes.size();) {
    std::size_t last = k;
    while (last + 1 < modes.size() && modes[last + 1] == modes[k]) ++last;
    if (!out.empty()) out += " -> ";
    out += fmt::format("{}[{:.1f},{:.1f}]", to_string(modes[k]), grid[k], grid[last]);
    k = last + 1;
  }
  return out;
}

std::string describe(const ActionSegment& s) {
  return fmt::format("{}[{:.1f},{:.1f}]", motion::to_string(s.label), s.t_start, s.t_end);
}

// Seconds the ego spends more than half a lane away from its original lane
// (or that lane's direct successors/predecessors) inside [t0, t1].
double straddle_duration(const EgoTrack& ego, const LaneGraph& graph, const InteractionParams& params,
                         double t0, double t1) {
  const Pose start = geometry::interpolate(ego.traj, t0);
  const auto home = geometry::locate(start, graph, params.max_lateral);
  if (!home) return 0.0;
  std::vector<const geometry::Lane*> corridor{&graph.at(home->lane_id)};
  for (const auto& id : corridor.front()->successors) corridor.push_back(&graph.at(id));
  for (const auto& id : corridor.front()->predecessors) corridor.push_back(&graph.at(id));

  const auto cells = motion::pose_cells(ego.traj);
  double total = 0.0;
  for (std::size_t i = 0; i < ego.traj.poses.size(); ++i) {
    const Pose& p = ego.traj.poses[i];
    if (p.t < t0 || p.t > t1) continue;
    double offset = std::numeric_limits<double>::infinity();
    for (const auto* lane : corridor) {
      offset = std::min(offset, std::abs(geometry::project_frenet(p, *lane).d));
    }
    if (offset > params.half_lane_width) total += cells[i];
  }
  return total;
}

std::optional<std::pair<ActionSegment, ActionSegment>> lane_change_pair(
    std::span<const ActionSegment> lateral, const Transit& transit) {
  constexpr double kEps = 1e-9;
  std::vector<ActionSegment> changes;
  for (const auto& s : lateral) {
    if (motion::is_lane_change(s.label)) changes.push_back(s);
  }
  for (std::size_t i = 0; i < changes.size(); ++i) {
    for (std::size_t j = i + 1; j < changes.size(); ++j) {
      if (changes[j].label == changes[i].label) continue;
      if (changes[j].t_start < changes[i].t_end - kEps) continue;
      if (changes[i].t_start <= transit.behind_start && changes[j].t_end >= transit.side_start) {
        return std::make_pair(changes[i], changes[j]);
      }
    }
  }
  return std::nullopt;
}

InteractionRecord classify_agent(const EgoTrack& ego, const AgentTrack& agent, std::span<const double> grid,
                                 const LaneGraph& graph, const InteractionParams& params) {
  InteractionRecord record;
  record.agent_id = agent.traj.agent_id;
  record.lane_mode_sequence = agent.lane_modes;
  record.homotopy = agent.homotopy.homotopy;
  record.winding = agent.homotopy.winding;

  const auto& category = agent.traj.category;
  const auto& ego_lateral = ego.annotation.lateral;
  const auto& ego_longitudinal = ego.annotation.longitudinal;

  std::vector<std::string> trace;
  trace.push_back(fmt::format("category {}", category));
  trace.push_back("lane modes " + describe_modes(grid, agent.lane_modes));
  trace.push_back(fmt::format("homotopy {} (winding {:.3f} rad)", to_string(record.homotopy),
                              record.winding));
  if (!agent.homotopy_note.empty()) trace.push_back(agent.homotopy_note);

  const auto transit = find_transit(grid, agent.lane_modes);
  double straddle = 0.0;
  bool ego_changed_lane = false;
  if (transit) {
    record.transit_side = transit->side;
    trace.push_back(fmt::format("transit AHEAD@{:.1f} -> {}@{:.1f} -> BEHIND@{:.1f}; transit side {}",
                                transit->ahead_start, to_string(transit->side), transit->side_start,
                                transit->behind_start, to_string(transit->side)));
    straddle = straddle_duration(ego, graph, params, transit->ahead_start, transit->behind_end);
    ego_changed_lane =
        motion::overlaps(ego_lateral, kLaneChanges, transit->ahead_start, transit->behind_end);
  }

  auto finish = [&](InteractionCategory category_out, std::string rule) {
    record.category = category_out;
    trace.push_back(std::move(rule));
    record.evidence.clear();
    for (std::size_t i = 0; i < trace.size(); ++i) {
      if (i) record.evidence += "; ";
      record.evidence += trace[i];
    }
    return record;
  };

  // (a) cones passed while the ego changes lane or straddles.
  if (is_cone(category) && transit && (ego_changed_lane || straddle >= params.min_straddle)) {
    return finish(InteractionCategory::kBypassCones,
                  ego_changed_lane ? "rule a: cone transit during ego lane change"
                                   : fmt::format("rule a: cone transit while ego straddles for {:.1f}s", straddle));
  }

  // (b) pedestrian ahead while the ego slows.
  if (is_pedestrian(category)) {
    for (std::size_t k = 0; k < agent.lane_modes.size();) {
      std::size_t last = k;
      while (last + 1 < agent.lane_modes.size() && agent.lane_modes[last + 1] == agent.lane_modes[k]) ++last;
      if (agent.lane_modes[k] == LaneMode::kAhead &&
          motion::overlaps(ego_longitudinal, kSlowing, grid[k], grid[last])) {
        return finish(InteractionCategory::kYieldPedestrian,
                      fmt::format("rule b: pedestrian AHEAD over [{:.1f},{:.1f}] while ego slows", grid[k],
                                  grid[last]));
      }
      k = last + 1;
    }
  }

  // (c) oncoming vehicle closing in while the ego slows.
  if (is_vehicle(category) && agent.traj.poses.size() >= 2) {
    std::optional<double> first;
    std::optional<double> last;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double t = grid[k];
      if (t < agent.traj.start_time() || t > agent.traj.end_time()) continue;
      const Pose e = geometry::interpolate(ego.traj, t);
      const Pose a = geometry::interpolate(agent.traj, t);
      const bool opposite = std::abs(geometry::wrap_angle(a.heading - e.heading)) > params.opposite_heading;
      const geometry::Vec2 rel = a.position() - e.position();
      const geometry::Vec2 ego_dir(std::cos(e.heading), std::sin(e.heading));
      const bool in_front = rel.dot(ego_dir) > 0.0;
      // Range rate from relative velocity.
      const geometry::Vec2 ve = e.speed * ego_dir;
      const geometry::Vec2 va = a.speed * geometry::Vec2(std::cos(a.heading), std::sin(a.heading));
      const bool closing = rel.dot(va - ve) < 0.0;
      if (opposite && in_front && closing) {
        if (!first) first = t;
        last = t;
      }
    }
    if (first && motion::overlaps(ego_longitudinal, kSlowing, *first, *last)) {
      return finish(InteractionCategory::kYieldIncoming,
                    fmt::format("rule c: oncoming and closing over [{:.1f},{:.1f}] while ego slows", *first,
                                *last));
    }
  }

  // (d) overtaking by straddling, no lane change.
  if (transit && !ego_changed_lane && straddle >= params.min_straddle) {
    return finish(InteractionCategory::kOvertakeStraddle,
                  fmt::format("rule d: ego beyond half lane for {:.1f}s without changing lane", straddle));
  }

  // (e) overtaking with an out-and-back lane change pair.
  if (transit) {
    if (auto pair = lane_change_pair(ego_lateral, *transit)) {
      return finish(InteractionCategory::kOvertakeLaneChange,
                    fmt::format("rule e: ego {} then {}", describe(pair->first), describe(pair->second)));
    }
  }

  return finish(InteractionCategory::kOther, "rule f: no interaction rule fired");
}

}  // namespace

std::vector<InteractionRecord> detect_interactions(const EgoTrack& ego, std::span<const AgentTrack> agents,
                                                   const LaneGraph& graph, const SceneContext&,
                                                   const InteractionParams& params) {
  std::vector<double> grid;
  for (const auto& p : ego.traj.poses) grid.push_back(p.t);

  std::vector<InteractionRecord> records;
  records.reserve(agents.size());
  for (const auto& agent : agents) {
    if (agent.lane_modes.size() != grid.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("agent '{}': lane modes not on the ego timestep grid", agent.traj.agent_id));
    }
    records.push_back(classify_agent(ego, agent, grid, graph, params));
  }
  std::sort(records.begin(), records.end(),
            [](const InteractionRecord& a, const InteractionRecord& b) { return a.agent_id < b.agent_id; });
  return records;
}

namespace {

std::string_view phrase(ActionLabel label) {
  switch (label) {
    case ActionLabel::kStop: return "is stopped";
    case ActionLabel::kAccelerate: return "accelerates";
    case ActionLabel::kDecelerate: return "decelerates";
    case ActionLabel::kCruise: return "cruises";
    case ActionLabel::kReverse: return "reverses";
    case ActionLabel::kKeepLane: return "keeps its lane";
    case ActionLabel::kLeftLaneChange: return "changes to the left lane";
    case ActionLabel::kRightLaneChange: return "changes to the right lane";
    case ActionLabel::kLeftTurn: return "turns left";
    case ActionLabel::kRightTurn: return "turns right";
    case ActionLabel::kUTurn: return "makes a U-turn";
  }
  return "";
}

std::string join_phrases(std::span<const ActionSegment> segments) {
  std::string out;
  std::optional<ActionLabel> previous;
  for (const auto& s : segments) {
    if (previous == s.label) continue;
    if (!out.empty()) out += ", then ";
    out += phrase(s.label);
    previous = s.label;
  }
  return out;
}

std::string side_word(std::optional<LaneMode> side) {
  if (side == LaneMode::kRight) return "right";
  return "left";
}

}  // namespace

std::string render_description(const motion::AgentAnnotation& ego, std::span<const InteractionRecord> records,
                               const SceneContext& context) {
  std::string out = "The ego vehicle";
  const std::string longitudinal = join_phrases(ego.longitudinal);
  const std::string lateral = join_phrases(ego.lateral);
  if (!longitudinal.empty()) out += " " + longitudinal;
  if (!lateral.empty()) out += (longitudinal.empty() ? " " : " and ") + lateral;
  if (longitudinal.empty() && lateral.empty()) out += " is present";
  out += ".";

  for (const auto& r : records) {
    switch (r.category) {
      case InteractionCategory::kBypassCones:
        out += fmt::format(" The ego vehicle bypasses the traffic cone {} blocking its path, passing it "
                           "on the ego vehicle's {} side.",
                           r.agent_id, side_word(r.transit_side));
        break;
      case InteractionCategory::kYieldPedestrian:
        out += fmt::format(" The ego vehicle yields to the crossing pedestrian {}.", r.agent_id);
        break;
      case InteractionCategory::kYieldIncoming:
        out += fmt::format(" The ego vehicle yields to the incoming vehicle {}.", r.agent_id);
        break;
      case InteractionCategory::kOvertakeStraddle:
        out += fmt::format(" The ego vehicle overtakes {} by straddling the lane divider, passing it "
                           "on the ego vehicle's {} side.",
                           r.agent_id, side_word(r.transit_side));
        break;
      case InteractionCategory::kOvertakeLaneChange:
        out += fmt::format(" The ego vehicle overtakes {} via a lane change, passing it on the ego "
                           "vehicle's {} side.",
                           r.agent_id, side_word(r.transit_side));
        break;
      case InteractionCategory::kOther:
        break;
    }
  }

  if (context.near_intersection) out += " The scene takes place near an intersection.";
  if (!context.tags.empty()) {
    out += " Scene context: ";
    for (std::size_t i = 0; i < context.tags.size(); ++i) {
      if (i) out += ", ";
      out += context.tags[i];
    }
    out += ".";
  }
  return out;
}

Description aggregate_description(const motion::AgentAnnotation& ego, std::span<const InteractionRecord> records,
                                  const SceneContext& context, backends::Client* aggregator) {
  Description d;
  d.template_text = render_description(ego, records, context);
  d.text = d.template_text;
  if (aggregator == nullptr) return d;

  try {
    auto request = aggregator->make_request({std::string(prompts::kSceneRewrite), d.template_text});
    const auto response = aggregator->complete(std::move(request));
    d.text = response.text;
    d.source = aggregator->config().name;
    d.digest = response.digest;
  } catch (const Error& e) {
    d.fallback = true;
    d.warning = fmt::format("aggregator '{}' failed, using template: {}", aggregator->config().name, e.what());
  }
  return d;
}

nlohmann::json to_json(const InteractionRecord& record) {
  nlohmann::json modes = nlohmann::json::array();
  for (auto m : record.lane_mode_sequence) modes.push_back(to_string(m));
  nlohmann::json j = {{"agent_id", record.agent_id},
                      {"category", to_string(record.category)},
                      {"lane_mode_sequence", modes},
                      {"homotopy", to_string(record.homotopy)},
                      {"winding", record.winding},
                      {"evidence", record.evidence}};
  j["transit_side"] = record.transit_side ? nlohmann::json(to_string(*record.transit_side)) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const Description& d) {
  nlohmann::json j = {{"text", d.text}, {"template", d.template_text}, {"source", d.source},
                      {"digest", d.digest}, {"fallback", d.fallback}};
  if (!d.warning.empty()) j["warning"] = d.warning;
  return j;
}

}  // namespace wolf::interaction
