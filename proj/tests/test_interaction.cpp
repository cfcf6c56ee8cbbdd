// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"
#include "scenarios.hpp"
#include "wolf/error.hpp"
#include "wolf/interaction.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

namespace {

using namespace wolf;
using namespace wolf::interaction;
using geometry::LaneGraph;
using geometry::Pose;
using geometry::Trajectory;
using motion::ActionLabel;
using wolf::testing::sample_trajectory;
using wolf::testing::straight_lane;
using wolf::testing::straight_road;

Pose at(double x, double y, double heading = 0.0) {
  Pose p;
  p.x = x;
  p.y = y;
  p.heading = heading;
  return p;
}

struct Annotated {
  EgoTrack ego;
  std::vector<AgentTrack> agents;
  std::vector<InteractionRecord> records;
};

Annotated annotate(const Scene& scene, const InteractionParams& params = {}) {
  Annotated out;
  const motion::MotionParams mp;
  out.ego = {scene.ego, motion::annotate_agent(scene.ego, scene.graph, mp)};
  for (const auto& agent : scene.agents) {
    out.agents.push_back(prepare_agent(scene.ego, agent, scene.graph, mp, params));
  }
  out.records = detect_interactions(out.ego, out.agents, scene.graph, scene.context, params);
  return out;
}

Trajectory static_agent(const std::string& id, const std::string& category, double x, double y, double t1 = 20.0) {
  return sample_trajectory(id, category, 0.0, t1, 0.5, [=](double) { return at(x, y); });
}

TEST(Enums, Cardinalities) {
  EXPECT_EQ(to_string(LaneMode::kNoton), "NOTON");
  EXPECT_EQ(to_string(Homotopy::kStatic), "S");
  EXPECT_EQ(to_string(Homotopy::kClockwise), "CW");
  EXPECT_EQ(to_string(Homotopy::kCounterClockwise), "CCW");
  EXPECT_EQ(to_string(InteractionCategory::kOvertakeLaneChange), "OVERTAKE-LANE-CHANGE");
  EXPECT_EQ(to_string(InteractionCategory::kBypassCones), "BYPASS-CONES");
}

TEST(LaneModeAt, SameLaneOrdersByArcLength) {
  const auto graph = straight_road(2, 0, 100);
  EXPECT_EQ(lane_mode_at(at(10, 0), at(30, 0), graph), LaneMode::kAhead);
  EXPECT_EQ(lane_mode_at(at(30, 0), at(10, 0), graph), LaneMode::kBehind);
}

TEST(LaneModeAt, Neighbors) {
  const auto graph = straight_road(3, 0, 100);
  EXPECT_EQ(lane_mode_at(at(10, -3.5), at(12, 0), graph), LaneMode::kLeft);
  EXPECT_EQ(lane_mode_at(at(10, -3.5), at(12, -7), graph), LaneMode::kRight);
  EXPECT_EQ(lane_mode_at(at(10, 0), at(12, -7), graph), LaneMode::kRight);
}

TEST(LaneModeAt, DisconnectedAndUnassigned) {
  LaneGraph graph = straight_road(1, 0, 100);
  graph.add(straight_lane("far", {0, 200}, {100, 200}));
  EXPECT_EQ(lane_mode_at(at(10, 0), at(10, 200), graph), LaneMode::kNoton);
  EXPECT_EQ(lane_mode_at(at(10, 0), at(10, 50), graph), LaneMode::kNoton);
  EXPECT_EQ(lane_mode_at(at(10, 50), at(10, 0), graph), LaneMode::kNoton);
}

TEST(LaneModeAt, SuccessorChains) {
  LaneGraph graph;
  auto a = straight_lane("a", {0, 0}, {50, 0});
  auto b = straight_lane("b", {50, 0}, {100, 0});
  a.successors = {"b"};
  b.predecessors = {"a"};
  graph.add(a);
  graph.add(b);
  EXPECT_EQ(lane_mode_at(at(10, 0), at(70, 0), graph), LaneMode::kAhead);
  EXPECT_EQ(lane_mode_at(at(70, 0), at(10, 0), graph), LaneMode::kBehind);
  EXPECT_EQ(lane_mode_at(at(10, 0), at(70, 0), graph, 0), LaneMode::kNoton);
}

TEST(LaneModeProperties, MatchesOracleAndNotonWhenUnreachable) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 150; ++trial) {
    const auto graph = wolf::testing::random_lane_graph(rng, 20);
    for (int k = 0; k < 10; ++k) {
      const Pose e = wolf::testing::random_pose_near(graph, rng);
      const Pose a = wolf::testing::random_pose_near(graph, rng);
      const auto mode = lane_mode_at(e, a, graph);
      EXPECT_EQ(mode, oracle::lane_mode(e, a, graph, geometry::kDefaultMaxHops, geometry::kDefaultMaxLateral));
      const auto le = geometry::assign_lane(e, graph);
      const auto la = geometry::assign_lane(a, graph);
      if (le && la && !geometry::reachable(*le, *la, graph) && !geometry::reachable(*la, *le, graph)) {
        EXPECT_EQ(mode, LaneMode::kNoton);
      }
    }
  }
}

TEST(HomotopyFromWinding, Thresholds) {
  EXPECT_EQ(homotopy_from_winding(0.0), Homotopy::kStatic);
  EXPECT_EQ(homotopy_from_winding(M_PI / 2 - 1e-6), Homotopy::kStatic);
  EXPECT_EQ(homotopy_from_winding(M_PI / 2), Homotopy::kCounterClockwise);
  EXPECT_EQ(homotopy_from_winding(-M_PI / 2), Homotopy::kClockwise);
  EXPECT_EQ(homotopy_from_winding(0.4, 0.3), Homotopy::kCounterClockwise);
}

TEST(ClassifyHomotopy, BothStaticIsStatic) {
  const auto ego = static_agent("ego", "vehicle", 0, 0, 5);
  const auto agent = static_agent("a", "vehicle", 10, 0, 5);
  const auto r = classify_homotopy(ego, agent);
  EXPECT_EQ(r.homotopy, Homotopy::kStatic);
  EXPECT_DOUBLE_EQ(r.winding, 0.0);
}

Trajectory semicircle(bool counter_clockwise, double dt = 0.5) {
  return sample_trajectory("a", "vehicle", 0.0, 10.0, dt, [=](double t) {
    const double theta = counter_clockwise ? M_PI * t / 10.0 : M_PI * (1 - t / 10.0);
    return at(10 * std::cos(theta), 10 * std::sin(theta));
  });
}

TEST(ClassifyHomotopy, CounterClockwiseSemicircle) {
  const auto ego = static_agent("ego", "vehicle", 0, 0, 10);
  const auto agent = semicircle(true);
  // Numeric integration of atan2 increments over the sampled path.
  double expected = 0.0;
  for (std::size_t i = 1; i < agent.poses.size(); ++i) {
    expected += std::remainder(std::atan2(agent.poses[i].y, agent.poses[i].x) -
                                   std::atan2(agent.poses[i - 1].y, agent.poses[i - 1].x),
                               2 * M_PI);
  }
  const auto r = classify_homotopy(ego, agent);
  EXPECT_NEAR(r.winding, expected, 1e-12);
  EXPECT_NEAR(r.winding, M_PI, 1e-9);
  EXPECT_EQ(r.homotopy, Homotopy::kCounterClockwise);
}

TEST(ClassifyHomotopy, ReversedSemicircleIsClockwise) {
  const auto r = classify_homotopy(static_agent("ego", "vehicle", 0, 0, 10), semicircle(false));
  EXPECT_NEAR(r.winding, -M_PI, 1e-9);
  EXPECT_EQ(r.homotopy, Homotopy::kClockwise);
}

TEST(ClassifyHomotopy, Errors) {
  const auto ego = static_agent("ego", "vehicle", 0, 0, 10);
  try {
    classify_homotopy(ego, static_agent("a", "vehicle", 0.001, 0, 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCoincidentAgents);
  }
  auto later = sample_trajectory("a", "vehicle", 50.0, 60.0, 0.5, [](double) { return at(5, 5); });
  try {
    classify_homotopy(ego, later);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(CommonGrid, OverlapWithBoundedStep) {
  const auto a = sample_trajectory("a", "v", 0.0, 10.0, 1.0, [](double) { return Pose{}; });
  const auto b = sample_trajectory("b", "v", 2.5, 14.0, 0.2, [](double) { return Pose{}; });
  const auto grid = common_grid(a, b);
  ASSERT_GE(grid.size(), 2u);
  EXPECT_DOUBLE_EQ(grid.front(), 2.5);
  EXPECT_DOUBLE_EQ(grid.back(), 10.0);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_LE(grid[i] - grid[i - 1], 0.2 + 1e-12);
}

Trajectory reversed_in_time(const Trajectory& traj) {
  Trajectory out = traj;
  const double t0 = traj.start_time(), t1 = traj.end_time();
  std::reverse(out.poses.begin(), out.poses.end());
  for (auto& p : out.poses) p.t = t0 + t1 - p.t;
  return out;
}

Trajectory rigid(const Trajectory& traj, double angle, double dx, double dy) {
  Trajectory out = traj;
  const double c = std::cos(angle), s = std::sin(angle);
  for (auto& p : out.poses) {
    const double x = p.x, y = p.y;
    p.x = c * x - s * y + dx;
    p.y = s * x + c * y + dy;
  }
  return out;
}

TEST(HomotopyProperties, TimeReversalNegatesWinding) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    auto pair = wolf::testing::random_homotopy_pair(rng);
    Trajectory ego_fixed = sample_trajectory("ego", "vehicle", pair.agent.start_time(), pair.agent.end_time(),
                                             pair.agent.end_time() - pair.agent.start_time(),
                                             [](double) { return at(-30, -30); });
    const auto fwd = classify_homotopy(ego_fixed, pair.agent);
    const auto back = classify_homotopy(ego_fixed, reversed_in_time(pair.agent));
    EXPECT_NEAR(back.winding, -fwd.winding, 1e-9);
    if (fwd.homotopy == Homotopy::kStatic) {
      EXPECT_EQ(back.homotopy, Homotopy::kStatic);
    }
    if (fwd.homotopy == Homotopy::kClockwise) {
      EXPECT_EQ(back.homotopy, Homotopy::kCounterClockwise);
    }
    if (fwd.homotopy == Homotopy::kCounterClockwise) {
      EXPECT_EQ(back.homotopy, Homotopy::kClockwise);
    }
  }
}

TEST(HomotopyProperties, InvariantUnderRigidMotion) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pair = wolf::testing::random_homotopy_pair(rng);
    const double angle = u(rng) / 30, dx = u(rng), dy = u(rng);
    const auto base = classify_homotopy(pair.ego, pair.agent);
    const auto moved = classify_homotopy(rigid(pair.ego, angle, dx, dy), rigid(pair.agent, angle, dx, dy));
    EXPECT_NEAR(base.winding, moved.winding, 1e-9);
    EXPECT_EQ(base.homotopy, moved.homotopy);
  }
}

TEST(HomotopyProperties, AgreesWithDenseOracleAwayFromThreshold) {
  std::mt19937_64 rng(47);
  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto pair = wolf::testing::random_homotopy_pair(rng);
    const auto r = classify_homotopy(pair.ego, pair.agent);
    const double dense = oracle::dense_winding(pair.ego, pair.agent, kMaxGridStep, 10);
    if (std::abs(std::abs(dense) - kDefaultWindingThreshold) <= 0.1) continue;
    ++compared;
    EXPECT_EQ(r.homotopy, homotopy_from_winding(dense));
  }
  EXPECT_GT(compared, 250);
}

TEST(FindTransit, AheadSideBehind) {
  using M = LaneMode;
  const std::vector<double> grid{0, 1, 2, 3, 4, 5, 6};
  const std::vector<M> modes{M::kNoton, M::kAhead, M::kAhead, M::kLeft, M::kBehind, M::kBehind, M::kNoton};
  const auto t = find_transit(grid, modes);
  ASSERT_TRUE(t.has_value());
  EXPECT_EQ(t->side, M::kLeft);
  EXPECT_DOUBLE_EQ(t->ahead_start, 1);
  EXPECT_DOUBLE_EQ(t->side_start, 3);
  EXPECT_DOUBLE_EQ(t->behind_start, 4);
  EXPECT_DOUBLE_EQ(t->behind_end, 5);
  const std::vector<M> no_side{M::kAhead, M::kAhead, M::kBehind, M::kBehind, M::kBehind, M::kBehind, M::kBehind};
  EXPECT_FALSE(find_transit(grid, no_side).has_value());
  const std::vector<M> broken{M::kAhead, M::kRight, M::kNoton, M::kBehind, M::kBehind, M::kBehind, M::kBehind};
  EXPECT_FALSE(find_transit(grid, broken).has_value());
}

TEST(Detect, EmptyAgentSet) {
  const Scene scene = wolf::testing::static_scene();
  EXPECT_TRUE(annotate(scene).records.empty());
}

TEST(Detect, OvertakeByLaneChange) {
  const auto result = annotate(wolf::testing::overtake_scene());
  ASSERT_EQ(result.records.size(), 1u);
  const auto& r = result.records[0];
  EXPECT_EQ(r.category, InteractionCategory::kOvertakeLaneChange);
  EXPECT_EQ(r.transit_side, LaneMode::kLeft);
  EXPECT_EQ(r.lane_mode_sequence.size(), result.ego.traj.poses.size());
  EXPECT_NE(r.evidence.find("AHEAD"), std::string::npos);
  EXPECT_NE(r.evidence.find("LEFT"), std::string::npos);
  EXPECT_NE(r.evidence.find("BEHIND"), std::string::npos);

  const auto text = render_description(result.ego.annotation, result.records, SceneContext{});
  EXPECT_NE(text.find("overtakes"), std::string::npos);
  EXPECT_NE(text.find("left"), std::string::npos);
}

TEST(Detect, ConeBypass) {
  Scene scene = wolf::testing::overtake_scene();
  scene.agents[0].agent_id = "cone_7";
  scene.agents[0].category = "movable_object.trafficcone";
  const auto result = annotate(scene);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].category, InteractionCategory::kBypassCones);
}

Scene pedestrian_scene() {
  Scene scene;
  scene.scene_id = "crosswalk";
  scene.graph = straight_road(2, -50, 200);
  scene.ego = sample_trajectory("ego", "vehicle", 0.0, 10.0, 0.5, [](double t) {
    const double tt = std::min(t, 5.0);
    Pose p = at(10 * tt - tt * tt, 0);
    p.speed = 10 - 2 * tt;
    return p;
  });
  scene.agents.push_back(sample_trajectory("walker", "human.pedestrian.adult", 0.0, 10.0, 0.5, [](double t) {
    Pose p = at(40, -6 + 1.5 * t, M_PI / 2);
    p.speed = 1.5;
    return p;
  }));
  return scene;
}

TEST(Detect, YieldPedestrianMatchesIndependentRuleOracle) {
  const Scene scene = pedestrian_scene();
  // Independent evaluation of the rule: the pedestrian is AHEAD at some
  // time the ego speed is falling or near zero.
  bool oracle_fires = false;
  const auto& ego = scene.ego.poses;
  for (std::size_t i = 1; i + 1 < ego.size(); ++i) {
    const double accel = (ego[i + 1].speed - ego[i - 1].speed) / (ego[i + 1].t - ego[i - 1].t);
    const bool yielding = accel < -0.5 || ego[i].speed < 0.5;
    const auto mode = oracle::lane_mode(ego[i], geometry::interpolate(scene.agents[0], ego[i].t), scene.graph,
                                        geometry::kDefaultMaxHops, geometry::kDefaultMaxLateral);
    oracle_fires = oracle_fires || (yielding && mode == LaneMode::kAhead);
  }
  ASSERT_TRUE(oracle_fires);
  const auto result = annotate(scene);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].category, InteractionCategory::kYieldPedestrian);
}

TEST(Detect, PedestrianWithoutEgoSlowdownIsOther) {
  Scene scene = pedestrian_scene();
  scene.ego = sample_trajectory("ego", "vehicle", 0.0, 10.0, 0.5, [](double t) {
    Pose p = at(-40 + 8 * t, 0);
    p.speed = 8;
    return p;
  });
  const auto result = annotate(scene);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].category, InteractionCategory::kOther);
}

TEST(Detect, YieldIncoming) {
  Scene scene;
  scene.scene_id = "two_way";
  scene.graph = straight_road(1, -50, 300);
  scene.graph.add(straight_lane("oncoming", {300, 3.5}, {-50, 3.5}));
  scene.ego = sample_trajectory("ego", "vehicle", 0.0, 8.0, 0.5, [](double t) {
    const double tt = std::min(t, 4.0);
    Pose p = at(8 * tt - tt * tt, 0);
    p.speed = 8 - 2 * tt;
    return p;
  });
  scene.agents.push_back(sample_trajectory("car_2", "vehicle.car", 0.0, 8.0, 0.5, [](double t) {
    Pose p = at(120 - 10 * t, 3.5, M_PI);
    p.speed = 10;
    return p;
  }));
  const auto result = annotate(scene);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].category, InteractionCategory::kYieldIncoming);
}

// Wide lanes so a half-lane offset does not change the assigned lane.
TEST(Detect, StraddleRuleFromLaneModes) {
  LaneGraph graph;
  auto l0 = straight_lane("L0", {-50, 0}, {300, 0});
  auto l1 = straight_lane("L1", {-50, -5}, {300, -5});
  l0.right = "L1";
  l1.left = "L0";
  graph.add(l0);
  graph.add(l1);
  const auto ego_traj = sample_trajectory("ego", "vehicle", 0.0, 12.0, 0.5, [](double t) {
    // Bulge of 1.9 m toward L0 between t = 3 and t = 9.
    const double w = (t > 3 && t < 9) ? std::sin(M_PI * (t - 3) / 6) : 0.0;
    Pose p = at(10 * t, -5 + 1.9 * std::min(1.0, 1.6 * w));
    p.speed = 10;
    return p;
  });
  const motion::MotionParams mp;
  EgoTrack ego{ego_traj, motion::annotate_agent(ego_traj, graph, mp)};
  ASSERT_EQ(ego.annotation.lateral.size(), 1u);
  ASSERT_EQ(ego.annotation.lateral[0].label, ActionLabel::kKeepLane);

  const auto cyclist = static_agent("bike", "vehicle.bicycle", 60, -6.5, 12.0);
  AgentTrack track;
  track.traj = cyclist;
  track.annotation = motion::annotate_agent(cyclist, graph, mp);
  for (const auto& p : ego_traj.poses) {
    track.lane_modes.push_back(p.t < 4.0 ? LaneMode::kAhead : p.t < 8.0 ? LaneMode::kRight : LaneMode::kBehind);
  }
  const std::array tracks{track};
  const auto records = detect_interactions(ego, tracks, graph, SceneContext{});
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].category, InteractionCategory::kOvertakeStraddle);
  EXPECT_EQ(records[0].transit_side, LaneMode::kRight);
  const auto text = render_description(ego.annotation, records, SceneContext{});
  EXPECT_NE(text.find("overtakes bike"), std::string::npos);
}

TEST(Detect, MismatchedLaneModeLengthIsRejected) {
  const auto result = annotate(wolf::testing::overtake_scene());
  auto agents = result.agents;
  agents[0].lane_modes.pop_back();
  EXPECT_THROW(detect_interactions(result.ego, agents, wolf::testing::overtake_scene().graph, SceneContext{}),
               Error);
}

TEST(DetectProperties, DeterministicAndOrderIndependent) {
  Scene scene = wolf::testing::overtake_scene();
  const auto ped = pedestrian_scene().agents[0];
  scene.agents.push_back(ped);
  scene.agents.push_back(static_agent("cone_1", "movable_object.trafficcone", 150, -3.5));
  scene.agents.push_back(static_agent("far_car", "vehicle.car", 150, 40));
  const auto a = annotate(scene);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    Scene shuffled = scene;
    std::shuffle(shuffled.agents.begin(), shuffled.agents.end(), rng);
    const auto b = annotate(shuffled);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      EXPECT_EQ(to_json(a.records[i]), to_json(b.records[i]));
    }
  }
}

TEST(Render, QuietSceneIsOneSentence) {
  motion::AgentAnnotation ego;
  ego.longitudinal = {{ActionLabel::kCruise, 0, 10}};
  ego.lateral = {{ActionLabel::kKeepLane, 0, 10}};
  const auto text = render_description(ego, {}, SceneContext{});
  EXPECT_EQ(text, "The ego vehicle cruises and keeps its lane.");
}

TEST(Render, ContextSentences) {
  motion::AgentAnnotation ego;
  ego.longitudinal = {{ActionLabel::kStop, 0, 10}};
  ego.lateral = {{ActionLabel::kKeepLane, 0, 10}};
  SceneContext ctx{true, {"rain", "night"}};
  const auto text = render_description(ego, {}, ctx);
  EXPECT_NE(text.find("near an intersection"), std::string::npos);
  EXPECT_NE(text.find("rain, night"), std::string::npos);
}

TEST(Aggregate, EchoReturnsTemplateAndFailureFallsBack) {
  const auto result = annotate(wolf::testing::overtake_scene());
  backends::BackendConfig config;
  config.name = "agg";
  backends::Client echo(config, std::make_shared<backends::EchoBackend>());
  const auto d = aggregate_description(result.ego.annotation, result.records, SceneContext{}, &echo);
  EXPECT_EQ(d.text, d.template_text);
  EXPECT_EQ(d.source, "agg");
  EXPECT_FALSE(d.fallback);

  config.max_retries = 0;
  backends::Client failing(config, std::make_shared<backends::ScriptedBackend>());
  const auto f = aggregate_description(result.ego.annotation, result.records, SceneContext{}, &failing);
  EXPECT_TRUE(f.fallback);
  EXPECT_EQ(f.text, f.template_text);
  EXPECT_FALSE(f.warning.empty());
  EXPECT_EQ(to_json(f)["fallback"], true);

  const auto plain = aggregate_description(result.ego.annotation, result.records, SceneContext{});
  EXPECT_EQ(plain.source, "template");
}

}  // namespace
