// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"
#include "wolf/geometry.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace wolf {

inline constexpr int kSceneSchemaVersion = 1;

struct SceneContext {
  bool near_intersection = false;
  std::vector<std::string> tags;
};

/// One driving scene: lane topology, the ego trajectory and every other
/// agent, with all poses reduced upstream to the 2D map frame.
struct Scene {
  std::string scene_id;
  geometry::LaneGraph graph;
  geometry::Trajectory ego;
  std::vector<geometry::Trajectory> agents;
  SceneContext context;
};

// Schema (schema_version 1):
//   lanes:  [{id, centerline: [[x, y], ...], left?, right?, successors?, predecessors?}]
//   ego:    {id, category?, poses: [{t, x, y, heading?, speed?, reversing?}]}
//   agents: [same shape as ego]
//   context?: {near_intersection?, tags?}
// Missing heading/speed are derived from consecutive positions.

geometry::LaneGraph lane_graph_from_json(const nlohmann::json& j);
nlohmann::json to_json(const geometry::LaneGraph& graph);

geometry::Trajectory trajectory_from_json(const nlohmann::json& j);
nlohmann::json to_json(const geometry::Trajectory& traj);

Scene scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scene& scene);

Scene load_scene(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace wolf
