// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/scene.hpp"

#include "wolf/error.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace wolf {

using geometry::Lane;
using geometry::LaneGraph;
using geometry::Pose;
using geometry::Trajectory;
using nlohmann::json;

namespace {

template <typename T>
T get_field(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: missing field '{}'", where, key));
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, fmt::format("{}: field '{}': {}", where, key, e.what()));
  }
}

std::optional<std::string> optional_id(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

std::vector<std::string> id_list(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  return j.at(key).get<std::vector<std::string>>();
}

void check_version(const json& j) {
  const int version = j.value("schema_version", -1);
  if (version != kSceneSchemaVersion) {
    throw Error(ErrorCode::kSchema,
                fmt::format("unsupported schema_version {} (expected {})", version,
                            kSceneSchemaVersion));
  }
}

}  // namespace

LaneGraph lane_graph_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kSchema, "lanes must be an array");
  LaneGraph graph;
  for (const auto& item : j) {
    Lane lane;
    lane.id = get_field<std::string>(item, "id", "lane");
    const auto points = get_field<std::vector<std::vector<double>>>(item, "centerline", "lane");
    lane.centerline.resize(static_cast<Eigen::Index>(points.size()), 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != 2) {
        throw Error(ErrorCode::kSchema,
                    fmt::format("lane '{}': centerline point {} is not [x, y]", lane.id, i));
      }
      lane.centerline(static_cast<Eigen::Index>(i), 0) = points[i][0];
      lane.centerline(static_cast<Eigen::Index>(i), 1) = points[i][1];
    }
    try {
      lane.left = optional_id(item, "left");
      lane.right = optional_id(item, "right");
      lane.successors = id_list(item, "successors");
      lane.predecessors = id_list(item, "predecessors");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchema, fmt::format("lane '{}': {}", lane.id, e.what()));
    }
    graph.add(std::move(lane));
  }
  graph.validate();
  return graph;
}

json to_json(const LaneGraph& graph) {
  json lanes = json::array();
  for (const auto& [id, lane] : graph.lanes()) {
    json points = json::array();
    for (Eigen::Index i = 0; i < lane.centerline.rows(); ++i) {
      points.push_back({lane.centerline(i, 0), lane.centerline(i, 1)});
    }
    json item = {{"id", id},
                 {"centerline", points},
                 {"successors", lane.successors},
                 {"predecessors", lane.predecessors}};
    item["left"] = lane.left ? json(*lane.left) : json(nullptr);
    item["right"] = lane.right ? json(*lane.right) : json(nullptr);
    lanes.push_back(std::move(item));
  }
  return lanes;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory traj;
  traj.agent_id = get_field<std::string>(j, "id", "agent");
  traj.category = j.value("category", std::string("vehicle"));
  const json& poses = j.contains("poses") ? j.at("poses") : json();
  if (!poses.is_array()) {
    throw Error(ErrorCode::kSchema, fmt::format("agent '{}': poses must be an array", traj.agent_id));
  }

  const std::string where = fmt::format("agent '{}' pose", traj.agent_id);
  std::vector<bool> has_heading;
  std::vector<bool> has_speed;
  for (const auto& item : poses) {
    Pose p;
    p.t = get_field<double>(item, "t", where.c_str());
    p.x = get_field<double>(item, "x", where.c_str());
    p.y = get_field<double>(item, "y", where.c_str());
    has_heading.push_back(item.contains("heading"));
    has_speed.push_back(item.contains("speed"));
    if (has_heading.back()) p.heading = geometry::wrap_angle(item.at("heading").get<double>());
    if (has_speed.back()) p.speed = item.at("speed").get<double>();
    p.reversing = item.value("reversing", false);
    traj.poses.push_back(p);
  }

  // Derive missing kinematics from neighboring positions.
  const std::size_t n = traj.poses.size();
  for (std::size_t i = 0; i < n && n >= 2; ++i) {
    if (has_heading[i] && has_speed[i]) continue;
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    const Pose& a = traj.poses[lo];
    const Pose& b = traj.poses[hi];
    const geometry::Vec2 delta = b.position() - a.position();
    if (!has_heading[i] && delta.norm() > 0.0) {
      traj.poses[i].heading = std::atan2(delta.y(), delta.x());
      if (traj.poses[i].reversing) traj.poses[i].heading = geometry::wrap_angle(traj.poses[i].heading + M_PI);
    }
    if (!has_speed[i] && b.t > a.t) traj.poses[i].speed = delta.norm() / (b.t - a.t);
  }

  geometry::validate_trajectory(traj);
  return traj;
}

json to_json(const Trajectory& traj) {
  json poses = json::array();
  for (const Pose& p : traj.poses) {
    json item = {{"t", p.t}, {"x", p.x}, {"y", p.y}, {"heading", p.heading}, {"speed", p.speed}};
    if (p.reversing) item["reversing"] = true;
    poses.push_back(std::move(item));
  }
  return {{"id", traj.agent_id}, {"category", traj.category}, {"poses", poses}};
}

Scene scene_from_json(const json& j) {
  check_version(j);
  Scene scene;
  scene.scene_id = j.value("scene_id", std::string("scene"));
  scene.graph = lane_graph_from_json(j.contains("lanes") ? j.at("lanes") : json::array());
  scene.ego = trajectory_from_json(get_field<json>(j, "ego", "scene"));
  if (j.contains("agents")) {
    for (const auto& a : j.at("agents")) scene.agents.push_back(trajectory_from_json(a));
  }
  if (j.contains("context")) {
    const json& c = j.at("context");
    scene.context.near_intersection = c.value("near_intersection", false);
    scene.context.tags = c.value("tags", std::vector<std::string>{});
  }
  return scene;
}

json to_json(const Scene& scene) {
  json agents = json::array();
  for (const auto& a : scene.agents) agents.push_back(to_json(a));
  return {{"schema_version", kSceneSchemaVersion},
          {"scene_id", scene.scene_id},
          {"lanes", to_json(scene.graph)},
          {"ego", to_json(scene.ego)},
          {"agents", agents},
          {"context",
           {{"near_intersection", scene.context.near_intersection}, {"tags", scene.context.tags}}}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, fmt::format("'{}': {}", path.string(), e.what()));
  }
}

Scene load_scene(const std::filesystem::path& path) {
  try {
    return scene_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, fmt::format("'{}': {}", path.string(), e.what()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

}  // namespace wolf
