// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/harness.hpp"

#include "wolf/error.hpp"
#include "wolf/hash.hpp"
#include "wolf/prompts.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>

namespace wolf::harness {

namespace fs = std::filesystem;
using backends::BackendConfig;
using backends::Client;
using nlohmann::json;

std::vector<std::size_t> uniform_sample(std::size_t total_frames, std::size_t k) {
  if (total_frames == 0 || k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "uniform_sample needs at least one frame and one sample");
  }
  std::vector<std::size_t> out;
  if (k >= total_frames) {
    for (std::size_t i = 0; i < total_frames; ++i) out.push_back(i);
    return out;
  }
  for (std::size_t i = 0; i < k; ++i) out.push_back((2 * i + 1) * total_frames / (2 * k));
  return out;
}

std::string_view to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::kWolf: return "wolf";
    case MethodKind::kMiddleFrame: return "middle_frame";
    case MethodKind::kUniformFrames: return "uniform_frames";
    case MethodKind::kWholeVideo: return "whole_video";
  }
  return "wolf";
}

MethodKind method_kind_from_string(std::string_view text) {
  for (auto k : {MethodKind::kWolf, MethodKind::kMiddleFrame, MethodKind::kUniformFrames, MethodKind::kWholeVideo}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown method kind '{}'", text));
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) { return p.empty() || p.is_absolute() ? p : base / p; }

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::kSchema, fmt::format("{}: unknown key '{}'", where, key));
    }
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base) {
  RunConfig c;
  try {
    check_keys(j,
               {"manifest", "backends", "output_dir", "scenes", "pipeline", "image_backend", "summarizer_backend",
                "video_backends", "motion_rewriter", "methods", "judge", "motion", "interaction",
                "aggregator_backend", "window", "seed", "run", "workers", "force"},
               "run config");
    if (j.contains("manifest")) c.manifest = resolve(j["manifest"].get<std::string>(), base);
    if (j.contains("backends")) c.backends = resolve(j["backends"].get<std::string>(), base);
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>(), base);
    for (const auto& s : j.value("scenes", json::array())) c.scenes.push_back(resolve(s.get<std::string>(), base));

    if (j.contains("pipeline")) {
      const auto& p = j["pipeline"];
      check_keys(p, {"target_fps", "min_frames", "motion_epsilon", "include_annotated"}, "pipeline");
      c.pipeline.target_fps = p.value("target_fps", c.pipeline.target_fps);
      c.pipeline.min_frames = p.value("min_frames", c.pipeline.min_frames);
      c.pipeline.motion_epsilon = p.value("motion_epsilon", c.pipeline.motion_epsilon);
      c.pipeline.include_annotated = p.value("include_annotated", c.pipeline.include_annotated);
    }
    c.image_backend = j.value("image_backend", c.image_backend);
    c.summarizer_backend = j.value("summarizer_backend", c.summarizer_backend);
    c.video_backends = j.value("video_backends", c.video_backends);
    c.motion_rewriter = j.value("motion_rewriter", c.motion_rewriter);

    for (const auto& m : j.value("methods", json::array())) {
      check_keys(m, {"name", "kind", "backend", "frames"}, "method");
      MethodSpec spec;
      spec.name = m.at("name").get<std::string>();
      spec.kind = method_kind_from_string(m.value("kind", "wolf"));
      spec.backend = m.value("backend", "");
      spec.frames = m.value("frames", spec.frames);
      c.methods.push_back(std::move(spec));
    }
    if (j.contains("judge")) {
      const auto& jd = j["judge"];
      check_keys(jd, {"backend", "runs", "scale", "max_parse_retries", "stability_threshold"}, "judge");
      c.judge_backend = jd.value("backend", c.judge_backend);
      c.judge_runs = jd.value("runs", c.judge_runs);
      c.judge_scale = jd.value("scale", c.judge_scale);
      c.max_parse_retries = jd.value("max_parse_retries", c.max_parse_retries);
      c.stability_threshold = jd.value("stability_threshold", c.stability_threshold);
    }
    if (j.contains("motion")) {
      const auto& m = j["motion"];
      check_keys(m,
                 {"stop_speed", "accel_threshold", "decel_threshold", "turn_heading_delta", "uturn_heading_delta",
                  "smoothing_window", "min_segment", "yaw_rate_floor", "lateral_speed_floor", "max_lateral"},
                 "motion");
      auto& p = c.motion;
      p.stop_speed = m.value("stop_speed", p.stop_speed);
      p.accel_threshold = m.value("accel_threshold", p.accel_threshold);
      p.decel_threshold = m.value("decel_threshold", p.decel_threshold);
      p.turn_heading_delta = m.value("turn_heading_delta", p.turn_heading_delta);
      p.uturn_heading_delta = m.value("uturn_heading_delta", p.uturn_heading_delta);
      p.smoothing_window = m.value("smoothing_window", p.smoothing_window);
      p.min_segment = m.value("min_segment", p.min_segment);
      p.yaw_rate_floor = m.value("yaw_rate_floor", p.yaw_rate_floor);
      p.lateral_speed_floor = m.value("lateral_speed_floor", p.lateral_speed_floor);
      p.max_lateral = m.value("max_lateral", p.max_lateral);
    }
    if (j.contains("interaction")) {
      const auto& m = j["interaction"];
      check_keys(m,
                 {"max_lateral", "max_hops", "winding_threshold", "max_grid_step", "half_lane_width", "min_straddle",
                  "opposite_heading"},
                 "interaction");
      auto& p = c.interaction;
      p.max_lateral = m.value("max_lateral", p.max_lateral);
      p.max_hops = m.value("max_hops", p.max_hops);
      p.winding_threshold = m.value("winding_threshold", p.winding_threshold);
      p.max_grid_step = m.value("max_grid_step", p.max_grid_step);
      p.half_lane_width = m.value("half_lane_width", p.half_lane_width);
      p.min_straddle = m.value("min_straddle", p.min_straddle);
      p.opposite_heading = m.value("opposite_heading", p.opposite_heading);
    }
    c.aggregator_backend = j.value("aggregator_backend", c.aggregator_backend);
    c.window = j.value("window", c.window);
    c.seed = j.value("seed", c.seed);
    c.run = j.value("run", c.run);
    c.workers = j.value("workers", c.workers);
    c.force = j.value("force", c.force);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, fmt::format("run config: {}", e.what()));
  }
  if (c.workers < 1) throw Error(ErrorCode::kInvalidArgument, "workers must be at least 1");
  c.motion.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(read_json_file(path), path.parent_path());
}

std::vector<BackendConfig> load_backend_configs(const fs::path& path) {
  const json j = read_json_file(path);
  const json& list = j.is_array() ? j : j.at("backends");
  std::vector<BackendConfig> out;
  std::set<std::string> names;
  for (const auto& item : list) {
    auto config = backends::backend_config_from_json(item);
    config.transcript = resolve(config.transcript, path.parent_path());
    if (!names.insert(config.name).second) {
      throw Error(ErrorCode::kSchema, fmt::format("backend '{}' defined twice", config.name));
    }
    out.push_back(std::move(config));
  }
  return out;
}

std::shared_ptr<backends::Backend> make_backend(const BackendConfig& config) {
  if (config.provider == "openai") return std::make_shared<backends::HttpBackend>(config);
  if (config.provider != "mock") {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("backend '{}': unknown provider '{}'", config.name, config.provider));
  }
  if (config.mode == "echo") return std::make_shared<backends::EchoBackend>();
  if (config.mode == "digest") return std::make_shared<backends::DigestBackend>();
  if (config.mode == "judge") return std::make_shared<capscore::LexicalJudgeBackend>();
  if (config.mode == "scripted") {
    if (config.transcript.empty()) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("backend '{}': scripted mode needs a transcript", config.name));
    }
    return backends::ScriptedBackend::from_exchange_log(config.transcript);
  }
  throw Error(ErrorCode::kInvalidArgument, fmt::format("backend '{}': unknown mock mode '{}'", config.name, config.mode));
}

BackendRegistry::BackendRegistry(std::vector<BackendConfig> configs, std::shared_ptr<backends::ExchangeLog> log,
                                 std::uint64_t seed) {
  std::uint64_t i = 0;
  for (auto& config : configs) {
    config.validate();
    auto backend = make_backend(config);
    const std::string name = config.name;
    clients_.emplace(name, std::make_unique<Client>(std::move(config), std::move(backend), log, seed + i++));
  }
}

Client& BackendRegistry::client(const std::string& name) {
  auto* c = optional(name);
  if (c == nullptr) throw Error(ErrorCode::kLookup, fmt::format("no backend named '{}'", name));
  return *c;
}

Client* BackendRegistry::optional(const std::string& name) {
  auto it = clients_.find(name);
  return it == clients_.end() ? nullptr : it->second.get();
}

std::string record_key(const json& record) {
  std::string key = record.at("video_id").get<std::string>();
  key += fmt::format("\x1f{}", record.value("run", 0));
  for (const auto& m : record.at("methods")) key += "\x1f" + m.get<std::string>();
  return key;
}

ResultsStore::ResultsStore(fs::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records_.push_back(json::parse(line));
  }
}

bool ResultsStore::contains(const json& record) const {
  const auto key = record_key(record);
  return std::any_of(records_.begin(), records_.end(), [&](const json& r) { return record_key(r) == key; });
}

bool ResultsStore::put(json record, bool replace) {
  const auto key = record_key(record);
  auto it = std::find_if(records_.begin(), records_.end(), [&](const json& r) { return record_key(r) == key; });
  if (it != records_.end()) {
    if (!replace) return false;
    *it = std::move(record);
    rewrite();
    return true;
  }
  if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  out << record.dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot append to {}", path_.string()));
  records_.push_back(std::move(record));
  return true;
}

void ResultsStore::rewrite() const {
  std::string text;
  for (const auto& r : records_) text += r.dump() + "\n";
  write_text_file(path_, text);
}

namespace {

std::uint64_t stable_seed(std::uint64_t seed, const std::string& video_id) {
  return seed ^ std::stoull(sha256_hex(video_id).substr(0, 16), nullptr, 16);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; results keep index order.
template <typename Fn>
auto parallel_map(std::size_t n, int workers, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out;
  out.reserve(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
    return out;
  }
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(workers)) {
    std::vector<std::future<R>> batch;
    for (std::size_t i = start; i < std::min(n, start + static_cast<std::size_t>(workers)); ++i) {
      batch.push_back(std::async(std::launch::async, fn, i));
    }
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

pipeline::PipelineBackends pipeline_backends(const RunConfig& config, BackendRegistry& registry) {
  pipeline::PipelineBackends b;
  b.image = registry.optional(config.image_backend);
  b.summarizer = registry.optional(config.summarizer_backend);
  for (const auto& name : config.video_backends) b.video.push_back(&registry.client(name));
  if (!config.motion_rewriter.empty()) b.motion_rewriter = &registry.client(config.motion_rewriter);
  return b;
}

}  // namespace

std::string method_caption(const MethodSpec& method, const pipeline::ManifestEntry& entry, const RunConfig& config,
                           BackendRegistry& registry) {
  if (method.kind == MethodKind::kWolf) {
    const auto bundle = pipeline::caption_video(entry, config.pipeline, pipeline_backends(config, registry));
    if (!bundle.ok()) {
      throw Error(ErrorCode::kPipeline, fmt::format("{} stage failed: {}", bundle.failed_stage, bundle.error));
    }
    return bundle.final_caption;
  }

  Client& client = registry.client(method.backend);
  std::vector<backends::Attachment> attachments;
  if (method.kind == MethodKind::kWholeVideo) {
    if (!entry.video) {
      throw Error(ErrorCode::kPrecondition, fmt::format("video '{}' has no video file", entry.video_id));
    }
    attachments.push_back({backends::Attachment::Kind::kVideo,
                           entry.video_id + "/" + entry.video->filename().string(), *entry.video});
  } else {
    const auto frames = pipeline::list_frames(entry.frames_dir);
    if (frames.empty()) throw Error(ErrorCode::kInvalidVideo, fmt::format("video '{}' has no frames", entry.video_id));
    const std::size_t k = method.kind == MethodKind::kMiddleFrame ? 1 : method.frames;
    attachments = pipeline::frame_attachments(entry, frames, uniform_sample(frames.size(), k));
  }
  return client.complete(client.make_request({std::string(prompts::kComparison)}, std::move(attachments))).text;
}

RunSummary run_benchmark(const RunConfig& config, BackendRegistry& registry) {
  if (config.methods.empty()) throw Error(ErrorCode::kInvalidArgument, "benchmark needs at least one method");
  Client& judge = registry.client(config.judge_backend);
  const auto entries = pipeline::load_manifest(config.manifest);
  ResultsStore store(config.output_dir / "results.jsonl");

  json method_names = json::array();
  for (const auto& m : config.methods) method_names.push_back(m.name);

  struct Outcome {
    std::optional<json> record;
    std::string message;
    bool failed = false;
  };

  auto score = [&](std::size_t i) -> Outcome {
    const auto& entry = entries[i];
    if (!entry.ground_truth) return {std::nullopt, fmt::format("{}: skipped, no ground truth", entry.video_id)};
    const json key = {{"video_id", entry.video_id}, {"run", config.run}, {"methods", method_names}};
    if (!config.force && store.contains(key)) {
      return {std::nullopt, fmt::format("{}: skipped, already scored", entry.video_id)};
    }
    try {
      capscore::JudgeJob job{*entry.ground_truth, {}, config.judge_scale, config.judge_runs};
      json captions = json::object();
      for (const auto& m : config.methods) {
        job.candidates.push_back({m.name, method_caption(m, entry, config, registry)});
        captions[m.name] = job.candidates.back().caption;
      }
      capscore::EvaluateParams params;
      params.seed = stable_seed(config.seed, entry.video_id);
      params.max_parse_retries = config.max_parse_retries;
      params.stability_threshold = config.stability_threshold;
      const auto result = capscore::evaluate(job, judge, params);
      json record = key;
      record["dataset"] = entry.dataset;
      record["scale"] = config.judge_scale;
      record["captions"] = captions;
      record.update(capscore::to_json(result));
      return {std::move(record), {}};
    } catch (const std::exception& e) {
      return {std::nullopt, fmt::format("{}: failed: {}", entry.video_id, e.what()), true};
    }
  };

  RunSummary summary;
  for (auto& outcome : parallel_map(entries.size(), config.workers, score)) {
    if (outcome.record) {
      store.put(std::move(*outcome.record), config.force);
      ++summary.written;
    } else if (outcome.failed) {
      ++summary.failures;
    } else {
      ++summary.skipped;
    }
    if (!outcome.message.empty()) summary.messages.push_back(std::move(outcome.message));
  }
  return summary;
}

RunSummary run_caption(const RunConfig& config, BackendRegistry& registry) {
  const auto entries = pipeline::load_manifest(config.manifest);
  const auto backends = pipeline_backends(config, registry);
  const fs::path dir = config.output_dir / "bundles";
  fs::create_directories(dir);

  auto caption = [&](std::size_t i) { return pipeline::caption_video(entries[i], config.pipeline, backends); };
  RunSummary summary;
  for (const auto& bundle : parallel_map(entries.size(), config.workers, caption)) {
    write_text_file(dir / (bundle.video_id + ".json"), pipeline::to_json(bundle).dump(2) + "\n");
    ++summary.written;
    if (!bundle.ok()) {
      ++summary.failures;
      summary.messages.push_back(
          fmt::format("{}: {} stage failed: {}", bundle.video_id, bundle.failed_stage, bundle.error));
    }
  }
  return summary;
}

Leaderboard emit_leaderboard(const std::vector<json>& records) {
  struct Cell {
    double similarity = 0.0;
    double quality = 0.0;
    std::size_t count = 0;
  };
  std::set<std::string> datasets;
  std::map<std::string, std::map<std::string, Cell>> cells;
  std::map<std::string, Cell> overall;
  for (const auto& r : records) {
    const std::string dataset = r.value("dataset", "default");
    datasets.insert(dataset);
    const auto& methods = r.at("methods");
    for (std::size_t i = 0; i < methods.size(); ++i) {
      const std::string name = methods[i].get<std::string>();
      const double s = r.at("similarity").at(i).get<double>();
      const double q = r.at("quality").at(i).get<double>();
      for (Cell* c : {&cells[name][dataset], &overall[name]}) {
        c->similarity += s;
        c->quality += q;
        ++c->count;
      }
    }
  }

  Leaderboard board;
  if (records.empty()) {
    board.markdown = "| Method | Similarity | Quality | N |\n|---|---|---|---|\n";
    board.csv = "method,similarity,quality,n\n";
    board.warning = "results store is empty";
    return board;
  }

  std::vector<std::string> order;
  for (const auto& [name, c] : overall) order.push_back(name);
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    const double ma = overall[a].similarity / static_cast<double>(overall[a].count);
    const double mb = overall[b].similarity / static_cast<double>(overall[b].count);
    if (ma != mb) return ma > mb;
    return a < b;
  });

  std::string md = "| Method |";
  std::string rule = "|---|";
  std::string csv = "method";
  for (const auto& d : datasets) {
    md += fmt::format(" {0} Similarity | {0} Quality | {0} N |", d);
    rule += "---|---|---|";
    csv += fmt::format(",{0}_similarity,{0}_quality,{0}_n", d);
  }
  md += "\n" + rule + "\n";
  csv += "\n";
  for (const auto& name : order) {
    md += "| " + name + " |";
    csv += name;
    for (const auto& d : datasets) {
      auto it = cells[name].find(d);
      if (it == cells[name].end()) {
        md += " - | - | 0 |";
        csv += ",,,0";
        continue;
      }
      const auto& c = it->second;
      const double n = static_cast<double>(c.count);
      md += fmt::format(" {:.2f} | {:.2f} | {} |", c.similarity / n, c.quality / n, c.count);
      csv += fmt::format(",{:.2f},{:.2f},{}", c.similarity / n, c.quality / n, c.count);
    }
    md += "\n";
    csv += "\n";
  }
  board.markdown = std::move(md);
  board.csv = std::move(csv);
  return board;
}

std::vector<SceneWindow> scene_windows(double t0, double t1, double window) {
  if (!(window > 0.0)) throw Error(ErrorCode::kInvalidArgument, "window length must be positive");
  if (t1 < t0) throw Error(ErrorCode::kInvalidArgument, "window range is reversed");
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((t1 - t0) / window - 1e-9)));
  std::vector<SceneWindow> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({i, t0 + static_cast<double>(i) * window, std::min(t1, t0 + static_cast<double>(i + 1) * window)});
  }
  return out;
}

Scene slice_scene(const Scene& scene, const SceneWindow& window, bool last) {
  constexpr double kEps = 1e-9;
  auto inside = [&](double t) {
    return t >= window.t_start - kEps && (last ? t <= window.t_end + kEps : t < window.t_end - kEps);
  };
  auto cut = [&](const geometry::Trajectory& traj) {
    geometry::Trajectory out{traj.agent_id, traj.category, {}};
    for (const auto& p : traj.poses) {
      if (inside(p.t)) out.poses.push_back(p);
    }
    return out;
  };
  Scene out;
  out.scene_id = scene.scene_id;
  out.graph = scene.graph;
  out.context = scene.context;
  out.ego = cut(scene.ego);
  for (const auto& a : scene.agents) {
    auto sliced = cut(a);
    if (!sliced.poses.empty()) out.agents.push_back(std::move(sliced));
  }
  return out;
}

json annotate_scene(const Scene& scene, const RunConfig& config, Client* aggregator) {
  interaction::EgoTrack ego{scene.ego, motion::annotate_agent(scene.ego, scene.graph, config.motion)};
  std::vector<interaction::AgentTrack> agents;
  for (const auto& a : scene.agents) {
    agents.push_back(interaction::prepare_agent(scene.ego, a, scene.graph, config.motion, config.interaction));
  }
  const auto records = interaction::detect_interactions(ego, agents, scene.graph, scene.context, config.interaction);
  const auto description = interaction::aggregate_description(ego.annotation, records, scene.context, aggregator);

  json agent_json = json::array();
  for (const auto& a : agents) agent_json.push_back(motion::to_json(a.annotation));
  json interaction_json = json::array();
  for (const auto& r : records) interaction_json.push_back(interaction::to_json(r));
  return {{"scene_id", scene.scene_id},
          {"ego", motion::to_json(ego.annotation)},
          {"agents", agent_json},
          {"interactions", interaction_json},
          {"description", interaction::to_json(description)}};
}

AnnotateOutput annotate_scenes(const RunConfig& config, BackendRegistry* registry) {
  Client* aggregator = nullptr;
  if (!config.aggregator_backend.empty()) {
    if (registry == nullptr) throw Error(ErrorCode::kInvalidArgument, "aggregator configured without backends");
    aggregator = &registry->client(config.aggregator_backend);
  }
  AnnotateOutput out;
  for (const auto& path : config.scenes) {
    try {
      const Scene scene = load_scene(path);
      if (config.window <= 0.0) {
        auto j = annotate_scene(scene, config, aggregator);
        out.captions.push_back({{"video_id", scene.scene_id}, {"caption", j["description"]["text"]}});
        out.annotations.push_back(std::move(j));
        ++out.summary.written;
        continue;
      }
      const auto windows = scene_windows(scene.ego.start_time(), scene.ego.end_time(), config.window);
      for (const auto& w : windows) {
        const Scene part = slice_scene(scene, w, w.index + 1 == windows.size());
        const std::string id = fmt::format("{}_w{}", scene.scene_id, w.index);
        if (part.ego.poses.size() < 2) {
          ++out.summary.skipped;
          out.summary.messages.push_back(fmt::format("{}: fewer than two ego poses, skipped", id));
          continue;
        }
        auto j = annotate_scene(part, config, aggregator);
        j["video_id"] = id;
        j["window"] = {{"index", w.index}, {"t_start", w.t_start}, {"t_end", w.t_end}};
        out.captions.push_back({{"video_id", id}, {"caption", j["description"]["text"]}});
        out.annotations.push_back(std::move(j));
        ++out.summary.written;
      }
    } catch (const std::exception& e) {
      ++out.summary.failures;
      out.summary.messages.push_back(fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  return out;
}

RunSummary run_ablation(const RunConfig& config, BackendRegistry& registry,
                        const std::map<std::string, std::string>& captions) {
  Client& judge = registry.client(config.judge_backend);
  const auto entries = pipeline::load_manifest(config.manifest);
  std::string csv = "video_id,sentences,token_count,similarity,quality\n";
  RunSummary summary;
  for (const auto& entry : entries) {
    if (!entry.ground_truth) {
      ++summary.skipped;
      summary.messages.push_back(fmt::format("{}: skipped, no ground truth", entry.video_id));
      continue;
    }
    try {
      std::string caption;
      if (auto it = captions.find(entry.video_id); it != captions.end()) {
        caption = it->second;
      } else if (!config.methods.empty()) {
        caption = method_caption(config.methods.front(), entry, config, registry);
      } else {
        throw Error(ErrorCode::kPrecondition, "no caption given and no method configured");
      }
      capscore::EvaluateParams params;
      params.seed = stable_seed(config.seed, entry.video_id);
      params.max_parse_retries = config.max_parse_retries;
      params.stability_threshold = config.stability_threshold;
      for (const auto& p : capscore::token_ablation(caption, *entry.ground_truth, judge, config.judge_scale,
                                                    config.judge_runs, params)) {
        csv += fmt::format("{},{},{},{:.4f},{:.4f}\n", entry.video_id, p.sentences, p.token_count, p.similarity,
                           p.quality);
      }
      ++summary.written;
    } catch (const std::exception& e) {
      ++summary.failures;
      summary.messages.push_back(fmt::format("{}: failed: {}", entry.video_id, e.what()));
    }
  }
  write_text_file(config.output_dir / "ablation.csv", csv);
  return summary;
}

RunSummary replay_log(const fs::path& log_path) {
  const auto exchanges = backends::ExchangeLog::load(log_path);
  auto scripted = backends::ScriptedBackend::from_exchange_log(log_path);
  RunSummary summary;
  for (std::size_t i = 0; i < exchanges.size(); ++i) {
    const auto& e = exchanges[i];
    const auto digest = backends::request_digest(e.request);
    if (digest != e.digest) {
      ++summary.failures;
      summary.messages.push_back(fmt::format("entry {}: digest mismatch ({} logged, {} computed)", i + 1,
                                             e.digest, digest));
      continue;
    }
    if (!e.response) {
      ++summary.skipped;
      continue;
    }
    try {
      const auto text = scripted->send(e.request);
      if (text != e.response->text) {
        ++summary.failures;
        summary.messages.push_back(fmt::format("entry {}: replay returned a different reply", i + 1));
        continue;
      }
      ++summary.written;
    } catch (const std::exception& ex) {
      ++summary.failures;
      summary.messages.push_back(fmt::format("entry {}: {}", i + 1, ex.what()));
    }
  }
  return summary;
}

}  // namespace wolf::harness
