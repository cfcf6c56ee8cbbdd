// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"
#include "wolf/backends.hpp"
#include "wolf/capscore.hpp"
#include "wolf/interaction.hpp"
#include "wolf/motion.hpp"
#include "wolf/pipeline.hpp"
#include "wolf/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace wolf::harness {

/// k evenly spaced frame indices: the centers of k equal bins over
/// [0, total). k >= total returns every index; k == 1 the middle frame.
std::vector<std::size_t> uniform_sample(std::size_t total_frames, std::size_t k);

/// How a compared method turns a video into a caption.
enum class MethodKind { kWolf, kMiddleFrame, kUniformFrames, kWholeVideo };

std::string_view to_string(MethodKind kind);
MethodKind method_kind_from_string(std::string_view text);

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::kWolf;
  // Captioner for the frame and video protocols; unused for kWolf.
  std::string backend;
  std::size_t frames = 16;
};

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path backends;
  std::filesystem::path output_dir = "out";
  std::vector<std::filesystem::path> scenes;

  pipeline::PipelineParams pipeline;
  std::string image_backend;
  std::string summarizer_backend;
  std::vector<std::string> video_backends;
  std::string motion_rewriter;

  std::vector<MethodSpec> methods;
  std::string judge_backend;
  int judge_runs = 1;
  double judge_scale = 1.0;
  int max_parse_retries = 2;
  double stability_threshold = 0.05;

  motion::MotionParams motion;
  interaction::InteractionParams interaction;
  std::string aggregator_backend;
  // Scene window length in seconds; 0 annotates each scene whole.
  double window = 5.0;

  std::uint64_t seed = 0;
  int run = 0;
  int workers = 1;
  bool force = false;
};

/// Relative paths are resolved against `base`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base);
RunConfig load_run_config(const std::filesystem::path& path);

std::vector<backends::BackendConfig> load_backend_configs(const std::filesystem::path& path);

/// Transport for a backend config: mock modes echo, digest, scripted
/// (replays `transcript`) and judge, or an OpenAI-compatible endpoint.
std::shared_ptr<backends::Backend> make_backend(const backends::BackendConfig& config);

/// Named clients sharing one exchange log.
class BackendRegistry {
 public:
  BackendRegistry(std::vector<backends::BackendConfig> configs, std::shared_ptr<backends::ExchangeLog> log,
                  std::uint64_t seed = 0);

  /// Throws kLookup for unknown names.
  backends::Client& client(const std::string& name);
  backends::Client* optional(const std::string& name);

 private:
  std::map<std::string, std::unique_ptr<backends::Client>> clients_;
};

struct RunSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::size_t failures = 0;
  std::vector<std::string> messages;
};

/// Append-only JSONL results keyed by (video_id, run, methods).
class ResultsStore {
 public:
  explicit ResultsStore(std::filesystem::path path);

  const std::vector<nlohmann::json>& records() const { return records_; }
  bool contains(const nlohmann::json& record) const;

  /// Adds a record; an existing one with the same key is kept unless
  /// `replace` is set. Returns whether the record was written.
  bool put(nlohmann::json record, bool replace);

 private:
  void rewrite() const;

  std::filesystem::path path_;
  std::vector<nlohmann::json> records_;
};

std::string record_key(const nlohmann::json& record);

/// Caption for one video from one method.
std::string method_caption(const MethodSpec& method, const pipeline::ManifestEntry& entry, const RunConfig& config,
                           BackendRegistry& registry);

/// Joint scoring of every method per video, one record per video.
RunSummary run_benchmark(const RunConfig& config, BackendRegistry& registry);

/// Captions every manifest entry with the full pipeline into
/// output_dir/bundles/<video_id>.json.
RunSummary run_caption(const RunConfig& config, BackendRegistry& registry);

struct Leaderboard {
  std::string markdown;
  std::string csv;
  std::string warning;
};

Leaderboard emit_leaderboard(const std::vector<nlohmann::json>& records);

struct SceneWindow {
  std::size_t index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
};

/// Fixed-length windows over [t0, t1]; the last one is closed and may be short.
std::vector<SceneWindow> scene_windows(double t0, double t1, double window);

/// The scene restricted to poses inside the window.
Scene slice_scene(const Scene& scene, const SceneWindow& window, bool last);

/// Motion and interaction annotation plus description for one scene.
nlohmann::json annotate_scene(const Scene& scene, const RunConfig& config, backends::Client* aggregator);

struct AnnotateOutput {
  std::vector<nlohmann::json> annotations;
  // {video_id, caption} per annotated window.
  std::vector<nlohmann::json> captions;
  RunSummary summary;
};

AnnotateOutput annotate_scenes(const RunConfig& config, BackendRegistry* registry);

/// Per-prefix CapScore curves for each manifest entry's caption from the
/// first configured method (or from `captions` when given).
RunSummary run_ablation(const RunConfig& config, BackendRegistry& registry,
                        const std::map<std::string, std::string>& captions = {});

/// Checks that every logged request still hashes to its digest and that a
/// replay through the scripted backend returns the logged replies.
RunSummary replay_log(const std::filesystem::path& log_path);

}  // namespace wolf::harness
