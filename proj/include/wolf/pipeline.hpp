// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"
#include "wolf/backends.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wolf::pipeline {

struct FramePlan {
  std::string video_id;
  double duration = 0.0;
  std::size_t native_frame_count = 0;
  std::vector<std::size_t> sampled_indices;
  double effective_fps = 0.0;
};

/// Evenly spaced frame indices at `target_fps`. When that yields fewer than
/// `min_frames`, the rate is raised just enough (up to `native_fps`).
FramePlan plan_frames(double duration, double native_fps, double target_fps,
                      std::size_t min_frames = 8, std::string video_id = {});

/// Pixel position as (row, col). The second component is horizontal.
using Center = std::array<double, 2>;

struct BoxTrack {
  std::string object_id;
  std::string label;
  // One entry per sampled frame; nullopt where the object is not visible.
  std::vector<std::optional<Center>> centers;
  // Frame bounds; 0 means unknown and only negative coordinates are rejected.
  int frame_rows = 0;
  int frame_cols = 0;
};

std::vector<BoxTrack> tracks_from_json(const nlohmann::json& j);

inline constexpr double kDefaultMotionEpsilon = 2.0;

/// Rule-based movement phrase for one track, e.g. "the blue car is moving to
/// the right". With `rewriter` the phrase is passed through a text backend.
std::string motion_caption(const BoxTrack& track, double epsilon = kDefaultMotionEpsilon,
                           backends::Client* rewriter = nullptr);

/// Sequential per-frame captions. Request k >= 2 carries caption k-1.
std::vector<backends::ChatResponse> cascade_caption(std::span<const backends::Attachment> frames,
                                                    backends::Client& image);

backends::ChatResponse summarize_chain(std::span<const std::string> chain,
                                       backends::Client& summarizer);

struct Provenance {
  std::string field;
  std::string backend;
  std::string digest;
};

struct CaptionBundle {
  std::string video_id;
  FramePlan plan;
  std::vector<std::string> chain_captions;
  std::string image_level_summary;
  std::vector<std::string> motion_captions;
  std::map<std::string, std::string> video_level_captions;
  std::optional<std::string> annotated_caption;
  std::string final_caption;
  std::vector<Provenance> provenance;
  // Empty on success.
  std::string failed_stage;
  std::string error;

  bool ok() const { return failed_stage.empty() && !final_caption.empty(); }
};

nlohmann::json to_json(const CaptionBundle& bundle);

/// Labeled sections handed to the mixture summarizer.
std::string mixture_sections(const CaptionBundle& bundle, bool include_annotated);

backends::ChatResponse mixture_summarize(const CaptionBundle& bundle, backends::Client& summarizer,
                                         bool include_annotated = false);

struct ManifestEntry {
  std::string video_id;
  std::string dataset = "default";
  std::filesystem::path frames_dir;
  double duration = 0.0;
  // 0 derives the rate from the frame count.
  double native_fps = 0.0;
  std::optional<std::filesystem::path> tracks;
  std::optional<std::filesystem::path> video;
  std::optional<std::string> ground_truth;
  std::optional<std::string> annotated_caption;
};

/// Relative paths are resolved against `base`.
ManifestEntry manifest_entry_from_json(const nlohmann::json& j, const std::filesystem::path& base);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

/// Image files of a frames directory in frame order.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

/// Image attachments for the given frame indices.
std::vector<backends::Attachment> frame_attachments(const ManifestEntry& entry,
                                                    std::span<const std::filesystem::path> frames,
                                                    std::span<const std::size_t> indices);

struct PipelineParams {
  double target_fps = 2.0;
  std::size_t min_frames = 8;
  double motion_epsilon = kDefaultMotionEpsilon;
  bool include_annotated = false;
};

struct PipelineBackends {
  backends::Client* image = nullptr;
  backends::Client* summarizer = nullptr;
  std::vector<backends::Client*> video;
  backends::Client* motion_rewriter = nullptr;
};

/// Full caption pipeline for one video. Never throws for stage failures;
/// those are reported in `failed_stage` with partial results kept.
CaptionBundle caption_video(const ManifestEntry& entry, const PipelineParams& params,
                            const PipelineBackends& backends);

}  // namespace wolf::pipeline
