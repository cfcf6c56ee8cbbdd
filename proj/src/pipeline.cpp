// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/pipeline.hpp"

#include "wolf/error.hpp"
#include "wolf/prompts.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>

namespace wolf::pipeline {

namespace fs = std::filesystem;
using backends::Attachment;
using backends::ChatResponse;
using backends::Client;
using nlohmann::json;

FramePlan plan_frames(double duration, double native_fps, double target_fps, std::size_t min_frames,
                      std::string video_id) {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw Error(ErrorCode::kInvalidVideo, fmt::format("video '{}': duration must be positive", video_id));
  }
  if (!(native_fps > 0.0) || !(target_fps > 0.0)) {
    throw Error(ErrorCode::kInvalidVideo, fmt::format("video '{}': frame rates must be positive", video_id));
  }
  constexpr double kEps = 1e-9;
  FramePlan plan;
  plan.video_id = std::move(video_id);
  plan.duration = duration;
  plan.native_frame_count = static_cast<std::size_t>(std::floor(duration * native_fps + kEps));
  if (plan.native_frame_count == 0) {
    throw Error(ErrorCode::kInvalidVideo, fmt::format("video '{}' has no frames", plan.video_id));
  }

  double fps = std::min(target_fps, native_fps);
  auto count = static_cast<std::size_t>(std::floor(duration * fps + kEps));
  if (count < min_frames) {
    fps = std::min(native_fps, static_cast<double>(min_frames) / duration);
    count = static_cast<std::size_t>(std::floor(duration * fps + kEps));
  }
  count = std::clamp<std::size_t>(count, 1, plan.native_frame_count);

  plan.effective_fps = fps;
  plan.sampled_indices.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    auto idx = static_cast<std::size_t>(std::floor(static_cast<double>(k) * native_fps / fps + kEps));
    plan.sampled_indices.push_back(std::min(idx, plan.native_frame_count - 1));
  }
  return plan;
}

std::vector<BoxTrack> tracks_from_json(const json& j) {
  const json& list = j.is_array() ? j : j.at("tracks");
  const int rows = j.is_object() ? j.value("frame_rows", 0) : 0;
  const int cols = j.is_object() ? j.value("frame_cols", 0) : 0;
  std::vector<BoxTrack> tracks;
  for (const auto& t : list) {
    BoxTrack track;
    track.object_id = t.at("object_id").get<std::string>();
    track.label = t.value("label", track.object_id);
    track.frame_rows = t.value("frame_rows", rows);
    track.frame_cols = t.value("frame_cols", cols);
    for (const auto& c : t.at("centers")) {
      if (c.is_null()) {
        track.centers.emplace_back();
      } else {
        track.centers.push_back(Center{c.at(0).get<double>(), c.at(1).get<double>()});
      }
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

std::string motion_caption(const BoxTrack& track, double epsilon, Client* rewriter) {
  std::vector<Center> present;
  for (const auto& c : track.centers) {
    if (!c) continue;
    const bool outside = (*c)[0] < 0 || (*c)[1] < 0 ||
                         (track.frame_rows > 0 && (*c)[0] >= track.frame_rows) ||
                         (track.frame_cols > 0 && (*c)[1] >= track.frame_cols);
    if (outside) {
      throw Error(ErrorCode::kInvalidTrack,
                  fmt::format("track '{}': center ({}, {}) outside the frame", track.object_id, (*c)[0],
                              (*c)[1]));
    }
    present.push_back(*c);
  }
  if (present.empty()) {
    throw Error(ErrorCode::kInvalidTrack, fmt::format("track '{}' has no centers", track.object_id));
  }

  std::string phrase;
  if (present.size() == 1) {
    phrase = track.label + " is visible";
  } else {
    const double d_row = present.back()[0] - present.front()[0];
    const double d_col = present.back()[1] - present.front()[1];
    if (std::hypot(d_row, d_col) < epsilon) {
      phrase = track.label + " is stationary";
    } else if (std::abs(d_col) >= std::abs(d_row)) {
      phrase = track.label + (d_col > 0 ? " is moving to the right" : " is moving to the left");
    } else {
      phrase = track.label + (d_row > 0 ? " is moving downward/closer" : " is moving upward/away");
    }
  }

  if (rewriter != nullptr) {
    return rewriter->complete(rewriter->make_request({std::string(prompts::kMotionRewrite), phrase})).text;
  }
  return phrase;
}

std::vector<ChatResponse> cascade_caption(std::span<const Attachment> frames, Client& image) {
  if (frames.empty()) throw Error(ErrorCode::kPrecondition, "cascade needs at least one frame");
  std::vector<ChatResponse> out;
  out.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    std::vector<std::string> parts{std::string(prompts::kCascadeBase)};
    if (k > 0) parts.push_back(std::string(prompts::kCascadePrevious) + out.back().text);
    try {
      out.push_back(image.complete(image.make_request(std::move(parts), {frames[k]})));
    } catch (const Error& e) {
      throw Error(ErrorCode::kPipeline, fmt::format("cascade failed at frame {}: {}", k + 1, e.what()));
    }
  }
  return out;
}

ChatResponse summarize_chain(std::span<const std::string> chain, Client& summarizer) {
  if (chain.empty()) throw Error(ErrorCode::kPrecondition, "empty caption chain");
  std::string numbered;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    if (k) numbered += '\n';
    numbered += fmt::format("Caption {}: {}", k + 1, chain[k]);
  }
  try {
    return summarizer.complete(summarizer.make_request({std::string(prompts::kSummarizeChain), numbered}));
  } catch (const Error& e) {
    throw Error(ErrorCode::kPipeline, fmt::format("chain summary failed: {}", e.what()));
  }
}

std::string mixture_sections(const CaptionBundle& bundle, bool include_annotated) {
  if (bundle.image_level_summary.empty()) {
    throw Error(ErrorCode::kPrecondition, "mixture needs an image-level caption");
  }
  if (bundle.video_level_captions.empty()) {
    throw Error(ErrorCode::kPrecondition, "mixture needs at least one video-level caption");
  }
  if (include_annotated && !bundle.annotated_caption) {
    throw Error(ErrorCode::kPrecondition, "annotated caption requested but not available");
  }
  std::string out = "Image-level Caption:\n" + bundle.image_level_summary;
  if (!bundle.motion_captions.empty()) {
    out += "\n\nMotion Caption:";
    for (const auto& m : bundle.motion_captions) out += "\n" + m;
  }
  for (const auto& [name, text] : bundle.video_level_captions) {
    out += fmt::format("\n\nVideo-level Caption ({}):\n{}", name, text);
  }
  if (include_annotated) out += "\n\nAnnotated Caption:\n" + *bundle.annotated_caption;
  return out;
}

ChatResponse mixture_summarize(const CaptionBundle& bundle, Client& summarizer, bool include_annotated) {
  auto sections = mixture_sections(bundle, include_annotated);
  try {
    return summarizer.complete(summarizer.make_request({std::string(prompts::kMixture), std::move(sections)}));
  } catch (const Error& e) {
    throw Error(ErrorCode::kPipeline, fmt::format("mixture summary failed: {}", e.what()));
  }
}

json to_json(const CaptionBundle& b) {
  json provenance = json::array();
  for (const auto& p : b.provenance) {
    provenance.push_back({{"field", p.field}, {"backend", p.backend}, {"digest", p.digest}});
  }
  json j = {{"video_id", b.video_id},
            {"plan",
             {{"duration", b.plan.duration},
              {"native_frame_count", b.plan.native_frame_count},
              {"sampled_indices", b.plan.sampled_indices},
              {"effective_fps", b.plan.effective_fps}}},
            {"chain_captions", b.chain_captions},
            {"image_level_summary", b.image_level_summary},
            {"motion_captions", b.motion_captions},
            {"video_level_captions", b.video_level_captions},
            {"final_caption", b.final_caption},
            {"provenance", provenance},
            {"ok", b.ok()}};
  j["annotated_caption"] = b.annotated_caption ? json(*b.annotated_caption) : json();
  if (!b.failed_stage.empty()) {
    j["failed_stage"] = b.failed_stage;
    j["error"] = b.error;
  }
  return j;
}

ManifestEntry manifest_entry_from_json(const json& j, const fs::path& base) {
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  ManifestEntry e;
  try {
    e.video_id = j.at("video_id").get<std::string>();
    e.dataset = j.value("dataset", e.dataset);
    e.frames_dir = resolve(j.at("frames_dir").get<std::string>());
    e.duration = j.at("duration").get<double>();
    e.native_fps = j.value("native_fps", 0.0);
    if (j.contains("tracks") && !j["tracks"].is_null()) e.tracks = resolve(j["tracks"].get<std::string>());
    if (j.contains("video") && !j["video"].is_null()) e.video = resolve(j["video"].get<std::string>());
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
      e.ground_truth = j["ground_truth"].get<std::string>();
    }
    if (j.contains("annotated_caption") && !j["annotated_caption"].is_null()) {
      e.annotated_caption = j["annotated_caption"].get<std::string>();
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kSchema, fmt::format("manifest entry: {}", ex.what()));
  }
  return e;
}

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read manifest {}", path.string()));
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kSchema, fmt::format("{}:{}: {}", path.string(), line_no, ex.what()));
    }
    entries.push_back(manifest_entry_from_json(j, path.parent_path()));
  }
  return entries;
}

namespace {

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp" || ext == ".webp" ||
         ext == ".ppm";
}

// Numbered files may or may not be zero padded.
std::pair<long long, std::string> frame_key(const fs::path& p) {
  const std::string stem = p.stem().string();
  std::string digits;
  for (char c : stem) {
    if (std::isdigit(static_cast<unsigned char>(c))) digits += c;
  }
  long long n = digits.empty() || digits.size() > 18 ? -1 : std::stoll(digits);
  return {n, p.filename().string()};
}

}  // namespace

std::vector<fs::path> list_frames(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::kInvalidVideo, fmt::format("frames directory {} not found", dir.string()));
  }
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image(entry.path())) frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end(),
            [](const fs::path& a, const fs::path& b) { return frame_key(a) < frame_key(b); });
  return frames;
}

std::vector<Attachment> frame_attachments(const ManifestEntry& entry, std::span<const fs::path> frames,
                                          std::span<const std::size_t> indices) {
  std::vector<Attachment> out;
  out.reserve(indices.size());
  for (auto idx : indices) {
    if (idx >= frames.size()) {
      throw Error(ErrorCode::kInvalidVideo,
                  fmt::format("video '{}': frame {} requested but only {} present", entry.video_id, idx,
                              frames.size()));
    }
    out.push_back({Attachment::Kind::kImage, entry.video_id + "/" + frames[idx].filename().string(),
                   frames[idx]});
  }
  return out;
}

CaptionBundle caption_video(const ManifestEntry& entry, const PipelineParams& params,
                            const PipelineBackends& backends) {
  CaptionBundle b;
  b.video_id = entry.video_id;
  b.annotated_caption = entry.annotated_caption;
  std::string stage;

  auto note = [&](std::string field, const ChatResponse& r) {
    b.provenance.push_back({std::move(field), r.backend_name, r.digest});
  };

  try {
    stage = "plan";
    const auto frames = list_frames(entry.frames_dir);
    const double native_fps =
        entry.native_fps > 0 ? entry.native_fps : static_cast<double>(frames.size()) / entry.duration;
    b.plan = plan_frames(entry.duration, native_fps, params.target_fps, params.min_frames, entry.video_id);
    const auto images = frame_attachments(entry, frames, b.plan.sampled_indices);

    stage = "cascade";
    if (backends.image == nullptr) throw Error(ErrorCode::kPrecondition, "no image backend configured");
    const auto chain = cascade_caption(images, *backends.image);
    for (std::size_t k = 0; k < chain.size(); ++k) {
      b.chain_captions.push_back(chain[k].text);
      note(fmt::format("chain_captions[{}]", k), chain[k]);
    }

    stage = "chain_summary";
    if (backends.summarizer == nullptr) throw Error(ErrorCode::kPrecondition, "no summarizer configured");
    const auto summary = summarize_chain(b.chain_captions, *backends.summarizer);
    b.image_level_summary = summary.text;
    note("image_level_summary", summary);

    stage = "motion";
    if (entry.tracks) {
      const auto tracks = tracks_from_json(json::parse(std::ifstream(*entry.tracks)));
      for (const auto& track : tracks) {
        std::string phrase = motion_caption(track, params.motion_epsilon);
        if (backends.motion_rewriter != nullptr) {
          auto* rw = backends.motion_rewriter;
          const auto r = rw->complete(rw->make_request({std::string(prompts::kMotionRewrite), phrase}));
          note(fmt::format("motion_captions[{}]", b.motion_captions.size()), r);
          phrase = r.text;
        }
        b.motion_captions.push_back(std::move(phrase));
      }
    }

    stage = "video";
    std::vector<Attachment> clip;
    if (entry.video) {
      clip.push_back({Attachment::Kind::kVideo, entry.video_id + "/" + entry.video->filename().string(),
                      *entry.video});
    } else {
      clip = images;
    }
    std::vector<std::future<ChatResponse>> pending;
    for (auto* client : backends.video) {
      pending.push_back(std::async(std::launch::async, [client, &clip] {
        return client->complete(client->make_request({std::string(prompts::kVideoLevel)}, clip));
      }));
    }
    std::vector<ChatResponse> replies;
    std::exception_ptr first_error;
    for (auto& f : pending) {
      try {
        replies.push_back(f.get());
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
    for (const auto& r : replies) {
      b.video_level_captions[r.backend_name] = r.text;
      note("video_level_captions." + r.backend_name, r);
    }

    stage = "mixture";
    if (backends.summarizer == nullptr) throw Error(ErrorCode::kPrecondition, "no summarizer configured");
    const auto final_reply = mixture_summarize(b, *backends.summarizer, params.include_annotated);
    b.final_caption = final_reply.text;
    note("final_caption", final_reply);
  } catch (const std::exception& e) {
    b.failed_stage = stage;
    b.error = e.what();
  }
  return b;
}

}  // namespace wolf::pipeline
