// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "scenarios.hpp"
#include "wolf/pipeline.hpp"
#include "wolf/prompts.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

namespace {

using namespace wolf;
using namespace wolf::pipeline;
using backends::Attachment;
using backends::BackendConfig;
using backends::Client;
using nlohmann::json;
namespace fs = std::filesystem;

BackendConfig named(const std::string& name) {
  BackendConfig c;
  c.name = name;
  c.max_retries = 0;
  return c;
}

// Records every request it sees, then answers like the digest mock.
class RecordingBackend : public backends::Backend {
 public:
  std::string send(const backends::ChatRequest& request) override {
    std::lock_guard lock(mutex_);
    requests.push_back(request);
    return reply_with_echo ? request.prompt_parts.back() : "reply-" + backends::request_digest(request).substr(0, 12);
  }
  bool measures_latency() const override { return false; }

  bool reply_with_echo = false;
  std::vector<backends::ChatRequest> requests;

 private:
  std::mutex mutex_;
};

TEST(PlanFrames, TwentySecondsAtTwoFps) {
  const auto plan = plan_frames(20.0, 12.0, 2.0);
  ASSERT_EQ(plan.sampled_indices.size(), 40u);
  EXPECT_EQ(plan.native_frame_count, 240u);
  EXPECT_DOUBLE_EQ(plan.effective_fps, 2.0);
  for (std::size_t k = 0; k < 40; ++k) EXPECT_EQ(plan.sampled_indices[k], 6 * k);
}

TEST(PlanFrames, ShortVideoRaisesRate) {
  const auto plan = plan_frames(2.0, 30.0, 1.0, 8);
  EXPECT_DOUBLE_EQ(plan.effective_fps, 4.0);
  EXPECT_EQ(plan.sampled_indices.size(), 8u);
  // Smallest rate reaching eight frames: floor(2 * fps) >= 8.
  EXPECT_LT(std::floor(2.0 * (plan.effective_fps - 0.01)), 8.0);
}

TEST(PlanFrames, RateCappedAtNative) {
  const auto plan = plan_frames(1.0, 5.0, 1.0, 8);
  EXPECT_DOUBLE_EQ(plan.effective_fps, 5.0);
  EXPECT_EQ(plan.sampled_indices, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(PlanFrames, InvalidInputs) {
  for (double d : {0.0, -1.0}) {
    try {
      plan_frames(d, 30, 2);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidVideo);
    }
  }
  EXPECT_THROW(plan_frames(10, 0, 2), Error);
  EXPECT_THROW(plan_frames(10, 30, -2), Error);
}

TEST(PlanFramesProperties, IndicesIncreasingInRangeAndEvenlySpaced) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> dur(0.3, 120), native(1, 60), target(0.2, 5);
  std::uniform_int_distribution<std::size_t> minf(1, 16);
  for (int trial = 0; trial < 2000; ++trial) {
    const double d = dur(rng), n = native(rng);
    if (std::floor(d * n) < 1) continue;
    const auto plan = plan_frames(d, n, target(rng), minf(rng));
    const auto& idx = plan.sampled_indices;
    ASSERT_FALSE(idx.empty());
    std::size_t min_gap = SIZE_MAX, max_gap = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      ASSERT_LT(idx[i], plan.native_frame_count);
      if (i > 0) {
        ASSERT_GT(idx[i], idx[i - 1]);
        min_gap = std::min(min_gap, idx[i] - idx[i - 1]);
        max_gap = std::max(max_gap, idx[i] - idx[i - 1]);
      }
    }
    if (idx.size() > 1) {
      EXPECT_LE(max_gap - min_gap, 1u);
    }
  }
}

BoxTrack track(std::vector<Center> centers, std::string label = "the blue car") {
  BoxTrack t;
  t.object_id = "obj";
  t.label = std::move(label);
  for (const auto& c : centers) t.centers.emplace_back(c);
  return t;
}

TEST(MotionCaption, MovingRight) {
  // Read as (row, col): the column grows, so the object moves right.
  EXPECT_EQ(motion_caption(track({{0, 0}, {1, 1}, {1, 2}}), 1.0), "the blue car is moving to the right");
}

TEST(MotionCaption, DirectionsAndStationary) {
  EXPECT_EQ(motion_caption(track({{10, 5}, {2, 5}})), "the blue car is moving upward/away");
  EXPECT_EQ(motion_caption(track({{2, 5}, {10, 5}})), "the blue car is moving downward/closer");
  EXPECT_EQ(motion_caption(track({{5, 10}, {5, 1}})), "the blue car is moving to the left");
  EXPECT_EQ(motion_caption(track({{7, 7}, {7, 7}, {7, 7}})), "the blue car is stationary");
  EXPECT_EQ(motion_caption(track({{7, 7}, {7.5, 8}})), "the blue car is stationary");
  EXPECT_EQ(motion_caption(track({{7, 7}})), "the blue car is visible");
}

TEST(MotionCaption, GapsUseFirstAndLastVisible) {
  BoxTrack t = track({});
  t.centers = {std::nullopt, Center{0, 0}, std::nullopt, Center{0, 30}, std::nullopt};
  EXPECT_EQ(motion_caption(t), "the blue car is moving to the right");
}

TEST(MotionCaption, OutOfBoundsIsInvalid) {
  BoxTrack t = track({{0, 0}, {5, 700}});
  t.frame_rows = 480;
  t.frame_cols = 640;
  try {
    motion_caption(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidTrack);
  }
  EXPECT_THROW(motion_caption(track({{-1, 0}, {3, 3}})), Error);
  BoxTrack empty = track({});
  empty.centers = {std::nullopt};
  EXPECT_THROW(motion_caption(empty), Error);
}

TEST(MotionCaption, RewriterReplyIsUsed) {
  auto backend = std::make_shared<RecordingBackend>();
  Client rewriter(named("rw"), backend);
  const auto text = motion_caption(track({{0, 0}, {0, 9}}), 2.0, &rewriter);
  EXPECT_EQ(text.rfind("reply-", 0), 0u);
  ASSERT_EQ(backend->requests.size(), 1u);
  EXPECT_EQ(backend->requests[0].prompt_parts[1], "the blue car is moving to the right");
}

TEST(TracksJson, ParsesNullGapsAndBounds) {
  const json j = {{"frame_rows", 100},
                  {"frame_cols", 200},
                  {"tracks", {{{"object_id", "c1"}, {"label", "the car"}, {"centers", {{1, 2}, nullptr, {3, 4}}}}}}};
  const auto tracks = tracks_from_json(j);
  ASSERT_EQ(tracks.size(), 1u);
  EXPECT_EQ(tracks[0].frame_cols, 200);
  ASSERT_EQ(tracks[0].centers.size(), 3u);
  EXPECT_FALSE(tracks[0].centers[1].has_value());
  EXPECT_DOUBLE_EQ((*tracks[0].centers[2])[1], 4.0);
}

std::vector<Attachment> attachments(int n) {
  std::vector<Attachment> out;
  for (int i = 0; i < n; ++i) out.push_back({Attachment::Kind::kImage, "v/" + std::to_string(i) + ".jpg", {}});
  return out;
}

TEST(Cascade, SingleFrameHasNoPreviousSection) {
  auto backend = std::make_shared<RecordingBackend>();
  Client image(named("img"), backend);
  const auto chain = cascade_caption(attachments(1), image);
  ASSERT_EQ(chain.size(), 1u);
  ASSERT_EQ(backend->requests.size(), 1u);
  EXPECT_EQ(backend->requests[0].prompt_parts, std::vector<std::string>{std::string(prompts::kCascadeBase)});
  EXPECT_EQ(backend->requests[0].attachments.size(), 1u);
}

TEST(Cascade, EachRequestCarriesThePreviousReply) {
  auto backend = std::make_shared<RecordingBackend>();
  backend->reply_with_echo = true;
  Client image(named("img"), backend);
  const auto chain = cascade_caption(attachments(3), image);
  ASSERT_EQ(backend->requests.size(), 3u);
  for (std::size_t k = 1; k < 3; ++k) {
    std::string prompt;
    for (const auto& p : backend->requests[k].prompt_parts) prompt += p;
    EXPECT_NE(prompt.find(chain[k - 1].text), std::string::npos);
    EXPECT_EQ(backend->requests[k].attachments[0].ref, "v/" + std::to_string(k) + ".jpg");
  }
}

TEST(CascadeProperties, ChainingHoldsForAnyLength) {
  for (int n = 1; n <= 12; ++n) {
    auto backend = std::make_shared<RecordingBackend>();
    Client image(named("img"), backend);
    const auto chain = cascade_caption(attachments(n), image);
    ASSERT_EQ(chain.size(), static_cast<std::size_t>(n));
    for (int k = 1; k < n; ++k) {
      const auto& parts = backend->requests[static_cast<std::size_t>(k)].prompt_parts;
      ASSERT_EQ(parts.size(), 2u);
      EXPECT_EQ(parts[1], std::string(prompts::kCascadePrevious) + chain[static_cast<std::size_t>(k - 1)].text);
    }
  }
}

TEST(Cascade, FailureNamesTheFrame) {
  auto scripted = std::make_shared<backends::ScriptedBackend>();
  Client image(named("img"), scripted);
  const auto frames = attachments(3);
  scripted->add_for(image.make_request({std::string(prompts::kCascadeBase)}, {frames[0]}), {false, "first"});
  try {
    cascade_caption(frames, image);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPipeline);
    EXPECT_NE(std::string(e.what()).find("frame 2"), std::string::npos);
  }
}

TEST(SummarizeChain, InstructionAndNumberedCaptions) {
  auto backend = std::make_shared<RecordingBackend>();
  backend->reply_with_echo = true;
  Client summarizer(named("sum"), backend);
  const std::vector<std::string> chain{"a red light", "the light turns green", "cars move"};
  const auto r = summarize_chain(chain, summarizer);
  for (const auto& c : chain) EXPECT_NE(r.text.find(c), std::string::npos);
  EXPECT_EQ(backend->requests[0].prompt_parts[0],
            "Summarize all the captions to describe the video with accurate temporal information");
  const std::vector<std::string> one{"only"};
  summarize_chain(one, summarizer);
  EXPECT_EQ(backend->requests[1].prompt_parts[0], prompts::kSummarizeChain);
  EXPECT_EQ(backend->requests[1].prompt_parts[1], "Caption 1: only");
}

CaptionBundle partial_bundle() {
  CaptionBundle b;
  b.video_id = "v";
  b.image_level_summary = "IMAGE SUMMARY";
  b.motion_captions = {"the car is moving to the left"};
  b.video_level_captions = {{"alpha", "ALPHA TEXT"}, {"beta", "BETA TEXT"}};
  return b;
}

TEST(Mixture, EchoContainsEverySection) {
  auto backend = std::make_shared<RecordingBackend>();
  backend->reply_with_echo = true;
  Client summarizer(named("sum"), backend);
  auto b = partial_bundle();
  b.annotated_caption = "ANNOTATED";
  const auto r = mixture_summarize(b, summarizer, true);
  for (const char* s : {"IMAGE SUMMARY", "moving to the left", "ALPHA TEXT", "BETA TEXT", "ANNOTATED",
                        "Image-level Caption", "Motion Caption", "Video-level Caption (alpha)", "Annotated Caption"}) {
    EXPECT_NE(r.text.find(s), std::string::npos) << s;
  }
  EXPECT_EQ(backend->requests[0].prompt_parts[0], prompts::kMixture);
}

TEST(Mixture, SectionLayoutIsExact) {
  const auto text = mixture_sections(partial_bundle(), false);
  EXPECT_EQ(text,
            "Image-level Caption:\nIMAGE SUMMARY\n\nMotion Caption:\nthe car is moving to the left\n\n"
            "Video-level Caption (alpha):\nALPHA TEXT\n\nVideo-level Caption (beta):\nBETA TEXT");
  auto no_motion = partial_bundle();
  no_motion.motion_captions.clear();
  EXPECT_EQ(mixture_sections(no_motion, false).find("Motion Caption"), std::string::npos);
}

TEST(Mixture, MissingSectionsArePreconditionErrors) {
  auto expect_precondition = [](const CaptionBundle& b, bool annotated) {
    try {
      mixture_sections(b, annotated);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
    }
  };
  expect_precondition(partial_bundle(), true);
  auto b = partial_bundle();
  b.video_level_captions.clear();
  expect_precondition(b, false);
  b = partial_bundle();
  b.image_level_summary.clear();
  expect_precondition(b, false);
}

TEST(Frames, NumericOrdering) {
  const auto dir = wolf::testing::fresh_dir("frame_order");
  for (const char* name : {"frame10.jpg", "frame2.jpg", "frame1.jpg", "notes.txt"}) std::ofstream(dir / name) << "x";
  const auto frames = list_frames(dir);
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_EQ(frames[0].filename(), "frame1.jpg");
  EXPECT_EQ(frames[1].filename(), "frame2.jpg");
  EXPECT_EQ(frames[2].filename(), "frame10.jpg");
  EXPECT_THROW(list_frames(dir / "missing"), Error);
}

TEST(Manifest, RelativePathsResolveAgainstManifest) {
  const auto dir = wolf::testing::fresh_dir("manifest");
  std::ofstream(dir / "m.jsonl") << R"({"video_id":"a","frames_dir":"frames/a","duration":4,"ground_truth":"gt"})"
                                 << "\n\n"
                                 << R"({"video_id":"b","dataset":"robot","frames_dir":"/abs/b","duration":2})" << "\n";
  const auto entries = load_manifest(dir / "m.jsonl");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].frames_dir, dir / "frames/a");
  EXPECT_EQ(entries[0].ground_truth, "gt");
  EXPECT_EQ(entries[1].dataset, "robot");
  EXPECT_EQ(entries[1].frames_dir, fs::path("/abs/b"));
  std::ofstream(dir / "bad.jsonl") << R"({"frames_dir":"x"})" << "\n";
  try {
    load_manifest(dir / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
  }
}

struct Fixture {
  fs::path dir;
  ManifestEntry entry;
};

Fixture four_frame_video(bool with_tracks) {
  Fixture f;
  f.dir = wolf::testing::fresh_dir("pipeline_video");
  wolf::testing::write_frames(f.dir / "frames", 4);
  f.entry.video_id = "clip";
  f.entry.frames_dir = f.dir / "frames";
  f.entry.duration = 4.0;
  f.entry.native_fps = 1.0;
  if (with_tracks) {
    std::ofstream(f.dir / "tracks.json")
        << R"({"tracks":[{"object_id":"car","label":"the blue car","centers":[[0,0],[1,1],[1,2],[1,3]]}]})";
    f.entry.tracks = f.dir / "tracks.json";
  }
  return f;
}

struct MockSet {
  std::shared_ptr<backends::ExchangeLog> log = std::make_shared<backends::ExchangeLog>();
  Client image{named("image"), std::make_shared<backends::DigestBackend>(), log};
  Client summarizer{named("summarizer"), std::make_shared<backends::DigestBackend>(), log};
  Client video_a{named("video_a"), std::make_shared<backends::DigestBackend>(), log};
  Client video_b{named("video_b"), std::make_shared<backends::DigestBackend>(), log};

  PipelineBackends wiring() { return {&image, &summarizer, {&video_a, &video_b}, nullptr}; }
};

PipelineParams small_params() {
  PipelineParams p;
  p.target_fps = 1.0;
  p.min_frames = 4;
  p.motion_epsilon = 1.0;
  return p;
}

TEST(CaptionVideo, CompleteBundleWithProvenance) {
  const auto f = four_frame_video(true);
  MockSet mocks;
  const auto bundle = caption_video(f.entry, small_params(), mocks.wiring());
  ASSERT_TRUE(bundle.ok()) << bundle.failed_stage << ": " << bundle.error;
  EXPECT_EQ(bundle.chain_captions.size(), bundle.plan.sampled_indices.size());
  EXPECT_EQ(bundle.chain_captions.size(), 4u);
  EXPECT_EQ(bundle.motion_captions, std::vector<std::string>{"the blue car is moving to the right"});
  EXPECT_EQ(bundle.video_level_captions.size(), 2u);
  EXPECT_FALSE(bundle.final_caption.empty());

  // Every reply traces to exactly one logged exchange.
  const auto exchanges = mocks.log->entries();
  EXPECT_EQ(bundle.provenance.size(), exchanges.size());
  for (const auto& p : bundle.provenance) {
    const auto n = std::count_if(exchanges.begin(), exchanges.end(), [&](const auto& e) { return e.digest == p.digest; });
    EXPECT_EQ(n, 1) << p.field;
  }
  EXPECT_EQ(bundle.provenance.back().field, "final_caption");
}

TEST(CaptionVideo, DeterministicAcrossRuns) {
  const auto f = four_frame_video(true);
  std::string first;
  for (int run = 0; run < 4; ++run) {
    MockSet mocks;
    const auto text = to_json(caption_video(f.entry, small_params(), mocks.wiring())).dump();
    if (run == 0) first = text;
    EXPECT_EQ(text, first);
  }
}

TEST(CaptionVideo, ReplayThroughScriptedBackendIsIdentical) {
  const auto f = four_frame_video(true);
  const auto log_path = f.dir / "exchanges.jsonl";
  std::string recorded;
  {
    auto log = std::make_shared<backends::ExchangeLog>(log_path);
    Client image(named("image"), std::make_shared<backends::DigestBackend>(), log);
    Client summarizer(named("summarizer"), std::make_shared<backends::DigestBackend>(), log);
    Client video_a(named("video_a"), std::make_shared<backends::DigestBackend>(), log);
    recorded = to_json(caption_video(f.entry, small_params(), {&image, &summarizer, {&video_a}, nullptr})).dump();
  }
  auto script = backends::ScriptedBackend::from_exchange_log(log_path);
  Client image(named("image"), script);
  Client summarizer(named("summarizer"), script);
  Client video_a(named("video_a"), script);
  const auto replayed = to_json(caption_video(f.entry, small_params(), {&image, &summarizer, {&video_a}, nullptr}));
  EXPECT_EQ(replayed.dump(), recorded);
  EXPECT_TRUE(replayed["ok"].get<bool>());
}

TEST(CaptionVideo, NoTracksMeansNoMotionSection) {
  const auto f = four_frame_video(false);
  auto backend = std::make_shared<RecordingBackend>();
  Client image(named("image"), std::make_shared<backends::DigestBackend>());
  Client summarizer(named("summarizer"), backend);
  Client video(named("video"), std::make_shared<backends::DigestBackend>());
  const auto bundle = caption_video(f.entry, small_params(), {&image, &summarizer, {&video}, nullptr});
  ASSERT_TRUE(bundle.ok()) << bundle.error;
  EXPECT_TRUE(bundle.motion_captions.empty());
  ASSERT_EQ(backend->requests.size(), 2u);
  EXPECT_EQ(backend->requests[1].prompt_parts[1].find("Motion Caption"), std::string::npos);
}

TEST(CaptionVideo, NoVideoBackendsFailsAtMixture) {
  const auto f = four_frame_video(false);
  MockSet mocks;
  const auto bundle = caption_video(f.entry, small_params(), {&mocks.image, &mocks.summarizer, {}, nullptr});
  EXPECT_FALSE(bundle.ok());
  EXPECT_EQ(bundle.failed_stage, "mixture");
  EXPECT_EQ(bundle.chain_captions.size(), 4u);
  EXPECT_FALSE(bundle.image_level_summary.empty());
}

TEST(CaptionVideo, VideoLevelPromptAndAttachment) {
  auto f = four_frame_video(false);
  std::ofstream(f.dir / "clip.mp4") << "not really a video";
  f.entry.video = f.dir / "clip.mp4";
  auto backend = std::make_shared<RecordingBackend>();
  Client image(named("image"), std::make_shared<backends::DigestBackend>());
  Client summarizer(named("summarizer"), std::make_shared<backends::DigestBackend>());
  Client video(named("video"), backend);
  const auto bundle = caption_video(f.entry, small_params(), {&image, &summarizer, {&video}, nullptr});
  ASSERT_TRUE(bundle.ok()) << bundle.error;
  ASSERT_EQ(backend->requests.size(), 1u);
  EXPECT_EQ(backend->requests[0].prompt_parts[0],
            "Please describe the visual and narrative elements of the video in detail, particularly the motion "
            "behavior");
  ASSERT_EQ(backend->requests[0].attachments.size(), 1u);
  EXPECT_EQ(backend->requests[0].attachments[0].kind, Attachment::Kind::kVideo);
  EXPECT_EQ(backend->requests[0].attachments[0].ref, "clip/clip.mp4");
}

TEST(CaptionVideo, MissingFramesFailAtPlan) {
  auto f = four_frame_video(false);
  f.entry.frames_dir = f.dir / "nope";
  MockSet mocks;
  const auto bundle = caption_video(f.entry, small_params(), mocks.wiring());
  EXPECT_EQ(bundle.failed_stage, "plan");
  EXPECT_EQ(to_json(bundle)["failed_stage"], "plan");
}

}  // namespace
