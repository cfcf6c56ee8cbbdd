// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

// Every prompt the pipeline sends, in one place. Tests assert these bytes;
// bump kPromptVersion whenever any of them changes, since recorded
// transcripts are keyed by request digest.
namespace wolf::prompts {

inline constexpr int kPromptVersion = 1;

/// First frame of the cascade.
inline constexpr std::string_view kCascadeBase =
    "Describe this frame. Please generate detailed scene-level information and object "
    "locations. Report the location of each object as its name followed by the center of "
    "its bounding box in square brackets as [row, col] pixel coordinates.";

/// Header in front of the previous frame's caption for frames 2..N.
inline constexpr std::string_view kCascadePrevious = "Caption of the previous frame:\n";

inline constexpr std::string_view kSummarizeChain =
    "Summarize all the captions to describe the video with accurate temporal information";

inline constexpr std::string_view kMixture =
    "Please summarize on the visual and narrative elements of the video in detail from "
    "descriptions from Image Models (Image-level Caption and Motion Caption) and descriptions "
    "from Video Models (Video-level Caption)";

/// Sent to every video-level backend in the pipeline.
inline constexpr std::string_view kVideoLevel =
    "Please describe the visual and narrative elements of the video in detail, particularly "
    "the motion behavior";

/// Sent to every compared captioner in benchmark runs.
inline constexpr std::string_view kComparison =
    "elaborate on the visual and narrative elements of the video in detail, particularly the "
    "motion behavior";

inline constexpr std::string_view kMotionRewrite =
    "Rewrite the following object movement as one short, natural sentence. Keep the object "
    "name and the direction of motion and add nothing else.";

inline constexpr std::string_view kSceneRewrite =
    "Rewrite the following driving-scene annotation as a fluent, human-like description of "
    "the video. Keep every stated fact and add nothing that is not stated.";

// Judge instruction. {scale} and {captions} are substituted; {captions} is
// "caption 1", "captions 1 and 2", "captions 1, 2, 3, 4 and 5", ...
inline constexpr std::string_view kJudgeTemplate =
    "Can you give a score (two decimal places) from 0 to {scale} for {captions}, indicating "
    "which one is closer to the ground truth caption (metric 1) and which contains fewer "
    "hallucinations and less misalignment (metric 2)? Please output only the scores of each "
    "metric separated only by a semicolon. For each metric, please output only the scores of "
    "{captions} separated by commas, in order—no text in the output.";

}  // namespace wolf::prompts
