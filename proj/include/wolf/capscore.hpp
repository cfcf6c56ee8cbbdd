// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"
#include "wolf/backends.hpp"
#include "wolf/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wolf::capscore {

struct Candidate {
  std::string name;
  std::string caption;
};

struct JudgeJob {
  std::string ground_truth;
  std::vector<Candidate> candidates;
  double scale_max = 1.0;
  int runs = 1;

  /// 1..9 candidates, scale 1 or 5, runs >= 1, non-empty ground truth.
  void validate() const;
};

inline constexpr std::size_t kMaxCandidates = 9;

/// Prompt for the given caption texts in the given order.
std::string build_judge_prompt(double scale_max, std::string_view ground_truth,
                               std::span<const std::string> captions);
std::string build_judge_prompt(const JudgeJob& job);

struct JudgeScores {
  std::vector<double> similarity;
  std::vector<double> quality;
};

enum class ParseFailure { kNonNumeric, kGroupCount, kArity, kOutOfRange };

std::string_view to_string(ParseFailure failure);

class JudgeParseError : public Error {
 public:
  JudgeParseError(ParseFailure failure, const std::string& message)
      : Error(ErrorCode::kJudgeParse, message), failure_(failure) {}
  ParseFailure failure() const { return failure_; }

 private:
  ParseFailure failure_;
};

/// Strict reader for "s1,...,sn;q1,...,qn". Throws JudgeParseError.
JudgeScores parse_judge_response(std::string_view text, std::size_t n_candidates, double scale_max);

/// Renders scores in the format the judge is asked to produce.
std::string render_judge_response(const JudgeScores& scores, int decimals = 2);

struct EvaluateParams {
  std::uint64_t seed = 0;
  int max_parse_retries = 2;
  double stability_threshold = 0.05;
  // Shuffle candidate order per run; scores are mapped back before averaging.
  bool shuffle = true;
  // Sampling temperature sent with every judge request.
  double temperature = 0.0;
};

struct CapScoreResult {
  std::vector<double> similarity;
  std::vector<double> quality;
  // Per successful run, in candidate order.
  std::vector<JudgeScores> raw_runs;
  std::vector<double> similarity_spread;
  std::vector<double> quality_spread;
  bool flagged = false;
  // Judge calls per run, parse retries included.
  std::vector<int> attempts;
  int failed_runs = 0;
  std::vector<std::string> digests;
};

nlohmann::json to_json(const CapScoreResult& result);

CapScoreResult evaluate(const JudgeJob& job, backends::Client& judge, const EvaluateParams& params = {});

/// Sample Pearson correlation. Throws kUndefinedCorrelation for constant input.
template <typename DerivedX, typename DerivedY>
double pearson(const Eigen::MatrixBase<DerivedX>& xs, const Eigen::MatrixBase<DerivedY>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "pearson needs two equal-length series of at least 2 values");
  }
  const Eigen::ArrayXd x = xs.derived().template cast<double>().reshaped().array();
  const Eigen::ArrayXd y = ys.derived().template cast<double>().reshaped().array();
  const Eigen::ArrayXd dx = x - x.mean();
  const Eigen::ArrayXd dy = y - y.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::kUndefinedCorrelation, "correlation undefined for a constant series");
  }
  const double r = (dx * dy).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double pearson(std::span<const double> xs, std::span<const double> ys);

/// Correlation of metric scores with the per-item mean over annotators.
/// `annotators` has one row per item and one column per annotator.
double human_correlation(std::span<const double> scores, const Eigen::MatrixXd& annotators);

/// Sentences ending in '.', '!' or '?' followed by whitespace or the end.
std::vector<std::string> split_sentences(std::string_view caption);

std::size_t word_count(std::string_view text);

struct AblationPoint {
  std::size_t sentences = 0;
  std::size_t token_count = 0;
  double similarity = 0.0;
  double quality = 0.0;
};

std::vector<AblationPoint> token_ablation(std::string_view caption, std::string_view ground_truth,
                                          backends::Client& judge, double scale_max = 1.0, int runs = 1,
                                          const EvaluateParams& params = {});

/// Deterministic offline judge: similarity is the word-set Jaccard index
/// against the ground truth, quality the share of caption words found in it.
/// Replies in the requested format so the full scoring path can run without
/// a model.
class LexicalJudgeBackend : public backends::Backend {
 public:
  std::string send(const backends::ChatRequest& request) override;
  bool measures_latency() const override { return false; }
};

}  // namespace wolf::capscore
