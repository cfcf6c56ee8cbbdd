// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/capscore.hpp"

#include "wolf/prompts.hpp"

#include <fmt/format.h>

#include <cctype>
#include <charconv>
#include <numeric>
#include <random>
#include <set>

namespace wolf::capscore {

using backends::Client;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) return out;
    s.remove_prefix(pos + 1);
  }
}

std::string enumerate_captions(std::size_t n) {
  if (n == 1) return "caption 1";
  std::string out = "captions 1";
  for (std::size_t i = 2; i < n; ++i) out += fmt::format(", {}", i);
  return out + fmt::format(" and {}", n);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

void JudgeJob::validate() const {
  if (trim(ground_truth).empty()) throw Error(ErrorCode::kInvalidArgument, "judge job without ground truth");
  if (candidates.empty() || candidates.size() > kMaxCandidates) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("judge job needs 1..{} candidates, got {}", kMaxCandidates, candidates.size()));
  }
  if (scale_max != 1.0 && scale_max != 5.0) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("unsupported score scale {}", scale_max));
  }
  if (runs < 1) throw Error(ErrorCode::kInvalidArgument, "judge job needs at least one run");
}

std::string build_judge_prompt(double scale_max, std::string_view ground_truth,
                               std::span<const std::string> captions) {
  std::string prompt(prompts::kJudgeTemplate);
  replace_all(prompt, "{scale}", fmt::format("{:g}", scale_max));
  replace_all(prompt, "{captions}", enumerate_captions(captions.size()));
  prompt += "\n";
  // Captions are JSON-quoted so that no caption text can imitate a label.
  for (std::size_t i = 0; i < captions.size(); ++i) {
    prompt += fmt::format("\nCaption {}: {}", i + 1, json(captions[i]).dump());
  }
  prompt += fmt::format("\n\nGround truth caption: {}", json(std::string(ground_truth)).dump());
  return prompt;
}

std::string build_judge_prompt(const JudgeJob& job) {
  std::vector<std::string> captions;
  for (const auto& c : job.candidates) captions.push_back(c.caption);
  return build_judge_prompt(job.scale_max, job.ground_truth, captions);
}

std::string_view to_string(ParseFailure failure) {
  switch (failure) {
    case ParseFailure::kNonNumeric: return "non-numeric token";
    case ParseFailure::kGroupCount: return "wrong group count";
    case ParseFailure::kArity: return "wrong arity";
    case ParseFailure::kOutOfRange: return "out-of-range value";
  }
  return "parse failure";
}

JudgeScores parse_judge_response(std::string_view text, std::size_t n_candidates, double scale_max) {
  auto fail = [&](ParseFailure f, const std::string& detail) {
    throw JudgeParseError(f, fmt::format("judge reply rejected ({}): {}", to_string(f), detail));
  };
  const auto groups = split(trim(text), ';');
  std::vector<std::vector<double>> values;
  for (const auto& group : groups) {
    auto& row = values.emplace_back();
    for (auto token : split(group, ',')) {
      token = trim(token);
      double v = 0.0;
      const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (token.empty() || ec != std::errc() || end != token.data() + token.size() || !std::isfinite(v)) {
        fail(ParseFailure::kNonNumeric, fmt::format("'{}'", token));
      }
      row.push_back(v);
    }
  }
  if (values.size() != 2) fail(ParseFailure::kGroupCount, fmt::format("{} groups, expected 2", values.size()));
  for (const auto& row : values) {
    if (row.size() != n_candidates) {
      fail(ParseFailure::kArity, fmt::format("{} scores, expected {}", row.size(), n_candidates));
    }
    for (double v : row) {
      if (v < 0.0 || v > scale_max) fail(ParseFailure::kOutOfRange, fmt::format("{} not in [0, {}]", v, scale_max));
    }
  }
  return {std::move(values[0]), std::move(values[1])};
}

std::string render_judge_response(const JudgeScores& scores, int decimals) {
  auto row = [&](const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += fmt::format("{:.{}f}", v[i], decimals);
    }
    return out;
  };
  return row(scores.similarity) + ";" + row(scores.quality);
}

json to_json(const CapScoreResult& r) {
  json runs = json::array();
  for (const auto& run : r.raw_runs) runs.push_back({{"similarity", run.similarity}, {"quality", run.quality}});
  return {{"similarity", r.similarity},
          {"quality", r.quality},
          {"raw_runs", runs},
          {"spread", {{"similarity", r.similarity_spread}, {"quality", r.quality_spread}}},
          {"flagged", r.flagged},
          {"attempts", r.attempts},
          {"failed_runs", r.failed_runs},
          {"digests", r.digests}};
}

CapScoreResult evaluate(const JudgeJob& job, Client& judge, const EvaluateParams& params) {
  job.validate();
  const std::size_t n = job.candidates.size();
  std::mt19937_64 rng(params.seed);
  CapScoreResult result;
  std::string last_error;

  for (int run = 0; run < job.runs; ++run) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (params.shuffle) std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::string> captions;
    for (auto idx : order) captions.push_back(job.candidates[idx].caption);
    auto request = judge.make_request({build_judge_prompt(job.scale_max, job.ground_truth, captions)});
    request.temperature = params.temperature;

    int calls = 0;
    bool parsed = false;
    for (int attempt = 0; attempt <= params.max_parse_retries && !parsed; ++attempt) {
      ++calls;
      const auto reply = judge.complete(request);
      result.digests.push_back(reply.digest);
      try {
        const auto shown = parse_judge_response(reply.text, n, job.scale_max);
        JudgeScores scores{std::vector<double>(n), std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i) {
          scores.similarity[order[i]] = shown.similarity[i];
          scores.quality[order[i]] = shown.quality[i];
        }
        result.raw_runs.push_back(std::move(scores));
        parsed = true;
      } catch (const JudgeParseError& e) {
        last_error = e.what();
      }
    }
    result.attempts.push_back(calls);
    if (!parsed) ++result.failed_runs;
  }

  if (result.raw_runs.empty()) {
    throw Error(ErrorCode::kEvaluation, fmt::format("no judge run produced a parseable reply: {}", last_error));
  }

  const auto runs = static_cast<Eigen::Index>(result.raw_runs.size());
  Eigen::MatrixXd sim(runs, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd qual(runs, static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < runs; ++r) {
    sim.row(r) = Eigen::Map<const Eigen::RowVectorXd>(result.raw_runs[r].similarity.data(), n);
    qual.row(r) = Eigen::Map<const Eigen::RowVectorXd>(result.raw_runs[r].quality.data(), n);
  }
  auto to_vec = [](const Eigen::RowVectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  // Mean taken relative to the column minimum so identical runs return their value unchanged.
  auto mean = [](const Eigen::MatrixXd& m) -> Eigen::RowVectorXd {
    const Eigen::RowVectorXd low = m.colwise().minCoeff();
    return low + (m.rowwise() - low).colwise().mean();
  };
  result.similarity = to_vec(mean(sim));
  result.quality = to_vec(mean(qual));
  result.similarity_spread = to_vec(sim.colwise().maxCoeff() - sim.colwise().minCoeff());
  result.quality_spread = to_vec(qual.colwise().maxCoeff() - qual.colwise().minCoeff());
  const double worst = std::max(*std::max_element(result.similarity_spread.begin(), result.similarity_spread.end()),
                                *std::max_element(result.quality_spread.begin(), result.quality_spread.end()));
  result.flagged = worst > params.stability_threshold + 1e-9;
  return result;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  return pearson(Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                 Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())));
}

double human_correlation(std::span<const double> scores, const Eigen::MatrixXd& annotators) {
  if (annotators.cols() == 0) throw Error(ErrorCode::kInvalidArgument, "no annotator columns");
  const Eigen::VectorXd mean = annotators.rowwise().mean();
  return pearson(Eigen::Map<const Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size())), mean);
}

namespace {

// Offsets one past the terminal punctuation of each sentence.
std::vector<std::size_t> sentence_ends(std::string_view text) {
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      ends.push_back(i + 1);
    }
  }
  if (ends.empty() || !trim(text.substr(ends.back())).empty()) ends.push_back(text.size());
  return ends;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view caption) {
  const auto text = trim(caption);
  std::vector<std::string> out;
  std::size_t start = 0;
  for (auto end : sentence_ends(text)) {
    const auto s = trim(text.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
    start = end;
  }
  return out;
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::vector<AblationPoint> token_ablation(std::string_view caption, std::string_view ground_truth, Client& judge,
                                          double scale_max, int runs, const EvaluateParams& params) {
  const auto text = trim(caption);
  if (text.empty()) throw Error(ErrorCode::kInvalidArgument, "ablation needs a non-empty caption");
  std::vector<AblationPoint> points;
  std::size_t k = 0;
  for (auto end : sentence_ends(text)) {
    ++k;
    JudgeJob job{std::string(ground_truth), {{"prefix", std::string(text.substr(0, end))}}, scale_max, runs};
    const auto r = evaluate(job, judge, params);
    points.push_back({k, word_count(job.candidates[0].caption), r.similarity[0], r.quality[0]});
  }
  return points;
}

namespace {

std::set<std::string> word_set(std::string_view text) {
  std::set<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      words.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.insert(std::move(cur));
  return words;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

std::string LexicalJudgeBackend::send(const backends::ChatRequest& request) {
  request.validate();
  const std::string& prompt = request.prompt_parts.back();
  const auto scale_pos = prompt.find("from 0 to ");
  if (scale_pos == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "not a judge prompt");
  const double scale = std::stod(prompt.substr(scale_pos + 10));

  std::vector<std::string> captions;
  std::string truth;
  std::size_t pos = 0;
  while (pos < prompt.size()) {
    auto eol = prompt.find('\n', pos);
    if (eol == std::string::npos) eol = prompt.size();
    const std::string_view line(prompt.data() + pos, eol - pos);
    constexpr std::string_view kTruth = "Ground truth caption: ";
    if (line.rfind("Caption ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon != std::string_view::npos) captions.push_back(json::parse(line.substr(colon + 2)).get<std::string>());
    } else if (line.rfind(kTruth, 0) == 0) {
      truth = json::parse(line.substr(kTruth.size())).get<std::string>();
    }
    pos = eol + 1;
  }
  if (captions.empty()) throw Error(ErrorCode::kInvalidArgument, "judge prompt lists no captions");

  const auto truth_words = word_set(truth);
  JudgeScores unit;
  for (const auto& c : captions) {
    const auto words = word_set(c);
    std::size_t common = 0;
    for (const auto& w : words) common += truth_words.count(w);
    const std::size_t unite = words.size() + truth_words.size() - common;
    unit.similarity.push_back(round2(unite ? static_cast<double>(common) / static_cast<double>(unite) : 0.0));
    unit.quality.push_back(round2(words.empty() ? 0.0 : static_cast<double>(common) / static_cast<double>(words.size())));
  }
  if (scale == 1.0) return render_judge_response(unit);

  // Other scales: the unit score times the scale, printed losslessly.
  auto row = [&](const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += fmt::format("{:.17g}", v[i] * scale);
    }
    return out;
  };
  return row(unit.similarity) + ";" + row(unit.quality);
}

}  // namespace wolf::capscore
