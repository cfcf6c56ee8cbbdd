// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#include "wolf/cli.hpp"

#include "CLI11.hpp"
#include "wolf/error.hpp"
#include "wolf/harness.hpp"

#include <fmt/format.h>

#include <fstream>
#include <ostream>

namespace wolf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::string manifest;
  std::string backends;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 1;
  int run = 0;
  bool force = false;
  std::vector<std::string> scenes;
  double window = 0.0;
  std::string aggregator;
  std::string judge;
  int runs = 1;
  double scale = 1.0;
  std::string captions;
  std::string results;
  std::string log;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Run config (JSON)");
  cmd->add_option("--manifest", o.manifest, "Video manifest (JSONL)");
  cmd->add_option("--backends", o.backends, "Backend definitions (JSON)");
  cmd->add_option("-o,--out", o.out, "Output directory");
  cmd->add_option("--seed", o.seed, "Seed for every randomized choice");
  cmd->add_option("--workers", o.workers, "Videos processed in parallel")->check(CLI::PositiveNumber);
}

void add_judge(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--judge", o.judge, "Judge backend name");
  cmd->add_option("--runs", o.runs, "Judge runs per job")->check(CLI::PositiveNumber);
  cmd->add_option("--scale", o.scale, "Score scale (1 or 5)");
}

harness::RunConfig build_config(const CLI::App& cmd, const Overrides& o) {
  harness::RunConfig c = o.config.empty() ? harness::RunConfig{} : harness::load_run_config(o.config);
  auto given = [&](const char* name) { return cmd.get_option_no_throw(name) && cmd.count(name) > 0; };
  if (given("--manifest")) c.manifest = o.manifest;
  if (given("--backends")) c.backends = o.backends;
  if (given("--out")) c.output_dir = o.out;
  if (given("--seed")) c.seed = o.seed;
  if (given("--workers")) c.workers = o.workers;
  if (given("--run")) c.run = o.run;
  if (given("--force")) c.force = o.force;
  if (given("--scene")) c.scenes.assign(o.scenes.begin(), o.scenes.end());
  if (given("--window")) c.window = o.window;
  if (given("--aggregator")) c.aggregator_backend = o.aggregator;
  if (given("--judge")) c.judge_backend = o.judge;
  if (given("--runs")) c.judge_runs = o.runs;
  if (given("--scale")) c.judge_scale = o.scale;
  return c;
}

std::unique_ptr<harness::BackendRegistry> make_registry(const harness::RunConfig& c, const std::string& command) {
  if (c.backends.empty()) throw Error(ErrorCode::kInvalidArgument, "no backends file given (--backends)");
  fs::create_directories(c.output_dir);
  auto log = std::make_shared<backends::ExchangeLog>(c.output_dir / fmt::format("exchanges-{}.jsonl", command));
  return std::make_unique<harness::BackendRegistry>(harness::load_backend_configs(c.backends), log, c.seed);
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

int report(const std::string& command, const harness::RunSummary& s, std::ostream& out, std::ostream& err) {
  for (const auto& m : s.messages) err << command << ": " << m << '\n';
  out << fmt::format("{}: {} written, {} skipped, {} failed\n", command, s.written, s.skipped, s.failures);
  return s.failures == 0 ? 0 : 1;
}

std::map<std::string, std::string> load_captions(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = json::parse(line);
    out[j.at("video_id").get<std::string>()] = j.at("caption").get<std::string>();
  }
  return out;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video captioning, driving-scene annotation and caption scoring"};
  app.require_subcommand(1);
  Overrides o;

  auto* annotate = app.add_subcommand("annotate", "Annotate driving scenes and render ground-truth captions");
  add_common(annotate, o);
  annotate->add_option("--scene", o.scenes, "Scene JSON file (repeatable)");
  annotate->add_option("--window", o.window, "Window length in seconds, 0 for whole scenes");
  annotate->add_option("--aggregator", o.aggregator, "Text backend that rewrites the template description");

  auto* caption = app.add_subcommand("caption", "Caption every manifest video with the full pipeline");
  add_common(caption, o);

  auto* benchmark = app.add_subcommand("benchmark", "Caption with every method and score jointly");
  add_common(benchmark, o);
  add_judge(benchmark, o);
  benchmark->add_option("--run", o.run, "Run index stored with each record");
  benchmark->add_flag("--force", o.force, "Replace records that already exist");

  auto* ablate = app.add_subcommand("ablate", "Score sentence prefixes of captions (CSV)");
  add_common(ablate, o);
  add_judge(ablate, o);
  ablate->add_option("--captions", o.captions, "JSONL of {video_id, caption}; default is the first method");

  auto* leaderboard = app.add_subcommand("leaderboard", "Render the results store as markdown and CSV");
  add_common(leaderboard, o);
  leaderboard->add_option("--results", o.results, "Results store (default <out>/results.jsonl)");

  auto* replay = app.add_subcommand("replay", "Verify an exchange log replays byte for byte");
  replay->add_option("--log", o.log, "Exchange log (JSONL)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*replay) return report("replay", harness::replay_log(o.log), out, err);

    CLI::App* cmd = app.get_subcommands().front();
    const auto config = build_config(*cmd, o);
    const std::string name = cmd->get_name();

    if (*annotate) {
      require(!config.scenes.empty(), "annotate needs at least one scene (--scene)");
      std::unique_ptr<harness::BackendRegistry> registry;
      if (!config.backends.empty()) registry = make_registry(config, name);
      const auto result = harness::annotate_scenes(config, registry.get());
      fs::create_directories(config.output_dir);
      write_text_file(config.output_dir / "annotations.json", json(result.annotations).dump(2) + "\n");
      std::string lines;
      for (const auto& c : result.captions) lines += c.dump() + "\n";
      write_text_file(config.output_dir / "ground_truth.jsonl", lines);
      return report(name, result.summary, out, err);
    }
    if (*leaderboard) {
      const fs::path path = o.results.empty() ? config.output_dir / "results.jsonl" : fs::path(o.results);
      harness::ResultsStore store(path);
      const auto board = harness::emit_leaderboard(store.records());
      fs::create_directories(config.output_dir);
      write_text_file(config.output_dir / "leaderboard.md", board.markdown);
      write_text_file(config.output_dir / "leaderboard.csv", board.csv);
      if (!board.warning.empty()) err << "leaderboard: " << board.warning << '\n';
      out << board.markdown;
      return 0;
    }

    require(!config.manifest.empty(), "no manifest given (--manifest)");
    auto registry = make_registry(config, name);
    if (*caption) return report(name, harness::run_caption(config, *registry), out, err);
    if (*benchmark) return report(name, harness::run_benchmark(config, *registry), out, err);
    if (*ablate) {
      const auto captions = o.captions.empty() ? std::map<std::string, std::string>{} : load_captions(o.captions);
      return report(name, harness::run_ablation(config, *registry, captions), out, err);
    }
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("wolf");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace wolf::cli
