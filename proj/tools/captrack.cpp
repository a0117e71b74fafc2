#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "captrack/error.hpp"
#include "captrack/harness.hpp"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDegenerate = 4;

int exit_code(captrack::ErrorKind kind) {
  using captrack::ErrorKind;
  switch (kind) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kIo:
    case ErrorKind::kParse: return kExitIo;
    case ErrorKind::kDegenerate:
    case ErrorKind::kNonPositiveScale:
    case ErrorKind::kNoConsensus:
    case ErrorKind::kLostTrack: return kExitDegenerate;
    default: return kExitOther;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("captrack");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("CAPTRACK_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::optional<std::string> category;
  std::optional<std::size_t> trajectories;
  std::optional<std::size_t> frames;

  captrack::ExperimentConfig resolve() const {
    captrack::ExperimentConfig c = config.empty() ? captrack::ExperimentConfig{} : captrack::load_config(config);
    if (category) c.category = captrack::parse_category(*category);
    if (seed) c.seed = *seed;
    if (out) c.out = *out;
    if (workers) c.workers = *workers;
    if (trajectories) c.trajectories = *trajectories;
    if (frames) c.frames = *frames;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Category-level 9DoF pose tracking with synthetic oracle predictors."};
  app.footer(
      "Exit codes: 0 success, 1 other error, 2 configuration error, 3 IO or parse error,\n"
      "4 degenerate input or fatal lost track. CAPTRACK_LOG sets the log level\n"
      "(trace, debug, info, warn, err, off).");
  app.require_subcommand(1);
  app.fallthrough();

  Overrides ov;
  app.add_option("--config", ov.config, "Experiment config (JSON)");
  app.add_option("--seed", ov.seed, "Master seed");
  app.add_option("--out", ov.out, "Output directory");
  app.add_option("--workers", ov.workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* generate = app.add_subcommand("generate", "Write synthetic trajectories and a manifest");
  auto* robustness = app.add_subcommand("robustness", "Run the Orig / Init xm / All xm sweep");
  for (auto* sub : {generate, robustness}) {
    sub->add_option("--category", ov.category, "laptop|glasses|scissors|drawers|box|cylinder");
    sub->add_option("--trajectories", ov.trajectories, "Trajectory count");
    sub->add_option("--frames", ov.frames, "Frames per trajectory");
  }

  std::string data_dir, pred_dir;
  auto* track = app.add_subcommand("track", "Track generated trajectories");
  track->add_option("--data", data_dir, "Directory written by generate")->required();
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--data", data_dir, "Directory written by generate")->required();
  eval->add_option("--pred", pred_dir, "Directory written by track")->required();

  std::string fit_file, formula = "centered";
  captrack::FitOptions fit_options;
  auto* fit = app.add_subcommand("fit", "Fit a transform to a correspondence file");
  fit->add_option("file", fit_file, "Correspondence JSON")->required();
  fit->add_option("--estimator", fit_options.estimator, "umeyama|given-rot|symmetric|ransac")
      ->check(CLI::IsMember({"umeyama", "given-rot", "symmetric", "ransac"}));
  fit->add_option("--ransac-iters", fit_options.ransac_iterations, "RANSAC iterations")->check(CLI::PositiveNumber);
  fit->add_option("--ransac-thresh", fit_options.ransac_threshold, "RANSAC inlier threshold (meters)")
      ->check(CLI::PositiveNumber);
  fit->add_option("--formula", formula, "Scale formula for given-rot/symmetric/ransac: ratio|centered")
      ->check(CLI::IsMember({"ratio", "centered"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (generate->parsed()) {
      captrack::cmd_generate(ov.resolve());
    } else if (track->parsed()) {
      captrack::cmd_track(ov.resolve(), data_dir);
    } else if (eval->parsed()) {
      const captrack::MetricsReport r = captrack::cmd_eval(ov.resolve(), data_dir, pred_dir);
      std::cout << captrack::metrics_csv_header() << captrack::metrics_csv_row("all", r);
    } else if (robustness->parsed()) {
      const captrack::ExperimentConfig c = ov.resolve();
      const auto rows = captrack::cmd_robustness(c);
      std::cout << captrack::metrics_csv_header();
      const auto settings = captrack::robustness_settings();
      for (std::size_t i = 0; i < rows.size(); ++i) std::cout << captrack::metrics_csv_row(settings[i].name, rows[i]);
    } else if (fit->parsed()) {
      fit_options.formula = formula == "ratio" ? captrack::ScaleFormula::kRatio : captrack::ScaleFormula::kCentered;
      if (ov.seed) fit_options.seed = *ov.seed;
      std::cout << captrack::cmd_fit(fit_file, fit_options);
    }
  } catch (const captrack::Error& e) {
    spdlog::error("{} ({})", e.what(), captrack::to_string(e.kind()));
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitOther;
  }
  return 0;
}
