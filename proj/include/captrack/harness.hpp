#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "captrack/evaluation.hpp"
#include "captrack/io.hpp"
#include "captrack/simulator.hpp"
#include "captrack/tracking.hpp"

namespace captrack {

struct RansacConfig {
  bool enabled = false;
  int iterations = 256;
  double threshold = 0.01;  // meters
};

struct ExperimentConfig {
  Category category = Category::kLaptop;
  std::size_t trajectories = 10;
  std::size_t frames = 100;
  std::size_t points = 1024;           // per observation
  std::size_t points_per_part = 2048;  // model surface samples
  std::optional<PerturbSpec> init;     // category preset when unset
  NoiseSpec noise;
  std::optional<MotionSpec> motion;    // category default when unset
  AspectPolicy aspect_policy = AspectPolicy::kBlend;
  RansacConfig ransac;
  bool rotation_projection = false;
  bool crop = true;
  double crop_factor = 1.2;
  bool gt_extents = false;
  std::uint64_t seed = 1;
  fs::path out = "out";
  std::size_t workers = 1;

  PerturbSpec init_spec() const { return init ? *init : perturb_preset(category); }
  MotionSpec motion_spec() const { return motion ? *motion : MotionSpec::for_category(category); }
  void validate() const;
};

// Keys mirror the field names; nested objects "init", "noise", "motion",
// "ransac". Unknown keys are rejected.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const fs::path& path);
std::string config_to_json(const ExperimentConfig& config);

// Model facts the tracker and the evaluator need, recorded next to the data.
// Joint specs are per trajectory since every instance has its own dimensions.
struct ManifestEntry {
  std::string file;
  std::vector<JointSpec> joints;
};

struct Manifest {
  Category category = Category::kLaptop;
  std::uint64_t seed = 0;
  std::size_t part_count = 0;
  std::optional<Vec3> symmetric_axis;
  PerturbSpec init;
  NoiseSpec noise;
  std::size_t frames = 0;
  std::vector<ManifestEntry> entries;
};

std::string manifest_json(const Manifest& manifest);
Manifest read_manifest(const fs::path& dir);

struct GeneratedTrajectory {
  ObjectModel model;
  std::vector<Observation> frames;
};

GeneratedTrajectory generate_trajectory(const ExperimentConfig& config, std::size_t index);

// One row of the robustness sweep: extra initialization draws and draws
// injected into every carried-forward estimate.
struct RobustnessSetting {
  std::string name;
  int init_draws = 0;
  int all_draws = 0;
};
std::vector<RobustnessSetting> robustness_settings();

PredictedRun track_trajectory(const std::vector<Observation>& frames, const Manifest& manifest,
                              const ExperimentConfig& config, std::size_t index,
                              const RobustnessSetting& setting = {"Orig", 0, 0});

MetricsReport evaluate_trajectory(const PredictedRun& predicted, const std::vector<Observation>& frames,
                                  const Manifest& manifest, std::size_t index, bool gt_extents);

std::string trajectory_file_name(std::size_t index);
std::string prediction_file_name(std::size_t index);

// Runs fn(0..n-1) on up to `workers` threads. The error of the lowest failing
// index is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

void cmd_generate(const ExperimentConfig& config);
void cmd_track(const ExperimentConfig& config, const fs::path& data_dir);
MetricsReport cmd_eval(const ExperimentConfig& config, const fs::path& data_dir, const fs::path& pred_dir);
std::vector<MetricsReport> cmd_robustness(const ExperimentConfig& config);

struct FitOptions {
  std::string estimator = "umeyama";  // umeyama | given-rot | symmetric | ransac
  ScaleFormula formula = ScaleFormula::kCentered;
  int ransac_iterations = 256;
  double ransac_threshold = 0.01;
  std::uint64_t seed = 1;
};

// Fitted transform and residual statistics as JSON.
std::string cmd_fit(const fs::path& correspondences, const FitOptions& options);

}  // namespace captrack
