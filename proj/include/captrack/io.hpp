#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "captrack/evaluation.hpp"
#include "captrack/fitting.hpp"
#include "captrack/kinematics.hpp"
#include "captrack/tracking.hpp"

namespace captrack {

namespace fs = std::filesystem;

// 17 significant digits, round-trips every double.
std::string format_double(double v);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);

// Trajectory lines: {frame, points, gt: [{d,R,T}], labels, nocs}.
std::string observation_line(std::uint64_t frame, const Observation& obs);
void write_trajectory(const fs::path& path, std::span<const Observation> frames);
std::vector<Observation> read_trajectory(const fs::path& path);

// Prediction lines: {frame, parts: [{d,R,T,lost}]}.
using PredictedRun = std::vector<std::vector<PartEstimate>>;
std::string prediction_line(std::uint64_t frame, std::span<const PartEstimate> parts);
void write_predictions(const fs::path& path, const PredictedRun& run);
PredictedRun read_predictions(const fs::path& path);

// Full per-frame series when with_frames is set.
std::string metrics_json(const MetricsReport& report, bool with_frames);
std::string metrics_csv_header();
std::string metrics_csv_row(std::string_view setting, const MetricsReport& report);

// {"camera": [[x,y,z]...], "normalized": [[x,y,z]...], "rotation": 3x3, "axis": [x,y,z]}
struct CorrespondenceFile {
  Correspondences corr;
  std::optional<Rot3> rotation;
  std::optional<Vec3> axis;
};
CorrespondenceFile read_correspondences(const fs::path& path);

}  // namespace captrack
