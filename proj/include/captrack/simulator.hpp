#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "captrack/geometry.hpp"
#include "captrack/kinematics.hpp"
#include "captrack/perturbation.hpp"
#include "captrack/tracking.hpp"

namespace captrack {

enum class Category { kLaptop, kGlasses, kScissors, kDrawers, kBox, kCylinder };

Category parse_category(std::string_view name);
std::string_view to_string(Category category);
bool is_articulated(Category category);

// Initialization / training jitter per category: the rigid preset for box and
// cylinder, the per-category articulated values otherwise.
PerturbSpec perturb_preset(Category category);

// Average joint-state change over a 100-frame sequence, per joint of the
// category (radians for revolute, meters for prismatic).
double joint_change_per_100_frames(Category category);

// Procedural model built from cuboid or cylinder primitives. Every part is
// normalized to its own unit-diagonal frame; the seed varies the dimensions.
ObjectModel make_primitive_model(Category category, std::uint64_t seed, std::size_t points_per_part);

struct MotionSpec {
  double rot_cap_deg = 1.0;    // per-frame root rotation bound
  double trans_cap = 0.005;    // per-frame root translation bound, meters
  double joint_change = 0.0;   // total per joint over 100 frames (radians or meters)
  double distance = 1.0;       // initial depth of the object, meters

  static MotionSpec for_category(Category category);
  static MotionSpec still() { return MotionSpec{0.0, 0.0, 0.0, 1.0}; }
};

struct TrajectoryFrame {
  Sim3 root_pose;
  std::vector<double> joint_states;
};

std::vector<TrajectoryFrame> sample_trajectory(const ObjectModel& model, std::size_t length,
                                               const MotionSpec& motion, std::uint64_t seed);

// Partial view seen from `viewpoint` (camera frame): a point survives when its
// direction from the part center faces the viewpoint. Farthest-point sampling
// reduces the survivors to n_points. Carries ground truth.
Observation render_observation(const ObjectModel& model, std::span<const Sim3> part_poses,
                               const Vec3& viewpoint, std::size_t n_points);

// Greedy farthest-point sampling; returns indices in selection order.
std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t count);

struct NoiseSpec {
  double coord_sigma = 0.0;       // normalized units
  double rot_sigma_deg = 0.0;     // degrees
  double outlier_fraction = 0.0;  // [0, 1]
  double seg_error_rate = 0.0;    // [0, 1]
  std::uint64_t seed = 0;
  bool symmetric_spin = false;    // spin coordinates about the symmetry axis per frame

  void validate() const;
};

std::vector<Rot3> oracle_rotation_predictor(const PredictorQuery& query, int part, const Sim3& estimate,
                                            const NoiseSpec& noise);
PointCloud oracle_axis_predictor(const PredictorQuery& query, int part, const Sim3& estimate,
                                 const Vec3& axis, const NoiseSpec& noise);
CoordinatePrediction oracle_coordinate_predictor(const PredictorQuery& query, std::size_t part_count,
                                                 const NoiseSpec& noise,
                                                 const std::optional<Vec3>& symmetric_axis = std::nullopt);

// Predictor backed by the oracles above.
class OraclePredictor final : public Predictor {
 public:
  OraclePredictor(std::size_t part_count, std::optional<Vec3> symmetric_axis, NoiseSpec noise);

  std::vector<Rot3> predict_rotations(int part, const PredictorQuery& query, const Sim3& canonicalizer) override;
  PointCloud predict_axis_endpoints(int part, const PredictorQuery& query, const Sim3& canonicalizer) override;
  CoordinatePrediction predict_coordinates(const PredictorQuery& query) override;

 private:
  std::size_t part_count_;
  std::optional<Vec3> symmetric_axis_;
  NoiseSpec noise_;
};

}  // namespace captrack
