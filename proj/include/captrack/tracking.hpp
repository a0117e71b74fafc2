#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "captrack/fitting.hpp"
#include "captrack/geometry.hpp"
#include "captrack/kinematics.hpp"
#include "captrack/perturbation.hpp"

namespace captrack {

struct PartEstimate {
  Sim3 sim;
  Vec3 aspect = Vec3::Ones().normalized();
  bool lost = false;

  Pose9 pose() const { return Pose9::from_sim(sim, aspect); }
};

struct TrackerState {
  std::vector<PartEstimate> parts;
  std::uint64_t frame_index = 0;
};

// One depth frame. The ground-truth fields are filled by the simulator only;
// oracle predictors read them, the tracker never does.
struct Observation {
  PointCloud points;
  std::vector<int> labels;   // part index per point, -1 for background
  PointCloud nocs;           // normalized coordinates per point
  std::vector<Pose9> gt_parts;

  bool has_ground_truth() const {
    return labels.size() == points.size() && nocs.size() == points.size() && !gt_parts.empty();
  }
};

// What a predictor sees: a canonicalized cloud plus the index of every point
// in the original observation.
struct PredictorQuery {
  const Observation& observation;
  std::span<const Vec3> canonical;
  std::span<const std::size_t> source_index;
  std::uint64_t frame = 0;
};

struct CoordinatePrediction {
  std::vector<int> labels;  // per query point, -1 when assigned to no part
  PointCloud coords;
};

// Stand-in for the rotation and coordinate networks.
class Predictor {
 public:
  virtual ~Predictor() = default;

  // Per-point delta rotations of `part`, for a cloud canonicalized by `canonicalizer`.
  virtual std::vector<Rot3> predict_rotations(int part, const PredictorQuery& query,
                                              const Sim3& canonicalizer) = 0;
  // Per-point end points of the rotated symmetry axis (symmetric categories).
  virtual PointCloud predict_axis_endpoints(int part, const PredictorQuery& query,
                                            const Sim3& canonicalizer) = 0;
  // Segmentation and normalized coordinates, queried on the first part's canonical cloud.
  virtual CoordinatePrediction predict_coordinates(const PredictorQuery& query) = 0;
};

enum class AspectPolicy { kHoldInitial, kPerFrame, kBlend };

struct TrackerOptions {
  AspectPolicy aspect_policy = AspectPolicy::kBlend;
  double aspect_blend = 0.9;  // weight kept on the previous aspect under kBlend
  bool crop = true;
  double crop_factor = 1.2;
  std::optional<Vec3> symmetric_axis;
  ScaleFormula scale_formula = ScaleFormula::kCentered;
  std::optional<RansacParams> ransac;
  // Non-empty enables the post-step that snaps child rotations onto their joint.
  std::vector<JointSpec> rotation_projection;
};

// (prev.r)^-1 (x - prev.t) / prev.s for every point.
PointCloud canonicalize(std::span<const Vec3> x, const Sim3& prev);

// s' = s * ds, R' = R * dR, T' = s R dT + T.
Sim3 recover_pose(const Sim3& prev, const Sim3& delta);
Sim3 delta_of(const Sim3& prev, const Sim3& current);

// Unit aspect ratio from the per-axis extent of normalized coordinates.
Vec3 estimate_aspect_ratio(std::span<const Vec3> y);

struct Crop {
  PointCloud points;
  std::vector<std::size_t> indices;
};

// Points within `radius` of `center`; throws kLostTrack when nothing is left.
Crop crop_ball(std::span<const Vec3> scene, const Vec3& center, double radius);

struct Ball {
  Vec3 center;
  double radius;
};

// One ball around the whole object, sized from the previous estimates.
Ball tracking_ball(const TrackerState& state, double factor);

TrackerState track_step(const TrackerState& state, const Observation& obs, Predictor& predictor,
                        const TrackerOptions& options);

// Replaces each joint child's rotation with the nearest rotation consistent
// with the joint (about the axis for revolute, rigid for prismatic).
void project_joint_rotations(std::vector<PartEstimate>& parts, std::span<const JointSpec> joints);

// Perturbs every ground-truth part pose; part j draws from its own stream.
TrackerState init_tracker(std::span<const Pose9> gt, const PerturbSpec& perturb, std::uint64_t seed);

}  // namespace captrack
