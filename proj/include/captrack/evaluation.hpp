#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "captrack/geometry.hpp"
#include "captrack/kinematics.hpp"
#include "captrack/tracking.hpp"

namespace captrack {

inline constexpr double kRotationThresholdDeg = 5.0;
inline constexpr double kTranslationThresholdM = 0.05;

// Free box: center t, rotation r, full extents d.
struct OrientedBox {
  Pose9 pose;

  double volume() const { return pose.d.prod(); }
  std::array<Vec3, 8> corners() const;
};

// Degrees. Spin about the symmetry axis is ignored when one is given.
double rotation_error_metric(const Rot3& pred, const Rot3& gt, const std::optional<Vec3>& symmetric_axis = {});

bool within_5deg5cm(double r_err_deg, double t_err_m);

// Fraction of (pred, gt) pairs with rotation error < 5 degrees and
// translation error < 5 cm.
double accuracy_5deg5cm(std::span<const Sim3> preds, std::span<const Sim3> gts,
                        const std::optional<Vec3>& symmetric_axis = {});

// Volume of the intersection of two oriented boxes; exact up to rounding.
double intersection_volume(const OrientedBox& a, const OrientedBox& b);
double oriented_iou3d(const OrientedBox& a, const OrientedBox& b);

struct JointStateResult {
  double value = 0.0;     // radians (revolute) or meters (prismatic)
  bool flagged = false;   // relative motion does not match the joint well
  double deviation_deg = 0.0;
};

// Recovers the joint state from parent and child part poses.
JointStateResult joint_state(const Sim3& parent, const Sim3& child, const JointSpec& joint,
                             double tolerance_deg = 15.0);

// Box corners (or the two points where the symmetry axis leaves the box) for
// a unit-diagonal box with the given aspect.
std::vector<Vec3> loss_keypoints(const Vec3& gt_aspect, const std::optional<Vec3>& symmetric_axis = {});

double corner_loss(const Sim3& pred, const Sim3& gt, const Vec3& gt_aspect,
                   const std::optional<Vec3>& symmetric_axis = {});

// Pairwise-distance term plus the radial/height term for y-symmetric shapes.
double symmetric_coord_loss(std::span<const Vec3> pred, std::span<const Vec3> gt);

struct PartFrameMetrics {
  bool lost = false;
  double r_err_deg = 0.0;
  double t_err_cm = 0.0;
  double iou = 0.0;
  bool success = false;
};

struct JointFrameMetrics {
  JointKind kind = JointKind::kRevolute;
  bool valid = false;  // false when either part is lost
  bool flagged = false;
  double error = 0.0;  // degrees (revolute) or centimeters (prismatic)
};

struct FrameMetrics {
  std::size_t frame = 0;
  bool evaluated = false;  // false when every part is lost
  double acc = 0.0;
  double iou = 0.0;
  double r_err_deg = 0.0;
  double t_err_cm = 0.0;
  std::optional<double> theta_err_deg;
  std::optional<double> d_err_cm;
  std::size_t lost_parts = 0;
  std::vector<PartFrameMetrics> parts;
  std::vector<JointFrameMetrics> joints;
};

struct MetricsReport {
  double acc_5deg5cm = 0.0;  // fraction
  double mean_iou = 0.0;
  double r_err_deg = 0.0;
  double t_err_cm = 0.0;
  std::optional<double> theta_err_deg;
  std::optional<double> d_err_cm;
  std::size_t lost_frames = 0;  // frames with at least one lost part
  std::size_t evaluated_frames = 0;
  std::vector<FrameMetrics> frames;
};

struct RunMetadata {
  std::optional<Vec3> symmetric_axis;
  std::vector<JointSpec> joints;
  bool gt_extents = false;      // use ground-truth box extents for the predicted box
  std::size_t first_frame = 1;  // frame 0 is the initialization
};

// predicted[t][j] and gt[t][j]: frame t, part j.
MetricsReport evaluate_run(const std::vector<std::vector<PartEstimate>>& predicted,
                           const std::vector<std::vector<Pose9>>& gt, const RunMetadata& meta);

// Mean over trajectories of the per-trajectory means; lost frames are summed.
MetricsReport aggregate(std::span<const MetricsReport> reports);

}  // namespace captrack
