#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "captrack/geometry.hpp"

namespace captrack {

enum class JointKind { kRevolute, kPrismatic };

// One-DoF joint. Axis and pivot live in the parent's normalized frame; `rest`
// maps child normalized coordinates to parent normalized coordinates at state
// zero. Revolute states are radians, prismatic states are meters in the
// camera frame.
struct JointSpec {
  JointKind kind = JointKind::kRevolute;
  Vec3 axis = Vec3::UnitX();
  Vec3 pivot = Vec3::Zero();
  int parent = 0;
  int child = 1;
  double lower = 0.0;
  double upper = 0.0;
  Sim3 rest;
};

struct PartModel {
  std::string name;
  PointCloud canonical_points;  // centered, tight box diagonal 1
  Vec3 aspect;                  // unit box extents
};

struct ObjectModel {
  std::string category;
  std::vector<PartModel> parts;
  std::vector<JointSpec> joints;
  int root = 0;
  std::optional<Vec3> symmetric_axis;
  double nominal_scale = 1.0;  // physical diagonal of the root part, meters

  std::size_t part_count() const { return parts.size(); }
};

// Joint motion in the parent's normalized frame.
Sim3 joint_motion(const JointSpec& joint, double state, double parent_scale);

// Root part gets root_pose; every child is parent * motion(state) * rest.
std::vector<Sim3> forward_kinematics(const ObjectModel& model, const Sim3& root_pose,
                                     std::span<const double> joint_states);

}  // namespace captrack
