#include "captrack/kinematics.hpp"

#include <string>

#include "captrack/error.hpp"

namespace captrack {

Sim3 joint_motion(const JointSpec& joint, double state, double parent_scale) {
  if (joint.kind == JointKind::kRevolute) {
    const Rot3 r = Rot3::about_axis(joint.axis, state);
    return Sim3{1.0, r, joint.pivot - r * joint.pivot};
  }
  return Sim3{1.0, Rot3::identity(), (state / parent_scale) * joint.axis};
}

std::vector<Sim3> forward_kinematics(const ObjectModel& model, const Sim3& root_pose,
                                     std::span<const double> joint_states) {
  const std::size_t m = model.part_count();
  if (m == 0) throw Error(ErrorKind::kInvalidArgument, "forward_kinematics: model has no parts");
  if (joint_states.size() != model.joints.size()) {
    throw Error(ErrorKind::kInvalidArgument, "forward_kinematics: expected " +
                                                 std::to_string(model.joints.size()) + " joint states");
  }
  validate(root_pose);
  for (std::size_t k = 0; k < model.joints.size(); ++k) {
    const JointSpec& joint = model.joints[k];
    if (!(joint_states[k] >= joint.lower && joint_states[k] <= joint.upper)) {
      throw Error(ErrorKind::kOutOfLimits, "forward_kinematics: joint " + std::to_string(k) + " state " +
                                               std::to_string(joint_states[k]) + " outside limits");
    }
  }

  std::vector<Sim3> poses(m);
  std::vector<bool> placed(m, false);
  poses.at(static_cast<std::size_t>(model.root)) = root_pose;
  placed[static_cast<std::size_t>(model.root)] = true;
  // Joints may be listed in any order; resolve parents first.
  std::size_t remaining = model.joints.size();
  std::vector<bool> done(model.joints.size(), false);
  while (remaining > 0) {
    bool progressed = false;
    for (std::size_t k = 0; k < model.joints.size(); ++k) {
      const JointSpec& joint = model.joints[k];
      const auto parent = static_cast<std::size_t>(joint.parent);
      const auto child = static_cast<std::size_t>(joint.child);
      if (done[k] || parent >= m || !placed[parent]) continue;
      if (child >= m || placed[child]) {
        throw Error(ErrorKind::kInvalidArgument, "forward_kinematics: joint graph is not a tree");
      }
      const Sim3 motion = joint_motion(joint, joint_states[k], poses[parent].s);
      poses[child] = compose_sim(poses[parent], compose_sim(motion, joint.rest));
      placed[child] = true;
      done[k] = true;
      --remaining;
      progressed = true;
    }
    if (!progressed) throw Error(ErrorKind::kInvalidArgument, "forward_kinematics: joint graph is not a tree");
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (!placed[j]) throw Error(ErrorKind::kInvalidArgument, "forward_kinematics: part not reachable from root");
  }
  return poses;
}

}  // namespace captrack
