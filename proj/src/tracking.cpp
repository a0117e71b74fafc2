#include "captrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "captrack/error.hpp"
#include "captrack/random.hpp"

namespace captrack {

PointCloud canonicalize(std::span<const Vec3> x, const Sim3& prev) {
  validate(prev);
  const Mat3 rt = prev.r.matrix().transpose();
  const double inv_s = 1.0 / prev.s;
  PointCloud z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = inv_s * (rt * (x[i] - prev.t));
  return z;
}

Sim3 recover_pose(const Sim3& prev, const Sim3& delta) {
  Sim3 out;
  out.s = prev.s * delta.s;
  out.r = renormalize(prev.r * delta.r);
  out.t = prev.s * (prev.r * delta.t) + prev.t;
  return out;
}

Sim3 delta_of(const Sim3& prev, const Sim3& current) { return compose_sim(inverse_sim(prev), current); }

Vec3 estimate_aspect_ratio(std::span<const Vec3> y) {
  if (y.empty()) throw Error(ErrorKind::kInvalidArgument, "estimate_aspect_ratio: no coordinates");
  Vec3 extent = Vec3::Zero();
  for (const Vec3& p : y) extent = extent.cwiseMax(p.cwiseAbs());
  if (extent.maxCoeff() <= 0.0) {
    throw Error(ErrorKind::kDegenerate, "estimate_aspect_ratio: all coordinates are zero");
  }
  extent = (2.0 * extent).cwiseMax(Vec3::Constant(1e-6));
  return extent.normalized();
}

Crop crop_ball(std::span<const Vec3> scene, const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::kInvalidArgument, "crop_ball: radius must be positive");
  Crop out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if ((scene[i] - center).squaredNorm() <= r2) {
      out.points.push_back(scene[i]);
      out.indices.push_back(i);
    }
  }
  if (out.points.empty()) throw Error(ErrorKind::kLostTrack, "crop_ball: no points inside the tracking ball");
  return out;
}

Ball tracking_ball(const TrackerState& state, double factor) {
  if (state.parts.empty()) throw Error(ErrorKind::kInvalidArgument, "tracking_ball: empty state");
  Vec3 center = Vec3::Zero();
  for (const PartEstimate& p : state.parts) center += p.sim.t;
  center /= static_cast<double>(state.parts.size());
  // Every point of a part lies within half its diagonal (s / 2) of the part center.
  double reach = 0.0;
  for (const PartEstimate& p : state.parts) reach = std::max(reach, (p.sim.t - center).norm() + 0.5 * p.sim.s);
  return Ball{center, factor * reach};
}

void project_joint_rotations(std::vector<PartEstimate>& parts, std::span<const JointSpec> joints) {
  for (const JointSpec& joint : joints) {
    const auto parent = static_cast<std::size_t>(joint.parent);
    const auto child = static_cast<std::size_t>(joint.child);
    if (parent >= parts.size() || child >= parts.size()) {
      throw Error(ErrorKind::kInvalidArgument, "project_joint_rotations: joint references a missing part");
    }
    if (parts[parent].lost || parts[child].lost) continue;
    const Rot3& rp = parts[parent].sim.r;
    const Rot3& rest = joint.rest.r;
    Rot3 motion;
    if (joint.kind == JointKind::kRevolute) {
      const Rot3 rel = rp.transpose() * parts[child].sim.r * rest.transpose();
      motion = Rot3::about_axis(joint.axis, closest_angle_about_axis(rel, joint.axis));
    }
    parts[child].sim.r = renormalize(rp * motion * rest);
  }
}

namespace {

struct PartUpdate {
  PartEstimate estimate;
  bool ok = false;
};

PartUpdate update_part(int j, const PartEstimate& prev, const Observation& obs, const Crop& crop,
                       const PointCloud& canonical, const CoordinatePrediction& coords,
                       Predictor& predictor, std::uint64_t frame, const TrackerOptions& options) {
  std::vector<std::size_t> mask;
  for (std::size_t i = 0; i < coords.labels.size(); ++i) {
    if (coords.labels[i] == j) mask.push_back(i);
  }
  // Fewer points than the fits need: the part is lost for this frame.
  if (mask.size() < 3) return {};

  const PredictorQuery query{obs, canonical, crop.indices, frame};
  Rot3 rotation_delta;
  if (options.symmetric_axis) {
    const PointCloud endpoints = predictor.predict_axis_endpoints(j, query, prev.sim);
    if (endpoints.size() != canonical.size()) {
      throw Error(ErrorKind::kInvalidArgument, "predictor returned a wrong number of axis end points");
    }
    Vec3 mean = Vec3::Zero();
    for (std::size_t i : mask) mean += endpoints[i];
    if (mean.norm() < 1e-9 * static_cast<double>(mask.size())) return {};
    rotation_delta = rotation_between(*options.symmetric_axis, mean.normalized());
  } else {
    const std::vector<Rot3> rotations = predictor.predict_rotations(j, query, prev.sim);
    if (rotations.size() != canonical.size()) {
      throw Error(ErrorKind::kInvalidArgument, "predictor returned a wrong number of rotations");
    }
    std::vector<Rot3> masked;
    masked.reserve(mask.size());
    for (std::size_t i : mask) masked.push_back(rotations[i]);
    rotation_delta = euclidean_mean(masked);
  }
  Rot3 rotation = renormalize(prev.sim.r * rotation_delta);

  Correspondences corr;
  corr.camera.reserve(mask.size());
  corr.normalized.reserve(mask.size());
  for (std::size_t i : mask) corr.push_back(crop.points[i], coords.coords[i]);

  Sim3 fitted;
  if (options.symmetric_axis) {
    const SymmetricFit fit = fit_symmetric(corr, rotation, *options.symmetric_axis, options.scale_formula);
    rotation = renormalize(fit.rotation);
    fitted = Sim3{fit.s, rotation, fit.t};
  } else {
    const ScaleTranslation st = fit_scale_translation(corr, rotation, options.scale_formula);
    fitted = Sim3{st.s, rotation, st.t};
  }
  if (options.ransac && corr.size() >= static_cast<std::size_t>(options.ransac->min_sample)) {
    RansacParams params = *options.ransac;
    params.seed = derive_seed(params.seed, {frame, static_cast<std::uint64_t>(j)});
    try {
      const RansacResult result = ransac_fit(corr, GivenRotation{rotation, options.scale_formula}, params);
      fitted = result.estimate;
      // Outlier coordinates would inflate the extents.
      Correspondences kept;
      for (std::size_t i = 0; i < corr.size(); ++i) {
        if (result.inlier_mask[i]) kept.push_back(corr.camera[i], corr.normalized[i]);
      }
      corr = std::move(kept);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNoConsensus) throw;
    }
  }

  Vec3 aspect = prev.aspect;
  if (options.aspect_policy != AspectPolicy::kHoldInitial) {
    const Vec3 observed = estimate_aspect_ratio(corr.normalized);
    if (options.aspect_policy == AspectPolicy::kPerFrame) {
      aspect = observed;
    } else {
      aspect = (options.aspect_blend * prev.aspect + (1.0 - options.aspect_blend) * observed).normalized();
    }
  }
  return {PartEstimate{fitted, aspect, false}, true};
}

}  // namespace

TrackerState track_step(const TrackerState& state, const Observation& obs, Predictor& predictor,
                        const TrackerOptions& options) {
  if (state.parts.empty()) throw Error(ErrorKind::kInvalidArgument, "track_step: tracker has no parts");
  if (obs.points.empty()) throw Error(ErrorKind::kInvalidArgument, "track_step: empty observation");
  if (options.symmetric_axis) require_unit(*options.symmetric_axis, "symmetry axis");

  TrackerState next = state;
  next.frame_index = state.frame_index + 1;
  const std::uint64_t frame = next.frame_index;
  auto mark_all_lost = [&] {
    for (PartEstimate& p : next.parts) p.lost = true;
    return next;
  };

  Crop crop;
  if (options.crop) {
    const Ball ball = tracking_ball(state, options.crop_factor);
    try {
      crop = crop_ball(obs.points, ball.center, ball.radius);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kLostTrack) throw;
      return mark_all_lost();
    }
  } else {
    crop.points = obs.points;
    crop.indices.resize(obs.points.size());
    for (std::size_t i = 0; i < crop.indices.size(); ++i) crop.indices[i] = i;
  }

  const std::size_t m = state.parts.size();
  std::vector<PointCloud> canonical(m);
  for (std::size_t j = 0; j < m; ++j) canonical[j] = canonicalize(crop.points, state.parts[j].sim);

  const CoordinatePrediction coords =
      predictor.predict_coordinates(PredictorQuery{obs, canonical[0], crop.indices, frame});
  if (coords.labels.size() != crop.points.size() || coords.coords.size() != crop.points.size()) {
    throw Error(ErrorKind::kInvalidArgument, "predictor returned a wrong number of coordinates");
  }

  for (std::size_t j = 0; j < m; ++j) {
    const PartEstimate& prev = state.parts[j];
    PartUpdate update;
    try {
      update = update_part(static_cast<int>(j), prev, obs, crop, canonical[j], coords, predictor, frame, options);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerate && e.kind() != ErrorKind::kNonPositiveScale) throw;
    }
    if (update.ok) {
      next.parts[j] = update.estimate;
    } else {
      next.parts[j] = prev;
      next.parts[j].lost = true;
    }
  }

  if (!options.rotation_projection.empty()) project_joint_rotations(next.parts, options.rotation_projection);
  return next;
}

TrackerState init_tracker(std::span<const Pose9> gt, const PerturbSpec& perturb, std::uint64_t seed) {
  if (gt.empty()) throw Error(ErrorKind::kInvalidArgument, "init_tracker: no parts");
  TrackerState state;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    const Pose9 pose = perturb_pose(gt[j], perturb, derive_seed(seed, {0x1417, j}));
    state.parts.push_back(PartEstimate{pose.sim(), pose.aspect(), false});
  }
  return state;
}

}  // namespace captrack
