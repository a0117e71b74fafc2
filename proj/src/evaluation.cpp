#include "captrack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "captrack/error.hpp"

namespace captrack {

double rotation_error_metric(const Rot3& pred, const Rot3& gt, const std::optional<Vec3>& symmetric_axis) {
  if (symmetric_axis) return symmetric_rotation_angle(pred, gt, *symmetric_axis);
  return rotation_angle(pred, gt);
}

bool within_5deg5cm(double r_err_deg, double t_err_m) {
  return r_err_deg < kRotationThresholdDeg && t_err_m < kTranslationThresholdM;
}

double accuracy_5deg5cm(std::span<const Sim3> preds, std::span<const Sim3> gts,
                        const std::optional<Vec3>& symmetric_axis) {
  if (preds.size() != gts.size()) throw Error(ErrorKind::kInvalidArgument, "accuracy_5deg5cm: length mismatch");
  if (preds.empty()) throw Error(ErrorKind::kInvalidArgument, "accuracy_5deg5cm: no predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (within_5deg5cm(rotation_error_metric(preds[i].r, gts[i].r, symmetric_axis), (preds[i].t - gts[i].t).norm())) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

JointStateResult joint_state(const Sim3& parent, const Sim3& child, const JointSpec& joint, double tolerance_deg) {
  require_unit(joint.axis, "joint axis");
  const Sim3 rel = compose_sim(compose_sim(inverse_sim(parent), child), inverse_sim(joint.rest));
  JointStateResult out;
  if (joint.kind == JointKind::kRevolute) {
    out.value = closest_angle_about_axis(rel.r, joint.axis);
    out.deviation_deg = rotation_angle(rel.r, Rot3::about_axis(joint.axis, out.value));
  } else {
    out.value = parent.s * rel.t.dot(joint.axis);
    out.deviation_deg = rotation_angle(rel.r, Rot3::identity());
  }
  out.flagged = out.deviation_deg > tolerance_deg;
  return out;
}

std::vector<Vec3> loss_keypoints(const Vec3& gt_aspect, const std::optional<Vec3>& symmetric_axis) {
  const Vec3 h = 0.5 * gt_aspect;
  if (symmetric_axis) {
    require_unit(*symmetric_axis, "symmetry axis");
    double reach = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      const double a = std::abs((*symmetric_axis)(k));
      if (a > 1e-12) reach = std::min(reach, h(k) / a);
    }
    return {reach * *symmetric_axis, -reach * *symmetric_axis};
  }
  std::vector<Vec3> out;
  for (int i = 0; i < 8; ++i) {
    out.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  }
  return out;
}

double corner_loss(const Sim3& pred, const Sim3& gt, const Vec3& gt_aspect,
                   const std::optional<Vec3>& symmetric_axis) {
  const std::vector<Vec3> pts = loss_keypoints(gt_aspect, symmetric_axis);
  double total = 0.0;
  for (const Vec3& c : pts) total += (apply_sim(gt, c) - apply_sim(pred, c)).norm();
  return total / static_cast<double>(pts.size());
}

double symmetric_coord_loss(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  if (pred.size() != gt.size()) throw Error(ErrorKind::kInvalidArgument, "symmetric_coord_loss: length mismatch");
  if (pred.empty()) throw Error(ErrorKind::kInvalidArgument, "symmetric_coord_loss: no points");
  const std::size_t n = pred.size();
  double pairwise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = (pred[i] - pred[j]).norm() - (gt[i] - gt[j]).norm();
      pairwise += diff * diff;
    }
  }
  double radial = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = pred[i];
    const Vec3& g = gt[i];
    const double ring = std::abs((g.x() * g.x() + g.z() * g.z()) - (p.x() * p.x() + p.z() * p.z()));
    const double dy = g.y() - p.y();
    radial += std::sqrt(ring + dy * dy);
  }
  const auto nd = static_cast<double>(n);
  return pairwise / (nd * nd) + radial / nd;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::optional<double> mean_if_any(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return mean_of(v);
}

Rot3 align_spin(const Rot3& pred, const Rot3& gt, const Vec3& axis) {
  const double phi = closest_angle_about_axis(pred.transpose() * gt, axis);
  return pred * Rot3::about_axis(axis, phi);
}

}  // namespace

MetricsReport evaluate_run(const std::vector<std::vector<PartEstimate>>& predicted,
                           const std::vector<std::vector<Pose9>>& gt, const RunMetadata& meta) {
  if (predicted.size() != gt.size()) {
    throw Error(ErrorKind::kInvalidArgument, "evaluate_run: " + std::to_string(predicted.size()) +
                                                 " predicted frames vs " + std::to_string(gt.size()) + " ground truth");
  }
  MetricsReport report;
  std::vector<double> acc, iou, r_err, t_err, theta, dist;
  for (std::size_t t = meta.first_frame; t < gt.size(); ++t) {
    const auto& preds = predicted[t];
    const auto& truth = gt[t];
    if (preds.size() != truth.size()) {
      throw Error(ErrorKind::kInvalidArgument, "evaluate_run: part count mismatch at frame " + std::to_string(t));
    }
    FrameMetrics f;
    f.frame = t;
    std::vector<double> f_acc, f_iou, f_r, f_t;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      PartFrameMetrics p;
      if (preds[j].lost) {
        p.lost = true;
        ++f.lost_parts;
        f.parts.push_back(p);
        continue;
      }
      const Sim3& ps = preds[j].sim;
      const Pose9& g = truth[j];
      p.r_err_deg = rotation_error_metric(ps.r, g.r, meta.symmetric_axis);
      const double t_m = (ps.t - g.t).norm();
      p.t_err_cm = 100.0 * t_m;
      p.success = within_5deg5cm(p.r_err_deg, t_m);
      OrientedBox box_pred{Pose9{meta.gt_extents ? g.d : Vec3(ps.s * preds[j].aspect), ps.r, ps.t}};
      if (meta.symmetric_axis) box_pred.pose.r = align_spin(ps.r, g.r, *meta.symmetric_axis);
      p.iou = oriented_iou3d(box_pred, OrientedBox{g});
      f_acc.push_back(p.success ? 1.0 : 0.0);
      f_iou.push_back(p.iou);
      f_r.push_back(p.r_err_deg);
      f_t.push_back(p.t_err_cm);
      f.parts.push_back(p);
    }
    std::vector<double> f_theta, f_dist;
    for (const JointSpec& joint : meta.joints) {
      JointFrameMetrics jm;
      jm.kind = joint.kind;
      const auto pa = static_cast<std::size_t>(joint.parent);
      const auto ch = static_cast<std::size_t>(joint.child);
      if (pa >= preds.size() || ch >= preds.size()) {
        throw Error(ErrorKind::kInvalidArgument, "evaluate_run: joint references a missing part");
      }
      if (!preds[pa].lost && !preds[ch].lost) {
        const JointStateResult est = joint_state(preds[pa].sim, preds[ch].sim, joint);
        const JointStateResult ref = joint_state(truth[pa].sim(), truth[ch].sim(), joint);
        jm.valid = true;
        jm.flagged = est.flagged;
        if (joint.kind == JointKind::kRevolute) {
          jm.error = std::abs(rad2deg(std::remainder(est.value - ref.value, 2.0 * std::numbers::pi)));
          f_theta.push_back(jm.error);
        } else {
          jm.error = 100.0 * std::abs(est.value - ref.value);
          f_dist.push_back(jm.error);
        }
      }
      f.joints.push_back(jm);
    }
    if (f.lost_parts > 0) ++report.lost_frames;
    if (!f_acc.empty()) {
      f.evaluated = true;
      f.acc = mean_of(f_acc);
      f.iou = mean_of(f_iou);
      f.r_err_deg = mean_of(f_r);
      f.t_err_cm = mean_of(f_t);
      f.theta_err_deg = mean_if_any(f_theta);
      f.d_err_cm = mean_if_any(f_dist);
      acc.push_back(f.acc);
      iou.push_back(f.iou);
      r_err.push_back(f.r_err_deg);
      t_err.push_back(f.t_err_cm);
      if (f.theta_err_deg) theta.push_back(*f.theta_err_deg);
      if (f.d_err_cm) dist.push_back(*f.d_err_cm);
      ++report.evaluated_frames;
    }
    report.frames.push_back(std::move(f));
  }
  if (!acc.empty()) {
    report.acc_5deg5cm = mean_of(acc);
    report.mean_iou = mean_of(iou);
    report.r_err_deg = mean_of(r_err);
    report.t_err_cm = mean_of(t_err);
  }
  report.theta_err_deg = mean_if_any(theta);
  report.d_err_cm = mean_if_any(dist);
  return report;
}

MetricsReport aggregate(std::span<const MetricsReport> reports) {
  MetricsReport out;
  std::vector<double> acc, iou, r_err, t_err, theta, dist;
  for (const MetricsReport& r : reports) {
    out.lost_frames += r.lost_frames;
    out.evaluated_frames += r.evaluated_frames;
    if (r.evaluated_frames == 0) continue;
    acc.push_back(r.acc_5deg5cm);
    iou.push_back(r.mean_iou);
    r_err.push_back(r.r_err_deg);
    t_err.push_back(r.t_err_cm);
    if (r.theta_err_deg) theta.push_back(*r.theta_err_deg);
    if (r.d_err_cm) dist.push_back(*r.d_err_cm);
  }
  if (!acc.empty()) {
    out.acc_5deg5cm = mean_of(acc);
    out.mean_iou = mean_of(iou);
    out.r_err_deg = mean_of(r_err);
    out.t_err_cm = mean_of(t_err);
  }
  out.theta_err_deg = mean_if_any(theta);
  out.d_err_cm = mean_if_any(dist);
  return out;
}

}  // namespace captrack
