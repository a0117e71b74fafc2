#include "captrack/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

#include "captrack/error.hpp"

namespace captrack {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kNonPositiveScale: return "non-positive scale";
    case ErrorKind::kNoConsensus: return "no consensus";
    case ErrorKind::kLostTrack: return "lost track";
    case ErrorKind::kOutOfLimits: return "out of limits";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kParse: return "parse error";
  }
  return "unknown";
}

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return k;
}

// (M - M^T) / 2 as a vector; equals sin(angle) * axis for a rotation.
Vec3 vee_antisymmetric(const Mat3& m) {
  return 0.5 * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

}  // namespace

Rot3 Rot3::from_matrix(const Mat3& m) {
  Rot3 r(m);
  if (!m.allFinite() || r.orthonormality_error() > kOrthonormalTolerance) {
    throw Error(ErrorKind::kInvalidArgument, "matrix is not a proper rotation");
  }
  return r;
}

Rot3 Rot3::about_axis(const Vec3& axis, double angle) {
  require_unit(axis, "rotation axis");
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const Mat3 outer = axis * axis.transpose();
  return Rot3(c * Mat3::Identity() + (1.0 - c) * outer + s * skew(axis));
}

Rot3 Rot3::exp(const Vec3& rotation_vector) {
  const double angle = rotation_vector.norm();
  if (angle < 1e-300) return Rot3();
  const Vec3 axis = rotation_vector / angle;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return Rot3(c * Mat3::Identity() + (1.0 - c) * axis * axis.transpose() + s * skew(axis));
}

double Rot3::orthonormality_error() const {
  const double ortho = (m_.transpose() * m_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = std::abs(m_.determinant() - 1.0);
  return std::max(ortho, det);
}

Pose9 Pose9::from_sim(const Sim3& sim, const Vec3& aspect) {
  return Pose9{sim.s * aspect, sim.r, sim.t};
}

Vec3 apply_sim(const Sim3& a, const Vec3& p) {
  return a.s * (a.r.matrix() * p) + a.t;
}

Sim3 compose_sim(const Sim3& a, const Sim3& b) {
  return Sim3{a.s * b.s, a.r * b.r, a.s * (a.r.matrix() * b.t) + a.t};
}

Sim3 inverse_sim(const Sim3& a) {
  const Rot3 rt = a.r.transpose();
  const double inv_s = 1.0 / a.s;
  return Sim3{inv_s, rt, -inv_s * (rt.matrix() * a.t)};
}

void validate(const Sim3& a) {
  if (!(a.s > 0.0) || !std::isfinite(a.s)) {
    throw Error(ErrorKind::kInvalidArgument, "similarity scale must be positive");
  }
  if (!a.t.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "similarity translation must be finite");
  }
}

Rot3 rot_from_6d(const Rot6D& v) {
  const double na = v.a.norm();
  const double nb = v.b.norm();
  if (na < 1e-9 || nb < 1e-9) {
    throw Error(ErrorKind::kDegenerate, "6D rotation has a zero column");
  }
  const Vec3 c1 = v.a / na;
  const Vec3 b_perp = v.b - v.b.dot(c1) * c1;
  if (b_perp.norm() < 1e-9 * nb) {
    throw Error(ErrorKind::kDegenerate, "6D rotation columns are parallel");
  }
  const Vec3 c2 = b_perp.normalized();
  Mat3 m;
  m.col(0) = c1;
  m.col(1) = c2;
  m.col(2) = c1.cross(c2);
  return Rot3::from_matrix_unchecked(m);
}

Rot6D rot_to_6d(const Rot3& r) { return Rot6D{r.column(0), r.column(1)}; }

Rot3 project_to_so3(const Mat3& m) {
  if (!m.allFinite()) throw Error(ErrorKind::kDegenerate, "matrix has non-finite entries");
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(2) < 1e-12) {
    throw Error(ErrorKind::kDegenerate, "matrix is rank deficient");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 diag(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  return Rot3::from_matrix_unchecked(u * diag.asDiagonal() * v.transpose());
}

Rot3 renormalize(const Rot3& r) { return project_to_so3(r.matrix()); }

Rot3 euclidean_mean(std::span<const Rot3> rs, std::span<const double> weights) {
  if (rs.empty()) throw Error(ErrorKind::kInvalidArgument, "euclidean_mean of an empty set");
  Mat3 sum = Mat3::Zero();
  if (weights.empty()) {
    for (const Rot3& r : rs) sum += r.matrix();
    sum /= static_cast<double>(rs.size());
  } else {
    if (weights.size() != rs.size()) {
      throw Error(ErrorKind::kInvalidArgument, "euclidean_mean weight count mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (!(weights[i] >= 0.0)) {
        throw Error(ErrorKind::kInvalidArgument, "euclidean_mean weights must be nonnegative");
      }
      sum += weights[i] * rs[i].matrix();
      total += weights[i];
    }
    if (!(total > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "euclidean_mean weights sum to zero");
    }
    sum /= total;
  }
  return project_to_so3(sum);
}

// atan2 form of arccos((tr - 1) / 2); keeps full precision near 0 and 180.
double rotation_angle(const Rot3& ra, const Rot3& rb) {
  const Mat3 rel = ra.matrix().transpose() * rb.matrix();
  const double cos_angle = std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0);
  const double sin_angle = vee_antisymmetric(rel).norm();
  return rad2deg(std::atan2(sin_angle, cos_angle));
}

void require_unit(const Vec3& axis, const char* what) {
  if (!axis.allFinite() || std::abs(axis.norm() - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + " must be a unit vector");
  }
}

Vec3 axis_endpoint(const Rot3& r, const Vec3& axis) {
  require_unit(axis, "symmetry axis");
  return r * axis;
}

double symmetric_rotation_angle(const Rot3& ra, const Rot3& rb, const Vec3& axis) {
  require_unit(axis, "symmetry axis");
  const Vec3 u = ra * axis;
  const Vec3 v = rb * axis;
  return rad2deg(std::atan2(u.cross(v).norm(), u.dot(v)));
}

Vec3 rotation_log(const Rot3& r) {
  const Mat3& m = r.matrix();
  const Vec3 w = vee_antisymmetric(m);
  const double sin_angle = w.norm();
  const double cos_angle = std::clamp(0.5 * (m.trace() - 1.0), -1.0, 1.0);
  const double angle = std::atan2(sin_angle, cos_angle);
  if (sin_angle > 1e-7) return (angle / sin_angle) * w;
  if (cos_angle > 0.0) return w;  // first order near identity
  // Near pi: axis from the symmetric part, sign from the small antisymmetric part.
  const Mat3 b = 0.5 * (m + Mat3::Identity());
  int k = 0;
  b.diagonal().maxCoeff(&k);
  Vec3 axis = b.col(k) / std::sqrt(std::max(b(k, k), 1e-300));
  if (axis.dot(w) < 0.0) axis = -axis;
  return angle * axis.normalized();
}

Rot3 rotation_between(const Vec3& from, const Vec3& to) {
  require_unit(from, "rotation_between source");
  require_unit(to, "rotation_between target");
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(from, to);
  return project_to_so3(q.normalized().toRotationMatrix());
}

Rot3 basis_to_y(const Vec3& axis) { return rotation_between(axis, Vec3::UnitY()); }

double closest_angle_about_axis(const Rot3& r, const Vec3& axis) {
  require_unit(axis, "rotation axis");
  // tr(R(a, phi)^T M) = a^T M a + cos(phi) (tr M - a^T M a) + sin(phi) * 2 a.vee(M)
  const Mat3& m = r.matrix();
  const double along = axis.dot(m * axis);
  const double cos_term = m.trace() - along;
  const double sin_term = 2.0 * axis.dot(vee_antisymmetric(m));
  return std::atan2(sin_term, cos_term);
}

}  // namespace captrack
