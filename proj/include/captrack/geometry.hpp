#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <numbers>
#include <span>
#include <vector>

namespace captrack {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using PointCloud = std::vector<Vec3>;

inline constexpr double kOrthonormalTolerance = 1e-9;

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Proper rotation stored as a 3x3 matrix (m^T m = I, det m = +1).
class Rot3 {
 public:
  Rot3() : m_(Mat3::Identity()) {}

  // Throws kInvalidArgument unless m is orthonormal with det +1 within
  // kOrthonormalTolerance.
  static Rot3 from_matrix(const Mat3& m);
  // For callers that produced m by an orthonormal construction.
  static Rot3 from_matrix_unchecked(const Mat3& m) { return Rot3(m); }

  static Rot3 identity() { return Rot3(); }
  // Right-handed rotation by angle (radians) about a unit axis.
  static Rot3 about_axis(const Vec3& axis, double angle);
  // Exponential map of a rotation vector (axis * angle, radians).
  static Rot3 exp(const Vec3& rotation_vector);

  const Mat3& matrix() const { return m_; }
  Vec3 column(int i) const { return m_.col(i); }

  Rot3 transpose() const { return Rot3(m_.transpose()); }
  Rot3 inverse() const { return transpose(); }

  Rot3 operator*(const Rot3& other) const { return Rot3(m_ * other.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  // Largest deviation of m^T m from I and of det from 1.
  double orthonormality_error() const;

 private:
  explicit Rot3(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

// First two columns of a rotation, before orthonormalization.
struct Rot6D {
  Vec3 a;
  Vec3 b;
};

// 7DoF similarity transform: p -> s * r * p + t.
struct Sim3 {
  double s = 1.0;
  Rot3 r;
  Vec3 t = Vec3::Zero();

  static Sim3 identity() { return Sim3{}; }
};

// 9DoF pose: per-axis size d (meters), rotation r, translation t.
// The uniform scale is |d| and the aspect ratio is d / |d|.
struct Pose9 {
  Vec3 d = Vec3::Ones();
  Rot3 r;
  Vec3 t = Vec3::Zero();

  double scale() const { return d.norm(); }
  Vec3 aspect() const { return d / d.norm(); }
  Sim3 sim() const { return Sim3{scale(), r, t}; }

  static Pose9 from_sim(const Sim3& sim, const Vec3& aspect);
};

Vec3 apply_sim(const Sim3& a, const Vec3& p);
Sim3 compose_sim(const Sim3& a, const Sim3& b);
Sim3 inverse_sim(const Sim3& a);
void validate(const Sim3& a);

Rot3 rot_from_6d(const Rot6D& v);
Rot6D rot_to_6d(const Rot3& r);

// Nearest rotation in Frobenius norm (special-orthogonal Procrustes).
Rot3 project_to_so3(const Mat3& m);
Rot3 renormalize(const Rot3& r);

// Arithmetic mean of the matrices projected back onto SO(3). Weights, when
// given, must match rs in length, be nonnegative and have a positive sum.
Rot3 euclidean_mean(std::span<const Rot3> rs, std::span<const double> weights = {});

// Geodesic angle between two rotations, degrees in [0, 180].
double rotation_angle(const Rot3& ra, const Rot3& rb);

Vec3 axis_endpoint(const Rot3& r, const Vec3& axis);

// Angle (degrees) between ra*axis and rb*axis; spin about the axis is ignored.
double symmetric_rotation_angle(const Rot3& ra, const Rot3& rb, const Vec3& axis);

// Logarithm map, rotation vector with angle in [0, pi].
Vec3 rotation_log(const Rot3& r);

// Minimal rotation taking unit vector `from` onto unit vector `to`.
Rot3 rotation_between(const Vec3& from, const Vec3& to);

// A rotation B with B * axis = +y; used to move a symmetry axis onto the
// y convention expected by the symmetric fitter.
Rot3 basis_to_y(const Vec3& axis);

// Angle phi (radians) such that about_axis(axis, phi) is the rotation about
// `axis` closest to r in Frobenius norm.
double closest_angle_about_axis(const Rot3& r, const Vec3& axis);

void require_unit(const Vec3& axis, const char* what);

}  // namespace captrack
