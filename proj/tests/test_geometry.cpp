#include <doctest.h>

#include <cmath>
#include <random>

#include "captrack/error.hpp"
#include "captrack/geometry.hpp"
#include "oracles.hpp"

using namespace captrack;

TEST_CASE("from_matrix rejects non-rotations") {
  CHECK_NOTHROW(Rot3::from_matrix(Mat3::Identity()));
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;
  CHECK_THROWS_AS(Rot3::from_matrix(reflect), Error);
  CHECK_THROWS_AS(Rot3::from_matrix(2.0 * Mat3::Identity()), Error);
  Mat3 nan = Mat3::Identity();
  nan(0, 1) = std::nan("");
  CHECK_THROWS_AS(Rot3::from_matrix(nan), Error);
}

TEST_CASE("sim3 compose and inverse match homogeneous matrices") {
  std::mt19937_64 g(7);
  for (int i = 0; i < 200; ++i) {
    const Sim3 a = oracle::random_sim(g);
    const Sim3 b = oracle::random_sim(g);
    const oracle::Mat4 ab = oracle::homogeneous(compose_sim(a, b));
    CHECK((ab - oracle::homogeneous(a) * oracle::homogeneous(b)).cwiseAbs().maxCoeff() < 1e-12);
    const oracle::Mat4 inv = oracle::homogeneous(inverse_sim(a));
    CHECK((inv - oracle::homogeneous(a).inverse()).cwiseAbs().maxCoeff() < 1e-10);
    const Vec3 p = oracle::random_vec(g, 1.0);
    const Eigen::Vector4d hp = oracle::homogeneous(a) * p.homogeneous();
    CHECK((apply_sim(a, p) - hp.head<3>()).norm() < 1e-12);
  }
}

TEST_CASE("validate rejects nonpositive scale") {
  CHECK_THROWS_AS(validate(Sim3{0.0, Rot3(), Vec3::Zero()}), Error);
  CHECK_THROWS_AS(validate(Sim3{-1.0, Rot3(), Vec3::Zero()}), Error);
  CHECK_NOTHROW(validate(Sim3{1e-3, Rot3(), Vec3::Zero()}));
}

TEST_CASE("6d representation round trip and gram-schmidt") {
  std::mt19937_64 g(11);
  for (int i = 0; i < 100; ++i) {
    const Rot3 r = oracle::random_rot(g);
    const Rot3 back = rot_from_6d(rot_to_6d(r));
    CHECK((back.matrix() - r.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }
  const Rot6D v{Vec3(2.0, 0.0, 0.0), Vec3(1.0, 3.0, 0.0)};
  const Rot3 r = rot_from_6d(v);
  CHECK((r.column(0) - Vec3::UnitX()).norm() < 1e-15);
  CHECK((r.column(1) - Vec3::UnitY()).norm() < 1e-15);
  CHECK((r.column(2) - Vec3::UnitZ()).norm() < 1e-15);
  CHECK(r.orthonormality_error() < 1e-12);
}

TEST_CASE("6d representation degenerate inputs") {
  CHECK_THROWS_AS(rot_from_6d(Rot6D{Vec3::Zero(), Vec3::UnitY()}), Error);
  CHECK_THROWS_AS(rot_from_6d(Rot6D{Vec3::UnitX(), Vec3(3.0, 0.0, 0.0)}), Error);
  try {
    rot_from_6d(Rot6D{Vec3::UnitX(), Vec3::UnitX()});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerate);
  }
}

TEST_CASE("project_to_so3 is the nearest rotation") {
  std::mt19937_64 g(3);
  for (int i = 0; i < 50; ++i) {
    const Rot3 r = oracle::random_rot(g);
    CHECK((project_to_so3(r.matrix()).matrix() - r.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    const Mat3 noisy = r.matrix() + 0.05 * Mat3::Random();
    const Rot3 p = project_to_so3(noisy);
    CHECK(p.orthonormality_error() < 1e-12);
    const double best = (p.matrix() - noisy).norm();
    for (int k = 0; k < 20; ++k) {
      const Rot3 other = Rot3::exp(0.05 * oracle::random_unit(g)) * p;
      CHECK((other.matrix() - noisy).norm() >= best - 1e-12);
    }
  }
  CHECK_THROWS_AS(project_to_so3(Mat3::Zero()), Error);
}

TEST_CASE("euclidean mean") {
  std::mt19937_64 g(5);
  const Rot3 r = oracle::random_rot(g);
  std::vector<Rot3> same(10, r);
  CHECK((euclidean_mean(same).matrix() - r.matrix()).cwiseAbs().maxCoeff() < 1e-12);

  // Symmetric pair about one axis averages to the centre.
  const Vec3 axis = oracle::random_unit(g);
  const std::vector<Rot3> pair{r * Rot3::about_axis(axis, 0.3), r * Rot3::about_axis(axis, -0.3)};
  CHECK(rotation_angle(euclidean_mean(pair), r) < 1e-9);

  const std::vector<double> weights{1.0, 0.0};
  CHECK(rotation_angle(euclidean_mean(pair, weights), pair[0]) < 1e-9);
  CHECK_THROWS_AS(euclidean_mean(std::vector<Rot3>{}), Error);
  const std::vector<double> bad{1.0};
  CHECK_THROWS_AS(euclidean_mean(pair, bad), Error);
}

TEST_CASE("rotation angle agrees with quaternion distance") {
  CHECK(rotation_angle(Rot3(), Rot3::about_axis(Vec3::UnitX(), deg2rad(90.0))) == doctest::Approx(90.0).epsilon(1e-14));
  std::mt19937_64 g(9);
  for (int i = 0; i < 500; ++i) {
    const Rot3 a = oracle::random_rot(g);
    const Rot3 b = oracle::random_rot(g);
    CHECK(std::abs(rotation_angle(a, b) - oracle::quat_angle_deg(a.matrix(), b.matrix())) < 1e-9);
  }
  // Small angles keep full precision.
  const Rot3 tiny = Rot3::about_axis(Vec3::UnitZ(), deg2rad(1e-7));
  CHECK(std::abs(rotation_angle(Rot3(), tiny) - 1e-7) < 1e-12);
}

TEST_CASE("symmetric angle ignores spin about the axis") {
  std::mt19937_64 g(13);
  for (int i = 0; i < 100; ++i) {
    const Rot3 r = oracle::random_rot(g);
    const Vec3 axis = oracle::random_unit(g);
    const Rot3 spun = r * Rot3::about_axis(axis, 1.234);
    CHECK(symmetric_rotation_angle(r, spun, axis) < 1e-9);
  }
  const Rot3 tilt = Rot3::about_axis(Vec3::UnitX(), deg2rad(30.0));
  CHECK(symmetric_rotation_angle(Rot3(), tilt, Vec3::UnitY()) == doctest::Approx(30.0));
  CHECK((axis_endpoint(tilt, Vec3::UnitY()) - tilt.column(1)).norm() < 1e-15);
}

TEST_CASE("log and exp are inverse") {
  std::mt19937_64 g(17);
  for (int i = 0; i < 200; ++i) {
    const Vec3 w = oracle::random_unit(g) * std::uniform_real_distribution<double>(0.0, 3.1)(g);
    CHECK((rotation_log(Rot3::exp(w)) - w).norm() < 1e-9);
  }
  const Vec3 near_pi = Vec3(1.0, 2.0, 2.0).normalized() * (std::numbers::pi - 1e-9);
  CHECK((rotation_log(Rot3::exp(near_pi)) - near_pi).norm() < 1e-6);
  CHECK(rotation_log(Rot3()).norm() == 0.0);
}

TEST_CASE("rotation_between and basis_to_y") {
  std::mt19937_64 g(19);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = oracle::random_unit(g);
    const Vec3 b = oracle::random_unit(g);
    CHECK((rotation_between(a, b) * a - b).norm() < 1e-12);
    CHECK((basis_to_y(a) * a - Vec3::UnitY()).norm() < 1e-12);
  }
  CHECK((rotation_between(Vec3::UnitX(), -Vec3::UnitX()) * Vec3::UnitX() + Vec3::UnitX()).norm() < 1e-12);
}

TEST_CASE("closest angle about axis recovers planted angle") {
  std::mt19937_64 g(23);
  for (int i = 0; i < 100; ++i) {
    const Vec3 axis = oracle::random_unit(g);
    const double phi = std::uniform_real_distribution<double>(-3.0, 3.0)(g);
    CHECK(std::abs(closest_angle_about_axis(Rot3::about_axis(axis, phi), axis) - phi) < 1e-12);
  }
  CHECK_THROWS_AS(closest_angle_about_axis(Rot3(), Vec3(1.0, 1.0, 0.0)), Error);
}

TEST_CASE("pose9 scale and aspect") {
  const Pose9 p{Vec3(3.0, 4.0, 12.0), Rot3(), Vec3::Zero()};
  CHECK(p.scale() == doctest::Approx(13.0));
  CHECK((p.aspect() - Vec3(3.0, 4.0, 12.0) / 13.0).norm() < 1e-15);
  const Pose9 q = Pose9::from_sim(p.sim(), p.aspect());
  CHECK((q.d - p.d).norm() < 1e-14);
}
