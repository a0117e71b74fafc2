#include <doctest.h>

#include <random>

#include <Eigen/Geometry>

#include "captrack/error.hpp"
#include "captrack/fitting.hpp"
#include "oracles.hpp"

using namespace captrack;

namespace {

Correspondences synth(const Sim3& truth, std::size_t n, std::mt19937_64& g, bool centered = false) {
  Correspondences corr;
  PointCloud ys;
  for (std::size_t i = 0; i < n; ++i) ys.push_back(oracle::random_vec(g, 0.5));
  if (centered && n > 1) {
    Vec3 m = Vec3::Zero();
    for (const Vec3& y : ys) m += y;
    m /= static_cast<double>(n);
    for (Vec3& y : ys) y -= m;
  }
  for (const Vec3& y : ys) corr.push_back(apply_sim(truth, y), y);
  return corr;
}

}  // namespace

TEST_CASE("ratio formula exact when rotated coordinates are centered") {
  std::mt19937_64 g(1);
  for (int i = 0; i < 50; ++i) {
    const Sim3 truth = oracle::random_sim(g);
    const Correspondences corr = synth(truth, 200, g, true);
    const ScaleTranslation st = fit_scale_translation(corr, truth.r, ScaleFormula::kRatio);
    CHECK(std::abs(st.s - truth.s) < 1e-12);
    CHECK((st.t - truth.t).norm() < 1e-12);
  }
}

TEST_CASE("ratio formula is biased for off-centre coordinates with translation") {
  std::mt19937_64 g(2);
  const Sim3 truth{0.5, Rot3(), Vec3(0.0, 0.0, 1.0)};
  Correspondences corr;
  for (int i = 0; i < 20; ++i) {
    const Vec3 y = oracle::random_vec(g, 0.1) + Vec3(0.0, 0.0, 0.3);
    corr.push_back(apply_sim(truth, y), y);
  }
  const ScaleTranslation ratio = fit_scale_translation(corr, truth.r, ScaleFormula::kRatio);
  const ScaleTranslation centered = fit_scale_translation(corr, truth.r, ScaleFormula::kCentered);
  CHECK(std::abs(ratio.s - truth.s) > 1e-3);
  CHECK(std::abs(centered.s - truth.s) < 1e-12);
  CHECK((centered.t - truth.t).norm() < 1e-12);
}

TEST_CASE("fit_scale_translation errors") {
  Correspondences empty;
  CHECK_THROWS_AS(fit_scale_translation(empty, Rot3()), Error);
  Correspondences zero;
  zero.push_back(Vec3(1.0, 0.0, 0.0), Vec3::Zero());
  try {
    fit_scale_translation(zero, Rot3());
    FAIL("expected degenerate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerate);
  }
  Correspondences flipped;
  flipped.push_back(Vec3(-1.0, 0.0, 0.0), Vec3(1.0, 0.0, 0.0));
  flipped.push_back(Vec3(1.0, 0.0, 0.0), Vec3(-1.0, 0.0, 0.0));
  try {
    fit_scale_translation(flipped, Rot3(), ScaleFormula::kCentered);
    FAIL("expected nonpositive scale");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNonPositiveScale);
  }
}

TEST_CASE("umeyama matches Eigen's implementation") {
  std::mt19937_64 g(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int i = 0; i < 100; ++i) {
    const Sim3 truth = oracle::random_sim(g);
    Correspondences corr = synth(truth, 40, g);
    for (Vec3& c : corr.camera) c += Vec3(noise(g), noise(g), noise(g));
    Eigen::Matrix3Xd src(3, corr.size()), dst(3, corr.size());
    for (std::size_t k = 0; k < corr.size(); ++k) {
      src.col(static_cast<Eigen::Index>(k)) = corr.normalized[k];
      dst.col(static_cast<Eigen::Index>(k)) = corr.camera[k];
    }
    const Eigen::Matrix4d ref = Eigen::umeyama(src, dst, true);
    const Sim3 est = umeyama_sim3(corr);
    CHECK((oracle::homogeneous(est) - ref).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("umeyama degenerate inputs") {
  Correspondences line;
  for (int i = 0; i < 5; ++i) line.push_back(Vec3(i, 0.0, 0.0), Vec3(i, 0.0, 0.0));
  CHECK_THROWS_AS(umeyama_sim3(line), Error);
  Correspondences two;
  two.push_back(Vec3::Zero(), Vec3::Zero());
  two.push_back(Vec3::UnitX(), Vec3::UnitX());
  CHECK_THROWS_AS(umeyama_sim3(two), Error);
}

TEST_CASE("umeyama_2d recovers a planar similarity") {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Similarity2 truth{0.7, 1.8, Eigen::Vector2d(0.3, -0.2)};
  std::vector<Eigen::Vector2d> src, dst;
  for (int i = 0; i < 10; ++i) {
    src.emplace_back(u(g), u(g));
    dst.push_back(truth.apply(src.back()));
  }
  const Similarity2 est = umeyama_2d(src, dst);
  CHECK(std::abs(est.angle - truth.angle) < 1e-12);
  CHECK(std::abs(est.s - truth.s) < 1e-12);
  CHECK((est.t - truth.t).norm() < 1e-12);
  const Similarity2 rigid = umeyama_2d(src, dst, 1.8);
  CHECK(std::abs(rigid.angle - truth.angle) < 1e-12);
}

TEST_CASE("fit_symmetric recovers spin, scale and translation") {
  std::mt19937_64 g(5);
  for (int i = 0; i < 50; ++i) {
    const Vec3 axis = oracle::random_unit(g);
    const Sim3 truth = oracle::random_sim(g);
    const double spin = std::uniform_real_distribution<double>(-3.0, 3.0)(g);
    // The tracker only knows the rotation up to the spin.
    const Rot3 r_known = truth.r * Rot3::about_axis(axis, -spin);
    const Correspondences corr = synth(truth, 100, g);
    const SymmetricFit fit = fit_symmetric(corr, r_known, axis, ScaleFormula::kCentered);
    CHECK(std::abs(std::remainder(fit.theta - spin, 2.0 * M_PI)) < 1e-9);
    CHECK(rotation_angle(fit.rotation, truth.r) < 1e-7);
    CHECK(std::abs(fit.s - truth.s) < 1e-9);
    CHECK((fit.t - truth.t).norm() < 1e-9);
  }
}

TEST_CASE("fit_symmetric rejects points on the axis") {
  Correspondences corr;
  for (int i = 0; i < 4; ++i) corr.push_back(Vec3(0.0, i, 0.0), Vec3(0.0, 0.1 * i, 0.0));
  CHECK_THROWS_AS(fit_symmetric(corr, Rot3(), Vec3::UnitY()), Error);
}

TEST_CASE("ransac rejects planted outliers") {
  std::mt19937_64 g(6);
  for (int mode = 0; mode < 2; ++mode) {
    const Sim3 truth{0.4, oracle::random_rot(g), Vec3(0.1, -0.2, 1.0)};
    Correspondences corr = synth(truth, 300, g);
    std::vector<bool> planted(corr.size(), false);
    for (std::size_t i = 0; i < corr.size(); i += 3) {
      corr.camera[i] += oracle::random_unit(g) * 0.3;
      planted[i] = true;
    }
    RansacParams params = mode == 0 ? RansacParams::for_full_sim3() : RansacParams::for_given_rotation();
    params.seed = 99;
    const RansacMode m = mode == 0 ? RansacMode(FullSim3{}) : RansacMode(GivenRotation{truth.r});
    const RansacResult res = ransac_fit(corr, m, params);
    CHECK(res.inlier_count == 200);
    for (std::size_t i = 0; i < corr.size(); ++i) CHECK(res.inlier_mask[i] == !planted[i]);
    CHECK(std::abs(res.estimate.s - truth.s) < 1e-9);
    CHECK((res.estimate.t - truth.t).norm() < 1e-9);
    const RansacResult again = ransac_fit(corr, m, params);
    CHECK(again.estimate.t == res.estimate.t);
  }
}

TEST_CASE("ransac parameter and consensus errors") {
  std::mt19937_64 g(7);
  const Correspondences corr = synth(oracle::random_sim(g), 10, g);
  RansacParams bad;
  bad.iterations = 0;
  CHECK_THROWS_AS(ransac_fit(corr, FullSim3{}, bad), Error);
  RansacParams tiny = RansacParams::for_full_sim3();
  tiny.min_sample = 2;
  CHECK_THROWS_AS(ransac_fit(corr, FullSim3{}, tiny), Error);

  // Every point is far from every hypothesis except its own minimal sample.
  Correspondences scattered;
  for (int i = 0; i < 6; ++i) scattered.push_back(oracle::random_vec(g, 10.0), oracle::random_vec(g, 0.5));
  RansacParams strict = RansacParams::for_full_sim3();
  strict.min_sample = 5;
  strict.inlier_threshold = 1e-9;
  try {
    ransac_fit(scattered, FullSim3{}, strict);
    FAIL("expected no consensus");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNoConsensus);
  }
}

TEST_CASE("sum of squared residuals") {
  Correspondences corr;
  corr.push_back(Vec3(1.0, 0.0, 0.0), Vec3::Zero());
  corr.push_back(Vec3(0.0, 2.0, 0.0), Vec3::Zero());
  CHECK(sum_squared_residuals(corr, Sim3{}) == doctest::Approx(5.0));
}
