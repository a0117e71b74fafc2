#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "captrack/geometry.hpp"

namespace captrack {

// Matched camera-frame points (meters) and normalized object coordinates.
struct Correspondences {
  std::vector<Vec3> camera;
  std::vector<Vec3> normalized;

  std::size_t size() const { return camera.size(); }
  void push_back(const Vec3& c, const Vec3& y) {
    camera.push_back(c);
    normalized.push_back(y);
  }
  Correspondences subset(std::span<const std::size_t> indices) const;
};

// kRatio is the closed form s = sum(W.C) / sum(W.W), t = mean(C - sW). It is
// exact on noise-free data only when the rotated coordinates W have zero mean
// or the translation is zero. kCentered is the least-squares solution over
// (s, t) jointly and is exact on any noise-free set of >= 2 distinct points.
enum class ScaleFormula { kRatio, kCentered };

struct ScaleTranslation {
  double s = 1.0;
  Vec3 t = Vec3::Zero();
};

ScaleTranslation fit_scale_translation(const Correspondences& corr, const Rot3& r,
                                       ScaleFormula formula = ScaleFormula::kRatio);

// Least-squares similarity C ~ s R Y + T (Umeyama 1991).
Sim3 umeyama_sim3(const Correspondences& corr);

struct Similarity2 {
  double angle = 0.0;  // radians, counter-clockwise
  double s = 1.0;
  Eigen::Vector2d t = Eigen::Vector2d::Zero();

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
};

// 2D similarity dst ~ s R(angle) src + t; a fixed scale reduces it to a rigid fit.
Similarity2 umeyama_2d(std::span<const Eigen::Vector2d> src, std::span<const Eigen::Vector2d> dst,
                       std::optional<double> fixed_scale = std::nullopt);

struct SymmetricFit {
  double s = 1.0;
  Vec3 t = Vec3::Zero();
  double theta = 0.0;  // spin about the symmetry axis, radians
  Rot3 rotation;       // r * R(axis, theta)
};

// Scale and translation for a category that is rotationally symmetric about
// `axis` (in the normalized frame). The spin that rotation alone cannot
// observe is recovered by a 2D fit on the plane orthogonal to the axis.
SymmetricFit fit_symmetric(const Correspondences& corr, const Rot3& r, const Vec3& axis,
                           ScaleFormula formula = ScaleFormula::kRatio);

struct RansacParams {
  int iterations = 256;
  double inlier_threshold = 0.01;  // meters
  int min_sample = 4;
  std::uint64_t seed = 0;

  static RansacParams for_full_sim3() { return RansacParams{}; }
  static RansacParams for_given_rotation() { return RansacParams{256, 0.01, 2, 0}; }
};

struct FullSim3 {};
struct GivenRotation {
  Rot3 r;
  ScaleFormula formula = ScaleFormula::kCentered;  // used for the final refit
};
using RansacMode = std::variant<FullSim3, GivenRotation>;

struct RansacResult {
  Sim3 estimate;
  std::vector<bool> inlier_mask;
  std::size_t inlier_count = 0;
};

RansacResult ransac_fit(const Correspondences& corr, const RansacMode& mode, const RansacParams& params);

// Sum of squared residuals |C - sim(Y)|^2.
double sum_squared_residuals(const Correspondences& corr, const Sim3& sim);

}  // namespace captrack
