#include "captrack/fitting.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numeric>
#include <string>

#include "captrack/error.hpp"
#include "captrack/random.hpp"

namespace captrack {

namespace {

constexpr double kMinScale = 1e-6;

void require_matched(const Correspondences& corr, std::size_t min_count, const char* estimator) {
  if (corr.camera.size() != corr.normalized.size()) {
    throw Error(ErrorKind::kInvalidArgument, std::string(estimator) + ": correspondence lists differ in length");
  }
  if (corr.size() < min_count) {
    throw Error(ErrorKind::kInvalidArgument, std::string(estimator) + ": needs at least " +
                                                 std::to_string(min_count) + " correspondences");
  }
}

void require_positive_scale(double s, const char* estimator) {
  if (!(s > kMinScale)) {
    throw Error(ErrorKind::kNonPositiveScale,
                std::string(estimator) + ": fitted scale " + std::to_string(s) + " is not positive");
  }
}

Vec3 mean_of(std::span<const Vec3> pts) {
  Vec3 m = Vec3::Zero();
  for (const Vec3& p : pts) m += p;
  return m / static_cast<double>(pts.size());
}

}  // namespace

Correspondences Correspondences::subset(std::span<const std::size_t> indices) const {
  Correspondences out;
  out.camera.reserve(indices.size());
  out.normalized.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(camera.at(i), normalized.at(i));
  return out;
}

ScaleTranslation fit_scale_translation(const Correspondences& corr, const Rot3& r, ScaleFormula formula) {
  require_matched(corr, 1, "fit_scale_translation");
  const std::size_t n = corr.size();
  std::vector<Vec3> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = r * corr.normalized[i];

  ScaleTranslation out;
  if (formula == ScaleFormula::kRatio) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += w[i].dot(corr.camera[i]);
      den += w[i].squaredNorm();
    }
    if (den < 1e-12) throw Error(ErrorKind::kDegenerate, "fit_scale_translation: normalized points are all zero");
    out.s = num / den;
    require_positive_scale(out.s, "fit_scale_translation");
    Vec3 acc = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) acc += corr.camera[i] - out.s * w[i];
    out.t = acc / static_cast<double>(n);
    return out;
  }

  const Vec3 w_mean = mean_of(w);
  const Vec3 c_mean = mean_of(corr.camera);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 wc = w[i] - w_mean;
    num += wc.dot(corr.camera[i] - c_mean);
    den += wc.squaredNorm();
  }
  if (den < 1e-12) throw Error(ErrorKind::kDegenerate, "fit_scale_translation: normalized points have no spread");
  out.s = num / den;
  require_positive_scale(out.s, "fit_scale_translation");
  out.t = c_mean - out.s * w_mean;
  return out;
}

Sim3 umeyama_sim3(const Correspondences& corr) {
  require_matched(corr, 3, "umeyama");
  const std::size_t n = corr.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Vec3 y_mean = mean_of(corr.normalized);
  const Vec3 c_mean = mean_of(corr.camera);

  Mat3 cov = Mat3::Zero();
  double y_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 yc = corr.normalized[i] - y_mean;
    cov += (corr.camera[i] - c_mean) * yc.transpose();
    y_var += yc.squaredNorm();
  }
  cov *= inv_n;
  y_var *= inv_n;

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (y_var < 1e-24 || !(sv(0) > 0.0) || sv(1) <= 1e-10 * sv(0)) {
    throw Error(ErrorKind::kDegenerate, "umeyama: points are collinear or coincident");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 sign(1.0, 1.0, 1.0);
  if (u.determinant() * v.determinant() < 0.0) sign(2) = -1.0;

  Sim3 out;
  out.r = Rot3::from_matrix_unchecked(u * sign.asDiagonal() * v.transpose());
  out.s = sv.dot(sign) / y_var;
  require_positive_scale(out.s, "umeyama");
  out.t = c_mean - out.s * (out.r * y_mean);
  return out;
}

Eigen::Vector2d Similarity2::apply(const Eigen::Vector2d& p) const {
  const double c = std::cos(angle);
  const double sn = std::sin(angle);
  return s * Eigen::Vector2d(c * p.x() - sn * p.y(), sn * p.x() + c * p.y()) + t;
}

Similarity2 umeyama_2d(std::span<const Eigen::Vector2d> src, std::span<const Eigen::Vector2d> dst,
                       std::optional<double> fixed_scale) {
  if (src.size() != dst.size()) throw Error(ErrorKind::kInvalidArgument, "umeyama_2d: length mismatch");
  if (src.size() < 2) throw Error(ErrorKind::kInvalidArgument, "umeyama_2d: needs at least 2 points");
  if (fixed_scale && !(*fixed_scale > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "umeyama_2d: fixed scale must be positive");
  }
  Eigen::Vector2d src_mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d dst_mean = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    src_mean += src[i];
    dst_mean += dst[i];
  }
  src_mean /= static_cast<double>(src.size());
  dst_mean /= static_cast<double>(dst.size());

  double var = 0.0;
  double dot = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector2d a = src[i] - src_mean;
    const Eigen::Vector2d b = dst[i] - dst_mean;
    var += a.squaredNorm();
    dot += a.dot(b);
    cross += a.x() * b.y() - a.y() * b.x();
  }
  if (var < 1e-12) throw Error(ErrorKind::kDegenerate, "umeyama_2d: source points are coincident");
  const double magnitude = std::hypot(dot, cross);
  if (magnitude < 1e-12 * var) throw Error(ErrorKind::kDegenerate, "umeyama_2d: no rotational signal");

  Similarity2 out;
  out.angle = std::atan2(cross, dot);
  out.s = fixed_scale ? *fixed_scale : magnitude / var;
  out.t = Eigen::Vector2d::Zero();
  out.t = dst_mean - out.apply(src_mean);
  return out;
}

SymmetricFit fit_symmetric(const Correspondences& corr, const Rot3& r, const Vec3& axis, ScaleFormula formula) {
  require_matched(corr, 2, "fit_symmetric");
  require_unit(axis, "symmetry axis");
  const Rot3 to_y = basis_to_y(axis);
  const Mat3 to_y_rt = to_y.matrix() * r.matrix().transpose();

  // With the axis on y, a spin R_y(theta) acts on (z, x) as a planar rotation by theta.
  std::vector<Eigen::Vector2d> src(corr.size());
  std::vector<Eigen::Vector2d> dst(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 y = to_y * corr.normalized[i];
    const Vec3 u = to_y_rt * corr.camera[i];
    src[i] = Eigen::Vector2d(y.z(), y.x());
    dst[i] = Eigen::Vector2d(u.z(), u.x());
  }
  Similarity2 planar;
  try {
    planar = umeyama_2d(src, dst);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDegenerate) throw;
    throw Error(ErrorKind::kDegenerate, "fit_symmetric: points lie on the symmetry axis");
  }

  SymmetricFit out;
  out.theta = planar.angle;
  out.rotation = r * Rot3::about_axis(axis, planar.angle);
  const ScaleTranslation st = fit_scale_translation(corr, out.rotation, formula);
  out.s = st.s;
  out.t = st.t;
  return out;
}

double sum_squared_residuals(const Correspondences& corr, const Sim3& sim) {
  double total = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    total += (corr.camera[i] - apply_sim(sim, corr.normalized[i])).squaredNorm();
  }
  return total;
}

namespace {

Sim3 fit_model(const Correspondences& corr, const RansacMode& mode, bool minimal_sample) {
  if (std::holds_alternative<FullSim3>(mode)) return umeyama_sim3(corr);
  const auto& given = std::get<GivenRotation>(mode);
  ScaleFormula formula = given.formula;
  if (minimal_sample) formula = corr.size() == 1 ? ScaleFormula::kRatio : ScaleFormula::kCentered;
  const ScaleTranslation st = fit_scale_translation(corr, given.r, formula);
  return Sim3{st.s, given.r, st.t};
}

std::size_t mark_inliers(const Correspondences& corr, const Sim3& model, double threshold,
                         std::vector<bool>& mask) {
  mask.assign(corr.size(), false);
  std::size_t count = 0;
  const double thr2 = threshold * threshold;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if ((corr.camera[i] - apply_sim(model, corr.normalized[i])).squaredNorm() <= thr2) {
      mask[i] = true;
      ++count;
    }
  }
  return count;
}

}  // namespace

RansacResult ransac_fit(const Correspondences& corr, const RansacMode& mode, const RansacParams& params) {
  const bool full = std::holds_alternative<FullSim3>(mode);
  const int smallest = full ? 3 : 1;
  if (params.iterations < 1 || !(params.inlier_threshold > 0.0) || params.min_sample < smallest) {
    throw Error(ErrorKind::kInvalidArgument, "ransac_fit: invalid parameters");
  }
  require_matched(corr, static_cast<std::size_t>(params.min_sample), "ransac_fit");

  const std::size_t n = corr.size();
  const std::size_t k = static_cast<std::size_t>(params.min_sample);
  SplitMix64 rng(params.seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  std::vector<bool> mask;
  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  Sim3 best_model;
  for (int it = 0; it < params.iterations; ++it) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
      std::swap(perm[i], perm[j]);
    }
    Sim3 model;
    try {
      model = fit_model(corr.subset(std::span(perm.data(), k)), mode, true);
    } catch (const Error&) {
      continue;
    }
    const std::size_t count = mark_inliers(corr, model, params.inlier_threshold, mask);
    if (count > best_count) {
      best_count = count;
      best_model = model;
      best_mask = mask;
    }
  }
  if (best_count < k) {
    throw Error(ErrorKind::kNoConsensus, "ransac_fit: no hypothesis reached " + std::to_string(k) + " inliers");
  }

  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < n; ++i) {
    if (best_mask[i]) inliers.push_back(i);
  }
  RansacResult out;
  try {
    out.estimate = fit_model(corr.subset(inliers), mode, false);
  } catch (const Error&) {
    out.estimate = best_model;
  }
  out.inlier_count = mark_inliers(corr, out.estimate, params.inlier_threshold, out.inlier_mask);
  return out;
}

}  // namespace captrack
