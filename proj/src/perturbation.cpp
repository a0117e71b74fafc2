#include "captrack/perturbation.hpp"

#include <cmath>

#include "captrack/error.hpp"

namespace captrack {

void PerturbSpec::validate() const {
  if (!(sigma_scale >= 0.0) || !(sigma_rot_deg >= 0.0) || !(sigma_trans >= 0.0)) {
    throw Error(ErrorKind::kConfig, "perturbation sigmas must be nonnegative");
  }
}

Vec3 random_unit_vector(SplitMix64& rng) {
  for (;;) {
    const Vec3 v(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

Rot3 random_rotation(SplitMix64& rng) {
  for (;;) {
    Eigen::Quaterniond q(standard_normal(rng), standard_normal(rng), standard_normal(rng), standard_normal(rng));
    if (q.norm() > 1e-12) return project_to_so3(q.normalized().toRotationMatrix());
  }
}

PerturbationSample sample_perturbation(const PerturbSpec& spec, SplitMix64& rng) {
  PerturbationSample s;
  s.n_scale = normal(rng, spec.sigma_scale);
  s.axis = random_unit_vector(rng);
  s.angle = deg2rad(normal(rng, spec.sigma_rot_deg));
  s.direction = random_unit_vector(rng);
  s.length = normal(rng, spec.sigma_trans);
  return s;
}

Pose9 apply_perturbation(const Pose9& pose, const PerturbationSample& sample) {
  const double s = pose.scale() * (1.0 + sample.n_scale);
  if (!(s > 0.0)) throw Error(ErrorKind::kNonPositiveScale, "perturbation produced a non-positive scale");
  Pose9 out;
  out.d = s * pose.aspect();
  out.r = pose.r * Rot3::about_axis(sample.axis, sample.angle);
  out.t = pose.t + sample.length * sample.direction;
  return out;
}

Pose9 perturb_pose(const Pose9& pose, const PerturbSpec& spec, SplitMix64& rng) {
  spec.validate();
  if (spec.is_zero()) return pose;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const PerturbationSample sample = sample_perturbation(spec, rng);
    if (1.0 + sample.n_scale > 0.0) return apply_perturbation(pose, sample);
  }
  throw Error(ErrorKind::kNonPositiveScale, "perturb_pose: 100 draws without a positive scale");
}

Pose9 perturb_pose(const Pose9& pose, const PerturbSpec& spec, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return perturb_pose(pose, spec, rng);
}

}  // namespace captrack
