#pragma once

#include <cstdint>

#include "captrack/geometry.hpp"
#include "captrack/random.hpp"

namespace captrack {

// Gaussian pose jitter: s' = s (1 + n_s), R' = R R_rand, T' = T + n_T.
struct PerturbSpec {
  double sigma_scale = 0.0;    // relative
  double sigma_rot_deg = 0.0;  // degrees
  double sigma_trans = 0.0;    // meters

  // sigma_scale 0.02, sigma_rot 5 deg, sigma_trans 3 cm.
  static PerturbSpec rigid_preset() { return PerturbSpec{0.02, 5.0, 0.03}; }

  PerturbSpec scaled(double m) const { return PerturbSpec{m * sigma_scale, m * sigma_rot_deg, m * sigma_trans}; }
  bool is_zero() const { return sigma_scale == 0.0 && sigma_rot_deg == 0.0 && sigma_trans == 0.0; }
  void validate() const;
};

// The raw draws behind one perturbation.
struct PerturbationSample {
  double n_scale = 0.0;
  Vec3 axis = Vec3::UnitZ();
  double angle = 0.0;  // radians, signed
  Vec3 direction = Vec3::UnitX();
  double length = 0.0;  // meters, signed
};

PerturbationSample sample_perturbation(const PerturbSpec& spec, SplitMix64& rng);
Pose9 apply_perturbation(const Pose9& pose, const PerturbationSample& sample);

// Resamples when the perturbed scale is not positive (at most 100 draws).
Pose9 perturb_pose(const Pose9& pose, const PerturbSpec& spec, std::uint64_t seed);
Pose9 perturb_pose(const Pose9& pose, const PerturbSpec& spec, SplitMix64& rng);

Vec3 random_unit_vector(SplitMix64& rng);
Rot3 random_rotation(SplitMix64& rng);

}  // namespace captrack
