#include "captrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "captrack/error.hpp"
#include "captrack/random.hpp"

namespace captrack {

namespace {

constexpr std::uint64_t kTagRotationNoise = 0xA001;
constexpr std::uint64_t kTagCoordinateNoise = 0xC001;
constexpr std::uint64_t kTagSpin = 0x5A1;

struct Category_ {
  Category category;
  std::string_view name;
};

constexpr Category_ kCategories[] = {
    {Category::kLaptop, "laptop"}, {Category::kGlasses, "glasses"}, {Category::kScissors, "scissors"},
    {Category::kDrawers, "drawers"}, {Category::kBox, "box"},       {Category::kCylinder, "cylinder"},
};

// Samples come in antipodal pairs (p, -p), which keeps the centroid at the
// origin and the bounding box centered.
void push_pair(PointCloud& pts, const Vec3& p) {
  pts.push_back(p);
  pts.push_back(-p);
}

PointCloud sample_cuboid(const Vec3& dims, std::size_t pairs, SplitMix64& rng) {
  const Vec3 half = 0.5 * dims;
  const Vec3 area(dims.y() * dims.z(), dims.x() * dims.z(), dims.x() * dims.y());
  const double total = area.sum();
  PointCloud pts;
  pts.reserve(2 * pairs);
  // The eight vertices come first, as a mesh sampler would keep them.
  const double kCorners[4][3] = {{1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {-1, 1, 1}};
  for (std::size_t n = 0; n < std::min<std::size_t>(pairs, 4); ++n) {
    push_pair(pts, half.cwiseProduct(Vec3(kCorners[n][0], kCorners[n][1], kCorners[n][2])));
  }
  for (std::size_t n = 4; n < pairs; ++n) {
    int axis = 0;
    if (n < 7) {
      axis = static_cast<int>(n - 4);  // every face pair is hit at least once
    } else {
      const double u = uniform01(rng) * total;
      axis = u < area.x() ? 0 : (u < area.x() + area.y() ? 1 : 2);
    }
    Vec3 p(uniform(rng, -half.x(), half.x()), uniform(rng, -half.y(), half.y()), uniform(rng, -half.z(), half.z()));
    p(axis) = half(axis);
    push_pair(pts, p);
  }
  return pts;
}

// Cylinder about y. Side points sit on a fixed angular grid that contains the
// x and z extremes, so the sampled bounding box matches the analytic one.
PointCloud sample_cylinder(double radius, double height, std::size_t pairs, SplitMix64& rng) {
  constexpr int kAngularSteps = 64;
  const double side = 2.0 * std::numbers::pi * radius * height;
  const double cap = std::numbers::pi * radius * radius;
  PointCloud pts;
  pts.reserve(2 * pairs);
  auto side_point = [&](int step, double y) {
    const double a = 2.0 * std::numbers::pi * step / kAngularSteps;
    return Vec3(radius * std::cos(a), y, radius * std::sin(a));
  };
  for (std::size_t n = 0; n < pairs; ++n) {
    if (n == 0) {
      push_pair(pts, side_point(0, 0.5 * height));  // rim
    } else if (n == 1) {
      push_pair(pts, side_point(kAngularSteps / 4, 0.5 * height));
    } else if (n == 2 || uniform01(rng) * (side + cap) >= side) {
      const double rr = radius * std::sqrt(uniform01(rng));
      const double a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      push_pair(pts, Vec3(rr * std::cos(a), 0.5 * height, rr * std::sin(a)));
    } else {
      const int step = static_cast<int>(uniform_index(rng, kAngularSteps));
      push_pair(pts, side_point(step, uniform(rng, -0.5 * height, 0.5 * height)));
    }
  }
  return pts;
}

struct NormalizedPart {
  PartModel part;
  double scale;  // physical diagonal, meters
};

NormalizedPart normalize_part(std::string name, const PointCloud& physical) {
  Vec3 half = Vec3::Zero();
  for (const Vec3& p : physical) half = half.cwiseMax(p.cwiseAbs());
  const Vec3 extent = 2.0 * half;
  const double scale = extent.norm();
  NormalizedPart out{PartModel{std::move(name), {}, extent / scale}, scale};
  out.part.canonical_points.reserve(physical.size());
  for (const Vec3& p : physical) out.part.canonical_points.push_back(p / scale);
  return out;
}

class ModelBuilder {
 public:
  ModelBuilder(Category category, std::uint64_t seed, std::size_t points_per_part)
      : rng_(seed), pairs_((std::max<std::size_t>(points_per_part, 8) + 1) / 2) {
    model_.category = std::string(to_string(category));
  }

  // Instance variation: +-15% per dimension.
  double vary(double nominal) { return nominal * (1.0 + 0.15 * uniform(rng_, -1.0, 1.0)); }

  int add_cuboid(std::string name, const Vec3& dims) {
    return add(normalize_part(std::move(name), sample_cuboid(dims, pairs_, rng_)));
  }

  int add_cylinder(std::string name, double radius, double height) {
    return add(normalize_part(std::move(name), sample_cylinder(radius, height, pairs_, rng_)));
  }

  // Child placed at child_center (parent physical frame) when the joint is at zero.
  void add_joint(JointKind kind, int parent, int child, const Vec3& axis, const Vec3& pivot,
                 const Vec3& child_center, double lower, double upper) {
    const double sp = scales_[static_cast<std::size_t>(parent)];
    const double sc = scales_[static_cast<std::size_t>(child)];
    JointSpec joint;
    joint.kind = kind;
    joint.axis = axis.normalized();
    joint.pivot = kind == JointKind::kRevolute ? Vec3(pivot / sp) : Vec3::Zero();
    joint.parent = parent;
    joint.child = child;
    joint.lower = lower;
    joint.upper = upper;
    joint.rest = Sim3{sc / sp, Rot3::identity(), child_center / sp};
    model_.joints.push_back(joint);
  }

  ObjectModel finish(int root, std::optional<Vec3> symmetric_axis = std::nullopt) {
    model_.root = root;
    model_.symmetric_axis = symmetric_axis;
    model_.nominal_scale = scales_.at(static_cast<std::size_t>(root));
    return std::move(model_);
  }

 private:
  int add(NormalizedPart part) {
    model_.parts.push_back(std::move(part.part));
    scales_.push_back(part.scale);
    return static_cast<int>(model_.parts.size()) - 1;
  }

  SplitMix64 rng_;
  std::size_t pairs_;
  ObjectModel model_;
  std::vector<double> scales_;
};

}  // namespace

Category parse_category(std::string_view name) {
  for (const auto& c : kCategories) {
    if (c.name == name) return c.category;
  }
  throw Error(ErrorKind::kConfig, "unknown category template '" + std::string(name) + "'");
}

std::string_view to_string(Category category) {
  for (const auto& c : kCategories) {
    if (c.category == category) return c.name;
  }
  return "unknown";
}

bool is_articulated(Category category) {
  return category != Category::kBox && category != Category::kCylinder;
}

PerturbSpec perturb_preset(Category category) {
  switch (category) {
    case Category::kGlasses: return PerturbSpec{0.02, 5.0, 0.02};
    case Category::kScissors: return PerturbSpec{0.01, 3.0, 0.01};
    case Category::kLaptop: return PerturbSpec{0.015, 3.0, 0.02};
    case Category::kDrawers: return PerturbSpec{0.02, 3.0, 0.02};
    case Category::kBox:
    case Category::kCylinder: return PerturbSpec::rigid_preset();
  }
  return PerturbSpec::rigid_preset();
}

double joint_change_per_100_frames(Category category) {
  switch (category) {
    case Category::kGlasses: return deg2rad(19.19);
    case Category::kScissors: return deg2rad(34.32);
    case Category::kLaptop: return deg2rad(26.13);
    case Category::kDrawers: return 0.0372;
    default: return 0.0;
  }
}

MotionSpec MotionSpec::for_category(Category category) {
  MotionSpec spec;
  spec.joint_change = joint_change_per_100_frames(category);
  return spec;
}

ObjectModel make_primitive_model(Category category, std::uint64_t seed, std::size_t points_per_part) {
  if (points_per_part < 8) throw Error(ErrorKind::kInvalidArgument, "make_primitive_model: points_per_part < 8");
  ModelBuilder b(category, seed, points_per_part);
  switch (category) {
    case Category::kLaptop: {
      const double w = b.vary(0.30), d = b.vary(0.22), tb = b.vary(0.02), h = b.vary(0.20), td = b.vary(0.008);
      const int base = b.add_cuboid("base", {w, tb, d});
      const int display = b.add_cuboid("display", {w, h, td});
      b.add_joint(JointKind::kRevolute, base, display, Vec3::UnitX(), {0.0, 0.5 * tb, -0.5 * d},
                  {0.0, 0.5 * tb + 0.5 * h, -0.5 * d - 0.5 * td}, -1.6, 1.6);
      return b.finish(base);
    }
    case Category::kGlasses: {
      const double wf = b.vary(0.14), hf = b.vary(0.045), tf = b.vary(0.012);
      const double len = b.vary(0.14), tt = b.vary(0.008), ht = b.vary(0.02);
      const int right = b.add_cuboid("right temple", {tt, ht, len});
      const int left = b.add_cuboid("left temple", {tt, ht, len});
      const int base = b.add_cuboid("base", {wf, hf, tf});
      b.add_joint(JointKind::kRevolute, base, right, Vec3::UnitY(), {0.5 * wf, 0.0, -0.5 * tf},
                  {0.5 * wf - 0.5 * tt, 0.0, -0.5 * tf - 0.5 * len}, -0.3, 1.5);
      b.add_joint(JointKind::kRevolute, base, left, -Vec3::UnitY(), {-0.5 * wf, 0.0, -0.5 * tf},
                  {-0.5 * wf + 0.5 * tt, 0.0, -0.5 * tf - 0.5 * len}, -0.3, 1.5);
      return b.finish(base);
    }
    case Category::kScissors: {
      const double len = b.vary(0.18), wd = b.vary(0.05), th = b.vary(0.008);
      const int right = b.add_cuboid("right half", {len, wd, th});
      const int left = b.add_cuboid("left half", {len, wd, th});
      b.add_joint(JointKind::kRevolute, right, left, Vec3::UnitZ(), {0.15 * len, 0.0, -0.5 * th},
                  {0.0, 0.0, -th}, -0.2, 1.2);
      return b.finish(right);
    }
    case Category::kDrawers: {
      const Vec3 body(b.vary(0.40), b.vary(0.60), b.vary(0.40));
      const Vec3 drawer(0.9 * body.x(), 0.28 * body.y(), 0.9 * body.z());
      const int lowest = b.add_cuboid("lowest", drawer);
      const int middle = b.add_cuboid("middle", drawer);
      const int top = b.add_cuboid("top", drawer);
      const int base = b.add_cuboid("base", body);
      const double front = 0.06 * body.z();
      const double rows[] = {-0.317 * body.y(), 0.0, 0.317 * body.y()};
      const int drawers[] = {lowest, middle, top};
      for (int k = 0; k < 3; ++k) {
        b.add_joint(JointKind::kPrismatic, base, drawers[k], Vec3::UnitZ(), Vec3::Zero(), {0.0, rows[k], front},
                    0.0, 0.25);
      }
      return b.finish(base);
    }
    case Category::kBox: {
      const int box = b.add_cuboid("box", {b.vary(0.20), b.vary(0.12), b.vary(0.30)});
      return b.finish(box);
    }
    case Category::kCylinder: {
      const double r = b.vary(0.05), h = b.vary(0.16);
      const int body = b.add_cylinder("body", r, h);
      return b.finish(body, Vec3::UnitY());
    }
  }
  throw Error(ErrorKind::kConfig, "make_primitive_model: unknown template");
}

std::vector<TrajectoryFrame> sample_trajectory(const ObjectModel& model, std::size_t length, const MotionSpec& motion,
                                               std::uint64_t seed) {
  if (length < 1) throw Error(ErrorKind::kInvalidArgument, "sample_trajectory: length must be >= 1");
  SplitMix64 rng(seed);
  const double two_pi = 2.0 * std::numbers::pi;

  Rot3 rotation = random_rotation(rng);
  Vec3 translation(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), motion.distance * uniform(rng, 0.9, 1.1));

  // Velocity profiles: two sinusoids along random directions with weights
  // summing to one, so the magnitude never exceeds the cap.
  struct Profile {
    Vec3 u1, u2;
    double f1, f2, p1, p2, alpha;
    Vec3 at(double tau) const {
      return alpha * std::sin(f1 * tau + p1) * u1 + (1.0 - alpha) * std::sin(f2 * tau + p2) * u2;
    }
  };
  auto make_profile = [&] {
    Profile p;
    p.u1 = random_unit_vector(rng);
    p.u2 = random_unit_vector(rng);
    p.f1 = two_pi * uniform(rng, 0.5, 2.0);
    p.f2 = two_pi * uniform(rng, 0.5, 2.0);
    p.p1 = uniform(rng, 0.0, two_pi);
    p.p2 = uniform(rng, 0.0, two_pi);
    p.alpha = uniform(rng, 0.3, 0.7);
    return p;
  };
  const Profile spin = make_profile();
  const Profile drift = make_profile();

  struct JointPlan {
    double start, change, lower, upper;
  };
  std::vector<JointPlan> plans;
  const double span_frames = static_cast<double>(length - 1) / 99.0;
  for (const JointSpec& joint : model.joints) {
    const double range = joint.upper - joint.lower;
    const double change = std::min(std::abs(motion.joint_change) * span_frames, range);
    const bool up = uniform01(rng) < 0.5;
    const double u = uniform01(rng);
    const double start = up ? joint.lower + u * (range - change) : joint.upper - u * (range - change);
    plans.push_back({start, up ? change : -change, joint.lower, joint.upper});
  }

  std::vector<TrajectoryFrame> frames;
  frames.reserve(length);
  const double cap_rad = deg2rad(motion.rot_cap_deg);
  for (std::size_t t = 0; t < length; ++t) {
    const double tau = length > 1 ? static_cast<double>(t) / static_cast<double>(length - 1) : 0.0;
    TrajectoryFrame frame;
    frame.root_pose = Sim3{model.nominal_scale, rotation, translation};
    for (const JointPlan& plan : plans) {
      const double q = plan.start + plan.change * 0.5 * (1.0 - std::cos(std::numbers::pi * tau));
      frame.joint_states.push_back(std::clamp(q, plan.lower, plan.upper));
    }
    frames.push_back(std::move(frame));
    if (cap_rad != 0.0) rotation = renormalize(Rot3::exp(cap_rad * spin.at(tau)) * rotation);
    translation += motion.trans_cap * drift.at(tau);
  }
  return frames;
}

std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t count) {
  std::vector<std::size_t> picked;
  if (points.empty() || count == 0) return picked;
  count = std::min(count, points.size());
  picked.reserve(count);
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  std::size_t current = 0;
  for (std::size_t k = 0; k < count; ++k) {
    picked.push_back(current);
    std::size_t next = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      dist[i] = std::min(dist[i], (points[i] - points[current]).squaredNorm());
      if (dist[i] > best) {
        best = dist[i];
        next = i;
      }
    }
    current = next;
  }
  return picked;
}

Observation render_observation(const ObjectModel& model, std::span<const Sim3> part_poses, const Vec3& viewpoint,
                               std::size_t n_points) {
  if (n_points < 1) throw Error(ErrorKind::kInvalidArgument, "render_observation: n_points must be >= 1");
  if (part_poses.size() != model.part_count()) {
    throw Error(ErrorKind::kInvalidArgument, "render_observation: one pose per part required");
  }
  Observation visible;
  for (std::size_t j = 0; j < model.part_count(); ++j) {
    const Sim3& pose = part_poses[j];
    for (const Vec3& y : model.parts[j].canonical_points) {
      const Vec3 p = apply_sim(pose, y);
      if ((p - pose.t).dot(viewpoint - p) > 0.0) {
        visible.points.push_back(p);
        visible.labels.push_back(static_cast<int>(j));
        visible.nocs.push_back(y);
      }
    }
    visible.gt_parts.push_back(Pose9::from_sim(pose, model.parts[j].aspect));
  }
  if (visible.points.empty()) throw Error(ErrorKind::kDegenerate, "render_observation: every point was culled");
  if (visible.points.size() <= n_points) return visible;

  std::vector<std::size_t> keep = farthest_point_sample(visible.points, n_points);
  std::sort(keep.begin(), keep.end());
  Observation out;
  out.gt_parts = visible.gt_parts;
  for (std::size_t i : keep) {
    out.points.push_back(visible.points[i]);
    out.labels.push_back(visible.labels[i]);
    out.nocs.push_back(visible.nocs[i]);
  }
  return out;
}

void NoiseSpec::validate() const {
  if (!(coord_sigma >= 0.0) || !(rot_sigma_deg >= 0.0) || !(outlier_fraction >= 0.0 && outlier_fraction <= 1.0) ||
      !(seg_error_rate >= 0.0 && seg_error_rate <= 1.0)) {
    throw Error(ErrorKind::kConfig, "noise spec out of range");
  }
}

namespace {

void require_ground_truth(const PredictorQuery& query, const char* who) {
  if (!query.observation.has_ground_truth()) {
    throw Error(ErrorKind::kInvalidArgument, std::string(who) + ": observation carries no ground truth");
  }
  if (query.canonical.size() != query.source_index.size()) {
    throw Error(ErrorKind::kInvalidArgument, std::string(who) + ": query size mismatch");
  }
}

const Pose9& gt_part(const PredictorQuery& query, int part) {
  const auto j = static_cast<std::size_t>(part);
  if (j >= query.observation.gt_parts.size()) {
    throw Error(ErrorKind::kInvalidArgument, "oracle: part index out of range");
  }
  return query.observation.gt_parts[j];
}

}  // namespace

std::vector<Rot3> oracle_rotation_predictor(const PredictorQuery& query, int part, const Sim3& estimate,
                                            const NoiseSpec& noise) {
  require_ground_truth(query, "oracle_rotation_predictor");
  const Rot3 delta = delta_of(estimate, gt_part(query, part).sim()).r;
  std::vector<Rot3> out(query.canonical.size(), delta);
  if (noise.rot_sigma_deg == 0.0) return out;
  const double sigma = deg2rad(noise.rot_sigma_deg);
  for (std::size_t i = 0; i < out.size(); ++i) {
    SplitMix64 rng(derive_seed(noise.seed, {query.frame, kTagRotationNoise, static_cast<std::uint64_t>(part),
                                            query.source_index[i]}));
    const Vec3 axis = random_unit_vector(rng);
    out[i] = delta * Rot3::about_axis(axis, normal(rng, sigma));
  }
  return out;
}

PointCloud oracle_axis_predictor(const PredictorQuery& query, int part, const Sim3& estimate, const Vec3& axis,
                                 const NoiseSpec& noise) {
  require_unit(axis, "symmetry axis");
  const std::vector<Rot3> rotations = oracle_rotation_predictor(query, part, estimate, noise);
  PointCloud out(rotations.size());
  for (std::size_t i = 0; i < rotations.size(); ++i) out[i] = rotations[i] * axis;
  return out;
}

CoordinatePrediction oracle_coordinate_predictor(const PredictorQuery& query, std::size_t part_count,
                                                 const NoiseSpec& noise, const std::optional<Vec3>& symmetric_axis) {
  require_ground_truth(query, "oracle_coordinate_predictor");
  noise.validate();
  const Observation& obs = query.observation;
  std::optional<Rot3> spin;
  if (noise.symmetric_spin && symmetric_axis) {
    SplitMix64 rng(derive_seed(noise.seed, {query.frame, kTagSpin}));
    spin = Rot3::about_axis(*symmetric_axis, uniform(rng, 0.0, 2.0 * std::numbers::pi));
  }
  const bool noisy = noise.coord_sigma > 0.0 || noise.outlier_fraction > 0.0 || noise.seg_error_rate > 0.0;

  CoordinatePrediction out;
  out.labels.resize(query.source_index.size());
  out.coords.resize(query.source_index.size());
  for (std::size_t i = 0; i < query.source_index.size(); ++i) {
    const std::size_t src = query.source_index[i];
    int label = obs.labels.at(src);
    Vec3 y = obs.nocs.at(src);
    if (spin) y = *spin * y;
    if (noisy) {
      SplitMix64 rng(derive_seed(noise.seed, {query.frame, kTagCoordinateNoise, src}));
      const double u_seg = uniform01(rng);
      const double u_out = uniform01(rng);
      if (label >= 0 && part_count > 1 && u_seg < noise.seg_error_rate) {
        const auto shift = 1 + uniform_index(rng, part_count - 1);
        label = static_cast<int>((static_cast<std::size_t>(label) + shift) % part_count);
      }
      if (noise.coord_sigma > 0.0) {
        y += Vec3(normal(rng, noise.coord_sigma), normal(rng, noise.coord_sigma), normal(rng, noise.coord_sigma));
      }
      if (u_out < noise.outlier_fraction) {
        y = Vec3(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
      }
    }
    out.labels[i] = label;
    out.coords[i] = y;
  }
  return out;
}

OraclePredictor::OraclePredictor(std::size_t part_count, std::optional<Vec3> symmetric_axis, NoiseSpec noise)
    : part_count_(part_count), symmetric_axis_(std::move(symmetric_axis)), noise_(noise) {
  noise_.validate();
}

std::vector<Rot3> OraclePredictor::predict_rotations(int part, const PredictorQuery& query,
                                                     const Sim3& canonicalizer) {
  return oracle_rotation_predictor(query, part, canonicalizer, noise_);
}

PointCloud OraclePredictor::predict_axis_endpoints(int part, const PredictorQuery& query,
                                                   const Sim3& canonicalizer) {
  if (!symmetric_axis_) throw Error(ErrorKind::kInvalidArgument, "axis end points requested for an asymmetric model");
  return oracle_axis_predictor(query, part, canonicalizer, *symmetric_axis_, noise_);
}

CoordinatePrediction OraclePredictor::predict_coordinates(const PredictorQuery& query) {
  return oracle_coordinate_predictor(query, part_count_, noise_, symmetric_axis_);
}

}  // namespace captrack
