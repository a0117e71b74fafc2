#include "captrack/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "captrack/error.hpp"
#include "captrack/fitting.hpp"
#include "captrack/kinematics.hpp"
#include "captrack/random.hpp"
#include "json_util.hpp"

namespace captrack {

using detail::json;

namespace {

constexpr std::uint64_t kTagModel = 1;
constexpr std::uint64_t kTagTrajectory = 2;
constexpr std::uint64_t kTagInit = 3;
constexpr std::uint64_t kTagInitExtra = 4;
constexpr std::uint64_t kTagAll = 5;
constexpr std::uint64_t kTagNoise = 6;
constexpr std::uint64_t kTagRansac = 7;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::kConfig, "config: " + msg); }

void reject_unknown(const json& j, const char* where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) config_error(std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; })) {
      config_error("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(std::string("bad value for '") + key + "'");
  }
}

std::string_view aspect_policy_name(AspectPolicy p) {
  switch (p) {
    case AspectPolicy::kHoldInitial: return "hold";
    case AspectPolicy::kPerFrame: return "per_frame";
    case AspectPolicy::kBlend: return "blend";
  }
  return "blend";
}

AspectPolicy parse_aspect_policy(const std::string& s) {
  if (s == "hold") return AspectPolicy::kHoldInitial;
  if (s == "per_frame") return AspectPolicy::kPerFrame;
  if (s == "blend") return AspectPolicy::kBlend;
  config_error("aspect_policy must be hold, per_frame or blend");
}

json perturb_to(const PerturbSpec& p) {
  return json{{"sigma_scale", p.sigma_scale}, {"sigma_rot_deg", p.sigma_rot_deg}, {"sigma_trans", p.sigma_trans}};
}

PerturbSpec perturb_from(const json& j) {
  reject_unknown(j, "init", {"sigma_scale", "sigma_rot_deg", "sigma_trans"});
  PerturbSpec p{0.0, 0.0, 0.0};
  read_key(j, "sigma_scale", p.sigma_scale);
  read_key(j, "sigma_rot_deg", p.sigma_rot_deg);
  read_key(j, "sigma_trans", p.sigma_trans);
  return p;
}

json noise_to(const NoiseSpec& n) {
  return json{{"coord_sigma", n.coord_sigma},         {"rot_sigma_deg", n.rot_sigma_deg},
              {"outlier_fraction", n.outlier_fraction}, {"seg_error_rate", n.seg_error_rate},
              {"seed", n.seed},                         {"symmetric_spin", n.symmetric_spin}};
}

NoiseSpec noise_from(const json& j) {
  reject_unknown(j, "noise",
                 {"coord_sigma", "rot_sigma_deg", "outlier_fraction", "seg_error_rate", "seed", "symmetric_spin"});
  NoiseSpec n;
  read_key(j, "coord_sigma", n.coord_sigma);
  read_key(j, "rot_sigma_deg", n.rot_sigma_deg);
  read_key(j, "outlier_fraction", n.outlier_fraction);
  read_key(j, "seg_error_rate", n.seg_error_rate);
  read_key(j, "seed", n.seed);
  read_key(j, "symmetric_spin", n.symmetric_spin);
  return n;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create directory '" + dir.string() + "': " + ec.message());
}

void perturb_parts(TrackerState& state, const PerturbSpec& spec, std::uint64_t seed, std::uint64_t tag,
                   std::uint64_t index, std::uint64_t frame, int draws) {
  if (spec.is_zero()) return;  // keeps estimates bit-identical
  for (int k = 1; k <= draws; ++k) {
    for (std::size_t j = 0; j < state.parts.size(); ++j) {
      PartEstimate& p = state.parts[j];
      const Pose9 jittered =
          perturb_pose(p.pose(), spec, derive_seed(seed, {tag, index, frame, static_cast<std::uint64_t>(k), j}));
      p.sim = jittered.sim();
      p.aspect = jittered.aspect();
    }
  }
}

Manifest make_manifest(const ExperimentConfig& config, const std::vector<ObjectModel>& models) {
  Manifest m;
  m.category = config.category;
  m.seed = config.seed;
  m.part_count = models.at(0).part_count();
  m.symmetric_axis = models[0].symmetric_axis;
  m.init = config.init_spec();
  m.noise = config.noise;
  m.frames = config.frames;
  for (std::size_t i = 0; i < models.size(); ++i) m.entries.push_back({trajectory_file_name(i), models[i].joints});
  return m;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (trajectories < 1) config_error("trajectories must be >= 1");
  if (frames < 2) config_error("frames must be >= 2");
  if (points < 1) config_error("points must be >= 1");
  if (points_per_part < 8) config_error("points_per_part must be >= 8");
  if (workers < 1) config_error("workers must be >= 1");
  if (!(crop_factor > 0.0)) config_error("crop_factor must be positive");
  if (ransac.iterations < 1 || !(ransac.threshold > 0.0)) config_error("ransac needs iterations >= 1, threshold > 0");
  try {
    init_spec().validate();
  } catch (const Error& e) {
    config_error(std::string("init: ") + e.what());
  }
  noise.validate();
  const MotionSpec m = motion_spec();
  if (!(m.rot_cap_deg >= 0.0) || !(m.trans_cap >= 0.0) || !(m.joint_change >= 0.0) || !(m.distance > 0.0)) {
    config_error("motion values must be nonnegative, distance positive");
  }
}

ExperimentConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    config_error(e.what());
  }
  reject_unknown(j, "config",
                 {"category", "trajectories", "frames", "points", "points_per_part", "init", "noise", "motion",
                  "aspect_policy", "ransac", "rotation_projection", "crop", "crop_factor", "gt_extents", "seed", "out",
                  "workers"});
  ExperimentConfig c;
  if (j.contains("category")) {
    std::string name;
    read_key(j, "category", name);
    c.category = parse_category(name);
  }
  read_key(j, "trajectories", c.trajectories);
  read_key(j, "frames", c.frames);
  read_key(j, "points", c.points);
  read_key(j, "points_per_part", c.points_per_part);
  if (j.contains("init")) c.init = perturb_from(j.at("init"));
  if (j.contains("noise")) c.noise = noise_from(j.at("noise"));
  if (j.contains("motion")) {
    const json& m = j.at("motion");
    reject_unknown(m, "motion", {"rot_cap_deg", "trans_cap", "joint_change", "distance"});
    MotionSpec spec = MotionSpec::for_category(c.category);
    read_key(m, "rot_cap_deg", spec.rot_cap_deg);
    read_key(m, "trans_cap", spec.trans_cap);
    read_key(m, "joint_change", spec.joint_change);
    read_key(m, "distance", spec.distance);
    c.motion = spec;
  }
  if (j.contains("aspect_policy")) {
    std::string p;
    read_key(j, "aspect_policy", p);
    c.aspect_policy = parse_aspect_policy(p);
  }
  if (j.contains("ransac")) {
    const json& r = j.at("ransac");
    reject_unknown(r, "ransac", {"enabled", "iterations", "threshold"});
    read_key(r, "enabled", c.ransac.enabled);
    read_key(r, "iterations", c.ransac.iterations);
    read_key(r, "threshold", c.ransac.threshold);
  }
  read_key(j, "rotation_projection", c.rotation_projection);
  read_key(j, "crop", c.crop);
  read_key(j, "crop_factor", c.crop_factor);
  read_key(j, "gt_extents", c.gt_extents);
  read_key(j, "seed", c.seed);
  std::string out;
  read_key(j, "out", out);
  if (!out.empty()) c.out = out;
  read_key(j, "workers", c.workers);
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(read_text(path)); }

std::string config_to_json(const ExperimentConfig& c) {
  const MotionSpec m = c.motion_spec();
  json j{{"category", std::string(to_string(c.category))},
         {"trajectories", c.trajectories},
         {"frames", c.frames},
         {"points", c.points},
         {"points_per_part", c.points_per_part},
         {"init", perturb_to(c.init_spec())},
         {"noise", noise_to(c.noise)},
         {"motion", json{{"rot_cap_deg", m.rot_cap_deg}, {"trans_cap", m.trans_cap},
                         {"joint_change", m.joint_change}, {"distance", m.distance}}},
         {"aspect_policy", std::string(aspect_policy_name(c.aspect_policy))},
         {"ransac", json{{"enabled", c.ransac.enabled}, {"iterations", c.ransac.iterations},
                         {"threshold", c.ransac.threshold}}},
         {"rotation_projection", c.rotation_projection},
         {"crop", c.crop},
         {"crop_factor", c.crop_factor},
         {"gt_extents", c.gt_extents},
         {"seed", c.seed},
         {"out", c.out.string()},
         {"workers", c.workers}};
  return j.dump(2) + "\n";
}

std::string manifest_json(const Manifest& m) {
  json entries = json::array();
  for (const ManifestEntry& e : m.entries) {
    json joints = json::array();
    for (const JointSpec& js : e.joints) joints.push_back(detail::joint_to(js));
    entries.push_back(json{{"file", e.file}, {"joints", std::move(joints)}});
  }
  json j{{"category", std::string(to_string(m.category))},
         {"seed", m.seed},
         {"M", m.part_count},
         {"symmetric_axis", m.symmetric_axis ? detail::vec3_to(*m.symmetric_axis) : json(nullptr)},
         {"sigmas", perturb_to(m.init)},
         {"noise", noise_to(m.noise)},
         {"frames", m.frames},
         {"trajectories", std::move(entries)}};
  return j.dump(2) + "\n";
}

Manifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  Manifest m;
  try {
    const json j = json::parse(read_text(path));
    m.category = parse_category(j.at("category").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.part_count = j.at("M").get<std::size_t>();
    if (!j.at("symmetric_axis").is_null()) m.symmetric_axis = detail::vec3_from(j.at("symmetric_axis"), "axis");
    const json& s = j.at("sigmas");
    m.init = PerturbSpec{s.at("sigma_scale").get<double>(), s.at("sigma_rot_deg").get<double>(),
                         s.at("sigma_trans").get<double>()};
    m.noise = noise_from(j.at("noise"));
    m.frames = j.at("frames").get<std::size_t>();
    for (const json& e : j.at("trajectories")) {
      ManifestEntry entry{e.at("file").get<std::string>(), {}};
      for (const json& js : e.at("joints")) entry.joints.push_back(detail::joint_from(js));
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  return m;
}

std::string trajectory_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%04zu.jsonl", index);
  return buf;
}

std::string prediction_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pred_%04zu.jsonl", index);
  return buf;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(run);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

GeneratedTrajectory generate_trajectory(const ExperimentConfig& config, std::size_t index) {
  GeneratedTrajectory out;
  out.model = make_primitive_model(config.category, derive_seed(config.seed, {kTagModel, index}),
                                   config.points_per_part);
  const auto motion = sample_trajectory(out.model, config.frames, config.motion_spec(),
                                        derive_seed(config.seed, {kTagTrajectory, index}));
  out.frames.reserve(motion.size());
  for (const TrajectoryFrame& f : motion) {
    const std::vector<Sim3> poses = forward_kinematics(out.model, f.root_pose, f.joint_states);
    out.frames.push_back(render_observation(out.model, poses, Vec3::Zero(), config.points));
  }
  return out;
}

std::vector<RobustnessSetting> robustness_settings() {
  return {{"Orig", 0, 0}, {"Init x1", 1, 0}, {"Init x2", 2, 0}, {"All x1", 0, 1}, {"All x2", 0, 2}};
}

PredictedRun track_trajectory(const std::vector<Observation>& frames, const Manifest& manifest,
                              const ExperimentConfig& config, std::size_t index, const RobustnessSetting& setting) {
  if (frames.empty()) throw Error(ErrorKind::kInvalidArgument, "track_trajectory: no frames");
  if (frames[0].gt_parts.size() != manifest.part_count) {
    throw Error(ErrorKind::kInvalidArgument, "track_trajectory: part count differs from the manifest");
  }
  const PerturbSpec init = config.init_spec();
  TrackerState state = init_tracker(frames[0].gt_parts, init, derive_seed(config.seed, {kTagInit, index}));
  perturb_parts(state, init, config.seed, kTagInitExtra, index, 0, setting.init_draws);

  TrackerOptions options;
  options.aspect_policy = config.aspect_policy;
  options.crop = config.crop;
  options.crop_factor = config.crop_factor;
  options.symmetric_axis = manifest.symmetric_axis;
  if (config.ransac.enabled) {
    RansacParams params = RansacParams::for_given_rotation();
    params.iterations = config.ransac.iterations;
    params.inlier_threshold = config.ransac.threshold;
    params.seed = derive_seed(config.seed, {kTagRansac, index});
    options.ransac = params;
  }
  if (config.rotation_projection) options.rotation_projection = manifest.entries.at(index).joints;

  NoiseSpec noise = config.noise;
  noise.seed = derive_seed(config.seed, {kTagNoise, index, config.noise.seed});
  OraclePredictor predictor(manifest.part_count, manifest.symmetric_axis, noise);

  PredictedRun run;
  run.reserve(frames.size());
  run.push_back(state.parts);
  for (std::size_t t = 1; t < frames.size(); ++t) {
    perturb_parts(state, init, config.seed, kTagAll, index, t, setting.all_draws);
    state = track_step(state, frames[t], predictor, options);
    for (std::size_t j = 0; j < state.parts.size(); ++j) {
      if (state.parts[j].lost) spdlog::info("trajectory {} frame {}: part {} lost", index, t, j);
    }
    run.push_back(state.parts);
  }
  return run;
}

MetricsReport evaluate_trajectory(const PredictedRun& predicted, const std::vector<Observation>& frames,
                                  const Manifest& manifest, std::size_t index, bool gt_extents) {
  std::vector<std::vector<Pose9>> gt;
  gt.reserve(frames.size());
  for (const Observation& o : frames) gt.push_back(o.gt_parts);
  RunMetadata meta;
  meta.symmetric_axis = manifest.symmetric_axis;
  meta.joints = manifest.entries.at(index).joints;
  meta.gt_extents = gt_extents;
  return evaluate_run(predicted, gt, meta);
}

void cmd_generate(const ExperimentConfig& config) {
  config.validate();
  ensure_directory(config.out);
  std::vector<ObjectModel> models(config.trajectories);
  parallel_for(config.trajectories, config.workers, [&](std::size_t i) {
    GeneratedTrajectory traj = generate_trajectory(config, i);
    write_trajectory(config.out / trajectory_file_name(i), traj.frames);
    models[i] = std::move(traj.model);
  });
  const Manifest manifest = make_manifest(config, models);
  write_text(config.out / "manifest.json", manifest_json(manifest));
  spdlog::info("generated {} trajectories in {}", config.trajectories, config.out.string());
}

void cmd_track(const ExperimentConfig& config, const fs::path& data_dir) {
  config.validate();
  const Manifest manifest = read_manifest(data_dir);
  ensure_directory(config.out);
  parallel_for(manifest.entries.size(), config.workers, [&](std::size_t i) {
    const std::vector<Observation> frames = read_trajectory(data_dir / manifest.entries[i].file);
    write_predictions(config.out / prediction_file_name(i), track_trajectory(frames, manifest, config, i));
  });
  spdlog::info("tracked {} trajectories into {}", manifest.entries.size(), config.out.string());
}

MetricsReport cmd_eval(const ExperimentConfig& config, const fs::path& data_dir, const fs::path& pred_dir) {
  config.validate();
  const Manifest manifest = read_manifest(data_dir);
  const std::size_t n = manifest.entries.size();
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < n; ++i) {
    if (!fs::exists(pred_dir / prediction_file_name(i))) missing.push_back((pred_dir / prediction_file_name(i)).string());
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& m : missing) list += "\n  " + m;
    throw Error(ErrorKind::kIo, "missing prediction files:" + list);
  }
  ensure_directory(config.out);
  std::vector<MetricsReport> reports(n);
  std::vector<std::string> misaligned(n);
  parallel_for(n, config.workers, [&](std::size_t i) {
    const std::vector<Observation> frames = read_trajectory(data_dir / manifest.entries[i].file);
    const PredictedRun pred = read_predictions(pred_dir / prediction_file_name(i));
    bool aligned = pred.size() == frames.size();
    for (std::size_t t = 0; aligned && t < pred.size(); ++t) aligned = pred[t].size() == frames[t].gt_parts.size();
    if (!aligned) {
      misaligned[i] = (pred_dir / prediction_file_name(i)).string() + " vs " + (data_dir / manifest.entries[i].file).string();
      return;
    }
    reports[i] = evaluate_trajectory(pred, frames, manifest, i, config.gt_extents);
    char name[32];
    std::snprintf(name, sizeof name, "metrics_%04zu.json", i);
    write_text(config.out / name, metrics_json(reports[i], true));
  });
  std::string offending;
  for (const std::string& m : misaligned) {
    if (!m.empty()) offending += "\n  " + m;
  }
  if (!offending.empty()) throw Error(ErrorKind::kInvalidArgument, "misaligned prediction files:" + offending);

  const MetricsReport total = aggregate(reports);
  std::string csv = metrics_csv_header() + metrics_csv_row("all", total);
  json per = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    csv += metrics_csv_row(manifest.entries[i].file, reports[i]);
    per.push_back(json::parse(metrics_json(reports[i], false)));
  }
  json summary = json::parse(metrics_json(total, false));
  summary["trajectories"] = std::move(per);
  write_text(config.out / "summary.json", summary.dump(2) + "\n");
  write_text(config.out / "summary.csv", csv);
  return total;
}

std::vector<MetricsReport> cmd_robustness(const ExperimentConfig& config) {
  config.validate();
  ensure_directory(config.out);
  const std::size_t n = config.trajectories;
  std::vector<GeneratedTrajectory> data(n);
  parallel_for(n, config.workers, [&](std::size_t i) { data[i] = generate_trajectory(config, i); });

  std::vector<ObjectModel> models;
  for (const GeneratedTrajectory& d : data) models.push_back(d.model);
  const Manifest manifest = make_manifest(config, models);

  std::vector<MetricsReport> rows;
  std::string csv = metrics_csv_header();
  json out = json::array();
  for (const RobustnessSetting& setting : robustness_settings()) {
    std::vector<MetricsReport> reports(n);
    parallel_for(n, config.workers, [&](std::size_t i) {
      const PredictedRun run = track_trajectory(data[i].frames, manifest, config, i, setting);
      reports[i] = evaluate_trajectory(run, data[i].frames, manifest, i, config.gt_extents);
    });
    rows.push_back(aggregate(reports));
    csv += metrics_csv_row(setting.name, rows.back());
    json row = json::parse(metrics_json(rows.back(), false));
    row["setting"] = setting.name;
    out.push_back(std::move(row));
    spdlog::info("{}: 5deg5cm {:.4f}", setting.name, rows.back().acc_5deg5cm);
  }
  write_text(config.out / "robustness.csv", csv);
  write_text(config.out / "robustness.json", out.dump(2) + "\n");
  return rows;
}

std::string cmd_fit(const fs::path& path, const FitOptions& options) {
  const CorrespondenceFile file = read_correspondences(path);
  const Correspondences& corr = file.corr;
  auto need_rotation = [&]() -> const Rot3& {
    if (!file.rotation) throw Error(ErrorKind::kInvalidArgument, options.estimator + ": file has no \"rotation\"");
    return *file.rotation;
  };

  json result{{"estimator", options.estimator}};
  Sim3 sim;
  std::optional<std::vector<bool>> mask;
  try {
    if (options.estimator == "umeyama") {
      sim = umeyama_sim3(corr);
    } else if (options.estimator == "given-rot") {
      const ScaleTranslation st = fit_scale_translation(corr, need_rotation(), options.formula);
      sim = Sim3{st.s, need_rotation(), st.t};
    } else if (options.estimator == "symmetric") {
      if (!file.axis) throw Error(ErrorKind::kInvalidArgument, "symmetric: file has no \"axis\"");
      const SymmetricFit fit = fit_symmetric(corr, need_rotation(), *file.axis, options.formula);
      sim = Sim3{fit.s, fit.rotation, fit.t};
      result["theta"] = fit.theta;
    } else if (options.estimator == "ransac") {
      RansacParams params = file.rotation ? RansacParams::for_given_rotation() : RansacParams::for_full_sim3();
      params.iterations = options.ransac_iterations;
      params.inlier_threshold = options.ransac_threshold;
      params.seed = options.seed;
      const RansacMode mode = file.rotation ? RansacMode(GivenRotation{*file.rotation, options.formula})
                                            : RansacMode(FullSim3{});
      const RansacResult r = ransac_fit(corr, mode, params);
      sim = r.estimate;
      mask = r.inlier_mask;
      result["inliers"] = r.inlier_count;
    } else {
      throw Error(ErrorKind::kConfig, "unknown estimator '" + options.estimator + "'");
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig || std::string_view(e.what()).starts_with(options.estimator)) throw;
    throw Error(e.kind(), options.estimator + ": " + e.what());
  }

  double sum = 0.0, sum_sq = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double r = (corr.camera[i] - apply_sim(sim, corr.normalized[i])).norm();
    sum += r;
    sum_sq += r * r;
    worst = std::max(worst, r);
  }
  const auto n = static_cast<double>(corr.size());
  result["s"] = sim.s;
  result["R"] = detail::rot3_to(sim.r);
  result["T"] = detail::vec3_to(sim.t);
  result["residual"] = json{{"mean", sum / n}, {"rms", std::sqrt(sum_sq / n)}, {"max", worst}, {"count", corr.size()}};
  return result.dump(2) + "\n";
}

}  // namespace captrack
