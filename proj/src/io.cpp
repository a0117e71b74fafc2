#include "captrack/io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "captrack/error.hpp"
#include "json_util.hpp"

namespace captrack {

using detail::json;

std::string format_double(double v) {
  std::array<char, 40> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

namespace {

// Minimal JSON emitter with fixed float formatting.
class Writer {
 public:
  Writer& raw(std::string_view s) {
    out_.append(s);
    return *this;
  }
  Writer& num(double v) { return raw(format_double(v)); }
  Writer& vec(const Vec3& v) { return raw("[").num(v.x()).raw(",").num(v.y()).raw(",").num(v.z()).raw("]"); }
  Writer& mat(const Mat3& m) {
    raw("[");
    for (int r = 0; r < 3; ++r) {
      if (r) raw(",");
      vec(m.row(r).transpose());
    }
    return raw("]");
  }
  Writer& cloud(std::span<const Vec3> pts) {
    raw("[");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) raw(",");
      vec(pts[i]);
    }
    return raw("]");
  }
  Writer& pose(const Vec3& d, const Rot3& r, const Vec3& t) {
    return raw("\"d\":").vec(d).raw(",\"R\":").mat(r.matrix()).raw(",\"T\":").vec(t);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

template <class Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "' for reading");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

PointCloud cloud_from(const json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorKind::kParse, std::string(what) + ": expected an array of points");
  PointCloud out;
  out.reserve(j.size());
  for (const json& p : j) out.push_back(detail::vec3_from(p, what));
  return out;
}

}  // namespace

std::string observation_line(std::uint64_t frame, const Observation& obs) {
  Writer w;
  w.raw("{\"frame\":").raw(std::to_string(frame)).raw(",\"points\":").cloud(obs.points).raw(",\"gt\":[");
  for (std::size_t j = 0; j < obs.gt_parts.size(); ++j) {
    if (j) w.raw(",");
    w.raw("{").pose(obs.gt_parts[j].d, obs.gt_parts[j].r, obs.gt_parts[j].t).raw("}");
  }
  w.raw("],\"labels\":[");
  for (std::size_t i = 0; i < obs.labels.size(); ++i) {
    if (i) w.raw(",");
    w.raw(std::to_string(obs.labels[i]));
  }
  w.raw("],\"nocs\":").cloud(obs.nocs).raw("}\n");
  return w.take();
}

void write_trajectory(const fs::path& path, std::span<const Observation> frames) {
  std::string text;
  for (std::size_t t = 0; t < frames.size(); ++t) text += observation_line(t, frames[t]);
  write_text(path, text);
}

std::vector<Observation> read_trajectory(const fs::path& path) {
  std::vector<Observation> frames;
  for_each_line(path, [&](const json& j) {
    const auto frame = j.at("frame").get<std::uint64_t>();
    if (frame != frames.size()) {
      throw Error(ErrorKind::kParse, "expected frame " + std::to_string(frames.size()) + ", got " +
                                         std::to_string(frame));
    }
    Observation obs;
    obs.points = cloud_from(j.at("points"), "points");
    for (const json& g : j.at("gt")) {
      obs.gt_parts.push_back(
          Pose9{detail::vec3_from(g.at("d"), "gt d"), detail::rot3_from(g.at("R"), "gt R"), detail::vec3_from(g.at("T"), "gt T")});
    }
    obs.labels = j.at("labels").get<std::vector<int>>();
    obs.nocs = cloud_from(j.at("nocs"), "nocs");
    if (obs.labels.size() != obs.points.size() || obs.nocs.size() != obs.points.size()) {
      throw Error(ErrorKind::kParse, "points, labels and nocs differ in length");
    }
    frames.push_back(std::move(obs));
  });
  if (frames.empty()) throw Error(ErrorKind::kParse, path.string() + ": no frames");
  return frames;
}

std::string prediction_line(std::uint64_t frame, std::span<const PartEstimate> parts) {
  Writer w;
  w.raw("{\"frame\":").raw(std::to_string(frame)).raw(",\"parts\":[");
  for (std::size_t j = 0; j < parts.size(); ++j) {
    if (j) w.raw(",");
    const PartEstimate& p = parts[j];
    w.raw("{").pose(p.sim.s * p.aspect, p.sim.r, p.sim.t).raw(",\"lost\":").raw(p.lost ? "true" : "false").raw("}");
  }
  w.raw("]}\n");
  return w.take();
}

void write_predictions(const fs::path& path, const PredictedRun& run) {
  std::string text;
  for (std::size_t t = 0; t < run.size(); ++t) text += prediction_line(t, run[t]);
  write_text(path, text);
}

PredictedRun read_predictions(const fs::path& path) {
  PredictedRun run;
  for_each_line(path, [&](const json& j) {
    const auto frame = j.at("frame").get<std::uint64_t>();
    if (frame != run.size()) {
      throw Error(ErrorKind::kParse, "expected frame " + std::to_string(run.size()) + ", got " + std::to_string(frame));
    }
    std::vector<PartEstimate> parts;
    for (const json& p : j.at("parts")) {
      const Pose9 pose{detail::vec3_from(p.at("d"), "d"), detail::rot3_from(p.at("R"), "R"), detail::vec3_from(p.at("T"), "T")};
      if (!(pose.d.minCoeff() > 0.0)) throw Error(ErrorKind::kParse, "extents must be positive");
      parts.push_back(PartEstimate{pose.sim(), pose.aspect(), p.at("lost").get<bool>()});
    }
    run.push_back(std::move(parts));
  });
  return run;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string metrics_json(const MetricsReport& report, bool with_frames) {
  json j{{"acc_5deg5cm", report.acc_5deg5cm},
         {"mean_iou", report.mean_iou},
         {"r_err_deg", report.r_err_deg},
         {"t_err_cm", report.t_err_cm},
         {"theta_err_deg", optional_number(report.theta_err_deg)},
         {"d_err_cm", optional_number(report.d_err_cm)},
         {"lost_frames", report.lost_frames},
         {"evaluated_frames", report.evaluated_frames}};
  if (with_frames) {
    json frames = json::array();
    for (const FrameMetrics& f : report.frames) {
      json parts = json::array();
      for (const PartFrameMetrics& p : f.parts) {
        parts.push_back(json{{"lost", p.lost},
                             {"r_err_deg", p.r_err_deg},
                             {"t_err_cm", p.t_err_cm},
                             {"iou", p.iou},
                             {"success", p.success}});
      }
      json joints = json::array();
      for (const JointFrameMetrics& jm : f.joints) {
        joints.push_back(json{{"kind", jm.kind == JointKind::kRevolute ? "revolute" : "prismatic"},
                              {"valid", jm.valid},
                              {"flagged", jm.flagged},
                              {"error", jm.error}});
      }
      frames.push_back(json{{"frame", f.frame},
                            {"evaluated", f.evaluated},
                            {"acc", f.acc},
                            {"iou", f.iou},
                            {"r_err_deg", f.r_err_deg},
                            {"t_err_cm", f.t_err_cm},
                            {"theta_err_deg", optional_number(f.theta_err_deg)},
                            {"d_err_cm", optional_number(f.d_err_cm)},
                            {"lost_parts", f.lost_parts},
                            {"parts", std::move(parts)},
                            {"joints", std::move(joints)}});
    }
    j["frames"] = std::move(frames);
  }
  return j.dump(2) + "\n";
}

std::string metrics_csv_header() { return "setting,5deg5cm,mIoU,R_err,T_err,theta_err,d_err,lost\n"; }

std::string metrics_csv_row(std::string_view setting, const MetricsReport& report) {
  auto fixed = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& v) { return v ? fixed(*v) : std::string(); };
  std::string row(setting);
  row += "," + fixed(100.0 * report.acc_5deg5cm) + "," + fixed(100.0 * report.mean_iou) + "," +
         fixed(report.r_err_deg) + "," + fixed(report.t_err_cm) + "," + opt(report.theta_err_deg) + "," +
         opt(report.d_err_cm) + "," + std::to_string(report.lost_frames) + "\n";
  return row;
}

CorrespondenceFile read_correspondences(const fs::path& path) {
  CorrespondenceFile out;
  try {
    const json j = json::parse(read_text(path));
    const PointCloud camera = cloud_from(j.at("camera"), "camera");
    const PointCloud normalized = cloud_from(j.at("normalized"), "normalized");
    if (camera.size() != normalized.size()) throw Error(ErrorKind::kParse, "camera and normalized differ in length");
    for (std::size_t i = 0; i < camera.size(); ++i) out.corr.push_back(camera[i], normalized[i]);
    if (j.contains("rotation")) out.rotation = detail::rot3_from(j.at("rotation"), "rotation");
    if (j.contains("axis")) out.axis = detail::vec3_from(j.at("axis"), "axis");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace captrack
