#pragma once

// Internal JSON helpers shared by io.cpp and harness.cpp.

#include <string>

#include <json.hpp>

#include "captrack/error.hpp"
#include "captrack/geometry.hpp"
#include "captrack/kinematics.hpp"

namespace captrack::detail {

using nlohmann::json;

inline Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::kParse, std::string(what) + ": expected [x, y, z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Rot3 rot3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::kParse, std::string(what) + ": expected 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3_from(j[static_cast<std::size_t>(r)], what).transpose();
  try {
    return Rot3::from_matrix(m);
  } catch (const Error& e) {
    throw Error(ErrorKind::kParse, std::string(what) + ": " + e.what());
  }
}

inline json rot3_to(const Rot3& r) {
  json out = json::array();
  for (int k = 0; k < 3; ++k) out.push_back(vec3_to(r.matrix().row(k).transpose()));
  return out;
}

inline json joint_to(const JointSpec& js) {
  return json{{"kind", js.kind == JointKind::kRevolute ? "revolute" : "prismatic"},
              {"axis", vec3_to(js.axis)},
              {"pivot", vec3_to(js.pivot)},
              {"parent", js.parent},
              {"child", js.child},
              {"limits", json::array({js.lower, js.upper})},
              {"rest", json{{"s", js.rest.s}, {"R", rot3_to(js.rest.r)}, {"T", vec3_to(js.rest.t)}}}};
}

inline JointSpec joint_from(const json& j) {
  JointSpec js;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "revolute") {
    js.kind = JointKind::kRevolute;
  } else if (kind == "prismatic") {
    js.kind = JointKind::kPrismatic;
  } else {
    throw Error(ErrorKind::kParse, "joint: unknown kind '" + kind + "'");
  }
  js.axis = vec3_from(j.at("axis"), "joint axis");
  js.pivot = vec3_from(j.at("pivot"), "joint pivot");
  js.parent = j.at("parent").get<int>();
  js.child = j.at("child").get<int>();
  js.lower = j.at("limits").at(0).get<double>();
  js.upper = j.at("limits").at(1).get<double>();
  const json& rest = j.at("rest");
  js.rest = Sim3{rest.at("s").get<double>(), rot3_from(rest.at("R"), "joint rest"), vec3_from(rest.at("T"), "joint rest")};
  return js;
}

}  // namespace captrack::detail
