#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "captrack/evaluation.hpp"

namespace captrack {

namespace {

using Polygon = std::vector<Vec3>;
using Polytope = std::vector<Polygon>;  // convex, as a list of planar faces

struct HalfSpace {
  Vec3 normal;
  double offset;  // inside: normal . x <= offset
};

std::array<HalfSpace, 6> half_spaces(const OrientedBox& box) {
  std::array<HalfSpace, 6> out;
  for (int k = 0; k < 3; ++k) {
    const Vec3 n = box.pose.r.column(k);
    const double c = n.dot(box.pose.t);
    const double h = 0.5 * box.pose.d(k);
    out[2 * k] = {n, c + h};
    out[2 * k + 1] = {-n, -c + h};
  }
  return out;
}

Polytope box_polytope(const OrientedBox& box) {
  const Mat3 r = box.pose.r.matrix();
  const Vec3 h = 0.5 * box.pose.d;
  auto vertex = [&](double sx, double sy, double sz) {
    return Vec3(r * Vec3(sx * h.x(), sy * h.y(), sz * h.z()) + box.pose.t);
  };
  Polytope faces;
  constexpr std::array<std::array<double, 2>, 4> kLoop{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
  for (int k = 0; k < 3; ++k) {
    for (double side : {-1.0, 1.0}) {
      Polygon face;
      for (const auto& uv : kLoop) {
        std::array<double, 3> sgn{};
        sgn[static_cast<std::size_t>(k)] = side;
        sgn[static_cast<std::size_t>((k + 1) % 3)] = uv[0];
        sgn[static_cast<std::size_t>((k + 2) % 3)] = uv[1];
        face.push_back(vertex(sgn[0], sgn[1], sgn[2]));
      }
      faces.push_back(std::move(face));
    }
  }
  return faces;
}

// Orders coplanar points around their centroid.
Polygon order_cap(Polygon pts, const Vec3& normal) {
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  const Vec3 e1 = normal.unitOrthogonal();
  const Vec3 e2 = normal.cross(e1);
  std::vector<std::pair<double, Vec3>> keyed;
  keyed.reserve(pts.size());
  for (const Vec3& p : pts) keyed.emplace_back(std::atan2((p - centroid).dot(e2), (p - centroid).dot(e1)), p);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = keyed[i].second;
  return pts;
}

Polytope clip(const Polytope& poly, const HalfSpace& hs, double eps) {
  Polytope out;
  Polygon cap;
  for (const Polygon& face : poly) {
    // A face lying in the plane is rebuilt by the cap.
    const bool on_plane = std::all_of(face.begin(), face.end(), [&](const Vec3& p) {
      return std::abs(hs.normal.dot(p) - hs.offset) <= eps;
    });
    if (on_plane) {
      cap.insert(cap.end(), face.begin(), face.end());
      continue;
    }
    Polygon kept;
    const std::size_t n = face.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& cur = face[i];
      const Vec3& nxt = face[(i + 1) % n];
      const double dc = hs.normal.dot(cur) - hs.offset;
      const double dn = hs.normal.dot(nxt) - hs.offset;
      const bool cur_in = dc <= eps;
      const bool nxt_in = dn <= eps;
      if (cur_in) {
        kept.push_back(cur);
        if (dc >= -eps) cap.push_back(cur);
      }
      if (cur_in != nxt_in) {
        const Vec3 p = cur + (dc / (dc - dn)) * (nxt - cur);
        kept.push_back(p);
        cap.push_back(p);
      }
    }
    if (kept.size() >= 3) out.push_back(std::move(kept));
  }
  Polygon unique;
  for (const Vec3& p : cap) {
    if (std::none_of(unique.begin(), unique.end(), [&](const Vec3& q) { return (p - q).norm() <= eps; })) {
      unique.push_back(p);
    }
  }
  if (unique.size() >= 3) out.push_back(order_cap(std::move(unique), hs.normal));
  return out;
}

double polytope_volume(const Polytope& poly) {
  Vec3 origin = Vec3::Zero();
  std::size_t count = 0;
  for (const Polygon& face : poly) {
    for (const Vec3& p : face) origin += p;
    count += face.size();
  }
  if (count == 0) return 0.0;
  origin /= static_cast<double>(count);
  double volume = 0.0;
  for (const Polygon& face : poly) {
    const Vec3 a = face[0] - origin;
    for (std::size_t i = 1; i + 1 < face.size(); ++i) {
      volume += std::abs(a.dot((face[i] - origin).cross(face[i + 1] - origin)));
    }
  }
  return volume / 6.0;
}

bool contains_all(const std::array<HalfSpace, 6>& planes, const std::array<Vec3, 8>& pts, double eps) {
  for (const Vec3& p : pts) {
    for (const HalfSpace& hs : planes) {
      if (hs.normal.dot(p) - hs.offset > eps) return false;
    }
  }
  return true;
}

}  // namespace

std::array<Vec3, 8> OrientedBox::corners() const {
  std::array<Vec3, 8> out;
  const Vec3 h = 0.5 * pose.d;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
    out[static_cast<std::size_t>(i)] = pose.r * local + pose.t;
  }
  return out;
}

double intersection_volume(const OrientedBox& a, const OrientedBox& b) {
  const double eps = 1e-12 * (1.0 + a.pose.t.norm() + b.pose.t.norm() + a.pose.d.norm() + b.pose.d.norm());
  const auto planes_b = half_spaces(b);
  if (contains_all(planes_b, a.corners(), eps)) return a.volume();
  if (contains_all(half_spaces(a), b.corners(), eps)) return b.volume();
  Polytope poly = box_polytope(a);
  for (const HalfSpace& hs : planes_b) {
    poly = clip(poly, hs, eps);
    if (poly.size() < 4) return 0.0;
  }
  return polytope_volume(poly);
}

double oriented_iou3d(const OrientedBox& a, const OrientedBox& b) {
  const double va = a.volume();
  const double vb = b.volume();
  const double inter = intersection_volume(a, b);
  const double uni = va + vb - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace captrack
