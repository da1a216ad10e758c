#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>

namespace homebot {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  constexpr double squared_norm() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(squared_norm()); }
  Vec3 normalized() const { return *this / norm(); }
  constexpr Vec2 xy() const { return {x, y}; }
  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
};

/// Planar pose: position in meters, heading in radians (counter-clockwise from +x).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  constexpr Vec2 position() const { return {x, y}; }
  Vec2 heading_vector() const { return {std::cos(theta), std::sin(theta)}; }
  /// Maps a point from this pose's frame into the parent frame.
  Vec2 transform(const Vec2& local) const { return position() + local.rotated(theta); }
  Vec2 inverse_transform(const Vec2& world) const { return (world - position()).rotated(-theta); }
  constexpr bool operator==(const Pose2&) const = default;
};

inline double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

struct Box2 {
  Vec2 min;
  Vec2 max;

  constexpr bool contains(const Vec2& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
  constexpr Vec2 center() const { return (min + max) * 0.5; }
  constexpr Vec2 size() const { return max - min; }
  constexpr bool operator==(const Box2&) const = default;
};

/// Axis-aligned box.
struct Box3 {
  Vec3 min;
  Vec3 max;

  static constexpr Box3 from_center(const Vec3& c, const Vec3& size) {
    return {c - size * 0.5, c + size * 0.5};
  }
  constexpr Vec3 center() const { return (min + max) * 0.5; }
  constexpr Vec3 size() const { return max - min; }
  constexpr bool valid() const { return max.x > min.x && max.y > min.y && max.z > min.z; }
  constexpr bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
  constexpr Box3 inflated(double m) const { return {min - Vec3{m, m, m}, max + Vec3{m, m, m}}; }
  constexpr Box3 merged(const Box3& o) const {
    return {{std::min(min.x, o.min.x), std::min(min.y, o.min.y), std::min(min.z, o.min.z)},
            {std::max(max.x, o.max.x), std::max(max.y, o.max.y), std::max(max.z, o.max.z)}};
  }
  constexpr Box2 footprint() const { return {{min.x, min.y}, {max.x, max.y}}; }
  /// Smallest penetration depth over the three axes; <= 0 when the boxes are disjoint or touching.
  constexpr double overlap_depth(const Box3& o) const {
    double d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) d = std::min(d, std::min(max[a], o.max[a]) - std::max(min[a], o.min[a]));
    return d;
  }
  constexpr bool operator==(const Box3&) const = default;
};

/// Slab test of the parametric segment o + t*d, t in [t_min, t_max], against a box.
/// Returns the parameter interval that lies inside the box.
struct Interval1 {
  double enter;
  double exit;
};

inline std::optional<Interval1> clip_ray_box(const Vec3& o, const Vec3& d, const Box3& b,
                                             double t_min, double t_max) {
  double lo = t_min, hi = t_max;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.min[a] || o[a] > b.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (b.min[a] - o[a]) / d[a];
    double t1 = (b.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (lo > hi) return std::nullopt;
  }
  return Interval1{lo, hi};
}

inline std::optional<Interval1> clip_ray_box(const Vec2& o, const Vec2& d, const Box2& b,
                                             double t_min, double t_max) {
  return clip_ray_box(Vec3{o.x, o.y, 0.0}, Vec3{d.x, d.y, 0.0},
                      Box3{{b.min.x, b.min.y, -1.0}, {b.max.x, b.max.y, 1.0}}, t_min, t_max);
}

/// First hit distance of a ray (unit direction) leaving from outside the box, or nullopt.
/// Rays starting inside the box report no hit.
inline std::optional<double> ray_hit_box(const Vec2& o, const Vec2& dir, const Box2& b,
                                         double max_range) {
  if (b.contains(o)) return std::nullopt;
  auto clip = clip_ray_box(o, dir, b, 0.0, max_range);
  if (!clip) return std::nullopt;
  return clip->enter;
}

inline std::optional<double> ray_hit_box(const Vec3& o, const Vec3& dir, const Box3& b,
                                         double max_range) {
  if (b.contains(o)) return std::nullopt;
  auto clip = clip_ray_box(o, dir, b, 0.0, max_range);
  if (!clip) return std::nullopt;
  return clip->enter;
}

inline std::optional<double> ray_hit_circle(const Vec2& o, const Vec2& dir, const Vec2& c,
                                            double radius, double max_range) {
  const Vec2 oc = o - c;
  const double b = oc.dot(dir);
  const double cc = oc.dot(oc) - radius * radius;
  if (cc <= 0.0) return std::nullopt;
  const double disc = b * b - cc;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t < 0.0 || t > max_range) return std::nullopt;
  return t;
}

/// True when the closed segment a-b passes through the interior or boundary of the box.
inline bool segment_intersects_box(const Vec3& a, const Vec3& b, const Box3& box) {
  return clip_ray_box(a, b - a, box, 0.0, 1.0).has_value();
}

inline double distance_point_box(const Vec2& p, const Box2& b) {
  const double dx = std::max({b.min.x - p.x, 0.0, p.x - b.max.x});
  const double dy = std::max({b.min.y - p.y, 0.0, p.y - b.max.y});
  return std::hypot(dx, dy);
}

/// Unit quaternion (w, x, y, z).
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat from_axis_angle(const Vec3& axis, double angle) {
    const Vec3 u = axis.normalized();
    const double s = std::sin(angle / 2.0);
    return {std::cos(angle / 2.0), u.x * s, u.y * s, u.z * s};
  }

  /// Rotation whose columns are the given orthonormal frame axes.
  static Quat from_axes(const Vec3& ax, const Vec3& ay, const Vec3& az) {
    const double m00 = ax.x, m01 = ay.x, m02 = az.x;
    const double m10 = ax.y, m11 = ay.y, m12 = az.y;
    const double m20 = ax.z, m21 = ay.z, m22 = az.z;
    const double tr = m00 + m11 + m22;
    Quat q;
    if (tr > 0.0) {
      const double s = std::sqrt(tr + 1.0) * 2.0;
      q = {0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s};
    } else if (m00 > m11 && m00 > m22) {
      const double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
      q = {(m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s};
    } else if (m11 > m22) {
      const double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
      q = {(m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s};
    } else {
      const double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
      q = {(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s};
    }
    return q.normalized();
  }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quat normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
  }
  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
  }
  Vec3 rotate(const Vec3& v) const {
    const Vec3 u{x, y, z};
    const Vec3 t = u.cross(v) * 2.0;
    return v + t * w + u.cross(t);
  }
  constexpr bool operator==(const Quat&) const = default;
};

/// Oriented box: center, orthonormal axes, half extents.
struct OrientedBox {
  Vec3 center;
  Vec3 axes[3];
  Vec3 half;
};

/// Separating-axis overlap test between an oriented box and an axis-aligned box.
/// Touching faces (penetration below `eps`) do not count as overlap.
inline bool overlaps(const OrientedBox& ob, const Box3& aabb, double eps = 1e-9) {
  const Vec3 world_axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const Vec3 ac = aabb.center();
  const Vec3 ah = aabb.size() * 0.5;
  const Vec3 delta = ob.center - ac;

  auto separated = [&](const Vec3& axis) {
    const double len = axis.norm();
    if (len < 1e-12) return false;
    const Vec3 n = axis / len;
    double ra = 0.0, rb = 0.0;
    for (int i = 0; i < 3; ++i) {
      ra += std::abs(world_axes[i].dot(n)) * ah[i];
      rb += std::abs(ob.axes[i].dot(n)) * ob.half[i];
    }
    return std::abs(delta.dot(n)) >= ra + rb - eps;
  };

  for (const auto& a : world_axes)
    if (separated(a)) return false;
  for (const auto& a : ob.axes)
    if (separated(a)) return false;
  for (const auto& a : world_axes)
    for (const auto& b : ob.axes)
      if (separated(a.cross(b))) return false;
  return true;
}

inline Box3 bounding_box(const OrientedBox& ob) {
  Vec3 ext;
  for (int a = 0; a < 3; ++a) {
    double e = 0.0;
    for (int i = 0; i < 3; ++i) e += std::abs(ob.axes[i][a]) * ob.half[i];
    ext[a] = e;
  }
  return {ob.center - ext, ob.center + ext};
}

/// SplitMix64 finalizer; used to derive independent deterministic seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ mix64(v));
}

}  // namespace homebot
