#pragma once

// Grasp candidates from a bounding box, projection-based collision filtering,
// standoff/gap-closing motion and the hand-camera proportional servo.

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "homebot/geometry.hpp"

namespace homebot {

enum class GraspFace { top, pos_x, neg_x, pos_y, neg_y };

inline std::string_view to_string(GraspFace f) {
  switch (f) {
    case GraspFace::top: return "top";
    case GraspFace::pos_x: return "+x";
    case GraspFace::neg_x: return "-x";
    case GraspFace::pos_y: return "+y";
    case GraspFace::neg_y: return "-y";
  }
  return "?";
}

inline Vec3 face_normal(GraspFace f) {
  switch (f) {
    case GraspFace::top: return {0, 0, 1};
    case GraspFace::pos_x: return {1, 0, 0};
    case GraspFace::neg_x: return {-1, 0, 0};
    case GraspFace::pos_y: return {0, 1, 0};
    case GraspFace::neg_y: return {0, -1, 0};
  }
  return {};
}

/// Gripper as one box. Gripper frame: +x approach, +y finger closing axis, +z "up".
struct GripperModel {
  Vec3 body{0.10, 0.16, 0.06};
  double finger_span = 0.12;
  /// How far the tool point sits inside the object face at contact.
  double finger_depth = 0.04;
};

struct GraspPose {
  Vec3 position;
  Quat orientation;
  GraspFace face = GraspFace::top;
  int roll_index = 0;
  double roll = 0.0;
  double standoff = 0.0;

  Vec3 approach() const { return orientation.rotate({1, 0, 0}); }
  Vec3 closing_axis() const { return orientation.rotate({0, 1, 0}); }
  Vec3 up() const { return orientation.rotate({0, 0, 1}); }
};

/// Top plus four side faces, `n_rolls` wrist rotations each, spaced evenly in [0, pi).
inline std::vector<GraspPose> generate_grasp_poses(const Box3& aabb, const GripperModel& gripper, int n_rolls = 4) {
  if (n_rolls < 1) throw std::invalid_argument("generate_grasp_poses: n_rolls must be at least 1");
  if (!aabb.valid()) throw std::invalid_argument("generate_grasp_poses: degenerate box");
  const Vec3 c = aabb.center();
  const Vec3 half = aabb.size() * 0.5;
  std::vector<GraspPose> out;
  out.reserve(5 * static_cast<std::size_t>(n_rolls));
  for (GraspFace f : {GraspFace::top, GraspFace::pos_x, GraspFace::neg_x, GraspFace::pos_y, GraspFace::neg_y}) {
    const Vec3 n = face_normal(f);
    const Vec3 a = n * -1.0;
    const double face_half = std::abs(n.dot(half));
    const Vec3 face_center = c + n * face_half;
    const Vec3 tcp = face_center + a * std::min(gripper.finger_depth, face_half);
    const Vec3 ref_up = f == GraspFace::top ? Vec3{1, 0, 0} : Vec3{0, 0, 1};
    for (int k = 0; k < n_rolls; ++k) {
      const double roll = k * std::numbers::pi / n_rolls;
      const Vec3 up = Quat::from_axis_angle(a, roll).rotate(ref_up);
      const Vec3 y = up.cross(a);
      GraspPose p;
      p.position = tcp;
      p.orientation = Quat::from_axes(a, y, up);
      p.face = f;
      p.roll_index = k;
      p.roll = roll;
      out.push_back(p);
    }
  }
  return out;
}

/// Gripper volume at `pose`, extended backwards by `sweep` to cover the approach.
inline OrientedBox gripper_volume(const GraspPose& pose, const GripperModel& gripper, double sweep) {
  OrientedBox ob;
  const double length = gripper.finger_depth + gripper.body.x + sweep;
  ob.axes[0] = pose.approach();
  ob.axes[1] = pose.closing_axis();
  ob.axes[2] = pose.up();
  ob.half = {length / 2.0, gripper.body.y / 2.0, gripper.body.z / 2.0};
  ob.center = pose.position - ob.axes[0] * (length / 2.0);
  return ob;
}

/// Keeps poses whose swept gripper volume overlaps no occupied voxel centered outside `target`.
/// `occupied_in(Box3)` returns centers of occupied voxels of edge `resolution` in a box.
template <class OccupiedQuery>
std::vector<GraspPose> filter_colliding(const std::vector<GraspPose>& poses, const GripperModel& gripper,
                                        OccupiedQuery&& occupied_in, double resolution, const Box3& target,
                                        double sweep = 0.05) {
  std::vector<GraspPose> out;
  const Vec3 h{resolution / 2.0, resolution / 2.0, resolution / 2.0};
  const Box3& own = target;
  for (const auto& p : poses) {
    const OrientedBox vol = gripper_volume(p, gripper, sweep);
    bool hit = false;
    for (const Vec3& v : occupied_in(bounding_box(vol).inflated(resolution))) {
      if (own.contains(v)) continue;
      if (overlaps(vol, Box3{v - h, v + h})) {
        hit = true;
        break;
      }
    }
    if (!hit) out.push_back(p);
  }
  return out;
}

/// Keeps poses with the gripper up-vector pointing down: up.z < -tolerance.
inline std::vector<GraspPose> filter_orientation(const std::vector<GraspPose>& poses, double tolerance = 0.5) {
  std::vector<GraspPose> out;
  for (const auto& p : poses)
    if (p.up().z < -tolerance) out.push_back(p);
  return out;
}

inline GraspPose standoff_pose(const GraspPose& pose, double offset) {
  if (!(offset > 0.0)) throw std::invalid_argument("standoff_pose: offset must be positive");
  GraspPose out = pose;
  out.position = pose.position - pose.approach() * offset;
  out.standoff = pose.standoff + offset;
  return out;
}

/// Straight-line approach covering the recorded standoff; `steps` segments, both ends included.
inline std::vector<Vec3> close_gap(const GraspPose& pose, int steps = 10) {
  if (!(pose.standoff > 0.0)) throw std::invalid_argument("close_gap: pose has no standoff");
  if (steps < 1) throw std::invalid_argument("close_gap: steps must be at least 1");
  const Vec3 a = pose.approach();
  std::vector<Vec3> path;
  for (int i = 0; i <= steps; ++i) path.push_back(pose.position + a * (pose.standoff * i / steps));
  return path;
}

struct ServoCommand {
  bool done = false;
  /// gain * pixel error, in image axes (x right, y down).
  Vec2 image_velocity;
  /// Robot-frame base velocity for a downward-looking hand camera.
  Vec2 base_velocity;
};

/// Proportional hand-camera servo. With the hand pointing down, image right is the
/// robot's -y and image down is the robot's -x.
inline ServoCommand servo_step(const Vec2& pixel_error, double gain, double tolerance) {
  if (!(gain > 0.0)) throw std::invalid_argument("servo_step: gain must be positive");
  ServoCommand c;
  if (pixel_error.norm() <= tolerance) {
    c.done = true;
    return c;
  }
  c.image_velocity = pixel_error * gain;
  c.base_velocity = {-c.image_velocity.y, -c.image_velocity.x};
  return c;
}

/// True when a proportional loop with this gain converges monotonically.
inline bool servo_gain_valid(double gain, double pixels_per_meter, double dt) {
  const double k = gain * pixels_per_meter * dt;
  return k > 0.0 && k < 1.0;
}

}  // namespace homebot
