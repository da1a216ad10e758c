#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "homebot/mapless_nav.hpp"
#include "homebot/tasks/common.hpp"

namespace homebot::tasks {

/// World-aligned costmap centered on the robot, filled from one scan.
inline Costmap aligned_local_map(const World& w, double half_extent = 3.0, double resolution = 0.05) {
  const Scan scan = lidar_scan(w);
  const Pose2 frame{w.robot.base.x, w.robot.base.y, 0.0};
  const int n = int(std::lround(2.0 * half_extent / resolution)) + 1;
  Costmap m = Costmap::make(frame, {-n * resolution / 2.0, -n * resolution / 2.0}, resolution, n, n);
  std::vector<Vec2> ends;
  std::vector<std::uint8_t> hits;
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    ends.push_back(frame.inverse_transform(scan.endpoint_world(i)));
    hits.push_back(scan.ranges[i] < scan.max_range);
  }
  fuse_into(m, {0.0, 0.0}, ends, hits, {});
  return m;
}

inline skills::Node clean_table(const World& w, const TaskConfig&) {
  using namespace skills;
  const SimObject* dish = w.object_by_class("dish");
  if (!dish) throw ConfigError("clean_table: arena needs an object labelled 'dish'");
  const Zone* rack = w.zone("rack");
  if (!rack) throw ConfigError("clean_table: arena needs a zone named 'rack'");
  const Pose2 prior = parse_pose(w, "dishwasher_dock");
  const Pose2 view = parse_pose(w, "dock_view");
  const auto offset_param = w.param("dock_offset");
  if (!offset_param) throw ConfigError("clean_table: arena needs param dock_offset x,y");
  const Vec2 dock_offset = detail::parse_xy("dock_offset", *offset_param);
  const double rack_height = param_number(w, "rack_height");
  const int dish_id = dish->id;
  const Vec2 rack_center = rack->center;
  const double rack_radius = rack->radius;

  CornerTemplate tmpl;
  tmpl.arm_a = {1, 0};
  tmpl.arm_b = {0, 1};
  tmpl.dock_offset = dock_offset;
  tmpl.dock_heading = prior.theta;

  std::vector<Node> v;
  v.push_back(set_arm("receive_posture", [](TaskContext&) { return hand_level(0.4); }));
  v.push_back(act("take_dish", [dish_id](TaskContext& ctx) {
    ctx.world = handover(ctx.world, dish_id);
    ctx.bb.set("dish_id", dish_id);
    ctx.bb.set("load_below_tcp", ctx.world.object(dish_id)->aabb.size().z);
    ctx.emit("dish_received", fmt::format("id={}", dish_id));
    return Status::success;
  }));
  v.push_back(set_arm("carry_dish", [](TaskContext&) { return hand_level(0.6); }));
  v.push_back(navigate_to("to_dock_view", [view](TaskContext&) { return std::optional<Pose2>(view); }));
  v.push_back(act("align_dock", [tmpl, prior](TaskContext& ctx) {
    const Costmap m = aligned_local_map(ctx.world);
    const Pose2 prior_local{prior.x - m.frame.x, prior.y - m.frame.y, prior.theta};
    const auto aligned = align_to_corner(m, prior_local, tmpl);
    if (!aligned) {
      ctx.emit("dock_not_aligned", "reason=no_corner");
      return Status::failure;
    }
    const Pose2 dock{aligned->x + m.frame.x, aligned->y + m.frame.y, aligned->theta};
    ctx.bb.set("dock", dock);
    ctx.emit("dock_aligned", fmt::format("dock={:.2f},{:.2f} correction={:.2f},{:.2f}", dock.x, dock.y, dock.x - prior.x, dock.y - prior.y));
    return Status::success;
  }));
  v.push_back(follow("to_dock", [](TaskContext& ctx) -> std::optional<Route> {
    const Pose2 d = ctx.bb.at<Pose2>("dock");
    return Route{{d.position()}, d.theta};
  }));
  v.push_back(set_arm("lower_dish", [rack_height](TaskContext& ctx) {
    const double z = rack_height + 0.02 + ctx.bb.at<double>("load_below_tcp");
    return hand_level(lift_for_hand_level(ctx.world.arm, z));
  }));
  v.push_back(release("place_dish"));
  v.push_back(act("judge_dish", [rack_center, rack_radius](TaskContext& ctx) {
    const SimObject* o = ctx.world.object(ctx.bb.at<int>("dish_id"));
    const Vec2 c = o->aabb.center().xy();
    const bool in = (c - rack_center).norm() <= rack_radius;
    ctx.emit(in ? "dish_placed" : "dish_missed", fmt::format("at={:.3f},{:.3f} off={:.3f}", c.x, c.y, (c - rack_center).norm()));
    return in ? Status::success : Status::failure;
  }));
  v.push_back(set_arm("raise_empty", [](TaskContext& ctx) { return lift_only(std::min(kMaxLift, ctx.world.robot.arm[kLift] + 0.1)); }));
  v.push_back(move_base("leave_dock", [](TaskContext&) { return Vec2{-0.3, 0.0}; }));
  return seq("clean_table", std::move(v));
}

}  // namespace homebot::tasks
