#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "homebot/executive.hpp"

namespace homebot::tasks {

namespace detail {

/// `x,y` pair from an arena parameter.
inline Vec2 parse_xy(std::string_view key, std::string_view s) {
  const auto comma = s.find(',');
  auto bad = [&] { return ConfigError(fmt::format("param {}: expected x,y but got '{}'", key, s)); };
  if (comma == std::string_view::npos) throw bad();
  try {
    return {std::stod(std::string(s.substr(0, comma))), std::stod(std::string(s.substr(comma + 1)))};
  } catch (const std::exception&) {
    throw bad();
  }
}

/// Tool-point height for a top grasp on a detected box: the finger depth below its top.
inline double top_grasp_z(const Detection& d, const GripperModel& g = {}) {
  return d.center_3d.z + d.size_3d.z / 2.0 - std::min(g.finger_depth, d.size_3d.z / 2.0);
}

/// Lowers the downward-pointing hand to grasp height over the labelled object in view
/// and records how far the load will hang below the tool point.
inline skills::Node lower_onto(std::string name, skills::LabelFn label_of) {
  return skills::set_arm(std::move(name), [label_of](TaskContext& ctx) -> ArmTarget {
    const auto d = skills::hand_detection(ctx.world, label_of(ctx));
    if (!d) return lift_only(ctx.world.robot.arm[kLift]);
    const double z = top_grasp_z(*d);
    ctx.bb.set("load_below_tcp", z - (d->center_3d.z - d->size_3d.z / 2.0));
    return lift_only(lift_for_hand_down(ctx.world.arm, z));
  });
}

inline skills::Node lower_onto(std::string label) {
  return lower_onto("lower_onto_" + label, [label](const TaskContext&) { return label; });
}

}  // namespace detail

inline skills::Node garbage(const World& w, const TaskConfig&) {
  using namespace skills;
  if (!w.door("entrance")) throw ConfigError("garbage: arena needs a door named 'entrance'");
  const Zone* zone = w.zone("deposit");
  if (!zone) throw ConfigError("garbage: arena needs a zone named 'deposit'");
  std::vector<Vec2> cans;
  std::size_t bags = 0;
  for (const auto& o : w.objects) {
    if (o.class_label == "trash_can") cans.push_back(o.aabb.center().xy());
    if (o.class_label == "trash_bag") ++bags;
  }
  if (cans.empty()) throw ConfigError("garbage: arena has no trash_can objects");
  if (bags != cans.size()) throw ConfigError("garbage: every trash_can needs one trash_bag");
  const Vec2 prior_error = w.param("prior_error") ? detail::parse_xy("prior_error", *w.param("prior_error")) : Vec2{};
  const Vec2 deposit = zone->center;
  const double zone_radius = zone->radius;

  auto can_run = [&](int k, Vec2 prior, Vec2 drop) {
    auto mark = [k](int n, std::string action) {
      return emit("garbage_step", [=](TaskContext&) { return fmt::format("step={} action={} can={}", n, action, k); });
    };
    auto up = [](std::string name) { return set_arm(std::move(name), [](TaskContext&) { return lift_only(kMaxLift); }); };

    std::vector<Node> lid;
    lid.push_back(check("lid_visible", [](TaskContext& ctx) { return skills::hand_detection(ctx.world, "lid").has_value(); }));
    lid.push_back(mark(2, "servo"));
    lid.push_back(bt::timeout<TaskContext>("servo_lid_timeout", 20.0, servo_hand("servo_lid", "lid")));
    lid.push_back(mark(3, "aligned"));
    lid.push_back(detail::lower_onto("lid"));
    lid.push_back(close_gripper("grasp_lid"));
    lid.push_back(mark(4, "lid_grasped"));
    lid.push_back(up("raise_lid"));
    lid.push_back(move_base("lid_aside", [](TaskContext& ctx) {
      const World pw = planning_world(ctx.world);
      Vec2 side{0.0, 0.45};
      if (footprint_collides(pw, ctx.world.robot.base.transform(side), pw.config.robot_radius + 0.05)) side = {0.0, -0.45};
      ctx.bb.set("lid_aside", side);
      return side;
    }));
    lid.push_back(release("drop_lid"));
    lid.push_back(emit("lid_removed", [k](TaskContext&) { return fmt::format("can={}", k); }));
    lid.push_back(mark(5, "lid_removed"));
    lid.push_back(move_base("lid_return", [](TaskContext& ctx) { return -ctx.bb.at<Vec2>("lid_aside"); }));

    std::vector<Node> v;
    v.push_back(mark(1, "navigate"));
    v.push_back(navigate_to(fmt::format("to_can_{}", k), [prior](TaskContext& ctx) {
      return approach_pose(planning_world(ctx.world), prior, hand_down_reach(ctx.world.arm), ctx.world.robot.base.position());
    }));
    v.push_back(set_arm("hand_down", [](TaskContext&) { return hand_down(kMaxLift); }));
    std::vector<Node> lid_or_not;
    lid_or_not.push_back(seq("remove_lid", std::move(lid)));
    lid_or_not.push_back(check("no_lid", [](TaskContext& ctx) { return !skills::hand_detection(ctx.world, "lid"); }));
    v.push_back(sel("lid", std::move(lid_or_not)));
    v.push_back(bt::timeout<TaskContext>("servo_bag_timeout", 20.0, servo_hand("servo_bag", "trash_bag")));
    v.push_back(mark(6, "bag_aligned"));
    v.push_back(detail::lower_onto("trash_bag"));
    v.push_back(close_gripper("grasp_bag"));
    v.push_back(act("remember_bag", [](TaskContext& ctx) {
      ctx.bb.set("bag_id", *ctx.world.robot.held_object);
      return Status::success;
    }));
    v.push_back(mark(7, "bag_grasped"));
    v.push_back(up("raise_bag"));
    v.push_back(mark(8, "carry"));
    v.push_back(navigate_to(fmt::format("carry_{}", k), [drop](TaskContext& ctx) {
      return approach_pose(planning_world(ctx.world), drop, hand_down_reach(ctx.world.arm), ctx.world.robot.base.position());
    }));
    v.push_back(set_arm("lower_bag", [](TaskContext& ctx) {
      return lift_only(lift_for_hand_down(ctx.world.arm, 0.03 + ctx.bb.at<double>("load_below_tcp")));
    }));
    v.push_back(release("deposit_bag"));
    v.push_back(mark(9, "deposit"));
    v.push_back(act("judge_bag", [k, deposit, zone_radius](TaskContext& ctx) {
      const SimObject* bag = ctx.world.object(ctx.bb.at<int>("bag_id"));
      const bool in_zone = (bag->aabb.center().xy() - deposit).norm() <= zone_radius;
      ctx.emit(in_zone ? "bag_deposited" : "bag_dropped", fmt::format("can={}", k));
      return Status::success;
    }));
    v.push_back(up("raise_empty"));
    return seq(fmt::format("can_{}", k), std::move(v));
  };

  std::vector<Node> top;
  top.push_back(wait_for_door("entrance"));
  for (std::size_t k = 0; k < cans.size(); ++k)
    top.push_back(can_run(int(k) + 1, cans[k] + prior_error, deposit + Vec2{0.0, k % 2 == 0 ? 0.15 : -0.15}));
  const std::size_t n = cans.size();
  top.push_back(check("all_bags_deposited", [n](TaskContext& ctx) {
    std::size_t c = 0;
    for (const auto& e : ctx.trace) c += event_name(e) == "bag_deposited";
    return c == n;
  }));
  return seq("garbage", std::move(top));
}

}  // namespace homebot::tasks
