#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "homebot/mapless_nav.hpp"
#include "homebot/person_tracking.hpp"
#include "homebot/tasks/drinks.hpp"

namespace homebot::tasks {

/// Sweeps the head over `pans`, dwelling `dwell` seconds at each, until someone outside
/// `exclude_key`'s list is seen waving. Stores "<key>_person" and "<key>_at".
inline skills::Node find_waver(std::string key, std::vector<double> pans, std::string exclude_key = {}, double dwell = 1.0) {
  struct State {
    std::size_t pan = 0;
    double since = -1.0;
    std::map<std::string, std::vector<ArmFrame>> arms;
  };
  auto st = std::make_shared<State>();
  return skills::act(
      "find_waver_" + key,
      [=](TaskContext& ctx) {
        const double t = ctx.clock();
        if (st->since < 0.0 || t - st->since >= dwell - 1e-9) {
          if (st->since >= 0.0) st->pan = (st->pan + 1) % pans.size();
          st->since = t;
          st->arms.clear();
          ctx.cmd.head_pan = pans[st->pan];
          ctx.cmd.head_tilt = 0.0;
          return bt::Status::running;
        }
        std::set<std::string> exclude;
        if (!exclude_key.empty())
          if (auto p = ctx.bb.get<std::string>(exclude_key)) exclude.insert(*p);
        const Vec2 me = ctx.world.robot.base.position();
        const Skeleton* best = nullptr;
        const auto skels = skeleton_detect(ctx.world);
        std::map<std::string, std::vector<ArmFrame>> arms;
        for (const auto& s : skels) {
          auto& h = arms[s.person_id];
          if (auto old = st->arms.find(s.person_id); old != st->arms.end()) h = std::move(old->second);
          h.push_back(arm_frame(s));
          if (exclude.contains(s.person_id) || h.size() < std::size_t(WaveConfig{}.window) || !detect_wave(h, ctx.dt())) continue;
          if (!best || (s.torso.xy() - me).norm() < (best->torso.xy() - me).norm()) best = &s;
        }
        st->arms = std::move(arms);
        if (!best) return bt::Status::running;
        ctx.bb.set(key + "_person", best->person_id);
        ctx.bb.set(key + "_at", best->torso.xy());
        *st = State{};
        return bt::Status::success;
      },
      [st] { *st = State{}; });
}

/// Robot-frame points filling a disc, used to stamp a person into a local costmap.
inline std::vector<Vec2> disc_points(const Vec2& center, double radius, double step) {
  std::vector<Vec2> out;
  for (double y = -radius; y <= radius + 1e-9; y += step)
    for (double x = -radius; x <= radius + 1e-9; x += step)
      if (x * x + y * y <= radius * radius + 1e-9) out.push_back(center + Vec2{x, y});
  return out;
}

inline skills::Node restaurant(const World& w, const TaskConfig&) {
  using namespace skills;
  const auto menu_param = w.param("menu");
  if (!menu_param) throw ConfigError("restaurant: arena needs param menu a,b,c");
  const auto menu = split_list(*menu_param);
  if (menu.empty()) throw ConfigError("restaurant: menu is empty");
  if (w.people.size() < 2) throw ConfigError("restaurant: needs a bartender and at least one customer");
  const double stop_distance = 2.5;
  auto dialogue = std::make_shared<Dialogue>();

  std::vector<Node> v;
  v.push_back(bt::timeout<TaskContext>("bar_search", 30.0, find_waver("bar", {0.0, -0.6, 0.6})));
  v.push_back(act("bar_found", [](TaskContext& ctx) {
    ctx.bb.set("bar_pose", ctx.world.robot.base);
    const Vec2 at = ctx.bb.at<Vec2>("bar_at");
    ctx.emit("bar_found", fmt::format("person={} at={:.2f},{:.2f}", ctx.bb.at<std::string>("bar_person"), at.x, at.y));
    return Status::success;
  }));
  v.push_back(turn_to("face_room", [](TaskContext& ctx) { return wrap_angle(ctx.world.robot.base.theta + std::numbers::pi); }));
  v.push_back(bt::timeout<TaskContext>("customer_search", 60.0, find_waver("customer", {0.0, -0.8, 0.8}, "bar_person")));
  v.push_back(act("customer_found", [](TaskContext& ctx) {
    const Vec2 at = ctx.bb.at<Vec2>("customer_at");
    ctx.emit("customer_found", fmt::format("person={} at={:.2f},{:.2f}", ctx.bb.at<std::string>("customer_person"), at.x, at.y));
    return Status::success;
  }));
  v.push_back(look("head_home", 0.0, 0.0));
  v.push_back(follow("toward_customer", [stop_distance](TaskContext& ctx) -> std::optional<Route> {
    const Vec2 me = ctx.world.robot.base.position();
    const Vec2 c = ctx.bb.at<Vec2>("customer_at");
    const Vec2 d = c - me;
    if (d.norm() <= stop_distance) return Route{{me}, std::atan2(d.y, d.x)};
    return Route{{c - d / d.norm() * stop_distance}, std::atan2(d.y, d.x)};
  }));
  v.push_back(follow("approach_customer", [](TaskContext& ctx) -> std::optional<Route> {
    const Scan scan = lidar_scan(ctx.world);
    const Vec2 c_local = scan.origin.inverse_transform(ctx.bb.at<Vec2>("customer_at"));
    const auto stamp = disc_points(c_local, 0.25, 0.025);
    const Costmap m = fuse_local_map(scan, stamp);
    const Cell robot = m.cell_of({0.0, 0.0});
    const Cell customer = m.cell_of(c_local);
    const double radius_cells = (ctx.world.config.robot_radius + 0.05) / m.resolution;
    const auto target = approach_point(m, robot, customer, radius_cells);
    if (!target) {
      ctx.emit("approach_failed", "reason=no_approach_point");
      return std::nullopt;
    }
    const Vec2 goal = m.world_of(target->cell);
    const double heading = wrap_angle(m.frame.theta + target->heading);
    ctx.emit("approach_planned", fmt::format("goal={:.2f},{:.2f} heading={:.2f} island_cells={} path_cells={}", goal.x, goal.y,
                                             heading, target->island.cells.size(), target->path.cells.size()));
    return Route{{goal}, heading};
  }));
  v.push_back(take_order("take_order", dialogue, menu, [](TaskContext& ctx) { return ctx.bb.at<std::string>("customer_person"); },
                         "order"));
  v.push_back(act("remember_table", [](TaskContext& ctx) {
    ctx.bb.set("table_pose", ctx.world.robot.base);
    return Status::success;
  }));
  v.push_back(follow("to_bar", [](TaskContext& ctx) -> std::optional<Route> {
    const Pose2 bar = ctx.bb.at<Pose2>("bar_pose");
    return Route{{bar.position()}, bar.theta};
  }));
  v.push_back(act("relay_order", [](TaskContext& ctx) {
    const std::string order = ctx.bb.at<std::string>("order");
    const SimObject* o = ctx.world.object_by_class(order);
    ctx.emit("order_relayed", fmt::format("order={} available={}", order, o != nullptr));
    if (!o) return Status::failure;
    const int id = o->id;
    ctx.world = handover(ctx.world, id);
    ctx.bb.set("served_id", id);
    return Status::success;
  }));
  v.push_back(set_arm("carry", [](TaskContext&) { return hand_down(kMaxLift); }));
  v.push_back(follow("back_to_table", [](TaskContext& ctx) -> std::optional<Route> {
    const Pose2 table = ctx.bb.at<Pose2>("table_pose");
    return Route{{table.position()}, table.theta};
  }));
  v.push_back(release("serve"));
  v.push_back(act("judge_service", [](TaskContext& ctx) {
    const SimObject* o = ctx.world.object(ctx.bb.at<int>("served_id"));
    const std::string who = ctx.bb.at<std::string>("customer_person");
    const SimPerson* p = ctx.world.person(who);
    const double d = (p->position_at(ctx.clock()) - ctx.world.robot.base.position()).norm();
    const bool ok = o->class_label == ctx.bb.at<std::string>("order") && d <= 1.5;
    ctx.emit(ok ? "order_served" : "order_misserved", fmt::format("person={} order={} distance={:.2f}", who, o->class_label, d));
    return ok ? Status::success : Status::failure;
  }));
  return seq("restaurant", std::move(v));
}

}  // namespace homebot::tasks
