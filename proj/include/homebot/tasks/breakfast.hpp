#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "homebot/tasks/common.hpp"

namespace homebot::tasks {

/// Point `inset` inside the edge of `top` nearest to `from`.
inline Vec2 near_edge_spot(const Box2& top, const Vec2& from, double inset) {
  const Vec2 c = top.center();
  const double dxl = std::abs(from.x - top.min.x), dxh = std::abs(from.x - top.max.x);
  const double dyl = std::abs(from.y - top.min.y), dyh = std::abs(from.y - top.max.y);
  const double best = std::min({dxl, dxh, dyl, dyh});
  if (best == dxl) return {top.min.x + inset, c.y};
  if (best == dxh) return {top.max.x - inset, c.y};
  if (best == dyl) return {c.x, top.min.y + inset};
  return {c.x, top.max.y - inset};
}

inline double edge_distance(const Box2& top, const Vec2& p) {
  return std::min({p.x - top.min.x, top.max.x - p.x, p.y - top.min.y, top.max.y - p.y});
}

inline skills::Node breakfast(const World& w, const TaskConfig&) {
  using namespace skills;
  const Pose2 counter_view = parse_pose(w, "counter_view");
  const double counter_h = param_number(w, "counter_height");
  const auto table_it = std::find_if(w.static_boxes.begin(), w.static_boxes.end(), [](const StaticBox& b) { return b.name == "table"; });
  if (table_it == w.static_boxes.end()) throw ConfigError("breakfast: arena needs furniture named 'table'");
  if (!w.object_by_class("bowl")) throw ConfigError("breakfast: arena needs an object labelled 'bowl'");
  if (!w.object_by_class("cereal")) throw ConfigError("breakfast: arena needs an object labelled 'cereal'");
  const Box2 table = table_it->box.footprint();
  const double table_z = table_it->box.max.z;
  constexpr double kEdgeInset = 0.15;
  constexpr double kNearEdge = 0.25;

  auto counter = std::make_shared<SceneMemory>(w);
  auto st = std::make_shared<PickState>();

  auto on_table = [table, table_z](const SimObject& o) {
    return table.contains(o.aabb.center().xy()) && std::abs(o.aabb.min.z - table_z) < 1e-6;
  };

  std::vector<Node> v;
  v.push_back(navigate_to("to_counter", [counter_view](TaskContext&) { return std::optional<Pose2>(counter_view); }));
  v.push_back(sweep(counter, {-0.35, 0.0, 0.35}, kTableTilt));
  v.push_back(find_table(counter, counter_h));
  v.push_back(pick_from_above("fetch_bowl", [](const TaskContext&) { return std::string("bowl"); },
                              [counter](TaskContext&) -> std::optional<Vec3> {
                                const auto found = counter->objects.by_class("bowl");
                                if (found.empty()) return std::nullopt;
                                const auto* e = found.front();
                                return Vec3{e->centroid.x, e->centroid.y, e->aabb.max.z};
                              }));
  v.push_back(act("choose_bowl_spot", [table, table_z, kEdgeInset](TaskContext& ctx) {
    const Vec2 spot = near_edge_spot(table, ctx.world.robot.base.position(), kEdgeInset);
    ctx.bb.set("place_xy", spot);
    ctx.bb.set("place_surface_z", table_z);
    ctx.bb.set("bowl_spot", spot);
    ctx.bb.set("edge_along", std::abs(spot.y - table.center().y) < 1e-9 ? Vec2{0.0, 1.0} : Vec2{1.0, 0.0});
    return Status::success;
  }));
  v.push_back(place_at("place_bowl"));
  v.push_back(act("judge_bowl", [table, on_table, kNearEdge](TaskContext& ctx) {
    const SimObject* o = ctx.world.object(ctx.bb.at<int>("placed_id"));
    const double edge = edge_distance(table, o->aabb.center().xy());
    const bool ok = on_table(*o) && edge <= kNearEdge;
    ctx.emit(ok ? "bowl_placed" : "bowl_misplaced", fmt::format("at={:.2f},{:.2f} edge_distance={:.2f}", o->aabb.center().x, o->aabb.center().y, edge));
    return ok ? Status::success : Status::failure;
  }));
  v.push_back(set_arm("raise_empty", [](TaskContext& ctx) { return lift_only(std::min(kMaxLift, ctx.world.robot.arm[kLift] + 0.1)); }));
  v.push_back(move_base("leave_bowl", [](TaskContext&) { return Vec2{-0.3, 0.0}; }));

  v.push_back(navigate_to("back_to_counter", [counter_view](TaskContext&) { return std::optional<Pose2>(counter_view); }));
  v.push_back(act("choose_cereal", [counter, st](TaskContext& ctx) {
    const auto found = counter->objects.by_class("cereal");
    if (found.empty()) {
      ctx.emit("cereal_not_seen", "");
      return Status::failure;
    }
    st->target = found.front()->id;
    return Status::success;
  }));
  v.push_back(pick(counter, st, GraspFilter::upside_down));
  v.push_back(emit("cereal_grasped", [st](TaskContext&) {
    const GraspPose& p = st->goals[st->plan->goal].pose;
    return fmt::format("upside_down={} roll_index={} up_z={:.2f}", p.up().z < -0.5, p.roll_index, p.up().z);
  }));
  v.push_back(act("choose_cereal_spot", [](TaskContext& ctx) {
    ctx.bb.set("place_xy", ctx.bb.at<Vec2>("bowl_spot") + ctx.bb.at<Vec2>("edge_along") * 0.3);
    return Status::success;
  }));
  v.push_back(place_at("place_cereal"));
  v.push_back(act("judge_cereal", [on_table](TaskContext& ctx) {
    const SimObject* o = ctx.world.object(ctx.bb.at<int>("placed_id"));
    const bool ok = on_table(*o);
    ctx.emit(ok ? "cereal_placed" : "cereal_misplaced", fmt::format("at={:.2f},{:.2f}", o->aabb.center().x, o->aabb.center().y));
    return ok ? Status::success : Status::failure;
  }));
  v.push_back(set_arm("raise_after_cereal", [](TaskContext& ctx) { return lift_only(std::min(kMaxLift, ctx.world.robot.arm[kLift] + 0.1)); }));
  v.push_back(move_base("leave_table", [](TaskContext&) { return Vec2{-0.3, 0.0}; }));
  return seq("breakfast", std::move(v));
}

}  // namespace homebot::tasks
