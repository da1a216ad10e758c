#pragma once

// Perception memory and the grasp/place subtrees shared by the manipulation tasks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "homebot/executive.hpp"
#include "homebot/object_cloud.hpp"
#include "homebot/occupancy_map.hpp"
#include "homebot/planner_race.hpp"
#include "homebot/tasks/garbage.hpp"

namespace homebot::tasks {

/// What the head camera has seen so far: object estimates, a fused octree, and the raw
/// depth points for surface fitting.
/// Head tilt that frames a table top from a viewing pose about 1.2 m away.
inline constexpr double kTableTilt = -0.42;

struct SceneMemory {
  explicit SceneMemory(const World& w) : octree(OccupancyOctree::for_arena(w.bounds, 2.0)) {}

  ObjectCloud objects{0.1};
  OccupancyOctree octree;
  std::vector<Vec3> points;
  std::optional<SurfaceModel> surface;
  Box2 surface_extent;
};

/// Points the head and fuses one depth frame and the head detections.
inline skills::Node capture(std::shared_ptr<SceneMemory> mem, double pan, double tilt, int stride = 8) {
  using namespace skills;
  std::vector<Node> v;
  v.push_back(look(fmt::format("look_{:.2f}_{:.2f}", pan, tilt), pan, tilt));
  v.push_back(act("capture", [mem, stride](TaskContext& ctx) {
    const DepthFrame f = depth_points(ctx.world, stride);
    mem->octree.integrate_scan(f.origin, f.points);
    mem->points.insert(mem->points.end(), f.points.begin(), f.points.end());
    const auto dets = camera_detect(ctx.world, Camera::head);
    for (const auto& d : dets) mem->objects.upsert(d.class_label, d.center_3d, d.size_3d, ctx.clock());
    ctx.emit("capture", fmt::format("pan={:.2f} points={} detections={}", ctx.world.robot.head_pan, f.points.size(), dets.size()));
    return Status::success;
  }));
  return seq("capture", std::move(v));
}

inline skills::Node sweep(std::shared_ptr<SceneMemory> mem, std::vector<double> pans, double tilt) {
  std::vector<skills::Node> v;
  for (double p : pans) v.push_back(capture(mem, p, tilt));
  v.push_back(skills::look("head_home", 0.0, 0.0));
  return skills::seq("sweep", std::move(v));
}

/// Footprint of the largest 8-connected patch of points on a `cell` grid; keeps a surface
/// fit from spilling onto walls that happen to cross the same height.
inline Box2 largest_patch(const std::vector<Vec2>& pts, double cell = 0.1) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < pts.size(); ++i)
    cells[{int(std::floor(pts[i].x / cell)), int(std::floor(pts[i].y / cell))}].push_back(i);
  std::set<std::pair<int, int>> seen;
  std::vector<std::size_t> best;
  for (const auto& [start, _] : cells) {
    if (seen.contains(start)) continue;
    std::vector<std::size_t> members;
    std::vector<std::pair<int, int>> stack{start};
    seen.insert(start);
    while (!stack.empty()) {
      const auto c = stack.back();
      stack.pop_back();
      const auto& idx = cells.at(c);
      members.insert(members.end(), idx.begin(), idx.end());
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const std::pair<int, int> n{c.first + dx, c.second + dy};
          if (cells.contains(n) && seen.insert(n).second) stack.push_back(n);
        }
    }
    if (members.size() > best.size()) best = std::move(members);
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  Box2 ext{{inf, inf}, {-inf, -inf}};
  for (auto i : best) {
    ext.min = {std::min(ext.min.x, pts[i].x), std::min(ext.min.y, pts[i].y)};
    ext.max = {std::max(ext.max.x, pts[i].x), std::max(ext.max.y, pts[i].y)};
  }
  return ext;
}

/// Fits the table edge at the configured height to a side profile of the depth
/// points near that height; the table extent is the largest patch of inliers.
inline skills::Node find_table(std::shared_ptr<SceneMemory> mem, double table_height) {
  return skills::act("find_table", [mem, table_height](TaskContext& ctx) {
    const Pose2& b = ctx.world.robot.base;
    std::vector<Vec2> samples;
    std::vector<Vec2> xy;
    for (const auto& p : mem->points) {
      if (std::abs(p.z - table_height) > 0.1) continue;
      samples.push_back({(p.xy() - b.position()).dot(b.heading_vector()), p.z});
      xy.push_back(p.xy());
    }
    RansacParams params;
    params.seed = ctx.cfg.seed;
    const auto m = ransac_edge(samples, table_height, params);
    if (!m) {
      ctx.emit("table_not_found", fmt::format("samples={}", samples.size()));
      return bt::Status::failure;
    }
    std::vector<Vec2> inlier_xy;
    for (auto i : m->inliers) inlier_xy.push_back(xy[i]);
    const Box2 ext = largest_patch(inlier_xy);
    mem->surface = m;
    mem->surface_extent = ext;
    ctx.emit("table_found", fmt::format("height={:.3f} inliers={} extent={:.2f},{:.2f},{:.2f},{:.2f}", m->height,
                                        m->inliers.size(), ext.min.x, ext.min.y, ext.max.x, ext.max.y));
    return bt::Status::success;
  });
}

/// A grasp the arm can execute: the tool pose, its standoff, and the base poses for both.
struct GraspGoal {
  GraspPose pose;
  GraspPose standoff;
  Pose2 base;
  Pose2 standoff_base;
  bool top = false;
};

struct GraspPlan {
  std::size_t goal = 0;
  std::vector<Vec2> waypoints;
};

enum class GraspFilter { any, top_only, upside_down };

struct PickState {
  std::optional<int> target;
  std::vector<GraspGoal> goals;
  std::optional<GraspPlan> plan;
  std::size_t gap_index = 0;
};

inline constexpr double kStandoff = 0.1;

/// Arm posture for a grasp pose: hand pointing down for top grasps, level otherwise.
inline ArmTarget posture_for(const ArmGeometry& g, const GraspPose& p, bool top) {
  const double roll = std::clamp(p.roll, kJointLimits[kWristRoll].lo, kJointLimits[kWristRoll].hi);
  return top ? hand_down(lift_for_hand_down(g, p.position.z), roll) : hand_level(lift_for_hand_level(g, p.position.z), roll);
}

/// Candidate grasps on `box` that are collision-free in the octree, pass the filter,
/// and are reachable by the planar arm from a collision-free base pose.
inline std::vector<GraspGoal> grasp_goals(const World& w, const SceneMemory& mem, const Box3& box, GraspFilter filter) {
  const GripperModel gripper;
  auto poses = generate_grasp_poses(box, gripper, 4);
  if (filter == GraspFilter::top_only)
    std::erase_if(poses, [](const GraspPose& p) { return p.face != GraspFace::top; });
  if (filter == GraspFilter::upside_down) poses = filter_orientation(poses);
  const double res = mem.octree.resolution();
  poses = filter_colliding(
      poses, gripper, [&](const Box3& q) { return mem.octree.occupied_voxels_in(q, 0.5); }, res, box.inflated(res));

  const World pw = planning_world(w);
  const double clear = pw.config.robot_radius + 0.05;
  const double lo_down = w.arm.shoulder_height - w.arm.hand, hi_down = lo_down + kMaxLift;
  const double lo_level = w.arm.shoulder_height, hi_level = lo_level + kMaxLift;
  std::vector<GraspGoal> out;
  for (const auto& p : poses) {
    GraspGoal g;
    g.pose = p;
    g.standoff = standoff_pose(p, kStandoff);
    const Vec3 a = p.approach();
    if (p.face == GraspFace::top) {
      g.top = true;
      if (p.position.z < lo_down || g.standoff.position.z > hi_down + 1e-9) continue;
      const auto base = approach_pose(pw, p.position.xy(), hand_down_reach(w.arm), w.robot.base.position());
      if (!base) continue;
      g.base = g.standoff_base = *base;
    } else {
      if (std::abs(a.z) > 1e-9 || p.position.z < lo_level || p.position.z > hi_level) continue;
      const Vec2 dir = a.xy();
      const double th = std::atan2(dir.y, dir.x);
      const Vec2 base = p.position.xy() - dir * hand_level_reach(w.arm);
      const Vec2 back = g.standoff.position.xy() - dir * hand_level_reach(w.arm);
      if (!pw.bounds.contains(back) || footprint_collides(pw, base, clear) || footprint_collides(pw, back, clear)) continue;
      g.base = {base.x, base.y, th};
      g.standoff_base = {back.x, back.y, th};
    }
    out.push_back(g);
  }
  return out;
}

/// Races A* base plans to every grasp goal; the first plan to finish wins.
inline skills::Node plan_grasp(std::shared_ptr<SceneMemory> mem, std::shared_ptr<PickState> st, GraspFilter filter) {
  return skills::act("plan_grasp", [mem, st, filter](TaskContext& ctx) {
    const ObjectEstimate* est = st->target ? mem->objects.get(*st->target) : nullptr;
    if (!est) return bt::Status::failure;
    const GraspFilter f = ctx.cfg.simple_top_grasp && filter == GraspFilter::any ? GraspFilter::top_only : filter;
    st->goals = grasp_goals(ctx.world, *mem, est->aabb, f);
    if (st->goals.empty()) {
      ctx.emit("grasp_unreachable", fmt::format("object={}", est->class_label));
      return bt::Status::failure;
    }
    const World pw = planning_world(ctx.world);
    const NavRaster raster = rasterize(pw, pw.config.robot_radius + 0.05);
    const Vec2 start = ctx.world.robot.base.position();
    PlanRequest<std::size_t> req;
    req.id = "grasp";
    req.seed = ctx.cfg.seed;
    for (std::size_t i = 0; i < st->goals.size(); ++i) req.goals.push_back(i);
    auto planner = [&](std::size_t i, std::stop_token stop) -> std::optional<GraspPlan> {
      const Vec2 goal = st->goals[i].standoff_base.position();
      const auto ca = homebot::detail::nearest_free(raster.grid, raster.cell_of(start));
      const auto cb = raster.cell_of(goal);
      if (!ca || !raster.grid.free(cb)) return std::nullopt;
      const auto path = astar_plan(raster.grid, *ca, cb, stop);
      if (!path) return std::nullopt;
      std::vector<Vec2> pts{start};
      for (std::size_t k = 1; k + 1 < path->cells.size(); ++k) pts.push_back(raster.center_of(path->cells[k]));
      pts.push_back(goal);
      auto simple = homebot::detail::simplify(raster, pts);
      simple.erase(simple.begin());
      return GraspPlan{i, std::move(simple)};
    };
    const auto mode = ctx.cfg.deterministic_race ? RaceMode::deterministic : RaceMode::concurrent;
    auto outcome = plan_race(req, planner, mode);
    if (mode == RaceMode::deterministic)
      for (std::size_t i = 0; i < outcome.statuses.size(); ++i)
        ctx.emit("race_worker", fmt::format("worker={} status={}", i, to_string(outcome.statuses[i])));
    if (!outcome.success()) {
      ctx.emit("grasp_plan_failed", fmt::format("goals={}", st->goals.size()));
      return bt::Status::failure;
    }
    st->plan = std::move(outcome.result);
    const GraspGoal& g = st->goals[st->plan->goal];
    ctx.emit("grasp_planned", fmt::format("object={} winner={} goals={} face={} roll_index={} mode={}", est->class_label,
                                          st->plan->goal, st->goals.size(), to_string(g.pose.face), g.pose.roll_index,
                                          mode == RaceMode::deterministic ? "deterministic" : "concurrent"));
    return bt::Status::success;
  });
}

/// Moves the tool point through the straight-line gap-closing path, with the lift for
/// top grasps and with the base for side grasps.
inline skills::Node approach_grasp(std::shared_ptr<PickState> st) {
  return skills::act(
      "close_gap",
      [st](TaskContext& ctx) {
        const GraspGoal& g = st->goals[st->plan->goal];
        const auto path = close_gap(g.standoff, 10);
        const double vmax = 0.2;
        while (st->gap_index < path.size()) {
          const Vec3& p = path[st->gap_index];
          if (g.top) {
            const double err = lift_for_hand_down(ctx.world.arm, p.z) - ctx.world.robot.arm[kLift];
            if (std::abs(err) > 1e-6) {
              ctx.cmd.joint_velocities[kLift] = std::clamp(err / ctx.dt(), -vmax, vmax);
              return bt::Status::running;
            }
          } else {
            const Vec2 base = p.xy() - g.pose.approach().xy() * hand_level_reach(ctx.world.arm);
            const Vec2 d = base - ctx.world.robot.base.position();
            if (d.norm() > 1e-6) {
              const double v = std::min(vmax, d.norm() / ctx.dt());
              ctx.cmd.base_velocity = (d / d.norm() * v).rotated(-ctx.world.robot.base.theta);
              return bt::Status::running;
            }
          }
          ++st->gap_index;
        }
        st->gap_index = 0;
        return bt::Status::success;
      },
      [st] { st->gap_index = 0; });
}

/// Plan, drive, pre-shape, close the gap, grasp, lift and back off.
inline skills::Node pick(std::shared_ptr<SceneMemory> mem, std::shared_ptr<PickState> st, GraspFilter filter) {
  using namespace skills;
  std::vector<Node> v;
  v.push_back(plan_grasp(mem, st, filter));
  v.push_back(follow("to_grasp", [st](TaskContext&) -> std::optional<Route> {
    const GraspGoal& g = st->goals[st->plan->goal];
    return Route{st->plan->waypoints, g.standoff_base.theta};
  }));
  v.push_back(set_arm("preshape", [st](TaskContext& ctx) {
    const GraspGoal& g = st->goals[st->plan->goal];
    return posture_for(ctx.world.arm, g.standoff, g.top);
  }));
  v.push_back(approach_grasp(st));
  v.push_back(act("remember_load", [mem, st](TaskContext& ctx) {
    const GraspGoal& g = st->goals[st->plan->goal];
    const ObjectEstimate* est = mem->objects.get(*st->target);
    const Vec3 c = est->aabb.center();
    ctx.bb.set("load_below_tcp", g.pose.position.z - est->aabb.min.z);
    ctx.bb.set("load_forward", (c - g.pose.position).xy().dot(g.base.heading_vector()));
    ctx.bb.set("load_top_grasp", g.top);
    ctx.bb.set("load_label", est->class_label);
    return Status::success;
  }));
  v.push_back(close_gripper("grasp"));
  v.push_back(emit("object_grasped", [mem, st](TaskContext& ctx) {
    const GraspGoal& g = st->goals[st->plan->goal];
    return fmt::format("object={} face={} roll_index={} up_z={:.2f}", ctx.bb.at<std::string>("load_label"),
                       to_string(g.pose.face), g.pose.roll_index, g.pose.up().z);
  }));
  v.push_back(set_arm("lift_load", [](TaskContext& ctx) { return lift_only(ctx.world.robot.arm[kLift] + 0.1); }));
  v.push_back(move_base("back_off", [](TaskContext&) { return Vec2{-0.3, 0.0}; }));
  return seq("pick", std::move(v));
}

/// Carries the held load to the blackboard's "place_xy" and sets it down with its bottom
/// `clearance` above "place_surface_z".
inline skills::Node place_at(std::string name, double clearance = 0.02) {
  using namespace skills;
  std::vector<Node> v;
  v.push_back(navigate_to(name, [](TaskContext& ctx) -> std::optional<Pose2> {
    const bool top = ctx.bb.at<bool>("load_top_grasp");
    const double reach = (top ? hand_down_reach(ctx.world.arm) : hand_level_reach(ctx.world.arm)) + ctx.bb.at<double>("load_forward");
    return approach_pose(planning_world(ctx.world), ctx.bb.at<Vec2>("place_xy"), reach, ctx.world.robot.base.position());
  }));
  v.push_back(set_arm("lower_load", [clearance](TaskContext& ctx) {
    const double z = ctx.bb.at<double>("place_surface_z") + clearance + ctx.bb.at<double>("load_below_tcp");
    const double roll = ctx.world.robot.arm[kWristRoll];
    return ctx.bb.at<bool>("load_top_grasp") ? hand_down(lift_for_hand_down(ctx.world.arm, z), roll)
                                             : hand_level(lift_for_hand_level(ctx.world.arm, z), roll);
  }));
  v.push_back(act("remember_placed", [](TaskContext& ctx) {
    if (!ctx.world.robot.held_object) return Status::failure;
    ctx.bb.set("placed_id", *ctx.world.robot.held_object);
    return Status::success;
  }));
  v.push_back(release("set_down"));
  return seq(name, std::move(v));
}

/// Drives to view the object from above, servos the hand camera onto it, and grasps it
/// from the top. `top` gives the estimated center of the object's top face.
inline skills::Node pick_from_above(std::string name, skills::LabelFn label, std::function<std::optional<Vec3>(TaskContext&)> top) {
  using namespace skills;
  std::vector<Node> v;
  v.push_back(navigate_to(name + "_approach", [top](TaskContext& ctx) -> std::optional<Pose2> {
    const auto t = top(ctx);
    if (!t) return std::nullopt;
    ctx.bb.set("pick_top", *t);
    return approach_pose(planning_world(ctx.world), t->xy(), hand_down_reach(ctx.world.arm), ctx.world.robot.base.position());
  }));
  v.push_back(set_arm(name + "_hover", [](TaskContext& ctx) {
    return hand_down(lift_for_hand_down(ctx.world.arm, ctx.bb.at<Vec3>("pick_top").z + 0.2));
  }));
  v.push_back(bt::timeout<TaskContext>(name + "_servo_timeout", 20.0, servo_hand(name + "_servo", label)));
  v.push_back(detail::lower_onto(name + "_lower", label));
  v.push_back(close_gripper(name + "_grasp"));
  v.push_back(act(name + "_remember", [label](TaskContext& ctx) {
    ctx.bb.set("load_label", label(ctx));
    ctx.bb.set("load_top_grasp", true);
    ctx.bb.set("load_forward", 0.0);
    return Status::success;
  }));
  v.push_back(set_arm(name + "_raise", [](TaskContext& ctx) { return lift_only(std::min(kMaxLift, ctx.world.robot.arm[kLift] + 0.15)); }));
  return seq(name, std::move(v));
}

/// Free spot on a box top: the grid point farthest from the given occupied points.
inline Vec2 free_spot(const Box2& top, const std::vector<Vec2>& occupied, double margin = 0.08, double step = 0.05) {
  Vec2 best = top.center();
  double best_d = -1.0;
  for (double y = top.min.y + margin; y <= top.max.y - margin + 1e-9; y += step)
    for (double x = top.min.x + margin; x <= top.max.x - margin + 1e-9; x += step) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& o : occupied) d = std::min(d, (o - Vec2{x, y}).norm());
      if (d > best_d + 1e-9) {
        best_d = d;
        best = {x, y};
      }
    }
  return best;
}

inline Pose2 parse_pose(const World& w, std::string_view key) {
  const auto v = w.param(key);
  if (!v) throw ConfigError(fmt::format("arena needs param {} x,y,theta", key));
  std::vector<double> xs;
  std::string s(*v);
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string tok = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      xs.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("param {}: bad number '{}'", key, tok));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (xs.size() != 3) throw ConfigError(fmt::format("param {}: expected x,y,theta", key));
  return {xs[0], xs[1], xs[2]};
}

inline double param_number(const World& w, std::string_view key) {
  const auto v = w.param(key);
  if (!v) throw ConfigError(fmt::format("arena needs param {}", key));
  try {
    return std::stod(*v);
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("param {}: bad number '{}'", key, *v));
  }
}

}  // namespace homebot::tasks
