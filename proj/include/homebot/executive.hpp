#pragma once

// Task executive: run context, configuration, scoring, and the skill leaves the task
// scripts are assembled from.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "homebot/behavior_tree.hpp"
#include "homebot/manipulation.hpp"
#include "homebot/navigation.hpp"
#include "homebot/semantics.hpp"
#include "homebot/sim_world.hpp"

namespace homebot {

/// The arena lacks something a task needs, or the run configuration is invalid.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Award { base, bonus };

/// Points per achieved trace event.
struct Rubric {
  double base = 1.0;
  double bonus = 1.0;
  std::map<std::string, Award, std::less<>> awards{
      {"bag_deposited", Award::base},   {"lid_removed", Award::bonus},       {"object_placed", Award::base},
      {"drink_delivered", Award::base}, {"order_unavailable", Award::bonus}, {"luggage_delivered", Award::base},
      {"order_served", Award::base},    {"dish_placed", Award::base},        {"bowl_placed", Award::base},
      {"cereal_grasped", Award::base},
  };

  double points(std::string_view event) const {
    auto it = awards.find(event);
    if (it == awards.end()) return 0.0;
    return it->second == Award::base ? base : bonus;
  }
};

struct TaskConfig {
  std::uint64_t seed = 7;
  double dt = 0.1;
  /// Simulated seconds; the task default when unset.
  std::optional<double> limit;
  bool deterministic_race = false;
  bool simple_top_grasp = false;
  double nav_speed = 0.8;
  Rubric rubric;
  EmbeddingTable embeddings;
  CategoryKB kb;
};

struct TaskReport {
  std::string task;
  bool success = false;
  double score = 0.0;
  double elapsed = 0.0;
  double limit = 0.0;
  std::vector<std::string> events;

  bool operator==(const TaskReport&) const = default;
};

/// Event name of a `t=<s> <event> key=value ...` trace line.
inline std::string event_name(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::string t, name;
  in >> t >> name;
  return name;
}

inline double score_task(const TaskReport& report, const Rubric& rubric) {
  double s = 0.0;
  for (const auto& e : report.events) s += rubric.points(event_name(e));
  return s;
}

/// Rebuilds a report from its trace alone: outcome and elapsed time come from the
/// closing line, the score from the rubric.
inline TaskReport report_from_trace(std::string task, std::vector<std::string> events, double limit, const Rubric& rubric) {
  TaskReport r;
  r.task = std::move(task);
  r.limit = limit;
  r.events = std::move(events);
  if (r.events.empty()) throw std::invalid_argument("report_from_trace: empty trace");
  const std::string& last = r.events.back();
  const std::string name = event_name(last);
  if (name != "task_succeeded" && name != "task_failed" && name != "task_timeout")
    throw std::invalid_argument("report_from_trace: trace is not closed");
  r.success = name == "task_succeeded";
  std::istringstream in(last);
  std::string tok;
  while (in >> tok)
    if (tok.rfind("elapsed=", 0) == 0) r.elapsed = std::stod(tok.substr(8));
  r.score = score_task(r, rubric);
  return r;
}

struct TaskContext {
  TaskContext(World w, const TaskConfig& c) : world(std::move(w)), cfg(c) {}

  World world;
  const TaskConfig& cfg;
  bt::Blackboard bb;
  /// Commands for the step that follows the current tick.
  Commands cmd;
  std::vector<std::string> trace;

  double clock() const { return world.clock; }
  double dt() const { return cfg.dt; }

  void emit(std::string_view event, std::string_view fields = {}) {
    if (fields.empty())
      trace.push_back(fmt::format("t={:.2f} {}", clock(), event));
    else
      trace.push_back(fmt::format("t={:.2f} {} {}", clock(), event, fields));
  }
};

// ---------------------------------------------------------------------------
// Arm postures

using ArmTarget = std::array<std::optional<double>, kJointCount>;

inline double hand_down_reach(const ArmGeometry& g) { return g.shoulder_forward + g.upper_arm; }
inline double hand_level_reach(const ArmGeometry& g) { return g.shoulder_forward + g.upper_arm + g.hand; }
inline double lift_for_hand_down(const ArmGeometry& g, double tcp_z) {
  return std::clamp(tcp_z - (g.shoulder_height - g.hand), kJointLimits[kLift].lo, kJointLimits[kLift].hi);
}
inline double lift_for_hand_level(const ArmGeometry& g, double tcp_z) {
  return std::clamp(tcp_z - g.shoulder_height, kJointLimits[kLift].lo, kJointLimits[kLift].hi);
}
inline constexpr double kMaxLift = kJointLimits[kLift].hi;

inline ArmTarget hand_down(double lift, double roll = 0.0) {
  return {lift, -std::numbers::pi / 2, 0.0, -std::numbers::pi / 2, roll};
}
inline ArmTarget hand_level(double lift, double roll = 0.0) { return {lift, -std::numbers::pi / 2, 0.0, 0.0, roll}; }
inline ArmTarget lift_only(double lift) { return {lift, {}, {}, {}, {}}; }

// ---------------------------------------------------------------------------
// Planning helpers

/// Copy of the world in which floor-standing, non-graspable objects are static boxes,
/// so route planning keeps clear of them.
inline World planning_world(const World& w) {
  World p = w;
  for (const auto& o : w.objects) {
    if (o.graspable || (w.robot.held_object && *w.robot.held_object == o.id)) continue;
    if (o.aabb.min.z < w.config.robot_height) p.static_boxes.push_back({"object:" + o.class_label, o.aabb});
  }
  return p;
}

/// Collision-free base pose `reach` meters behind `target` along one of `headings`
/// evenly spaced directions, facing it; the candidate nearest `from` wins.
inline std::optional<Pose2> approach_pose(const World& planning, const Vec2& target, double reach, const Vec2& from,
                                          double margin = 0.05, int headings = 16) {
  std::optional<Pose2> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < headings; ++k) {
    const double th = wrap_angle(2.0 * std::numbers::pi * k / headings);
    const Vec2 base = target - Vec2{std::cos(th), std::sin(th)} * reach;
    if (!planning.bounds.contains(base) || footprint_collides(planning, base, planning.config.robot_radius + margin)) continue;
    const double d = (base - from).norm();
    if (d < best_d - 1e-9) {
      best_d = d;
      best = Pose2{base.x, base.y, th};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Skill leaves

namespace skills {

using Node = bt::NodePtr<TaskContext>;
using bt::Status;

template <class Fn, class Reset = std::function<void()>>
Node act(std::string name, Fn fn, Reset reset = {}) {
  return bt::action<TaskContext>(std::move(name), std::function<Status(TaskContext&)>(std::move(fn)), std::move(reset));
}

inline Node seq(std::string name, std::vector<Node> children) {
  return std::make_unique<bt::Sequence<TaskContext>>(std::move(name), std::move(children));
}

inline Node sel(std::string name, std::vector<Node> children) {
  return std::make_unique<bt::Selector<TaskContext>>(std::move(name), std::move(children));
}

inline Node check(std::string name, std::function<bool(TaskContext&)> pred) {
  return bt::condition<TaskContext>(std::move(name), std::move(pred));
}

inline Node emit(std::string event, std::function<std::string(TaskContext&)> fields = {}) {
  return act("emit:" + event, [event, fields](TaskContext& ctx) {
    ctx.emit(event, fields ? fields(ctx) : std::string{});
    return Status::success;
  });
}

inline Node wait_for_door(std::string door) {
  return act("wait_for_door", [door](TaskContext& ctx) {
    const Door* d = ctx.world.door(door);
    if (!d) return Status::failure;
    if (!d->is_open(ctx.clock())) return Status::running;
    ctx.emit("door_open", "door=" + door);
    return Status::success;
  });
}

inline Node wait(std::string name, double seconds) {
  auto start = std::make_shared<std::optional<double>>();
  return act(
      std::move(name),
      [start, seconds](TaskContext& ctx) {
        if (!*start) *start = ctx.clock();
        if (ctx.clock() - **start >= seconds - 1e-9) {
          start->reset();
          return Status::success;
        }
        return Status::running;
      },
      [start] { start->reset(); });
}

struct Route {
  std::vector<Vec2> waypoints;
  std::optional<double> heading;
};

/// Drives a route with the stop-at-every-waypoint follower, forwarding its events.
/// `stop_when` ends the leg early with success.
inline Node follow(std::string name, std::function<std::optional<Route>(TaskContext&)> plan,
                   std::function<bool(TaskContext&)> stop_when = {}) {
  struct State {
    std::optional<WaypointFollower> f;
    std::size_t forwarded = 0;
  };
  auto st = std::make_shared<State>();
  return act(
      name,
      [st, name, plan, stop_when](TaskContext& ctx) {
        if (!st->f) {
          auto route = plan(ctx);
          if (!route) {
            ctx.emit("navigation_failed", fmt::format("leg={} reason=no_route", name));
            return Status::failure;
          }
          FollowerConfig fc;
          fc.speed = ctx.cfg.nav_speed;
          const Vec2 end = route->waypoints.empty() ? ctx.world.robot.base.position() : route->waypoints.back();
          ctx.emit("navigate", fmt::format("leg={} goal={:.2f},{:.2f} waypoints={}", name, end.x, end.y, route->waypoints.size()));
          if (route->waypoints.empty()) route->waypoints.push_back(ctx.world.robot.base.position());
          st->f.emplace(std::move(route->waypoints), fc, route->heading);
          st->forwarded = 0;
        }
        auto forward = [&] {
          const auto& ev = st->f->events();
          for (; st->forwarded < ev.size(); ++st->forwarded) ctx.trace.push_back(ev[st->forwarded]);
        };
        if (stop_when && stop_when(ctx)) {
          forward();
          st->f.reset();
          return Status::success;
        }
        ctx.cmd = st->f->tick(ctx.world, ctx.dt());
        forward();
        const auto s = st->f->state();
        if (s == WaypointFollower::State::running) return Status::running;
        st->f.reset();
        return s == WaypointFollower::State::done ? Status::success : Status::failure;
      },
      [st] { st->f.reset(); });
}

/// Routes through the planning world to a goal pose.
inline Node navigate_to(std::string name, std::function<std::optional<Pose2>(TaskContext&)> goal,
                        std::function<bool(TaskContext&)> stop_when = {}) {
  return follow(
      std::move(name),
      [goal](TaskContext& ctx) -> std::optional<Route> {
        const auto g = goal(ctx);
        if (!g) return std::nullopt;
        const World pw = planning_world(ctx.world);
        auto wps = plan_route(pw, ctx.world.robot.base.position(), g->position());
        if (!wps) return std::nullopt;
        return Route{std::move(*wps), g->theta};
      },
      std::move(stop_when));
}

/// Drives the listed joints to their targets at the joint speed limit.
inline Node set_arm(std::string name, std::function<ArmTarget(TaskContext&)> target) {
  auto goal = std::make_shared<std::optional<ArmTarget>>();
  return act(
      std::move(name),
      [goal, target](TaskContext& ctx) {
        if (!*goal) *goal = target(ctx);
        bool done = true;
        const auto& arm = ctx.world.robot.arm;
        const double vmax = ctx.world.config.max_joint_speed;
        for (int j = 0; j < kJointCount; ++j) {
          if (!(**goal)[j]) continue;
          const double want = std::clamp(*(**goal)[j], kJointLimits[j].lo, kJointLimits[j].hi);
          const double err = want - arm[j];
          if (std::abs(err) <= 1e-6) continue;
          done = false;
          ctx.cmd.joint_velocities[j] = std::clamp(err / ctx.dt(), -vmax, vmax);
        }
        if (done) {
          goal->reset();
          return Status::success;
        }
        return Status::running;
      },
      [goal] { goal->reset(); });
}

inline Node look(std::string name, double pan, double tilt) {
  return act(std::move(name), [pan, tilt](TaskContext& ctx) {
    if (std::abs(ctx.world.robot.head_pan - pan) < 1e-9 && std::abs(ctx.world.robot.head_tilt - tilt) < 1e-9)
      return Status::success;
    ctx.cmd.head_pan = pan;
    ctx.cmd.head_tilt = tilt;
    return Status::running;
  });
}

/// Hand-camera detection of `label` nearest the image center.
inline std::optional<Detection> hand_detection(const World& w, std::string_view label) {
  std::optional<Detection> best;
  const CameraPose cam = camera_pose(w, Camera::hand);
  double best_d = std::numeric_limits<double>::infinity();
  for (auto& d : camera_detect(w, Camera::hand)) {
    if (d.class_label != label) continue;
    const double e = (d.bbox_2d.center() - Vec2{cam.cx, cam.cy}).norm();
    if (e < best_d) {
      best_d = e;
      best = std::move(d);
    }
  }
  return best;
}

using LabelFn = std::function<std::string(const TaskContext&)>;

/// Proportional base servo centering the labelled object in the downward-looking hand
/// camera. Gain is set so each tick removes `fraction` of the remaining error.
inline Node servo_hand(std::string name, LabelFn label_of, double tolerance_px = 8.0, double fraction = 0.5) {
  auto steps = std::make_shared<int>(0);
  return act(
      std::move(name),
      [steps, label_of, tolerance_px, fraction](TaskContext& ctx) {
        const std::string label = label_of(ctx);
        const auto det = hand_detection(ctx.world, label);
        if (!det) {
          ctx.emit("servo_lost", "target=" + label);
          *steps = 0;
          return Status::failure;
        }
        const CameraPose cam = camera_pose(ctx.world, Camera::hand);
        const auto proj = cam.project(det->center_3d);
        if (!proj) return Status::failure;
        const double ppm = cam.focal / proj->second;
        const double gain = fraction / (ppm * ctx.dt());
        const Vec2 err = det->bbox_2d.center() - Vec2{cam.cx, cam.cy};
        const ServoCommand sc = servo_step(err, gain, tolerance_px);
        if (sc.done) {
          ctx.emit("servo_aligned", fmt::format("target={} steps={} error_px={:.1f}", label, *steps, err.norm()));
          *steps = 0;
          return Status::success;
        }
        ++*steps;
        ctx.cmd.base_velocity = sc.base_velocity;
        return Status::running;
      },
      [steps] { *steps = 0; });
}

inline Node servo_hand(std::string name, std::string label, double tolerance_px = 8.0, double fraction = 0.5) {
  return servo_hand(std::move(name), LabelFn([label](const TaskContext&) { return label; }), tolerance_px, fraction);
}

inline Node close_gripper(std::string name) {
  auto sent = std::make_shared<bool>(false);
  return act(
      std::move(name),
      [sent](TaskContext& ctx) {
        if (!*sent) {
          *sent = true;
          ctx.cmd.gripper = GripperCommand::close;
          return Status::running;
        }
        *sent = false;
        if (!ctx.world.robot.held_object) {
          ctx.cmd.gripper = GripperCommand::open;
          return Status::failure;
        }
        return Status::success;
      },
      [sent] { *sent = false; });
}

/// Opens the gripper; a load that stays stuck is shaken off by rolling the wrist
/// one way and then the other before returning to the start angle.
inline Node release(std::string name, double amplitude = 0.45) {
  struct State {
    int phase = 0;
    double start = 0.0;
  };
  auto st = std::make_shared<State>();
  return act(
      std::move(name),
      [st, amplitude](TaskContext& ctx) {
        const auto& r = ctx.world.robot;
        const double vmax = ctx.world.config.max_joint_speed;
        auto drive_roll = [&](double target) {
          const double err = target - r.arm[kWristRoll];
          if (std::abs(err) <= 1e-6) return true;
          ctx.cmd.joint_velocities[kWristRoll] = std::clamp(err / ctx.dt(), -vmax, vmax);
          return false;
        };
        if (st->phase == 0) {
          st->start = r.arm[kWristRoll];
          ctx.cmd.gripper = GripperCommand::open;
          st->phase = 1;
          return Status::running;
        }
        if (st->phase == 1 && !r.held_object) {
          st->phase = 0;
          return Status::success;
        }
        const double targets[3] = {st->start + amplitude, st->start - amplitude, st->start};
        while (st->phase <= 3) {
          if (!drive_roll(targets[st->phase - 1])) return Status::running;
          ++st->phase;
        }
        const bool freed = !r.held_object;
        if (freed) ctx.emit("wrist_roll_release", fmt::format("amplitude={:.2f}", amplitude));
        st->phase = 0;
        return freed ? Status::success : Status::failure;
      },
      [st] { st->phase = 0; });
}

/// Holonomic move to a robot-frame offset fixed when the leaf starts.
inline Node move_base(std::string name, std::function<Vec2(TaskContext&)> offset, double speed = 0.5) {
  struct State {
    std::optional<Vec2> target;
    double stalled = 0.0;
  };
  auto st = std::make_shared<State>();
  return act(
      std::move(name),
      [st, offset, speed](TaskContext& ctx) {
        const Pose2& b = ctx.world.robot.base;
        if (!st->target) {
          st->target = b.transform(offset(ctx));
          st->stalled = 0.0;
        }
        const Vec2 d = *st->target - b.position();
        if (d.norm() <= 1e-6) {
          st->target.reset();
          return Status::success;
        }
        for (const auto& e : ctx.world.events)
          if (e.kind == "bumper") st->stalled += ctx.dt();
        if (st->stalled >= 1.0) {
          st->target.reset();
          return Status::failure;
        }
        const double v = std::min(speed, d.norm() / ctx.dt());
        ctx.cmd.base_velocity = (d / d.norm() * v).rotated(-b.theta);
        return Status::running;
      },
      [st] { st->target.reset(); });
}

inline Node turn_to(std::string name, std::function<double(TaskContext&)> heading) {
  auto goal = std::make_shared<std::optional<double>>();
  return act(
      std::move(name),
      [goal, heading](TaskContext& ctx) {
        if (!*goal) *goal = heading(ctx);
        const double err = wrap_angle(**goal - ctx.world.robot.base.theta);
        if (std::abs(err) <= 1e-6) {
          goal->reset();
          return Status::success;
        }
        const double w = ctx.world.config.max_angular_speed;
        ctx.cmd.angular_velocity = std::clamp(err / ctx.dt(), -w, w);
        return Status::running;
      },
      [goal] { goal->reset(); });
}

}  // namespace skills
}  // namespace homebot
