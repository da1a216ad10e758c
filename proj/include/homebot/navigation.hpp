#pragma once

// Base navigation on the simulator: route planning over an inflated raster with door
// waypoints, and a stop-at-every-waypoint follower that waits out blocked legs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "homebot/planner_race.hpp"
#include "homebot/sim_world.hpp"

namespace homebot {

struct NavRaster {
  GridMap grid;
  Vec2 origin;
  double resolution = 0.05;

  Cell cell_of(const Vec2& p) const {
    return {static_cast<int>(std::floor((p.x - origin.x) / resolution)),
            static_cast<int>(std::floor((p.y - origin.y) / resolution))};
  }
  Vec2 center_of(Cell c) const { return origin + Vec2{(c.x + 0.5) * resolution, (c.y + 0.5) * resolution}; }
};

/// Cells whose center is closer than `clearance` to any base obstacle are blocked.
/// Doors never block planning: a closed door is waited out by the follower.
inline NavRaster rasterize(const World& w, double clearance, double resolution = 0.05) {
  NavRaster r;
  r.origin = w.bounds.min;
  r.resolution = resolution;
  const Vec2 s = w.bounds.size();
  r.grid = GridMap(std::max(1, int(std::ceil(s.x / resolution))), std::max(1, int(std::ceil(s.y / resolution))));
  std::vector<Box2> boxes;
  for (const auto& b : w.static_boxes)
    if (b.box.min.z < w.config.robot_height) boxes.push_back(b.box.footprint());
  for (int y = 0; y < r.grid.height(); ++y)
    for (int x = 0; x < r.grid.width(); ++x) {
      const Vec2 c = r.center_of({x, y});
      for (const auto& b : boxes)
        if (distance_point_box(c, b) < clearance) {
          r.grid.set_blocked({x, y});
          break;
        }
    }
  return r;
}

namespace detail {

inline std::optional<Cell> nearest_free(const GridMap& g, Cell from) {
  if (g.in_bounds(from) && !g.blocked(from)) return from;
  std::vector<std::uint8_t> seen(std::size_t(g.width()) * g.height(), 0);
  std::queue<Cell> q;
  auto clampc = [&](Cell c) { return Cell{std::clamp(c.x, 0, g.width() - 1), std::clamp(c.y, 0, g.height() - 1)}; };
  from = clampc(from);
  q.push(from);
  seen[g.index(from)] = 1;
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    if (!g.blocked(c)) return c;
    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const Cell n{c.x + dx, c.y + dy};
      if (g.in_bounds(n) && !seen[g.index(n)]) {
        seen[g.index(n)] = 1;
        q.push(n);
      }
    }
  }
  return std::nullopt;
}

inline bool line_of_sight(const NavRaster& r, const Vec2& a, const Vec2& b) {
  const double len = (b - a).norm();
  const int n = std::max(1, int(std::ceil(len / (r.resolution * 0.25))));
  for (int i = 0; i <= n; ++i) {
    const Cell c = r.cell_of(a + (b - a) * (double(i) / n));
    if (!r.grid.free(c)) return false;
  }
  return true;
}

inline std::vector<Vec2> simplify(const NavRaster& r, const std::vector<Vec2>& pts) {
  if (pts.size() <= 2) return pts;
  std::vector<Vec2> out{pts.front()};
  std::size_t i = 0;
  while (i + 1 < pts.size()) {
    std::size_t j = pts.size() - 1;
    while (j > i + 1 && !line_of_sight(r, pts[i], pts[j])) --j;
    out.push_back(pts[j]);
    i = j;
  }
  return out;
}

}  // namespace detail

struct RouteConfig {
  double margin = 0.05;
  double door_offset = 0.6;
  double resolution = 0.05;
};

/// Waypoints from `start` to `goal`, excluding `start`. Every door the route passes
/// gets a waypoint on each side, collinear with the door normal.
inline std::optional<std::vector<Vec2>> plan_route(const World& w, const Vec2& start, const Vec2& goal,
                                                   const RouteConfig& cfg = {}) {
  const NavRaster r = rasterize(w, w.config.robot_radius + cfg.margin, cfg.resolution);
  std::set<std::string> used_doors;

  std::function<std::optional<std::vector<Vec2>>(Vec2, Vec2)> leg = [&](Vec2 a, Vec2 b) -> std::optional<std::vector<Vec2>> {
    const auto ca = detail::nearest_free(r.grid, r.cell_of(a));
    const auto cb = detail::nearest_free(r.grid, r.cell_of(b));
    if (!ca || !cb) return std::nullopt;
    const auto path = astar_plan(r.grid, *ca, *cb);
    if (!path) return std::nullopt;
    for (const Cell& c : path->cells) {
      const Vec2 p = r.center_of(c);
      for (const auto& d : w.doors) {
        if (used_doors.contains(d.name) || !d.box.footprint().contains(p)) continue;
        used_doors.insert(d.name);
        const Vec2 n = d.normal();
        const double side = (a - d.center()).dot(n) >= 0 ? 1.0 : -1.0;
        const Vec2 pre = d.center() + n * (cfg.door_offset * side);
        const Vec2 post = d.center() - n * (cfg.door_offset * side);
        auto first = leg(a, pre);
        auto rest = leg(post, b);
        if (!first || !rest) return std::nullopt;
        std::vector<Vec2> out = *first;
        out.push_back(post);
        out.insert(out.end(), rest->begin(), rest->end());
        return out;
      }
    }
    std::vector<Vec2> pts{a};
    for (std::size_t i = 1; i + 1 < path->cells.size(); ++i) pts.push_back(r.center_of(path->cells[i]));
    pts.push_back(b);
    auto simple = detail::simplify(r, pts);
    simple.erase(simple.begin());
    return simple;
  };
  return leg(start, goal);
}

struct FollowerConfig {
  double speed = 0.5;
  double timeout = 10.0;
  int dwell_ticks = 1;
  double block_distance = 0.45;
  double block_sector = 25.0 * std::numbers::pi / 180.0;
  double tolerance = 1e-6;
};

/// Drives through waypoints in order, stopping for `dwell_ticks` at each one. A leg
/// whose travel sector stays blocked for `timeout` seconds fails the run.
class WaypointFollower {
 public:
  enum class State { running, done, failed };

  WaypointFollower(std::vector<Vec2> waypoints, FollowerConfig cfg = {}, std::optional<double> final_heading = {})
      : waypoints_(std::move(waypoints)), cfg_(cfg), final_heading_(final_heading) {
    if (waypoints_.empty()) state_ = State::done;
  }

  State state() const { return state_; }
  const std::vector<std::string>& events() const { return events_; }
  std::size_t current() const { return index_; }

  Commands tick(const World& w, double dt) {
    Commands c;
    if (state_ != State::running) return c;
    if (index_ >= waypoints_.size()) {
      state_ = State::done;
      return c;
    }
    const Vec2 target = waypoints_[index_];
    if (!checked_) {
      checked_ = true;
      if (!w.bounds.contains(target) || footprint_collides(w, target, w.config.robot_radius)) {
        fail(w, "waypoint_in_obstacle");
        return c;
      }
    }
    const Pose2& pose = w.robot.base;
    const Vec2 to = target - pose.position();
    const double dist = to.norm();

    if (dwelling_ > 0) {
      if (--dwelling_ == 0) advance(w);
      return c;
    }
    if (dist <= cfg_.tolerance) {
      const bool last = index_ + 1 == waypoints_.size();
      if (last && final_heading_) {
        const double err = wrap_angle(*final_heading_ - pose.theta);
        if (std::abs(err) > cfg_.tolerance) {
          c.angular_velocity = std::clamp(err / dt, -w.config.max_angular_speed, w.config.max_angular_speed);
          return c;
        }
      }
      dwelling_ = cfg_.dwell_ticks;
      if (dwelling_ == 0) advance(w);
      else if (--dwelling_ == 0) advance(w);
      return c;
    }
    const double heading = std::atan2(to.y, to.x);
    const double err = wrap_angle(heading - pose.theta);
    if (std::abs(err) > 1e-3) {
      c.angular_velocity = std::clamp(err / dt, -w.config.max_angular_speed, w.config.max_angular_speed);
      return c;
    }
    if (blocked(w, heading - pose.theta, dist)) {
      blocked_for_ += dt;
      if (blocked_for_ >= cfg_.timeout - 1e-9) fail(w, "blocked");
      return c;
    }
    blocked_for_ = 0.0;
    const double v = std::min(cfg_.speed, dist / dt);
    c.base_velocity = (to / dist * v).rotated(-pose.theta);
    return c;
  }

 private:
  void advance(const World& w) {
    events_.push_back(fmt::format("t={:.2f} waypoint_reached index={}", w.clock, index_));
    ++index_;
    checked_ = false;
    blocked_for_ = 0.0;
    if (index_ >= waypoints_.size()) state_ = State::done;
  }

  void fail(const World& w, const char* reason) {
    state_ = State::failed;
    events_.push_back(fmt::format("t={:.2f} navigation_failed index={} reason={}", w.clock, index_, reason));
  }

  bool blocked(const World& w, double rel_heading, double remaining) const {
    const Scan s = lidar_scan(w);
    const double limit = std::min(cfg_.block_distance, remaining + w.config.robot_radius);
    for (std::size_t i = 0; i < s.angles.size(); ++i)
      if (std::abs(wrap_angle(s.angles[i] - rel_heading)) <= cfg_.block_sector && s.ranges[i] < limit) return true;
    return false;
  }

  std::vector<Vec2> waypoints_;
  FollowerConfig cfg_;
  std::optional<double> final_heading_;
  std::size_t index_ = 0;
  int dwelling_ = 0;
  bool checked_ = false;
  double blocked_for_ = 0.0;
  State state_ = State::running;
  std::vector<std::string> events_;
};

struct FollowResult {
  World world;
  bool success = false;
  double elapsed = 0.0;
  std::vector<Commands> commands;
  std::vector<std::string> events;
};

/// Runs a follower to completion (or `max_time`) on a copy of the world.
inline FollowResult follow_waypoints(const World& start, const std::vector<Vec2>& waypoints, double speed,
                                     double dt = 0.1, double max_time = 600.0) {
  FollowerConfig cfg;
  cfg.speed = speed;
  WaypointFollower f(waypoints, cfg);
  FollowResult r;
  r.world = start;
  while (f.state() == WaypointFollower::State::running && r.elapsed < max_time) {
    const Commands c = f.tick(r.world, dt);
    if (f.state() == WaypointFollower::State::failed) break;
    r.commands.push_back(c);
    r.world = step(r.world, dt, c);
    r.elapsed = r.world.clock - start.clock;
  }
  r.success = f.state() == WaypointFollower::State::done;
  r.events = f.events();
  return r;
}

}  // namespace homebot
