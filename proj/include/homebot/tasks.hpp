#pragma once

// Task scripts as behavior trees over the skill leaves, and the timed run loop.

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "homebot/executive.hpp"
#include "homebot/mapless_nav.hpp"
#include "homebot/tasks/breakfast.hpp"
#include "homebot/tasks/clean_table.hpp"
#include "homebot/tasks/garbage.hpp"
#include "homebot/tasks/drinks.hpp"
#include "homebot/tasks/groceries.hpp"
#include "homebot/tasks/luggage.hpp"
#include "homebot/tasks/restaurant.hpp"

namespace homebot {

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"garbage", "groceries", "drinks", "luggage", "restaurant", "clean_table", "breakfast"};
  return names;
}

inline double default_limit(std::string_view task) { return task == "garbage" || task == "groceries" ? 300.0 : 600.0; }

/// Validates the arena for `task` (throwing ConfigError) and builds its tree.
inline skills::Node build_task(std::string_view task, const World& w, const TaskConfig& cfg) {
  if (task == "garbage") return tasks::garbage(w, cfg);
  if (task == "groceries") return tasks::groceries(w, cfg);
  if (task == "luggage") return tasks::luggage(w, cfg);
  if (task == "drinks") return tasks::drinks(w, cfg);
  if (task == "restaurant") return tasks::restaurant(w, cfg);
  if (task == "clean_table") return tasks::clean_table(w, cfg);
  if (task == "breakfast") return tasks::breakfast(w, cfg);
  std::string valid;
  for (const auto& n : task_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError(fmt::format("unknown task '{}' (valid tasks: {})", task, valid));
}

/// Reads the word embeddings and category knowledge base into `cfg`.
inline void load_semantics(TaskConfig& cfg, const std::string& embeddings_path, const std::string& kb_path) {
  std::ifstream ef(embeddings_path);
  if (!ef) throw ConfigError(fmt::format("cannot open embeddings file '{}'", embeddings_path));
  std::ifstream kf(kb_path);
  if (!kf) throw ConfigError(fmt::format("cannot open knowledge base '{}'", kb_path));
  cfg.embeddings = EmbeddingTable::parse(ef);
  cfg.kb = CategoryKB::parse(kf);
}

struct TaskResult {
  TaskReport report;
  World world;
  /// World-aligned occupancy built from the scans taken during the run.
  Costmap explored;
};

inline Costmap empty_explored_map(const World& w, double resolution = 0.05) {
  const Vec2 s = w.bounds.size();
  return Costmap::make(Pose2{}, w.bounds.min, resolution, std::max(1, int(std::ceil(s.x / resolution - 1e-9))),
                       std::max(1, int(std::ceil(s.y / resolution - 1e-9))));
}

inline void fuse_scan(Costmap& m, const Scan& scan) {
  std::vector<Vec2> ends;
  std::vector<std::uint8_t> hits;
  ends.reserve(scan.ranges.size());
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    ends.push_back(m.frame.inverse_transform(scan.endpoint_world(i)));
    hits.push_back(scan.ranges[i] < scan.max_range);
  }
  fuse_into(m, m.frame.inverse_transform(scan.origin.position()), ends, hits, {});
}

/// Ticks the task tree once per simulation step until it settles or the time limit
/// passes. Sensor updates for the explored map happen every `map_every` ticks.
inline TaskResult execute_task(std::string_view task, World world, const TaskConfig& cfg, int map_every = 10) {
  if (!(cfg.dt > 0.0)) throw ConfigError("dt must be positive");
  const double limit = cfg.limit.value_or(default_limit(task));
  if (!(limit > 0.0)) throw ConfigError("time limit must be positive");
  world.rng_seed = cfg.seed;
  auto root = build_task(task, world, cfg);

  TaskContext ctx(std::move(world), cfg);
  TaskResult out;
  out.explored = empty_explored_map(ctx.world);
  const double t0 = ctx.clock();
  ctx.emit("task_started", fmt::format("task={} seed={} limit={}", task, cfg.seed, limit));
  bt::Status status = bt::Status::running;
  bool timed_out = false;
  for (long tick = 0;; ++tick) {
    if (tick % map_every == 0) fuse_scan(out.explored, lidar_scan(ctx.world));
    ctx.cmd = {};
    status = root->tick(ctx);
    if (status != bt::Status::running) break;
    if (ctx.clock() - t0 >= limit - 1e-9) {
      timed_out = true;
      break;
    }
    ctx.world = step(ctx.world, cfg.dt, ctx.cmd);
    for (const auto& e : ctx.world.events) ctx.emit("sim_" + e.kind, e.detail);
  }
  const double elapsed = ctx.clock() - t0;
  const char* closing = timed_out ? "task_timeout" : status == bt::Status::success ? "task_succeeded" : "task_failed";
  ctx.emit(closing, fmt::format("task={} elapsed={}", task, elapsed));

  out.report.task = std::string(task);
  out.report.success = !timed_out && status == bt::Status::success;
  out.report.elapsed = elapsed;
  out.report.limit = limit;
  out.report.events = std::move(ctx.trace);
  out.report.score = score_task(out.report, cfg.rubric);
  out.world = std::move(ctx.world);
  return out;
}

inline TaskReport run_task(std::string_view task, const World& world, const TaskConfig& cfg) {
  return execute_task(task, world, cfg).report;
}

/// Reads and parses an arena file; I/O and syntax problems both surface as ConfigError.
inline World load_arena_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open arena '{}'", path));
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return load_arena(text.str());
  } catch (const ArenaError& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

inline void write_trace(const TaskReport& r, std::ostream& os) {
  for (const auto& e : r.events) os << e << '\n';
}

/// Machine-readable `key=value` block, one pair per line.
inline void write_summary(const TaskReport& r, std::uint64_t seed, std::ostream& os) {
  os << fmt::format("task={}\nsuccess={}\nscore={}\nelapsed={:.2f}\nlimit={}\nseed={}\nevents={}\n", r.task, r.success ? 1 : 0,
                    r.score, r.elapsed, r.limit, seed, r.events.size());
}

}  // namespace homebot
