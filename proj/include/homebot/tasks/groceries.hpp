#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "homebot/semantics.hpp"
#include "homebot/tasks/common.hpp"

namespace homebot::tasks {

/// Shelves are the furniture boxes whose name starts with `shelf`.
inline std::vector<StaticBox> shelves_of(const World& w) {
  std::vector<StaticBox> out;
  for (const auto& b : w.static_boxes)
    if (b.name.starts_with("shelf")) out.push_back(b);
  return out;
}

/// Labels seen standing on each shelf, keyed by shelf name.
inline ShelfContents shelf_contents(const std::vector<StaticBox>& shelves, const ObjectCloud& seen) {
  ShelfContents out;
  for (const auto& s : shelves) {
    auto& labels = out[s.name];
    for (const auto* e : seen.all()) {
      const double z = e->centroid.z;
      if (s.box.footprint().contains(e->centroid.xy()) && z > s.box.max.z && z <= s.box.max.z + 0.4)
        labels.push_back(e->class_label);
    }
  }
  return out;
}

inline constexpr double kShelfTilt = -0.55;

inline skills::Node groceries(const World& w, const TaskConfig& cfg) {
  using namespace skills;
  const Pose2 pantry = parse_pose(w, "pantry_view");
  const Pose2 shelf_view = parse_pose(w, "shelf_view");
  const double table_h = param_number(w, "table_height");
  const auto shelves = shelves_of(w);
  if (shelves.empty()) throw ConfigError("groceries: arena has no furniture named shelf*");
  if (cfg.kb.size() == 0 && cfg.embeddings.size() == 0)
    throw ConfigError("groceries: needs a category knowledge base or word embeddings");

  auto table = std::make_shared<SceneMemory>(w);
  auto shelf_seen = std::make_shared<SceneMemory>(w);
  auto st = std::make_shared<PickState>();

  std::vector<Node> v;
  v.push_back(navigate_to("to_pantry", [pantry](TaskContext&) { return std::optional<Pose2>(pantry); }));
  v.push_back(sweep(table, {-0.35, 0.0, 0.35}, kTableTilt));
  v.push_back(find_table(table, table_h));
  v.push_back(act("choose_object", [table, st](TaskContext& ctx) {
    const auto candidates = table->objects.query_above_surface(*table->surface, table->surface_extent);
    if (candidates.empty()) {
      ctx.emit("no_objects", "");
      return Status::failure;
    }
    std::mt19937_64 rng(ctx.cfg.seed);
    const auto* e = candidates[rng() % candidates.size()];
    st->target = e->id;
    ctx.emit("object_chosen", fmt::format("object={} candidates={}", e->class_label, candidates.size()));
    return Status::success;
  }));
  v.push_back(pick(table, st, GraspFilter::any));
  v.push_back(navigate_to("to_shelves", [shelf_view](TaskContext&) { return std::optional<Pose2>(shelf_view); }));
  v.push_back(sweep(shelf_seen, {-0.5, 0.0, 0.5}, kShelfTilt));
  v.push_back(act("choose_shelf", [shelves, shelf_seen](TaskContext& ctx) {
    const auto contents = shelf_contents(shelves, shelf_seen->objects);
    const std::string label = ctx.bb.at<std::string>("load_label");
    std::string chosen;
    try {
      chosen = choose_shelf(label, contents, ctx.cfg.kb, ctx.cfg.embeddings);
    } catch (const std::invalid_argument&) {
      ctx.emit("shelf_unknown", fmt::format("object={}", label));
      return Status::failure;
    }
    const auto it = std::find_if(shelves.begin(), shelves.end(), [&](const StaticBox& s) { return s.name == chosen; });
    std::vector<Vec2> taken;
    for (const auto* e : shelf_seen->objects.all())
      if (it->box.footprint().contains(e->centroid.xy())) taken.push_back(e->centroid.xy());
    const Vec2 spot = free_spot(it->box.footprint(), taken);
    ctx.bb.set("place_xy", spot);
    ctx.bb.set("shelf", chosen);
    ctx.bb.set("place_surface_z", it->box.max.z);
    std::string summary;
    for (const auto& [name, labels] : contents) {
      summary += fmt::format("{}{}:", summary.empty() ? "" : ";", name);
      for (std::size_t i = 0; i < labels.size(); ++i) summary += (i ? "|" : "") + labels[i];
    }
    ctx.emit("shelf_chosen", fmt::format("object={} shelf={} spot={:.2f},{:.2f} contents={}", label, chosen, spot.x, spot.y, summary));
    return Status::success;
  }));
  v.push_back(place_at("place_on_shelf"));
  v.push_back(act("judge_placement", [shelves](TaskContext& ctx) {
    const SimObject* o = ctx.world.object(ctx.bb.at<int>("placed_id"));
    const std::string shelf = ctx.bb.at<std::string>("shelf");
    bool on = false;
    for (const auto& s : shelves)
      if (s.name == shelf)
        on = s.box.footprint().contains(o->aabb.center().xy()) && std::abs(o->aabb.min.z - s.box.max.z) < 1e-6;
    ctx.emit(on ? "object_placed" : "object_misplaced", fmt::format("object={} shelf={}", o->class_label, shelf));
    return on ? Status::success : Status::failure;
  }));
  v.push_back(set_arm("raise_empty", [](TaskContext& ctx) { return lift_only(ctx.world.robot.arm[kLift] + 0.1); }));
  v.push_back(move_base("leave_shelf", [](TaskContext&) { return Vec2{-0.3, 0.0}; }));
  return seq("groceries", std::move(v));
}

}  // namespace homebot::tasks
