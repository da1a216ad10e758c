#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "homebot/semantics.hpp"
#include "homebot/tasks/common.hpp"

namespace homebot::tasks {

struct Guest {
  std::string person;
  Vec2 position;
  bool has_drink = false;
};

/// Reads a guest's utterances in order; each ask consumes the next line.
struct Dialogue {
  std::map<std::string, std::size_t> cursor;

  std::optional<std::string> next(const World& w, const std::string& speaker) {
    std::size_t& c = cursor[speaker];
    std::size_t seen = 0;
    for (const auto& line : w.dialogue) {
      if (line.speaker != speaker) continue;
      if (seen++ == c) {
        ++c;
        return line.text;
      }
    }
    return std::nullopt;
  }
};

inline std::string last_word(std::string_view text) {
  const auto end = text.find_last_not_of(" \t.!?,");
  if (end == std::string_view::npos) return {};
  const auto start = text.find_last_of(" \t", end);
  return std::string(text.substr(start == std::string_view::npos ? 0 : start + 1, end - (start == std::string_view::npos ? 0 : start + 1) + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto tok = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!tok.empty()) out.emplace_back(tok);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Looks around with the head and records everyone seen, keyed by skeleton identity.
inline skills::Node find_guests(std::shared_ptr<std::vector<Guest>> guests, std::vector<double> pans) {
  using namespace skills;
  std::vector<Node> v;
  for (double p : pans) {
    v.push_back(look(fmt::format("guests_look_{:.2f}", p), p, 0.0));
    v.push_back(act("see_guests", [guests](TaskContext& ctx) {
      for (const auto& s : skeleton_detect(ctx.world)) {
        if (std::any_of(guests->begin(), guests->end(), [&](const Guest& g) { return g.person == s.person_id; })) continue;
        guests->push_back({s.person_id, s.torso.xy(), s.has_drink});
        ctx.emit("guest_seen", fmt::format("person={} at={:.2f},{:.2f} has_drink={}", s.person_id, s.torso.x, s.torso.y, s.has_drink));
      }
      return Status::success;
    }));
  }
  v.push_back(look("guests_look_home", 0.0, 0.0));
  v.push_back(act("order_guests", [guests](TaskContext& ctx) {
    std::erase_if(*guests, [](const Guest& g) { return g.has_drink; });
    const Vec2 me = ctx.world.robot.base.position();
    std::stable_sort(guests->begin(), guests->end(),
                     [&](const Guest& a, const Guest& b) { return (a.position - me).norm() < (b.position - me).norm(); });
    ctx.emit("guests_without_drink", fmt::format("count={}", guests->size()));
    return Status::success;
  }));
  return seq("find_guests", std::move(v));
}

/// Asks `speaker` for their order until the heard word maps onto the menu.
inline skills::Node take_order(std::string name, std::shared_ptr<Dialogue> dialogue, std::vector<std::string> menu,
                               std::function<std::string(TaskContext&)> speaker, std::string order_key) {
  return skills::act(name, [=](TaskContext& ctx) {
    const std::string who = speaker(ctx);
    while (auto text = dialogue->next(ctx.world, who)) {
      const std::string heard = last_word(*text);
      if (auto order = rhyme_correct(heard, menu)) {
        ctx.bb.set(order_key, *order);
        ctx.emit("order_taken", fmt::format("person={} heard={} order={}", who, heard, *order));
        return bt::Status::success;
      }
      ctx.emit("reask", fmt::format("person={} heard={}", who, heard));
    }
    ctx.emit("order_not_understood", fmt::format("person={}", who));
    return bt::Status::failure;
  });
}

inline skills::Node drinks(const World& w, const TaskConfig&) {
  using namespace skills;
  const Pose2 bar_view = parse_pose(w, "bar_view");
  const Pose2 guests_view = parse_pose(w, "guests_view");
  const auto menu_param = w.param("menu");
  if (!menu_param) throw ConfigError("drinks: arena needs param menu a,b,c");
  const auto menu = split_list(*menu_param);
  if (menu.empty()) throw ConfigError("drinks: menu is empty");
  if (w.people.empty()) throw ConfigError("drinks: arena has no people");

  auto bar = std::make_shared<SceneMemory>(w);
  auto guests = std::make_shared<std::vector<Guest>>();
  auto dialogue = std::make_shared<Dialogue>();

  std::vector<Node> v;
  v.push_back(navigate_to("to_bar_view", [bar_view](TaskContext&) { return std::optional<Pose2>(bar_view); }));
  v.push_back(sweep(bar, {-0.4, 0.0, 0.4}, -0.45));
  v.push_back(act("stock", [bar](TaskContext& ctx) {
    std::string items;
    for (const auto* e : bar->objects.all()) items += (items.empty() ? "" : ",") + e->class_label;
    ctx.emit("bar_stock", fmt::format("items={}", items));
    return Status::success;
  }));
  v.push_back(navigate_to("to_guests_view", [guests_view](TaskContext&) { return std::optional<Pose2>(guests_view); }));
  v.push_back(find_guests(guests, {-0.7, 0.0, 0.7}));

  for (std::size_t k = 0; k < w.people.size(); ++k) {
    auto guest = [guests, k](TaskContext&) { return (*guests)[k]; };
    auto order_key = fmt::format("order_{}", k);
    auto in_stock = [bar, order_key](TaskContext& ctx) -> const ObjectEstimate* {
      const auto found = bar->objects.by_class(ctx.bb.at<std::string>(order_key));
      return found.empty() ? nullptr : found.front();
    };

    std::vector<Node> unavailable;
    unavailable.push_back(check("not_in_stock", [in_stock](TaskContext& ctx) { return in_stock(ctx) == nullptr; }));
    unavailable.push_back(emit("order_unavailable", [guest, order_key](TaskContext& ctx) {
      return fmt::format("person={} order={}", guest(ctx).person, ctx.bb.at<std::string>(order_key));
    }));

    std::vector<Node> fetch;
    fetch.push_back(pick_from_above(fmt::format("fetch_{}", k), [order_key](const TaskContext& ctx) { return ctx.bb.at<std::string>(order_key); }, [in_stock](TaskContext& ctx) -> std::optional<Vec3> {
      const auto* e = in_stock(ctx);
      if (!e) return std::nullopt;
      return Vec3{e->centroid.x, e->centroid.y, e->aabb.max.z};
    }));
    fetch.push_back(navigate_to(fmt::format("deliver_{}", k), [guest](TaskContext& ctx) {
      return approach_pose(planning_world(ctx.world), guest(ctx).position, 0.8, ctx.world.robot.base.position());
    }));
    fetch.push_back(act("remember_drink", [](TaskContext& ctx) {
      if (!ctx.world.robot.held_object) return Status::failure;
      ctx.bb.set("drink_id", *ctx.world.robot.held_object);
      return Status::success;
    }));
    fetch.push_back(set_arm("offer", [](TaskContext& ctx) { return lift_only(lift_for_hand_down(ctx.world.arm, 0.9)); }));
    fetch.push_back(release("hand_drink"));
    fetch.push_back(act("judge_drink", [guest, order_key](TaskContext& ctx) {
      const Guest g = guest(ctx);
      const SimObject* o = ctx.world.object(ctx.bb.at<int>("drink_id"));
      const SimPerson* p = ctx.world.person(g.person);
      const double d = (p->position_at(ctx.clock()) - ctx.world.robot.base.position()).norm();
      const bool ok = o->class_label == ctx.bb.at<std::string>(order_key) && d <= 1.2;
      ctx.emit(ok ? "drink_delivered" : "drink_misdelivered", fmt::format("person={} drink={}", g.person, o->class_label));
      return Status::success;
    }));

    std::vector<Node> after_order;
    after_order.push_back(seq("unavailable", std::move(unavailable)));
    after_order.push_back(seq("fetch", std::move(fetch)));

    std::vector<Node> serve;
    serve.push_back(navigate_to(fmt::format("to_guest_{}", k), [guest](TaskContext& ctx) {
      return approach_pose(planning_world(ctx.world), guest(ctx).position, 1.0, ctx.world.robot.base.position());
    }));
    serve.push_back(take_order(fmt::format("ask_{}", k), dialogue, menu, [guest](TaskContext& ctx) { return guest(ctx).person; },
                               order_key));
    serve.push_back(sel("fulfil", std::move(after_order)));

    std::vector<Node> slot;
    slot.push_back(check("no_more_guests", [guests, k](TaskContext&) { return k >= guests->size(); }));
    slot.push_back(seq(fmt::format("serve_{}", k), std::move(serve)));
    slot.push_back(emit("guest_skipped", [guest](TaskContext& ctx) { return fmt::format("person={}", guest(ctx).person); }));
    v.push_back(sel(fmt::format("guest_{}", k), std::move(slot)));
  }
  return seq("drinks", std::move(v));
}

}  // namespace homebot::tasks
