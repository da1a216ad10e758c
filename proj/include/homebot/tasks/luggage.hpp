#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "homebot/person_tracking.hpp"
#include "homebot/tasks/common.hpp"

namespace homebot::tasks {

struct FollowParams {
  double distance = 1.0;
  double gain = 1.5;
  double max_speed = 0.8;
  double reid_threshold = 0.6;
  /// Seconds of failed color re-identification before asking the operator to wave.
  double wave_after = 3.0;
  double deliver_still_s = 3.0;
  double deliver_still_m = 0.15;
  double deliver_range = 1.2;
};

struct FollowState {
  std::string operator_id;
  std::string person;
  PersonTrack track;
  double lost_since = 0.0;
  bool wave_requested = false;
  std::map<std::string, std::vector<ArmFrame>> arms;
  std::deque<std::pair<double, Vec2>> history;
};

inline std::vector<Vec2> leg_candidates_world(const World& w) {
  const Scan scan = lidar_scan(w);
  std::vector<Vec2> out;
  for (const auto& c : detect_legs(scan)) out.push_back(scan.origin.transform(c.center));
  return out;
}

/// Track position for a person seen at `torso`: the nearest leg pair within the gate,
/// else the torso itself.
inline Vec2 snap_to_legs(const std::vector<Vec2>& legs, const Vec2& torso, double gate) {
  Vec2 best = torso;
  double best_d = gate;
  for (const auto& l : legs)
    if (double d = (l - torso).norm(); d <= best_d) {
      best_d = d;
      best = l;
    }
  return best;
}

inline void restart_track(FollowState& st, const Skeleton& s, const std::vector<Vec2>& legs, double t) {
  st.person = s.person_id;
  st.track.position = snap_to_legs(legs, s.torso.xy(), TrackConfig{}.gate);
  st.track.state = TrackState::tracking;
  st.track.misses = 0;
  st.track.last_update = t;
  st.track.target_histogram = make_histogram(s.torso_samples);
  st.wave_requested = false;
  st.arms.clear();
  st.history.clear();
}

/// Registers the person in front of the head camera as the operator.
inline skills::Node register_operator(std::shared_ptr<FollowState> st) {
  return skills::act("register_operator", [st](TaskContext& ctx) {
    const auto skels = skeleton_detect(ctx.world);
    if (skels.empty()) return bt::Status::running;
    const double cx = ctx.world.config.image_width / 2.0;
    const Skeleton* best = &skels.front();
    for (const auto& s : skels)
      if (std::abs(s.torso_px.x - cx) < std::abs(best->torso_px.x - cx)) best = &s;
    restart_track(*st, *best, leg_candidates_world(ctx.world), ctx.clock());
    st->operator_id = st->person;
    ctx.emit("operator_registered", fmt::format("person={} at={:.2f},{:.2f}", st->person, st->track.position.x, st->track.position.y));
    return bt::Status::success;
  });
}

/// Follows the tracked operator on leg detections until they stand still near the robot.
/// A lost track is re-acquired by torso color, else by asking the operator to wave.
inline skills::Node follow_operator(std::shared_ptr<FollowState> st, FollowParams fp = {}) {
  return skills::act("follow_operator", [st, fp](TaskContext& ctx) {
    const double t = ctx.clock();
    const Pose2& base = ctx.world.robot.base;
    const auto legs = leg_candidates_world(ctx.world);
    if (st->track.state == TrackState::tracking) {
      st->track = associate_track(st->track, legs, t);
      if (st->track.state == TrackState::lost) {
        st->lost_since = t;
        st->history.clear();
        ctx.emit("target_lost", fmt::format("person={} at={:.2f},{:.2f}", st->person, st->track.position.x, st->track.position.y));
      }
    } else {
      const auto skels = skeleton_detect(ctx.world);
      if (auto id = reidentify(st->track.target_histogram, skels, fp.reid_threshold, base.position())) {
        const auto it = std::find_if(skels.begin(), skels.end(), [&](const Skeleton& s) { return s.person_id == *id; });
        const auto hist = st->track.target_histogram;
        restart_track(*st, *it, legs, t);
        st->track.target_histogram = hist;
        ctx.emit("reacquired", fmt::format("method=color person={} lost_for={:.2f}", *id, t - st->lost_since));
      } else {
        std::map<std::string, std::vector<ArmFrame>> arms;
        for (const auto& s : skels) {
          auto& h = arms[s.person_id];
          if (auto old = st->arms.find(s.person_id); old != st->arms.end()) h = std::move(old->second);
          h.push_back(arm_frame(s));
        }
        st->arms = std::move(arms);
        if (!st->wave_requested && t - st->lost_since >= fp.wave_after - 1e-9) {
          st->wave_requested = true;
          ctx.emit("wave_requested", fmt::format("person={}", st->person));
        }
        if (st->wave_requested) {
          const Skeleton* pick = nullptr;
          for (const auto& s : skels) {
            const auto& h = st->arms.at(s.person_id);
            if (h.size() < std::size_t(WaveConfig{}.window) || !detect_wave(h, ctx.dt())) continue;
            if (!pick || (s.torso.xy() - base.position()).norm() < (pick->torso.xy() - base.position()).norm()) pick = &s;
          }
          if (pick) {
            const Skeleton s = *pick;
            restart_track(*st, s, legs, t);
            ctx.emit("reacquired", fmt::format("method=wave person={} lost_for={:.2f} from={:.2f},{:.2f}", s.person_id, t - st->lost_since, base.x, base.y));
          }
        }
      }
    }

    const Vec2 to = st->track.position - base.position();
    const double bearing = std::atan2(to.y, to.x);
    ctx.cmd.angular_velocity = std::clamp(2.0 * wrap_angle(bearing - base.theta), -1.5, 1.5);
    if (st->track.state != TrackState::tracking) return bt::Status::running;

    const double dist = to.norm();
    const double speed = std::clamp(fp.gain * (dist - fp.distance), 0.0, fp.max_speed);
    if (dist > 1e-9) ctx.cmd.base_velocity = (to / dist * speed).rotated(-base.theta);

    st->history.emplace_back(t, st->track.position);
    while (st->history.size() > 1 && t - st->history[1].first >= fp.deliver_still_s - 1e-9) st->history.pop_front();
    if (t - st->history.front().first >= fp.deliver_still_s - 1e-9 && dist <= fp.deliver_range) {
      double moved = 0.0;
      for (const auto& [_, p] : st->history) moved = std::max(moved, (p - st->track.position).norm());
      if (moved < fp.deliver_still_m) {
        ctx.cmd = {};
        ctx.emit("operator_stopped", fmt::format("person={} distance={:.2f}", st->person, dist));
        return bt::Status::success;
      }
    }
    return bt::Status::running;
  });
}

inline skills::Node luggage(const World& w, const TaskConfig&) {
  using namespace skills;
  const SimObject* bag = w.object_by_class("bag");
  if (!bag) throw ConfigError("luggage: arena needs an object labelled 'bag'");
  if (!bag->graspable) throw ConfigError("luggage: the bag must be graspable");
  if (w.people.empty()) throw ConfigError("luggage: arena has no people");
  const int bag_id = bag->id;
  auto st = std::make_shared<FollowState>();

  std::vector<Node> v;
  v.push_back(set_arm("carry_posture", [](TaskContext&) { return hand_down(kMaxLift); }));
  v.push_back(look("face_operator", 0.0, 0.0));
  v.push_back(register_operator(st));
  v.push_back(act("take_bag", [bag_id](TaskContext& ctx) {
    ctx.world = handover(ctx.world, bag_id);
    ctx.emit("bag_received", fmt::format("id={}", bag_id));
    return Status::success;
  }));
  v.push_back(follow_operator(st));
  v.push_back(set_arm("lower_bag", [](TaskContext&) { return hand_down(0.2); }));
  v.push_back(release("hand_over"));
  v.push_back(act("judge_delivery", [st](TaskContext& ctx) {
    const SimPerson* p = ctx.world.person(st->operator_id);
    const double d = (p->position_at(ctx.clock()) - ctx.world.robot.base.position()).norm();
    const bool ok = st->person == st->operator_id && d <= FollowParams{}.deliver_range + 0.3;
    ctx.emit(ok ? "luggage_delivered" : "luggage_misdelivered", fmt::format("person={} distance={:.2f}", st->person, d));
    return ok ? Status::success : Status::failure;
  }));
  return seq("luggage", std::move(v));
}

}  // namespace homebot::tasks
