#pragma once

// Operator tracking cues: LIDAR leg clusters, gated track association, torso color
// histograms for re-identification and wrist-velocity wave detection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "homebot/geometry.hpp"
#include "homebot/sim_world.hpp"

namespace homebot {

struct LegCandidate {
  /// Robot frame.
  Vec2 center;
  int point_count = 0;
  double width = 0.0;
};

struct LegDetectorConfig {
  double break_distance = 0.1;
  double min_width = 0.05;
  double max_width = 0.25;
  int min_points = 3;
  double pair_distance = 0.45;
  /// Shift from the visible arc's mean point back to the leg axis, along the bearing.
  double center_offset = 0.05;
};

namespace detail {

inline LegCandidate leg_from_cluster(std::span<const Vec2> pts, double center_offset) {
  Vec2 mean;
  for (const auto& p : pts) mean = mean + p;
  mean = mean / double(pts.size());
  const double r = mean.norm();
  const Vec2 center = r > 0.0 ? mean * ((r + center_offset) / r) : mean;
  return {center, int(pts.size()), (pts.back() - pts.front()).norm()};
}

}  // namespace detail

/// Single-leg clusters split at range discontinuities and max-range gaps, then paired
/// into person candidates at the midpoint. Unpaired legs are reported on their own.
inline std::vector<LegCandidate> detect_legs(const Scan& scan, const LegDetectorConfig& cfg = {}) {
  std::vector<LegCandidate> legs;
  std::vector<Vec2> cluster;
  auto flush = [&] {
    if (int(cluster.size()) >= cfg.min_points) {
      const LegCandidate c = detail::leg_from_cluster(cluster, cfg.center_offset);
      if (c.width >= cfg.min_width && c.width <= cfg.max_width) legs.push_back(c);
    }
    cluster.clear();
  };
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    if (scan.ranges[i] >= scan.max_range) {
      flush();
      continue;
    }
    const Vec2 p = scan.endpoint_local(i);
    if (!cluster.empty() && (p - cluster.back()).norm() > cfg.break_distance) flush();
    cluster.push_back(p);
  }
  flush();

  std::vector<LegCandidate> out;
  std::vector<bool> used(legs.size(), false);
  for (std::size_t i = 0; i < legs.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    std::optional<std::size_t> mate;
    double best = cfg.pair_distance;
    for (std::size_t j = i + 1; j < legs.size(); ++j) {
      const double d = (legs[j].center - legs[i].center).norm();
      if (!used[j] && d <= best) {
        best = d;
        mate = j;
      }
    }
    if (!mate) {
      out.push_back(legs[i]);
      continue;
    }
    used[*mate] = true;
    const LegCandidate& a = legs[i];
    const LegCandidate& b = legs[*mate];
    out.push_back({(a.center + b.center) * 0.5, a.point_count + b.point_count, std::max(a.width, b.width)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Color histograms

/// Normalized hue x saturation histogram.
struct ColorHistogram {
  int hue_bins = 8;
  int sat_bins = 8;
  std::vector<double> bins;

  double sum() const {
    double s = 0.0;
    for (double b : bins) s += b;
    return s;
  }
};

struct Hsv {
  double h = 0.0;  // [0, 360)
  double s = 0.0;  // [0, 1]
  double v = 0.0;  // [0, 1]
};

inline Hsv to_hsv(const Rgb& c) {
  const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out{0.0, mx > 0.0 ? d / mx : 0.0, mx};
  if (d > 0.0) {
    if (mx == r) out.h = 60.0 * std::fmod((g - b) / d, 6.0);
    else if (mx == g) out.h = 60.0 * ((b - r) / d + 2.0);
    else out.h = 60.0 * ((r - g) / d + 4.0);
    if (out.h < 0.0) out.h += 360.0;
  }
  return out;
}

inline ColorHistogram make_histogram(std::span<const Rgb> samples, int hue_bins = 8, int sat_bins = 8) {
  if (samples.empty()) throw std::invalid_argument("make_histogram: no samples");
  if (hue_bins < 1 || sat_bins < 1) throw std::invalid_argument("make_histogram: bad layout");
  ColorHistogram h{hue_bins, sat_bins, std::vector<double>(std::size_t(hue_bins) * sat_bins, 0.0)};
  for (const Rgb& c : samples) {
    const Hsv v = to_hsv(c);
    const int hb = std::min(hue_bins - 1, int(v.h / 360.0 * hue_bins));
    const int sb = std::min(sat_bins - 1, int(v.s * sat_bins));
    h.bins[std::size_t(hb) * sat_bins + sb] += 1.0;
  }
  for (double& b : h.bins) b /= double(samples.size());
  return h;
}

/// Histogram intersection.
inline double color_similarity(const ColorHistogram& a, const ColorHistogram& b) {
  if (a.hue_bins != b.hue_bins || a.sat_bins != b.sat_bins || a.bins.size() != b.bins.size())
    throw std::invalid_argument("color_similarity: histogram layouts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.bins.size(); ++i) s += std::min(a.bins[i], b.bins[i]);
  return std::clamp(s, 0.0, 1.0);
}

/// Best-matching skeleton id if its torso similarity reaches `threshold`; equal scores
/// go to the person nearest `viewer`.
inline std::optional<std::string> reidentify(const ColorHistogram& target, std::span<const Skeleton> skeletons,
                                             double threshold, const Vec2& viewer) {
  std::optional<std::string> best;
  double best_score = -1.0, best_dist = std::numeric_limits<double>::infinity();
  for (const auto& s : skeletons) {
    if (s.torso_samples.empty()) continue;
    const double score = color_similarity(target, make_histogram(s.torso_samples, target.hue_bins, target.sat_bins));
    const double dist = (s.torso.xy() - viewer).norm();
    if (score > best_score || (score == best_score && dist < best_dist)) {
      best = s.person_id;
      best_score = score;
      best_dist = dist;
    }
  }
  if (best && best_score >= threshold) return best;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Track association

enum class TrackState { tracking, lost };

inline const char* to_string(TrackState s) { return s == TrackState::tracking ? "tracking" : "lost"; }

struct PersonTrack {
  TrackState state = TrackState::tracking;
  /// World frame.
  Vec2 position;
  double last_update = 0.0;
  int misses = 0;
  ColorHistogram target_histogram;
};

struct TrackConfig {
  double gate = 0.5;
  int lost_after = 3;
};

/// Nearest candidate (world frame) within the gate updates the track; otherwise a miss
/// is counted and `lost_after` consecutive misses mark it lost.
inline PersonTrack associate_track(PersonTrack track, std::span<const Vec2> candidates, double t,
                                   const TrackConfig& cfg = {}) {
  std::optional<Vec2> best;
  double best_d = cfg.gate;
  for (const Vec2& c : candidates) {
    const double d = (c - track.position).norm();
    if (d <= best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best) {
    track.position = *best;
    track.last_update = t;
    track.misses = 0;
    track.state = TrackState::tracking;
  } else if (++track.misses >= cfg.lost_after) {
    track.state = TrackState::lost;
  }
  return track;
}

inline std::string track_line(const PersonTrack& tr, double t) {
  return fmt::format("track t={:.2f} state={} {:.3f} {:.3f}", t, to_string(tr.state), tr.position.x, tr.position.y);
}

// ---------------------------------------------------------------------------
// Waving

struct ArmFrame {
  Vec3 shoulder;
  Vec3 wrist;
};

struct WaveConfig {
  int window = 5;
  double velocity_threshold = 0.5;
  int min_active = 3;
};

/// True when, over the last `window` frames, at least `min_active` frame-to-frame
/// speeds of the wrist relative to the shoulder exceed the threshold.
inline bool detect_wave(std::span<const ArmFrame> history, double frame_dt, const WaveConfig& cfg = {}) {
  if (cfg.window < 2) throw std::invalid_argument("detect_wave: window must cover at least two frames");
  if (!(frame_dt > 0.0)) throw std::invalid_argument("detect_wave: frame interval must be positive");
  if (history.size() < std::size_t(cfg.window)) throw std::invalid_argument("detect_wave: history shorter than window");
  const auto recent = history.last(std::size_t(cfg.window));
  int active = 0;
  for (std::size_t i = 1; i < recent.size(); ++i) {
    const Vec3 a = recent[i - 1].wrist - recent[i - 1].shoulder;
    const Vec3 b = recent[i].wrist - recent[i].shoulder;
    if ((b - a).norm() / frame_dt > cfg.velocity_threshold) ++active;
  }
  return active >= cfg.min_active;
}

inline ArmFrame arm_frame(const Skeleton& s) { return {s.shoulder, s.wrist}; }

}  // namespace homebot
