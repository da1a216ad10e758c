#pragma once

// Semantic object memory: per-class point estimates indexed by a KD-tree, with
// region/class subscriptions and the RANSAC edge detector used to find tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "homebot/geometry.hpp"

namespace homebot {

struct ObjectEstimate {
  int id = 0;
  std::string class_label;
  Vec3 centroid;
  Box3 aabb;
  int observation_count = 1;
  double last_seen = 0.0;
};

/// Static 3-d tree over (point, id) entries. Queries order results by (squared distance, id).
class KdTree {
 public:
  struct Entry {
    Vec3 point;
    int id = 0;
  };

  KdTree() = default;
  explicit KdTree(std::vector<Entry> entries) : entries_(std::move(entries)) {
    nodes_.reserve(entries_.size());
    root_ = build(0, entries_.size(), 0);
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::span<const Entry> entries() const { return entries_; }

  std::vector<Entry> nearest(const Vec3& q, std::size_t k) const {
    std::vector<std::pair<double, int>> heap;  // max-heap on (d2, id) over entry indices
    if (k == 0) return {};
    search(root_, q, k, heap);
    std::sort_heap(heap.begin(), heap.end(), [this](const auto& a, const auto& b) { return less(a, b); });
    std::vector<Entry> out;
    for (const auto& [d2, idx] : heap) out.push_back(entries_[idx]);
    return out;
  }

  std::vector<Entry> within(const Vec3& q, double radius) const {
    std::vector<std::pair<double, int>> hits;
    collect(root_, q, radius * radius, hits);
    std::sort(hits.begin(), hits.end(), [this](const auto& a, const auto& b) { return less(a, b); });
    std::vector<Entry> out;
    for (const auto& [d2, idx] : hits) out.push_back(entries_[idx]);
    return out;
  }

 private:
  struct Node {
    int entry = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  bool less(const std::pair<double, int>& a, const std::pair<double, int>& b) const {
    if (a.first != b.first) return a.first < b.first;
    return entries_[a.second].id < entries_[b.second].id;
  }

  int build(std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(entries_.begin() + lo, entries_.begin() + mid, entries_.begin() + hi,
                     [axis](const Entry& a, const Entry& b) { return a.point[axis] < b.point[axis]; });
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back({static_cast<int>(mid), axis, -1, -1});
    const int l = build(lo, mid, depth + 1);
    const int r = build(mid + 1, hi, depth + 1);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  void search(int ni, const Vec3& q, std::size_t k, std::vector<std::pair<double, int>>& heap) const {
    if (ni < 0) return;
    const Node& n = nodes_[ni];
    const Entry& e = entries_[n.entry];
    const std::pair<double, int> cand{(e.point - q).squared_norm(), n.entry};
    auto cmp = [this](const auto& a, const auto& b) { return less(a, b); };
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), cmp);
    } else if (less(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), cmp);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), cmp);
    }
    const double diff = q[n.axis] - e.point[n.axis];
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, q, k, heap);
    // equal distance may still win on id, so only strictly farther planes are pruned
    if (heap.size() < k || diff * diff <= heap.front().first) search(far, q, k, heap);
  }

  void collect(int ni, const Vec3& q, double r2, std::vector<std::pair<double, int>>& out) const {
    if (ni < 0) return;
    const Node& n = nodes_[ni];
    const Entry& e = entries_[n.entry];
    const double d2 = (e.point - q).squared_norm();
    if (d2 <= r2) out.emplace_back(d2, n.entry);
    const double diff = q[n.axis] - e.point[n.axis];
    collect(diff < 0 ? n.left : n.right, q, r2, out);
    if (diff * diff <= r2) collect(diff < 0 ? n.right : n.left, q, r2, out);
  }

  std::vector<Entry> entries_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct SurfaceModel {
  enum class Kind { horizontal_edge, plane };
  Kind kind = Kind::horizontal_edge;
  double height = 0.0;
  std::vector<std::size_t> inliers;
  /// Extent of the inliers along the profile axis.
  double support_min = 0.0;
  double support_max = 0.0;
};

class ObjectCloud {
 public:
  struct Subscription {
    std::string name;
    std::optional<std::string> class_label;
    std::optional<Box3> region;
    std::function<void(std::span<const int>)> callback;
  };

  struct Notification {
    std::string subscriber;
    std::vector<int> ids;
  };

  explicit ObjectCloud(double association_gate = 0.1) : gate_(association_gate) {
    if (!(gate_ > 0.0)) throw std::invalid_argument("association gate must be positive");
  }

  double association_gate() const { return gate_; }
  std::size_t size() const { return estimates_.size(); }
  bool empty() const { return estimates_.empty(); }

  /// Fuses an observation into the nearest same-class estimate inside the gate, or
  /// starts a new estimate. Returns the estimate id.
  int upsert(std::string_view class_label, const Vec3& center, const Vec3& size, double t) {
    const Box3 box = Box3::from_center(center, size);
    int target = -1;
    for (const auto& e : tree_.within(center, gate_)) {
      if (estimates_.at(e.id).class_label == class_label) {
        target = e.id;
        break;
      }
    }
    if (target < 0) {
      target = next_id_++;
      estimates_[target] = {target, std::string(class_label), center, box, 1, t};
    } else {
      ObjectEstimate& est = estimates_.at(target);
      const double n = est.observation_count;
      est.centroid = (est.centroid * n + center) / (n + 1.0);
      est.aabb = est.aabb.merged(box);
      est.observation_count += 1;
      est.last_seen = std::max(est.last_seen, t);
    }
    changed_.insert(target);
    rebuild();
    return target;
  }

  bool erase(int id) {
    if (!estimates_.erase(id)) return false;
    changed_.erase(id);
    rebuild();
    return true;
  }

  const ObjectEstimate* get(int id) const {
    auto it = estimates_.find(id);
    return it == estimates_.end() ? nullptr : &it->second;
  }

  std::vector<const ObjectEstimate*> all() const {
    std::vector<const ObjectEstimate*> out;
    for (const auto& [id, e] : estimates_) out.push_back(&e);
    return out;
  }

  std::vector<const ObjectEstimate*> by_class(std::string_view label) const {
    std::vector<const ObjectEstimate*> out;
    for (const auto& [id, e] : estimates_)
      if (e.class_label == label) out.push_back(&e);
    return out;
  }

  std::vector<const ObjectEstimate*> query_nearest(const Vec3& p, std::size_t k) const {
    if (k < 1) throw std::invalid_argument("query_nearest: k must be at least 1");
    if (estimates_.empty()) throw std::logic_error("query_nearest: cloud is empty");
    std::vector<const ObjectEstimate*> out;
    for (const auto& e : tree_.nearest(p, k)) out.push_back(&estimates_.at(e.id));
    return out;
  }

  /// Estimates resting on a horizontal surface: centroid z in (h, h + 0.5] and inside the xy extent.
  std::vector<const ObjectEstimate*> query_above_surface(const SurfaceModel& surface, const Box2& extent) const {
    std::vector<const ObjectEstimate*> out;
    for (const auto& [id, e] : estimates_) {
      const double z = e.centroid.z;
      if (z > surface.height && z <= surface.height + 0.5 && extent.contains(e.centroid.xy())) out.push_back(&e);
    }
    return out;
  }

  void subscribe(Subscription s) { subscribers_.push_back(std::move(s)); }

  /// Notifies each matching subscriber once for the estimates changed since the last
  /// dispatch, in registration order, then clears the batch.
  std::vector<Notification> dispatch_events() {
    std::vector<Notification> log;
    for (const auto& s : subscribers_) {
      std::vector<int> ids;
      for (int id : changed_) {
        const ObjectEstimate& e = estimates_.at(id);
        if (s.class_label && *s.class_label != e.class_label) continue;
        if (s.region && !s.region->contains(e.centroid)) continue;
        ids.push_back(id);
      }
      if (ids.empty()) continue;
      if (s.callback) s.callback(ids);
      log.push_back({s.name, std::move(ids)});
    }
    changed_.clear();
    return log;
  }

  /// Tree entries and estimates are in bijection with matching positions.
  bool consistent() const {
    if (tree_.size() != estimates_.size()) return false;
    std::set<int> seen;
    for (const auto& e : tree_.entries()) {
      auto it = estimates_.find(e.id);
      if (it == estimates_.end() || !(it->second.centroid == e.point) || !seen.insert(e.id).second) return false;
    }
    return true;
  }

  void dump(std::ostream& os) const {
    for (const auto& [id, e] : estimates_)
      os << fmt::format("object {} {} {:.4f} {:.4f} {:.4f} {}\n", id, e.class_label, e.centroid.x, e.centroid.y,
                        e.centroid.z, e.observation_count);
  }

 private:
  void rebuild() {
    std::vector<KdTree::Entry> entries;
    entries.reserve(estimates_.size());
    for (const auto& [id, e] : estimates_) entries.push_back({e.centroid, id});
    tree_ = KdTree(std::move(entries));
  }

  double gate_;
  std::map<int, ObjectEstimate> estimates_;
  KdTree tree_;
  std::set<int> changed_;
  std::vector<Subscription> subscribers_;
  int next_id_ = 0;
};

struct RansacParams {
  int iterations = 100;
  double inlier_tol = 0.01;
  std::size_t min_inliers = 10;
  double height_tol = 0.05;
  std::uint64_t seed = 0;
};

namespace detail {

struct LineScore {
  std::vector<std::size_t> inliers;
  double residual = 0.0;
};

inline LineScore score_height(std::span<const Vec2> pts, double h, double tol) {
  LineScore s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double r = std::abs(pts[i].y - h);
    if (r <= tol) {
      s.inliers.push_back(i);
      s.residual += r;
    }
  }
  return s;
}

}  // namespace detail

/// Fits a horizontal line to (s, z) profile samples. Single-sample hypotheses; the
/// winner has the most inliers (ties: smallest residual sum) and is refined by least
/// squares. Returns nullopt unless the refined height is within height_tol of target.
inline std::optional<SurfaceModel> ransac_edge(std::span<const Vec2> samples, double target_height,
                                               const RansacParams& params) {
  if (params.iterations < 1) throw std::invalid_argument("ransac_edge: iterations must be at least 1");
  if (samples.empty()) return std::nullopt;
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  std::optional<detail::LineScore> best;
  for (int it = 0; it < params.iterations; ++it) {
    auto s = detail::score_height(samples, samples[pick(rng)].y, params.inlier_tol);
    if (!best || s.inliers.size() > best->inliers.size() ||
        (s.inliers.size() == best->inliers.size() && s.residual < best->residual))
      best = std::move(s);
  }

  std::vector<std::size_t> inliers = best->inliers;
  double h = 0.0;
  for (int round = 0; round < 10; ++round) {
    h = 0.0;
    for (auto i : inliers) h += samples[i].y;
    h /= static_cast<double>(inliers.size());
    auto next = detail::score_height(samples, h, params.inlier_tol).inliers;
    if (next == inliers || next.empty()) break;
    inliers = std::move(next);
  }

  if (inliers.size() < params.min_inliers || std::abs(h - target_height) > params.height_tol) return std::nullopt;
  SurfaceModel m;
  m.height = h;
  m.support_min = std::numeric_limits<double>::infinity();
  m.support_max = -std::numeric_limits<double>::infinity();
  for (auto i : inliers) {
    m.support_min = std::min(m.support_min, samples[i].x);
    m.support_max = std::max(m.support_max, samples[i].x);
  }
  m.inliers = std::move(inliers);
  return m;
}

/// Tight box around voxel cells given by their centers.
inline Box3 fit_bbox(std::span<const Vec3> centers, double resolution) {
  if (centers.empty()) throw std::invalid_argument("fit_bbox: no voxels");
  constexpr double inf = std::numeric_limits<double>::infinity();
  Box3 b{{inf, inf, inf}, {-inf, -inf, -inf}};
  for (const auto& c : centers) {
    b.min = {std::min(b.min.x, c.x), std::min(b.min.y, c.y), std::min(b.min.z, c.z)};
    b.max = {std::max(b.max.x, c.x), std::max(b.max.y, c.y), std::max(b.max.z, c.z)};
  }
  return b.inflated(resolution / 2.0);
}

}  // namespace homebot
