#pragma once

// Sparse octree of clamped log-odds occupancy, fused from depth rays.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "homebot/geometry.hpp"

namespace homebot {

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double logistic(double l) { return 1.0 / (1.0 + std::exp(-l)); }

struct OctreeConfig {
  double resolution = 0.05;
  double l_hit = logit(0.7);
  double l_miss = logit(0.4);
  double clamp_min = logit(0.12);
  double clamp_max = logit(0.97);
  bool prune = true;
};

struct VoxelKey {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
  constexpr auto operator<=>(const VoxelKey&) const = default;
};

class OccupancyOctree {
 public:
  /// Cubic tree with its minimum corner at `origin`, covering at least `extent` meters per side.
  OccupancyOctree(const Vec3& origin, double extent, OctreeConfig config = {})
      : config_(config), origin_(origin) {
    if (!(config.resolution > 0.0)) throw std::invalid_argument("octree resolution must be positive");
    while (config_.resolution * static_cast<double>(1u << depth_) < extent) {
      if (++depth_ > 20) throw std::invalid_argument("octree extent too large for resolution");
    }
    depth_ = std::max(depth_, 1);
    root_ = std::make_unique<Node>();
  }

  /// Tree sized to an arena footprint and a ceiling height.
  static OccupancyOctree for_arena(const Box2& bounds, double height, OctreeConfig config = {}) {
    const Vec2 s = bounds.size();
    return OccupancyOctree({bounds.min.x, bounds.min.y, 0.0}, std::max({s.x, s.y, height}), config);
  }

  OccupancyOctree(const OccupancyOctree& o)
      : config_(o.config_), origin_(o.origin_), depth_(o.depth_), root_(clone(*o.root_)) {}
  OccupancyOctree& operator=(const OccupancyOctree& o) {
    if (this != &o) *this = OccupancyOctree(o);
    return *this;
  }
  OccupancyOctree(OccupancyOctree&&) noexcept = default;
  OccupancyOctree& operator=(OccupancyOctree&&) noexcept = default;

  const OctreeConfig& config() const { return config_; }
  double resolution() const { return config_.resolution; }
  int depth() const { return depth_; }
  std::uint32_t keys_per_axis() const { return 1u << depth_; }
  Vec3 origin() const { return origin_; }
  double extent() const { return config_.resolution * keys_per_axis(); }

  bool in_bounds(const VoxelKey& k) const {
    const auto n = keys_per_axis();
    return k.i < n && k.j < n && k.k < n;
  }

  std::optional<VoxelKey> key_of(const Vec3& p) const {
    const Vec3 rel = (p - origin_) / config_.resolution;
    const double n = keys_per_axis();
    if (!(rel.x >= 0 && rel.y >= 0 && rel.z >= 0 && rel.x < n && rel.y < n && rel.z < n)) return std::nullopt;
    return VoxelKey{static_cast<std::uint32_t>(rel.x), static_cast<std::uint32_t>(rel.y),
                    static_cast<std::uint32_t>(rel.z)};
  }

  Vec3 center_of(const VoxelKey& k) const {
    return origin_ + Vec3{k.i + 0.5, k.j + 0.5, k.k + 0.5} * config_.resolution;
  }

  Box3 cell_of(const VoxelKey& k) const {
    const Vec3 lo = origin_ + Vec3{double(k.i), double(k.j), double(k.k)} * config_.resolution;
    return {lo, lo + Vec3{1, 1, 1} * config_.resolution};
  }

  /// Adds l_hit or l_miss to the voxel and clamps. Unseen voxels start at 0.
  void update_voxel(const VoxelKey& key, bool is_hit) {
    if (!in_bounds(key)) throw std::out_of_range("update_voxel: key outside tree bounds");
    update(*root_, depth_, key, is_hit ? config_.l_hit : config_.l_miss);
  }

  /// Voxels crossed by origin->end, excluding the voxel containing `end`, in traversal order.
  /// Traversal stops at the tree boundary; an out-of-bounds origin yields nothing.
  std::vector<VoxelKey> traverse_ray(const Vec3& origin, const Vec3& end) const {
    std::vector<VoxelKey> out;
    const auto start = key_of(origin);
    if (!start) return out;
    const auto stop = key_of(end);
    const double res = config_.resolution;
    const Vec3 d = end - origin;
    std::int64_t cur[3] = {start->i, start->j, start->k};
    int step[3];
    double t_max[3], t_delta[3];
    for (int a = 0; a < 3; ++a) {
      if (d[a] > 0) {
        step[a] = 1;
        const double boundary = origin_[a] + (cur[a] + 1) * res;
        t_max[a] = (boundary - origin[a]) / d[a];
        t_delta[a] = res / d[a];
      } else if (d[a] < 0) {
        step[a] = -1;
        const double boundary = origin_[a] + cur[a] * res;
        t_max[a] = (boundary - origin[a]) / d[a];
        t_delta[a] = -res / d[a];
      } else {
        step[a] = 0;
        t_max[a] = t_delta[a] = std::numeric_limits<double>::infinity();
      }
    }
    const std::int64_t n = keys_per_axis();
    auto as_key = [&] { return VoxelKey{std::uint32_t(cur[0]), std::uint32_t(cur[1]), std::uint32_t(cur[2])}; };
    if (stop && as_key() == *stop) return out;
    out.push_back(as_key());
    const std::size_t guard = 3 * static_cast<std::size_t>(n) + 3;
    while (out.size() < guard) {
      int a = 0;
      if (t_max[1] < t_max[a]) a = 1;
      if (t_max[2] < t_max[a]) a = 2;
      if (t_max[a] > 1.0) break;
      cur[a] += step[a];
      t_max[a] += t_delta[a];
      if (cur[a] < 0 || cur[a] >= n) break;
      if (stop && as_key() == *stop) break;
      out.push_back(as_key());
    }
    return out;
  }

  /// Fuses one scan: every voxel crossed before an endpoint gets a miss, each endpoint
  /// voxel a hit, and each voxel is updated at most once (hit beats miss).
  void integrate_scan(const Vec3& origin, std::span<const Vec3> endpoints) {
    std::set<VoxelKey> hits, misses;
    for (const Vec3& e : endpoints) {
      if (!std::isfinite(e.x) || !std::isfinite(e.y) || !std::isfinite(e.z))
        throw std::invalid_argument("integrate_scan: non-finite endpoint");
      if (auto k = key_of(e)) hits.insert(*k);
      for (const auto& k : traverse_ray(origin, e)) misses.insert(k);
    }
    for (const auto& k : hits) update_voxel(k, true);
    for (const auto& k : misses)
      if (!hits.contains(k)) update_voxel(k, false);
  }

  /// Stored log-odds, or nullopt for unseen space.
  std::optional<double> log_odds(const VoxelKey& key) const {
    if (!in_bounds(key)) throw std::out_of_range("log_odds: key outside tree bounds");
    const Node* n = root_.get();
    for (int level = depth_; level > 0; --level) {
      if (n->uniform) return n->value;
      const auto& child = n->children[child_index(key, level - 1)];
      if (!child) return std::nullopt;
      n = child.get();
    }
    return n->value;
  }

  double occupancy(const VoxelKey& key) const {
    auto l = log_odds(key);
    return l ? logistic(*l) : 0.5;
  }

  double occupancy_at(const Vec3& p) const {
    auto k = key_of(p);
    if (!k) throw std::out_of_range("occupancy_at: point outside tree bounds");
    return occupancy(*k);
  }

  /// Centers of finest voxels inside `box` with occupancy >= threshold, sorted by key.
  std::vector<Vec3> occupied_voxels_in(const Box3& box, double threshold) const {
    std::vector<VoxelKey> keys;
    collect(*root_, depth_, {0, 0, 0}, box, threshold, keys);
    std::sort(keys.begin(), keys.end());
    std::vector<Vec3> out;
    out.reserve(keys.size());
    for (const auto& k : keys) out.push_back(center_of(k));
    return out;
  }

  /// All known finest voxels with their log-odds, sorted by key.
  std::vector<std::pair<VoxelKey, double>> known_voxels() const {
    std::vector<std::pair<VoxelKey, double>> out;
    enumerate(*root_, depth_, {0, 0, 0}, out);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }

  /// Debug dump: `voxel i j k log_odds` per known voxel, key-sorted.
  void dump(std::ostream& os) const {
    for (const auto& [k, l] : known_voxels()) os << fmt::format("voxel {} {} {} {:.6f}\n", k.i, k.j, k.k, l);
  }

  std::size_t node_count() const { return count(*root_); }

 private:
  struct Node {
    double value = 0.0;
    /// Holds a single value for its whole cube (finest voxel or pruned region).
    bool uniform = false;
    std::array<std::unique_ptr<Node>, 8> children;

    bool has_children() const {
      for (const auto& c : children)
        if (c) return true;
      return false;
    }
  };

  static std::unique_ptr<Node> clone(const Node& n) {
    auto out = std::make_unique<Node>();
    out->value = n.value;
    out->uniform = n.uniform;
    for (int i = 0; i < 8; ++i)
      if (n.children[i]) out->children[i] = clone(*n.children[i]);
    return out;
  }

  static int child_index(const VoxelKey& k, int bit) {
    return int((k.i >> bit) & 1u) | (int((k.j >> bit) & 1u) << 1) | (int((k.k >> bit) & 1u) << 2);
  }

  double clamp(double v) const { return std::clamp(v, config_.clamp_min, config_.clamp_max); }

  void update(Node& n, int level, const VoxelKey& key, double delta) {
    if (level == 0) {
      n.value = clamp(n.value + delta);
      n.uniform = true;
      return;
    }
    if (n.uniform) {
      // pruned region: materialise the children before descending
      for (auto& c : n.children) {
        c = std::make_unique<Node>();
        c->value = n.value;
        c->uniform = true;
      }
      n.uniform = false;
    }
    auto& child = n.children[child_index(key, level - 1)];
    if (!child) {
      child = std::make_unique<Node>();
      child->uniform = level - 1 == 0;
    }
    update(*child, level - 1, key, delta);
    if (config_.prune) try_prune(n);
  }

  static void try_prune(Node& n) {
    for (const auto& c : n.children)
      if (!c || !c->uniform || c->value != n.children[0]->value) return;
    n.value = n.children[0]->value;
    n.uniform = true;
    for (auto& c : n.children) c.reset();
  }

  Box3 node_box(const VoxelKey& lo, int level) const {
    const double size = config_.resolution * static_cast<double>(1u << level);
    const Vec3 min = origin_ + Vec3{double(lo.i), double(lo.j), double(lo.k)} * config_.resolution;
    return {min, min + Vec3{size, size, size}};
  }

  static VoxelKey child_origin(const VoxelKey& lo, int level, int idx) {
    const std::uint32_t half = 1u << (level - 1);
    return {lo.i + ((idx & 1) ? half : 0), lo.j + ((idx & 2) ? half : 0), lo.k + ((idx & 4) ? half : 0)};
  }

  void collect(const Node& n, int level, const VoxelKey& lo, const Box3& box, double threshold,
               std::vector<VoxelKey>& out) const {
    const Box3 nb = node_box(lo, level);
    if (nb.min.x > box.max.x || nb.max.x < box.min.x || nb.min.y > box.max.y || nb.max.y < box.min.y ||
        nb.min.z > box.max.z || nb.max.z < box.min.z)
      return;
    if (n.uniform) {
      if (logistic(n.value) < threshold) return;
      const std::uint32_t span = 1u << level;
      const double res = config_.resolution;
      auto range = [&](int axis, std::uint32_t base) {
        // finest keys in [base, base+span) whose centers lie in box
        const double lo_c = std::ceil((box.min[axis] - origin_[axis]) / res - 0.5);
        const double hi_c = std::floor((box.max[axis] - origin_[axis]) / res - 0.5);
        const double a = std::max<double>(base, lo_c);
        const double b = std::min<double>(base + span - 1, hi_c);
        return std::pair{a, b};
      };
      const auto [i0, i1] = range(0, lo.i);
      const auto [j0, j1] = range(1, lo.j);
      const auto [k0, k1] = range(2, lo.k);
      for (double i = i0; i <= i1; ++i)
        for (double j = j0; j <= j1; ++j)
          for (double k = k0; k <= k1; ++k) {
            const VoxelKey key{std::uint32_t(i), std::uint32_t(j), std::uint32_t(k)};
            if (box.contains(center_of(key))) out.push_back(key);
          }
      return;
    }
    for (int idx = 0; idx < 8; ++idx)
      if (n.children[idx]) collect(*n.children[idx], level - 1, child_origin(lo, level, idx), box, threshold, out);
  }

  void enumerate(const Node& n, int level, const VoxelKey& lo, std::vector<std::pair<VoxelKey, double>>& out) const {
    if (n.uniform) {
      const std::uint32_t span = 1u << level;
      for (std::uint32_t i = 0; i < span; ++i)
        for (std::uint32_t j = 0; j < span; ++j)
          for (std::uint32_t k = 0; k < span; ++k) out.push_back({{lo.i + i, lo.j + j, lo.k + k}, n.value});
      return;
    }
    for (int idx = 0; idx < 8; ++idx)
      if (n.children[idx]) enumerate(*n.children[idx], level - 1, child_origin(lo, level, idx), out);
  }

  static std::size_t count(const Node& n) {
    std::size_t c = 1;
    for (const auto& ch : n.children)
      if (ch) c += count(*ch);
    return c;
  }

  OctreeConfig config_;
  Vec3 origin_;
  int depth_ = 0;
  std::unique_ptr<Node> root_;
};

}  // namespace homebot
