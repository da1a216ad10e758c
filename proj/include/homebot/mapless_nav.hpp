#pragma once

// Local costmaps fused from LIDAR and projected depth, island extraction around a
// customer, approach-point selection and L-corner docking alignment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

#include "homebot/geometry.hpp"
#include "homebot/planner_race.hpp"
#include "homebot/sim_world.hpp"

namespace homebot {

enum class CellState : std::uint8_t { unknown, free, occupied };

struct Costmap {
  /// Pose of the costmap frame in the world.
  Pose2 frame;
  /// Minimum corner of cell (0,0) in the costmap frame.
  Vec2 origin;
  double resolution = 0.05;
  int width = 0;
  int height = 0;
  std::vector<CellState> cells;
  /// Set when the robot's own cell was marked occupied.
  bool inconsistent = false;

  static Costmap make(Pose2 frame, Vec2 origin, double resolution, int width, int height) {
    if (width <= 0 || height <= 0 || !(resolution > 0)) throw std::invalid_argument("Costmap: bad dimensions");
    return {frame, origin, resolution, width, height, std::vector<CellState>(std::size_t(width) * height, CellState::unknown)};
  }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  CellState at(Cell c) const { return cells[std::size_t(c.y) * width + c.x]; }
  void set(Cell c, CellState s) { cells[std::size_t(c.y) * width + c.x] = s; }
  bool occupied(Cell c) const { return in_bounds(c) && at(c) == CellState::occupied; }

  Cell cell_of(const Vec2& local) const {
    return {int(std::floor((local.x - origin.x) / resolution)), int(std::floor((local.y - origin.y) / resolution))};
  }
  Vec2 center_of(Cell c) const { return origin + Vec2{(c.x + 0.5) * resolution, (c.y + 0.5) * resolution}; }
  Vec2 world_of(Cell c) const { return frame.transform(center_of(c)); }
  Cell cell_of_world(const Vec2& p) const { return cell_of(frame.inverse_transform(p)); }
};

/// Cells crossed by the segment a->b (costmap frame), excluding the cell containing b.
inline std::vector<Cell> grid_ray(const Costmap& m, const Vec2& a, const Vec2& b) {
  std::vector<Cell> out;
  Cell cur = m.cell_of(a);
  const Cell end = m.cell_of(b);
  const Vec2 d = b - a;
  int step[2];
  double t_max[2], t_delta[2];
  const int cc[2] = {cur.x, cur.y};
  for (int ax = 0; ax < 2; ++ax) {
    const double da = ax ? d.y : d.x;
    const double pa = ax ? a.y : a.x;
    const double oa = ax ? m.origin.y : m.origin.x;
    if (da > 0) {
      step[ax] = 1;
      t_max[ax] = (oa + (cc[ax] + 1) * m.resolution - pa) / da;
      t_delta[ax] = m.resolution / da;
    } else if (da < 0) {
      step[ax] = -1;
      t_max[ax] = (oa + cc[ax] * m.resolution - pa) / da;
      t_delta[ax] = -m.resolution / da;
    } else {
      step[ax] = 0;
      t_max[ax] = t_delta[ax] = std::numeric_limits<double>::infinity();
    }
  }
  const std::size_t guard = std::size_t(m.width + m.height) * 2 + 4;
  while (!(cur == end) && out.size() < guard) {
    out.push_back(cur);
    const int ax = t_max[0] < t_max[1] ? 0 : 1;
    if (t_max[ax] > 1.0) break;
    (ax ? cur.y : cur.x) += step[ax];
    t_max[ax] += t_delta[ax];
  }
  return out;
}

/// Marks ray corridors free, then endpoints and projected points occupied (occupied wins).
/// `hits[i]` says whether endpoint i is a real return rather than a max-range ray.
inline void fuse_into(Costmap& m, const Vec2& sensor, std::span<const Vec2> endpoints, std::span<const std::uint8_t> hits,
                      std::span<const Vec2> projected) {
  std::vector<Cell> occupied;
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    for (const Cell& c : grid_ray(m, sensor, endpoints[i]))
      if (m.in_bounds(c) && m.at(c) != CellState::occupied) m.set(c, CellState::free);
    if (hits[i]) occupied.push_back(m.cell_of(endpoints[i]));
  }
  for (const Vec2& p : projected) occupied.push_back(m.cell_of(p));
  for (const Cell& c : occupied)
    if (m.in_bounds(c)) m.set(c, CellState::occupied);
  if (m.occupied(m.cell_of(sensor))) m.inconsistent = true;
}

/// Robot-centered costmap of `width` x `width` cells (odd, robot in the middle cell)
/// from a scan and robot-frame projected points.
inline Costmap fuse_local_map(const Scan& scan, std::span<const Vec2> projected, double resolution = 0.05,
                              int width = 121) {
  if (width % 2 == 0) throw std::invalid_argument("fuse_local_map: width must be odd");
  Costmap m = Costmap::make(scan.origin, {-width * resolution / 2.0, -width * resolution / 2.0}, resolution, width, width);
  std::vector<Vec2> ends;
  std::vector<std::uint8_t> hits;
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    ends.push_back(scan.endpoint_local(i));
    hits.push_back(scan.ranges[i] < scan.max_range);
  }
  fuse_into(m, {0.0, 0.0}, ends, hits, projected);
  return m;
}

struct Island {
  Cell seed;
  /// Sorted by (y, x).
  std::vector<Cell> cells;

  bool contains(Cell c) const {
    return std::binary_search(cells.begin(), cells.end(), c,
                              [](Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  }
};

inline Island find_island(const Costmap& m, Cell seed) {
  if (!m.occupied(seed)) throw std::invalid_argument("find_island: seed cell is not occupied");
  Island isl{seed, {}};
  std::vector<std::uint8_t> seen(m.cells.size(), 0);
  std::queue<Cell> q;
  q.push(seed);
  seen[std::size_t(seed.y) * m.width + seed.x] = 1;
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    isl.cells.push_back(c);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const Cell n{c.x + dx, c.y + dy};
        if (!m.occupied(n)) continue;
        auto& s = seen[std::size_t(n.y) * m.width + n.x];
        if (!s) {
          s = 1;
          q.push(n);
        }
      }
  }
  std::sort(isl.cells.begin(), isl.cells.end(), [](Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  return isl;
}

/// True when a disc of `radius_cells` at the center of `c` overlaps any island cell square.
inline bool footprint_overlaps(const Island& isl, Cell c, double radius_cells) {
  for (const Cell& o : isl.cells) {
    const double dx = std::max(0.0, std::abs(double(o.x - c.x)) - 0.5);
    const double dy = std::max(0.0, std::abs(double(o.y - c.y)) - 0.5);
    if (dx * dx + dy * dy < radius_cells * radius_cells) return true;
  }
  return false;
}

struct ApproachTarget {
  Cell cell;
  /// Heading in the costmap frame, facing the customer.
  double heading = 0.0;
  Path path;
  Island island;
};

/// Plans from the robot toward the customer through free and unknown cells (island
/// cells allowed, other occupied cells blocked) and stops at the farthest path cell
/// whose footprint clears the island.
inline std::optional<ApproachTarget> approach_point(const Costmap& m, Cell robot, Cell customer, double radius_cells) {
  Island isl = find_island(m, customer);
  GridMap g(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at({x, y}) == CellState::occupied && !isl.contains({x, y})) g.set_blocked({x, y});
  if (!g.in_bounds(robot) || g.blocked(robot)) return std::nullopt;
  auto path = astar_plan(g, robot, customer);
  if (!path) return std::nullopt;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < path->cells.size(); ++i)
    if (!footprint_overlaps(isl, path->cells[i], radius_cells)) best = i;
  if (!best) return std::nullopt;
  ApproachTarget t;
  t.cell = path->cells[*best];
  const Vec2 d = m.center_of(customer) - m.center_of(t.cell);
  t.heading = std::atan2(d.y, d.x);
  t.path = std::move(*path);
  t.island = std::move(isl);
  return t;
}

struct CornerTemplate {
  /// Unit cell steps along the two arms of the L.
  Cell arm_a{1, 0};
  Cell arm_b{0, 1};
  int min_run = 6;
  /// Dock pose relative to the corner cell center, in the costmap frame.
  Vec2 dock_offset;
  double dock_heading = 0.0;
  double search_radius = 0.5;
};

/// Corner cells: occupied, with occupied runs of `min_run` cells along both arms and
/// unoccupied cells just behind the corner on each arm.
inline std::vector<Cell> find_corners(const Costmap& m, const CornerTemplate& t) {
  std::vector<Cell> out;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const Cell c{x, y};
      if (!m.occupied(c)) continue;
      if (m.occupied({x - t.arm_a.x, y - t.arm_a.y}) || m.occupied({x - t.arm_b.x, y - t.arm_b.y})) continue;
      bool ok = true;
      for (int k = 1; ok && k < t.min_run; ++k)
        ok = m.occupied({x + k * t.arm_a.x, y + k * t.arm_a.y}) && m.occupied({x + k * t.arm_b.x, y + k * t.arm_b.y});
      if (ok) out.push_back(c);
    }
  return out;
}

/// Re-anchors a prior dock pose (costmap frame) on the nearest matching L-corner
/// within the search radius.
inline std::optional<Pose2> align_to_corner(const Costmap& m, const Pose2& prior, const CornerTemplate& t) {
  const Vec2 expected_corner = prior.position() - t.dock_offset;
  std::optional<Vec2> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const Cell& c : find_corners(m, t)) {
    const Vec2 p = m.center_of(c);
    const double d = (p - expected_corner).norm();
    if (d <= t.search_radius && d < best_d) {
      best_d = d;
      best = p;
    }
  }
  if (!best) return std::nullopt;
  const Vec2 dock = *best + t.dock_offset;
  return Pose2{dock.x, dock.y, t.dock_heading};
}

/// Binary PGM: free 255, unknown 128, occupied 0. Row 0 is the top (max y).
inline void write_pgm(const Costmap& m, std::ostream& os) {
  os << "P5\n" << m.width << ' ' << m.height << "\n255\n";
  for (int y = m.height - 1; y >= 0; --y)
    for (int x = 0; x < m.width; ++x) {
      const CellState s = m.at({x, y});
      os.put(static_cast<char>(s == CellState::free ? 255 : s == CellState::occupied ? 0 : 128));
    }
}

}  // namespace homebot
