#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "homebot/mapless_nav.hpp"
#include "oracles.hpp"

using namespace homebot;

namespace {

Costmap blank(int w, int h, double res = 0.05) { return Costmap::make({}, {0.0, 0.0}, res, w, h); }

void stamp(Costmap& m, int x0, int y0, int x1, int y1, CellState s = CellState::occupied) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) m.set({x, y}, s);
}

Scan ring_scan(int beams, double range, double max_range) {
  Scan s;
  s.max_range = max_range;
  for (int i = 0; i < beams; ++i) {
    s.angles.push_back(2.0 * std::numbers::pi * i / beams);
    s.ranges.push_back(range);
  }
  return s;
}

}  // namespace

TEST(Fuse, NoReturnsLeavesOnlyRayCorridorsFree) {
  const Scan s = ring_scan(8, 1.0, 1.0);
  const Costmap m = fuse_local_map(s, {}, 0.1, 41);
  int occ = 0, fre = 0, unk = 0;
  for (auto c : m.cells) (c == CellState::occupied ? occ : c == CellState::free ? fre : unk)++;
  EXPECT_EQ(occ, 0);
  EXPECT_GT(fre, 0);
  EXPECT_GT(unk, fre);
  EXPECT_EQ(m.at(m.cell_of({0.55, 0.0})), CellState::free);
  EXPECT_EQ(m.at(m.cell_of({0.55, 0.3})), CellState::unknown);
  EXPECT_FALSE(m.inconsistent);
}

TEST(Fuse, ProjectedPointIsOccupiedAndBeatsRayFreeing) {
  const Scan s = ring_scan(4, 1.5, 5.0);
  const std::vector<Vec2> pts{{-1.0, 1.0}, {0.75, 0.0}};
  const Costmap m = fuse_local_map(s, pts, 0.1, 41);
  EXPECT_EQ(m.at(m.cell_of({-1.0, 1.0})), CellState::occupied);
  EXPECT_EQ(m.at(m.cell_of({0.75, 0.0})), CellState::occupied);
  EXPECT_EQ(m.at(m.cell_of({1.5, 0.0})), CellState::occupied);
  EXPECT_EQ(m.at(m.cell_of({0.45, 0.0})), CellState::free);
}

TEST(Fuse, RobotCellOccupiedFlagsInconsistent) {
  const Scan s = ring_scan(4, 1.0, 5.0);
  const std::vector<Vec2> pts{{0.01, 0.01}};
  EXPECT_TRUE(fuse_local_map(s, pts, 0.1, 21).inconsistent);
  EXPECT_FALSE(fuse_local_map(s, {}, 0.1, 21).inconsistent);
  EXPECT_THROW(fuse_local_map(s, {}, 0.1, 20), std::invalid_argument);
}

TEST(Fuse, IdempotentAndMatchesPostcondition) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> range(0.2, 2.5), coord(-1.5, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    Scan s = ring_scan(90, 1.0, 2.0);
    for (auto& r : s.ranges) r = std::min(2.0, range(rng));
    std::vector<Vec2> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({coord(rng), coord(rng)});
    const Costmap a = fuse_local_map(s, pts, 0.05, 81);
    const Costmap b = fuse_local_map(s, pts, 0.05, 81);
    ASSERT_EQ(a.cells, b.cells);
    // occupied iff endpoint or projected point
    std::set<std::pair<int, int>> expect;
    for (std::size_t i = 0; i < s.ranges.size(); ++i)
      if (s.ranges[i] < s.max_range) {
        const Cell c = a.cell_of(s.endpoint_local(i));
        expect.insert({c.x, c.y});
      }
    for (const auto& p : pts) {
      const Cell c = a.cell_of(p);
      expect.insert({c.x, c.y});
    }
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x)
        ASSERT_EQ(a.at({x, y}) == CellState::occupied, expect.contains({x, y}));
  }
}

TEST(GridRay, MatchesDenseSampling) {
  const Costmap m = blank(40, 40, 0.1);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 3.95);
  for (int trial = 0; trial < 300; ++trial) {
    const Vec2 a{u(rng), u(rng)}, b{u(rng), u(rng)};
    const auto cells = grid_ray(m, a, b);
    std::set<std::pair<int, int>> got;
    for (auto c : cells) got.insert({c.x, c.y});
    const Cell end = m.cell_of(b);
    const int n = 20000;
    for (int i = 0; i <= n; ++i) {
      const Cell c = m.cell_of(a + (b - a) * (double(i) / n));
      if (c == end) continue;
      ASSERT_TRUE(got.contains({c.x, c.y})) << trial;
    }
    EXPECT_FALSE(got.contains({end.x, end.y}));
  }
}

TEST(Island, SingleCellAndErrors) {
  Costmap m = blank(10, 10);
  m.set({4, 4}, CellState::occupied);
  EXPECT_EQ(find_island(m, {4, 4}).cells.size(), 1u);
  EXPECT_THROW(find_island(m, {5, 5}), std::invalid_argument);
  EXPECT_THROW(find_island(m, {50, 5}), std::invalid_argument);
}

TEST(Island, ContiguousBlockOfTwelveAndSeparatedBlocks) {
  Costmap m = blank(20, 20);
  stamp(m, 2, 2, 5, 4);  // 12 cells
  stamp(m, 2, 6, 5, 8);  // separated by free row 5
  stamp(m, 0, 5, 19, 5, CellState::free);
  const Island isl = find_island(m, {3, 3});
  EXPECT_EQ(isl.cells.size(), 12u);
  EXPECT_EQ(oracle::flood_fill(m, {3, 3}).size(), 12u);
  for (auto c : isl.cells) EXPECT_LE(c.y, 4);
}

TEST(Island, EqualsBruteForceOnRandomMaps) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = 6 + int(rng() % 10), h = 6 + int(rng() % 10);
    Costmap m = blank(w, h);
    const double p = 0.2 + 0.4 * double(rng() % 100) / 100.0;
    for (auto& c : m.cells) {
      const double r = double(rng() % 1000) / 1000.0;
      c = r < p ? CellState::occupied : r < p + (1 - p) / 2 ? CellState::free : CellState::unknown;
    }
    const Cell seed{int(rng() % w), int(rng() % h)};
    m.set(seed, CellState::occupied);
    const Island isl = find_island(m, seed);
    std::set<std::pair<int, int>> got;
    for (auto c : isl.cells) got.insert({c.x, c.y});
    ASSERT_EQ(got.size(), isl.cells.size());
    ASSERT_EQ(got, oracle::flood_fill(m, seed)) << "trial " << trial;
    for (auto c : isl.cells)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const Cell n{c.x + dx, c.y + dy};
          if (m.occupied(n)) {
            ASSERT_TRUE(isl.contains(n));
          }
        }
  }
}

TEST(Approach, OneCellCustomerInCorridorStopsTwoCellsShort) {
  Costmap m = blank(20, 5);
  stamp(m, 0, 0, 19, 4, CellState::free);
  stamp(m, 0, 0, 19, 0);
  stamp(m, 0, 4, 19, 4);
  m.set({15, 2}, CellState::occupied);
  const auto t = approach_point(m, {2, 2}, {15, 2}, 1.0);
  ASSERT_TRUE(t);
  EXPECT_EQ(t->cell, (Cell{13, 2}));
  EXPECT_NEAR(t->heading, 0.0, 1e-12);
}

TEST(Approach, AlreadyAdjacentAndClearStaysPut) {
  Costmap m = blank(10, 10);
  m.set({6, 5}, CellState::occupied);
  const auto t = approach_point(m, {4, 5}, {6, 5}, 1.0);
  ASSERT_TRUE(t);
  EXPECT_EQ(t->cell, (Cell{4, 5}));
}

TEST(Approach, WalledInIslandFails) {
  Costmap m = blank(15, 15);
  stamp(m, 3, 3, 11, 11);
  stamp(m, 4, 4, 10, 10, CellState::free);
  m.set({7, 7}, CellState::occupied);
  EXPECT_FALSE(approach_point(m, {1, 1}, {7, 7}, 1.0));
}

TEST(Approach, NeverOverlapsAndIsMaximalOnRandomMaps) {
  std::mt19937_64 rng(77);
  int solved = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Costmap m = blank(24, 24);
    for (auto& c : m.cells) {
      const int r = int(rng() % 100);
      c = r < 12 ? CellState::occupied : r < 60 ? CellState::free : CellState::unknown;
    }
    const Cell customer{12 + int(rng() % 6), 12 + int(rng() % 6)};
    stamp(m, customer.x - 1, customer.y - 1, customer.x + 1, customer.y);
    const Cell robot{int(rng() % 5), int(rng() % 5)};
    m.set(robot, CellState::free);
    const double radius = 0.5 + double(rng() % 4) * 0.5;
    const auto t = approach_point(m, robot, customer, radius);
    if (!t) continue;
    ++solved;
    const auto& cells = t->path.cells;
    ASSERT_EQ(cells.front(), robot);
    ASSERT_EQ(cells.back(), customer);
    const auto it = std::find(cells.begin(), cells.end(), t->cell);
    ASSERT_NE(it, cells.end());
    ASSERT_FALSE(oracle::disc_overlaps(t->island.cells, t->cell, radius));
    for (auto j = it + 1; j != cells.end(); ++j) ASSERT_TRUE(oracle::disc_overlaps(t->island.cells, *j, radius)) << trial;
  }
  EXPECT_GT(solved, 100);
}

namespace {

// L-corner whose corner cell is (cx, cy), arms along +x and +y.
void stamp_l(Costmap& m, int cx, int cy, int len) {
  stamp(m, cx, cy, cx + len - 1, cy);
  stamp(m, cx, cy, cx, cy + len - 1);
}

}  // namespace

TEST(Corner, PerfectLWithPriorOffsetIsCorrected) {
  Costmap m = blank(60, 60, 0.05);
  stamp_l(m, 20, 20, 12);
  CornerTemplate t;
  t.dock_offset = {0.4, 0.4};
  t.dock_heading = std::numbers::pi / 4;
  const Vec2 truth = m.center_of({20, 20}) + t.dock_offset;
  const Pose2 prior{truth.x + 0.1, truth.y - 0.1, 0.3};
  const auto p = align_to_corner(m, prior, t);
  ASSERT_TRUE(p);
  EXPECT_LE((p->position() - truth).norm(), m.resolution);
  EXPECT_DOUBLE_EQ(p->theta, t.dock_heading);
  EXPECT_LE((p->position() - prior.position()).norm(), t.search_radius + 1e-12);
}

TEST(Corner, EmptyMapOrFarCornerFails) {
  Costmap m = blank(60, 60, 0.05);
  CornerTemplate t;
  t.dock_offset = {0.4, 0.4};
  EXPECT_FALSE(align_to_corner(m, {1.0, 1.0, 0.0}, t));
  stamp_l(m, 2, 2, 10);
  EXPECT_FALSE(align_to_corner(m, {2.5, 2.5, 0.0}, t));
}

TEST(Corner, NearerOfTwoCornersChosen) {
  Costmap m = blank(80, 40, 0.05);
  stamp_l(m, 10, 10, 8);
  stamp_l(m, 22, 10, 8);
  CornerTemplate t;
  t.dock_offset = {0.3, 0.3};
  t.search_radius = 1.0;
  const Vec2 a = m.center_of({10, 10}), b = m.center_of({22, 10});
  const auto near_b = align_to_corner(m, Pose2{b.x + 0.3 - 0.15, b.y + 0.3, 0}, t);
  ASSERT_TRUE(near_b);
  EXPECT_NEAR(near_b->x, b.x + 0.3, 1e-12);
  const auto near_a = align_to_corner(m, Pose2{a.x + 0.3 + 0.1, a.y + 0.3, 0}, t);
  ASSERT_TRUE(near_a);
  EXPECT_NEAR(near_a->x, a.x + 0.3, 1e-12);
}

TEST(Corner, SolidBlockHasExactlyOneCorner) {
  Costmap m = blank(30, 30);
  stamp(m, 5, 5, 15, 15);
  CornerTemplate t;
  const auto corners = find_corners(m, t);
  ASSERT_EQ(corners.size(), 1u);
  EXPECT_EQ(corners[0], (Cell{5, 5}));
}

TEST(Render, PgmGrayLevels) {
  Costmap m = blank(3, 1);
  m.set({0, 0}, CellState::free);
  m.set({2, 0}, CellState::occupied);
  std::ostringstream os;
  write_pgm(m, os);
  const std::string s = os.str();
  const std::string header = "P5\n3 1\n255\n";
  ASSERT_EQ(s.size(), header.size() + 3);
  EXPECT_EQ(s.substr(0, header.size()), header);
  EXPECT_EQ(std::uint8_t(s[header.size()]), 255);
  EXPECT_EQ(std::uint8_t(s[header.size() + 1]), 128);
  EXPECT_EQ(std::uint8_t(s[header.size() + 2]), 0);
}
