#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "homebot/occupancy_map.hpp"

using namespace homebot;

namespace {

double sigmoid(double l) { return 1.0 / (1.0 + std::exp(-l)); }

// Slab test written independently of the library's clipping helpers.
bool segment_touches_cell(const Vec3& a, const Vec3& b, const Vec3& lo, const Vec3& hi) {
  double t0 = 0.0, t1 = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double d = b[ax] - a[ax];
    if (d == 0.0) {
      if (a[ax] < lo[ax] || a[ax] > hi[ax]) return false;
      continue;
    }
    double e = (lo[ax] - a[ax]) / d, f = (hi[ax] - a[ax]) / d;
    if (e > f) std::swap(e, f);
    t0 = std::max(t0, e);
    t1 = std::min(t1, f);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

TEST(Octree, SingleHitAndMissProbabilities) {
  OccupancyOctree t({0, 0, 0}, 1.0);
  const VoxelKey k{3, 4, 5};
  EXPECT_DOUBLE_EQ(t.occupancy(k), 0.5);
  EXPECT_FALSE(t.log_odds(k).has_value());
  t.update_voxel(k, true);
  EXPECT_NEAR(t.occupancy(k), 0.7, 1e-12);
  EXPECT_NEAR(*t.log_odds(k), 0.8472978603872037, 1e-12);
  const VoxelKey m{1, 1, 1};
  t.update_voxel(m, false);
  EXPECT_NEAR(t.occupancy(m), 0.4, 1e-12);
  EXPECT_NEAR(*t.log_odds(m), -0.4054651081081644, 1e-12);
}

TEST(Octree, HundredHitsSaturate) {
  OccupancyOctree t({0, 0, 0}, 1.0);
  const VoxelKey k{0, 0, 0};
  double ref = 0.0;
  const double lo = std::log(0.12 / 0.88), hi = std::log(0.97 / 0.03);
  for (int i = 0; i < 100; ++i) {
    t.update_voxel(k, true);
    ref = std::min(hi, std::max(lo, ref + std::log(0.7 / 0.3)));
  }
  EXPECT_NEAR(t.occupancy(k), 0.97, 1e-12);
  EXPECT_NEAR(t.occupancy(k), sigmoid(ref), 1e-12);
}

TEST(Octree, OutOfBoundsErrors) {
  OccupancyOctree t({0, 0, 0}, 1.0);
  const auto n = t.keys_per_axis();
  EXPECT_THROW(t.update_voxel({n, 0, 0}, true), std::out_of_range);
  EXPECT_THROW(t.occupancy_at({-0.01, 0.5, 0.5}), std::out_of_range);
  EXPECT_DOUBLE_EQ(t.occupancy_at({0.5, 0.5, 0.5}), 0.5);
}

TEST(Octree, UpdateSequencesMatchScalarOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    OccupancyOctree t({0, 0, 0}, 0.4);
    std::map<VoxelKey, double> ref;
    const double lo = std::log(0.12 / 0.88), hi = std::log(0.97 / 0.03);
    std::uniform_int_distribution<std::uint32_t> ki(0, t.keys_per_axis() - 1);
    for (int u = 0; u < 60; ++u) {
      const VoxelKey k{ki(rng), ki(rng), ki(rng)};
      const bool hit = rng() % 3 != 0;
      t.update_voxel(k, hit);
      double& r = ref[k];
      r = std::clamp(r + (hit ? std::log(0.7 / 0.3) : std::log(0.4 / 0.6)), lo, hi);
    }
    for (std::uint32_t i = 0; i < t.keys_per_axis(); ++i)
      for (std::uint32_t j = 0; j < t.keys_per_axis(); ++j)
        for (std::uint32_t k = 0; k < t.keys_per_axis(); ++k) {
          auto it = ref.find({i, j, k});
          const double expect = it == ref.end() ? 0.5 : sigmoid(it->second);
          ASSERT_NEAR(t.occupancy({i, j, k}), expect, 1e-12);
        }
  }
}

TEST(Octree, StoredLogOddsStayClamped) {
  OccupancyOctree t({0, 0, 0}, 0.4);
  std::mt19937_64 rng(5);
  for (int u = 0; u < 5000; ++u)
    t.update_voxel({std::uint32_t(rng() % 8), std::uint32_t(rng() % 8), std::uint32_t(rng() % 8)}, rng() % 2);
  for (const auto& [k, l] : t.known_voxels()) {
    EXPECT_GE(l, t.config().clamp_min);
    EXPECT_LE(l, t.config().clamp_max);
  }
}

TEST(Octree, PruningDoesNotChangeQueries) {
  std::mt19937_64 rng(2);
  OctreeConfig unpruned;
  unpruned.prune = false;
  int pruned_runs = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    OccupancyOctree a({0, 0, 0}, 0.2), b({0, 0, 0}, 0.2, unpruned);
    const int updates = 20 + static_cast<int>(rng() % 200);
    for (int u = 0; u < updates; ++u) {
      // bias toward one 2x2x2 block so it saturates and prunes
      const std::uint32_t base = (rng() % 4 == 0) ? 2 : 0;
      const VoxelKey k{base + std::uint32_t(rng() % 2), base + std::uint32_t(rng() % 2), std::uint32_t(rng() % 2)};
      const bool hit = rng() % 8 != 0;
      a.update_voxel(k, hit);
      b.update_voxel(k, hit);
    }
    if (a.node_count() < b.node_count()) ++pruned_runs;
    ASSERT_EQ(a.known_voxels(), b.known_voxels());
    const Box3 box{{0.0, 0.0, 0.0}, {0.2, 0.2, 0.2}};
    ASSERT_EQ(a.occupied_voxels_in(box, 0.6), b.occupied_voxels_in(box, 0.6));
  }
  EXPECT_GT(pruned_runs, 100);
}

TEST(Octree, OccupiedVoxelsInBox) {
  OccupancyOctree t({0, 0, 0}, 1.0, {.resolution = 0.1});
  const Box3 all{{0, 0, 0}, {1, 1, 1}};
  EXPECT_TRUE(t.occupied_voxels_in(all, 0.6).empty());
  for (int i = 0; i < 20; ++i) t.update_voxel({2, 3, 4}, true);
  const auto c = t.occupied_voxels_in(all, 0.9);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].x, 0.25, 1e-12);
  EXPECT_NEAR(c[0].y, 0.35, 1e-12);
  EXPECT_NEAR(c[0].z, 0.45, 1e-12);
  EXPECT_TRUE(t.occupied_voxels_in({{0.5, 0.5, 0.5}, {1, 1, 1}}, 0.6).empty());
}

TEST(Octree, RayTraversalMatchesBruteForce) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 0.8);
  const OccupancyOctree t({0, 0, 0}, 0.8, {.resolution = 0.1});
  for (int trial = 0; trial < 500; ++trial) {
    const Vec3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
    auto dda = t.traverse_ray(a, b);
    std::set<VoxelKey> got(dda.begin(), dda.end());
    ASSERT_EQ(got.size(), dda.size()) << "duplicate voxels";
    const VoxelKey end = *t.key_of(b);
    std::set<VoxelKey> expect;
    for (std::uint32_t i = 0; i < 8; ++i)
      for (std::uint32_t j = 0; j < 8; ++j)
        for (std::uint32_t k = 0; k < 8; ++k) {
          const Vec3 lo{i * 0.1, j * 0.1, k * 0.1};
          if (!(VoxelKey{i, j, k} == end) && segment_touches_cell(a, b, lo, lo + Vec3{0.1, 0.1, 0.1}))
            expect.insert({i, j, k});
        }
    ASSERT_EQ(got, expect) << "trial " << trial;
  }
}

TEST(Octree, OneMeterRayAlongAxis) {
  OccupancyOctree t({0, 0, 0}, 1.6, {.resolution = 0.1});
  const Vec3 origin{0.05, 0.05, 0.05};
  const std::vector<Vec3> ends{{1.05, 0.05, 0.05}};
  t.integrate_scan(origin, ends);
  EXPECT_NEAR(t.occupancy_at(ends[0]), 0.7, 1e-12);
  int fell = 0;
  for (std::uint32_t i = 0; i < 16; ++i)
    if (t.occupancy({i, 0, 0}) < 0.5) ++fell;
  EXPECT_EQ(fell, 10);  // origin voxel plus the nine between origin and endpoint
}

TEST(Octree, DegenerateRayOnlyHitsEndpoint) {
  OccupancyOctree t({0, 0, 0}, 1.0, {.resolution = 0.1});
  const std::vector<Vec3> ends{{0.33, 0.33, 0.33}};
  t.integrate_scan(ends[0], ends);
  const auto known = t.known_voxels();
  ASSERT_EQ(known.size(), 1u);
  EXPECT_NEAR(sigmoid(known[0].second), 0.7, 1e-12);
}

TEST(Octree, HitBeatsMissAndDedupsWithinScan) {
  OccupancyOctree t({0, 0, 0}, 1.6, {.resolution = 0.1});
  const Vec3 o{0.05, 0.05, 0.05};
  // two rays end in the same voxel; a third passes through it
  const std::vector<Vec3> ends{{0.52, 0.05, 0.05}, {0.58, 0.06, 0.04}, {1.05, 0.05, 0.05}};
  t.integrate_scan(o, ends);
  EXPECT_NEAR(t.occupancy_at({0.55, 0.05, 0.05}), 0.7, 1e-12);
  EXPECT_NEAR(t.occupancy_at({0.25, 0.05, 0.05}), 0.4, 1e-12);
  EXPECT_THROW(t.integrate_scan(o, std::vector<Vec3>{{NAN, 0, 0}}), std::invalid_argument);
}

TEST(Octree, DumpIsSortedAndFormatted) {
  OccupancyOctree t({0, 0, 0}, 1.0, {.resolution = 0.1});
  t.update_voxel({1, 0, 0}, true);
  t.update_voxel({0, 2, 0}, false);
  std::ostringstream os;
  t.dump(os);
  EXPECT_EQ(os.str(), "voxel 0 2 0 -0.405465\nvoxel 1 0 0 0.847298\n");
}

TEST(Octree, CopyIsDeep) {
  OccupancyOctree a({0, 0, 0}, 1.0);
  a.update_voxel({1, 1, 1}, true);
  OccupancyOctree b = a;
  b.update_voxel({1, 1, 1}, true);
  EXPECT_NEAR(a.occupancy({1, 1, 1}), 0.7, 1e-12);
  EXPECT_GT(b.occupancy({1, 1, 1}), 0.8);
}
