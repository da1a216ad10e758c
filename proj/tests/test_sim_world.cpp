#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "homebot/sim_world.hpp"

using namespace homebot;

namespace {

constexpr const char* kRoom = R"(
arena 4 3
wall 0 0 4 0 2
wall 0 3 4 3 2
wall 0 0 0 3 2
wall 4 0 4 3 2
robot 2 1.5 0
)";

Commands zero() { return {}; }

}  // namespace

TEST(LoadArena, EmptyDocumentHasNoEntities) {
  const World w = load_arena("arena 5 4\n");
  EXPECT_EQ(w.objects.size(), 0u);
  EXPECT_EQ(w.people.size(), 0u);
  EXPECT_EQ(w.bounds.max, (Vec2{5, 4}));
}

TEST(LoadArena, EchoesTrashCansAndZone) {
  const World w = load_arena(R"(
arena 8 6   # comment
object trash_can 2 2 0.25 0.3 0.3 0.5
object trash_can 6 2 0.25 0.3 0.3 0.5
zone deposit 4 5 0.5
)");
  ASSERT_EQ(w.objects.size(), 2u);
  EXPECT_EQ(w.objects[0].aabb.center(), (Vec3{2, 2, 0.25}));
  EXPECT_EQ(w.objects[1].aabb.center(), (Vec3{6, 2, 0.25}));
  EXPECT_EQ(w.objects[1].id, 1);
  ASSERT_NE(w.zone("deposit"), nullptr);
  EXPECT_DOUBLE_EQ(w.zone("deposit")->radius, 0.5);
}

TEST(LoadArena, ObjectOutsideBoundsIsSemanticError) {
  try {
    load_arena("arena 4 4\nobject cup 5 1 0.1 0.1 0.1 0.1\n");
    FAIL() << "expected ArenaError";
  } catch (const ArenaError& e) {
    EXPECT_EQ(e.kind(), ArenaError::Kind::semantic);
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(LoadArena, SyntaxErrorsCarryLineNumbers) {
  try {
    load_arena("arena 4 4\n\nrobot 1 x 0\n");
    FAIL();
  } catch (const ArenaError& e) {
    EXPECT_EQ(e.kind(), ArenaError::Kind::syntax);
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(load_arena("arena 4 4\nteleport 1 2\n"), ArenaError);
  EXPECT_THROW(load_arena("object cup 1 1 1 1 1 1\n"), ArenaError);
}

TEST(LoadArena, OverlappingBoxesOfOneFurnitureAreRejected) {
  EXPECT_THROW(load_arena("arena 4 4\nfurniture table 1 1 0.5 1 1 1\nfurniture table 1.2 1 0.5 1 1 1\n"), ArenaError);
  EXPECT_NO_THROW(load_arena("arena 4 4\nfurniture table 1 1 0.5 1 1 1\nfurniture chair 1.2 1 0.5 1 1 1\n"));
  // touching faces are not an overlap
  EXPECT_NO_THROW(load_arena("arena 4 4\nfurniture shelf 1 1 0.5 1 1 1\nfurniture shelf 2 1 0.5 1 1 1\n"));
}

TEST(LoadArena, PersonGrammar) {
  const World w = load_arena(
      "arena 6 6\nperson p1 color 200 10 10 drink wave 1 2 3 4 hidden 5 6 recolor 7 0 0 255 waypoints 0,1,1 2,3,1\n");
  ASSERT_EQ(w.people.size(), 1u);
  const SimPerson& p = w.people[0];
  EXPECT_TRUE(p.has_drink);
  EXPECT_EQ(p.wave_script.size(), 2u);
  EXPECT_TRUE(p.hidden_at(5.5));
  EXPECT_EQ(p.color_at(8.0), (Rgb{0, 0, 255}));
  EXPECT_EQ(p.position_at(1.0), (Vec2{2, 1}));
  EXPECT_THROW(load_arena("arena 6 6\nperson p1 color 1 1 1 waypoints 0,1,1 0,2,2\n"), ArenaError);
}

TEST(Step, ZeroCommandsOnlyAdvanceClock) {
  const World w0 = load_arena(kRoom);
  const World w1 = step(w0, 0.1, zero());
  EXPECT_EQ(w1.robot.base, w0.robot.base);
  EXPECT_EQ(w1.robot.arm, w0.robot.arm);
  EXPECT_DOUBLE_EQ(w1.clock, 0.1);
}

TEST(Step, ForwardIntegration) {
  World w = load_arena("arena 10 10\nrobot 2 5 0\n");
  Commands c;
  c.base_velocity = {0.5, 0.0};
  w = step(w, 2.0, c);
  EXPECT_NEAR(w.robot.base.x, 3.0, 1e-12);
  EXPECT_NEAR(w.robot.base.y, 5.0, 1e-12);
  EXPECT_TRUE(w.events.empty());
}

TEST(Step, RejectsNonPositiveDt) { EXPECT_THROW(step(load_arena(kRoom), 0.0, zero()), std::invalid_argument); }

// Dense march then bisection on the footprint clearance: independent of the analytic sweep.
double contact_fraction_oracle(const World& w, Vec2 p, Vec2 d) {
  auto clear = [&](double s) { return !footprint_collides(w, p + d * s, w.config.robot_radius); };
  constexpr int kSamples = 4000;
  int first_blocked = -1;
  for (int i = 1; i <= kSamples && first_blocked < 0; ++i)
    if (!clear(double(i) / kSamples)) first_blocked = i;
  if (first_blocked < 0) return 1.0;
  double lo = double(first_blocked - 1) / kSamples, hi = double(first_blocked) / kSamples;
  for (int i = 0; i < 200; ++i) {
    const double mid = (lo + hi) / 2.0;
    (clear(mid) ? lo : hi) = mid;
  }
  return lo;
}

TEST(Step, WallContactStopsBaseAndRaisesBumper) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0.6, 3.4), uy(0.6, 2.4), ua(-3.14, 3.14);
  for (int trial = 0; trial < 200; ++trial) {
    World w = load_arena(kRoom);
    w.robot.base = {ux(rng), uy(rng), 0.0};
    const double a = ua(rng);
    Commands c;
    c.base_velocity = Vec2{std::cos(a), std::sin(a)} * 1.0;
    const Vec2 p0 = w.robot.base.position();
    const double s = contact_fraction_oracle(w, p0, c.base_velocity * 3.0);
    const World w1 = step(w, 3.0, c);
    const Vec2 expected = p0 + c.base_velocity * 3.0 * s;
    EXPECT_NEAR(w1.robot.base.x, expected.x, 1e-6);
    EXPECT_NEAR(w1.robot.base.y, expected.y, 1e-6);
    EXPECT_EQ(!w1.events.empty() && w1.events[0].kind == "bumper", s < 1.0);
    EXPECT_FALSE(footprint_collides(w1, w1.robot.base.position(), w.config.robot_radius));
  }
}

TEST(Lidar, EmptyRoomRangesAreDistancesToWalls) {
  const World w = load_arena(kRoom);
  const Scan s = lidar_scan(w);
  ASSERT_EQ(s.angles.size(), s.ranges.size());
  // inner wall faces, walls are 0.1 m thick
  const double xmin = 0.05, xmax = 3.95, ymin = 0.05, ymax = 2.95;
  for (std::size_t i = 0; i < s.ranges.size(); ++i) {
    const double a = s.angles[i];
    const double dx = std::cos(a), dy = std::sin(a);
    double t = std::numeric_limits<double>::infinity();
    if (dx > 1e-12) t = std::min(t, (xmax - 2.0) / dx);
    if (dx < -1e-12) t = std::min(t, (xmin - 2.0) / dx);
    if (dy > 1e-12) t = std::min(t, (ymax - 1.5) / dy);
    if (dy < -1e-12) t = std::min(t, (ymin - 1.5) / dy);
    EXPECT_NEAR(s.ranges[i], std::min(t, s.max_range), 1e-9) << "beam " << i;
    EXPECT_GT(s.ranges[i], 0.0);
  }
}

TEST(Lidar, LegsAppearAsTwoShortClusters) {
  World w = load_arena("arena 10 10\nrobot 2 5 0\nwall 6 0 6 10 2\nperson op color 1 2 3 waypoints 0,2.5,5 1,3,5\n");
  w = step(w, 1.0, zero());  // person now at (3,5), facing +x; legs at y = 5 +- 0.1
  const Scan s = lidar_scan(w);
  int near_left = 0, near_right = 0, far_between = 0;
  for (std::size_t i = 0; i < s.ranges.size(); ++i) {
    const double a = s.angles[i];
    if (std::abs(a - std::atan2(0.1, 1.0)) < 0.01 && s.ranges[i] < 1.0) ++near_left;
    if (std::abs(a + std::atan2(0.1, 1.0)) < 0.01 && s.ranges[i] < 1.0) ++near_right;
    if (std::abs(a) < 0.005 && std::abs(s.ranges[i] - 3.95) < 1e-9) ++far_between;
  }
  EXPECT_GT(near_left, 0);
  EXPECT_GT(near_right, 0);
  EXPECT_GT(far_between, 0);
  // leg surface nearest point along the beam through the leg center
  const Vec2 leg{1.0, 0.1};
  const double a = std::atan2(leg.y, leg.x);
  std::size_t best = 0;
  for (std::size_t i = 0; i < s.angles.size(); ++i)
    if (std::abs(s.angles[i] - a) < std::abs(s.angles[best] - a)) best = i;
  const double beam = s.angles[best];
  const Vec2 dir{std::cos(beam), std::sin(beam)};
  const double proj = leg.dot(dir);
  const double perp2 = leg.dot(leg) - proj * proj;
  EXPECT_NEAR(s.ranges[best], proj - std::sqrt(0.07 * 0.07 - perp2), 1e-9);
}

TEST(Lidar, LowCarriedBagBlocksForwardSectorUntilRaised) {
  World w = load_arena("arena 10 10\nrobot 2 5 0\nobject trash_bag 8 8 0.2 0.25 0.25 0.35 graspable sticky\n");
  w.robot.arm[kArmFlex] = -std::numbers::pi / 2;
  w.robot.arm[kWristFlex] = -std::numbers::pi / 2;
  w.robot.arm[kLift] = 0.25;  // gripper at 0.39 m, bag bottom at 0.04 m
  w = handover(w, 0);
  w = step(w, 0.1, zero());
  EXPECT_LT(w.robot.carry_height, w.config.scanner_height);
  const Scan low = lidar_scan(w);
  const double bag_near_face = tcp_position(w).x - 2.0 - 0.125;
  std::size_t mid = low.angles.size() / 2;
  EXPECT_NEAR(low.ranges[mid], bag_near_face, 1e-9);

  Commands raise;
  raise.joint_velocities[kLift] = 1.0;
  w = step(w, 0.4, raise);
  EXPECT_GT(w.robot.carry_height, w.config.scanner_height);
  const Scan high = lidar_scan(w);
  EXPECT_DOUBLE_EQ(high.ranges[mid], high.max_range);
}

TEST(Camera, ObjectBehindWallIsNotDetected) {
  const World w = load_arena(
      "arena 10 10\nrobot 2 5 0\nwall 3 4 3 6 2\nobject cup 4 5 1.1 0.1 0.1 0.1\nobject bowl 2.8 3.0 1.1 0.1 0.1 0.1\n");
  const auto dets = camera_detect(w, Camera::head);
  for (const auto& d : dets) EXPECT_NE(d.class_label, "cup");
}

TEST(Camera, CenteredObjectInHandCameraProjectsToImageCenter) {
  World w = load_arena("arena 10 10\nrobot 2 5 0\nobject lid 2.485 5 0.2 0.1 0.1 0.02\n");
  w.robot.arm[kArmFlex] = -std::numbers::pi / 2;
  w.robot.arm[kWristFlex] = -std::numbers::pi / 2;
  w.robot.arm[kLift] = 0.6;
  w.rng_seed = 11;
  const auto dets = camera_detect(w, Camera::hand);
  ASSERT_EQ(dets.size(), 1u);
  const Vec2 c = dets[0].bbox_2d.center();
  const double depth = tcp_position(w).z - 0.2;
  const double ppm = 320.0 / depth;
  const double bound = 5 * w.config.hand_noise_sigma * ppm;
  EXPECT_NEAR(c.x, 320.0, bound);
  EXPECT_NEAR(c.y, 240.0, bound);
  EXPECT_GE(dets[0].bbox_2d.x0, 0.0);
  EXPECT_LE(dets[0].bbox_2d.x1, 640.0);
}

TEST(Camera, DeterministicForSeedAndClock) {
  World w = load_arena("arena 10 10\nrobot 2 5 0\nobject cup 4 5 1.0 0.1 0.1 0.1\nobject can 4 5.4 1.0 0.1 0.1 0.1\n");
  w.rng_seed = 5;
  const auto a = camera_detect(w, Camera::head);
  const auto b = camera_detect(w, Camera::head);
  ASSERT_EQ(a.size(), 2u);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].center_3d, b[i].center_3d);
  w.rng_seed = 6;
  const auto c = camera_detect(w, Camera::head);
  EXPECT_NE(a[0].center_3d, c[0].center_3d);
}

TEST(Camera, OcclusionSoundnessOnRandomWorlds) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.5, 9.5), h(0.1, 1.6), s(0.2, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    World w = load_arena("arena 10 10\nrobot 5 5 0\n");
    w.robot.base.theta = u(rng);
    for (int b = 0; b < 6; ++b) {
      const Vec3 c{u(rng), u(rng), h(rng)};
      if ((c.xy() - Vec2{5, 5}).norm() < 1.0) continue;
      w.static_boxes.push_back({"box", Box3::from_center(c, {s(rng), s(rng), s(rng)})});
    }
    for (int o = 0; o < 10; ++o) {
      SimObject obj;
      obj.id = o;
      obj.class_label = "thing";
      obj.aabb = Box3::from_center({u(rng), u(rng), h(rng)}, {0.1, 0.1, 0.1});
      w.objects.push_back(obj);
    }
    const CameraPose cam = camera_pose(w, Camera::head);
    for (const auto& d : camera_detect(w, Camera::head)) {
      const Vec3 center = w.objects[d.source_id].aabb.center();
      for (const auto& b : w.static_boxes) EXPECT_FALSE(segment_intersects_box(cam.position, center, b.box));
    }
  }
}

TEST(Skeleton, EmptyWhenNobodyInFrustum) {
  const World w = load_arena("arena 10 10\nrobot 2 5 3.14159\nperson a color 1 1 1 waypoints 0,5,5\n");
  EXPECT_TRUE(skeleton_detect(w).empty());
}

TEST(Skeleton, WavingWristMovesBetweenFramesAndDrinkFlagEchoes) {
  World w = load_arena("arena 10 10\nrobot 2 5 0\nperson a color 1 1 1 drink wave 0 10 waypoints 0,5,5\n");
  const auto f0 = skeleton_detect(w);
  w = step(w, 0.1, zero());
  const auto f1 = skeleton_detect(w);
  ASSERT_EQ(f0.size(), 1u);
  ASSERT_EQ(f1.size(), 1u);
  EXPECT_TRUE(f0[0].has_drink);
  const SimPerson& p = w.people[0];
  // oracle: wave model evaluated directly
  const double s0 = 0.3 * std::sin(2 * std::numbers::pi * 2.0 * 0.0);
  const double s1 = 0.3 * std::sin(2 * std::numbers::pi * 2.0 * 0.1);
  EXPECT_NEAR((f1[0].wrist - f0[0].wrist).norm(), std::abs(s1 - s0), 1e-12);
  EXPECT_TRUE(p.waving_at(0.1));
}

TEST(Skeleton, StaticWristOutsideWaveIntervals) {
  World w = load_arena("arena 10 10\nrobot 2 5 0\nperson a color 1 1 1 wave 5 6 waypoints 0,5,5\n");
  const auto f0 = skeleton_detect(w);
  w = step(w, 0.1, zero());
  const auto f1 = skeleton_detect(w);
  EXPECT_EQ(f0[0].wrist, f1[0].wrist);
}

TEST(Gripper, StickyLoadNeedsBidirectionalRoll) {
  World w = load_arena("arena 10 10\nrobot 2 5 0\nobject trash_bag 8 8 0.2 0.25 0.25 0.35 graspable sticky\n");
  w.robot.arm[kArmFlex] = -std::numbers::pi / 2;
  w.robot.arm[kWristFlex] = -std::numbers::pi / 2;
  w.robot.arm[kLift] = 0.3;
  w.robot.arm[kWristRoll] = 0.5;
  w = handover(w, 0);
  Commands open;
  open.gripper = GripperCommand::open;
  w = step(w, 0.1, open);
  EXPECT_TRUE(w.robot.held_object.has_value());
  Commands roll;
  roll.joint_velocities[kWristRoll] = 1.0;
  for (int i = 0; i < 5; ++i) w = step(w, 0.1, roll);
  EXPECT_TRUE(w.robot.held_object.has_value());
  roll.joint_velocities[kWristRoll] = -1.0;
  for (int i = 0; i < 10 && w.robot.held_object; ++i) w = step(w, 0.1, roll);
  EXPECT_FALSE(w.robot.held_object.has_value());
  EXPECT_NEAR(w.objects[0].aabb.min.z, 0.0, 1e-9);  // dropped to the floor
}

TEST(Gripper, CloseGraspsTopmostObjectWithinReach) {
  World w = load_arena(
      "arena 10 10\nrobot 2 5 0\nobject trash_can 2.485 5 0.25 0.3 0.3 0.5\n"
      "object trash_bag 2.485 5 0.3 0.25 0.25 0.38 graspable sticky\nobject lid 2.485 5 0.515 0.32 0.32 0.03 graspable\n");
  w.robot.arm[kArmFlex] = -std::numbers::pi / 2;
  w.robot.arm[kWristFlex] = -std::numbers::pi / 2;
  w.robot.arm[kLift] = 0.53 - 0.14;
  Commands close;
  close.gripper = GripperCommand::close;
  w = step(w, 0.1, close);
  ASSERT_TRUE(w.robot.held_object.has_value());
  EXPECT_EQ(w.objects[*w.robot.held_object].class_label, "lid");
}

TEST(Determinism, IdenticalRunsGiveIdenticalWorlds) {
  auto run = [] {
    World w = load_arena(
        "arena 10 10\nrobot 2 5 0\nwall 6 0 6 10 2\nobject cup 4 5 1.0 0.1 0.1 0.1\nperson a color 9 9 9 wave 0 5 waypoints 0,4,4 5,5,6\n");
    w.rng_seed = 42;
    std::vector<double> trace;
    Commands c;
    c.base_velocity = {0.4, 0.1};
    c.angular_velocity = 0.2;
    for (int i = 0; i < 30; ++i) {
      w = step(w, 0.1, c);
      for (const auto& d : camera_detect(w, Camera::head)) trace.push_back(d.center_3d.x);
      for (double r : lidar_scan(w).ranges) trace.push_back(r);
      for (const auto& s : skeleton_detect(w)) trace.push_back(s.wrist.z + s.torso_samples[0].r);
    }
    trace.push_back(w.robot.base.x);
    trace.push_back(w.clock);
    return trace;
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]));
}

TEST(Determinism, ClockStrictlyIncreases) {
  World w = load_arena(kRoom);
  double last = w.clock;
  for (int i = 0; i < 50; ++i) {
    w = step(w, 0.1, zero());
    EXPECT_GT(w.clock, last);
    EXPECT_NEAR(w.clock - last, 0.1, 1e-12);
    last = w.clock;
  }
}
