#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "homebot/person_tracking.hpp"

using namespace homebot;

namespace {

ColorHistogram hist(int hb, int sb, std::vector<double> bins) { return {hb, sb, std::move(bins)}; }

ColorHistogram random_hist(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ColorHistogram h{8, 8, std::vector<double>(64)};
  double s = 0.0;
  for (auto& b : h.bins) {
    b = u(rng) < 0.7 ? 0.0 : u(rng);
    s += b;
  }
  if (s == 0.0) {
    h.bins[0] = 1.0;
    s = 1.0;
  }
  for (auto& b : h.bins) b /= s;
  return h;
}

Skeleton skel(const std::string& id, Vec2 at, Rgb color, int samples = 16) {
  Skeleton s;
  s.person_id = id;
  s.torso = {at.x, at.y, 1.1};
  s.torso_samples.assign(samples, color);
  return s;
}

std::vector<ArmFrame> sinusoid(double amplitude, double hz, double fps, int frames, Vec3 body_velocity = {}) {
  std::vector<ArmFrame> out;
  for (int i = 0; i < frames; ++i) {
    const double t = i / fps;
    const Vec3 drift = body_velocity * t;
    const Vec3 shoulder = Vec3{2.0, 1.0, 1.4} + drift;
    out.push_back({shoulder, shoulder + Vec3{0.0, amplitude * std::sin(2 * std::numbers::pi * hz * t), 0.35}});
  }
  return out;
}

}  // namespace

TEST(Legs, EmptyRoomHasNoCandidates) {
  const World w = load_arena("arena 10 10\nrobot 5 5 0\n");
  EXPECT_TRUE(detect_legs(lidar_scan(w)).empty());
}

TEST(Legs, TwoLegsOneMeterAheadMergeToOneCandidate) {
  const World w = load_arena("arena 10 10\nrobot 2 5 0\nperson p color 200 0 0 waypoints 0,3,5\n");
  // the person faces +x, so its legs sit at (3, 5 +- 0.1)
  const auto c = detect_legs(lidar_scan(w));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].center.x, 1.0, 0.03);
  EXPECT_NEAR(c[0].center.y, 0.0, 1e-6);
  EXPECT_GE(c[0].width, 0.05);
  EXPECT_LE(c[0].width, 0.25);
}

TEST(Legs, PersonCenterMatchesPlacedPosition) {
  // the person is placed at a known position, so the paired midpoint is known by construction
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(1.0, 5.0), uy(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec2 p{2.0 + ux(rng), 5.0 + uy(rng)};
    World w = load_arena(fmt::format("arena 10 10\nrobot 2 5 0\nperson p color 0 0 200 waypoints 0,{},{}\n", p.x, p.y));
    const auto c = detect_legs(lidar_scan(w));
    ASSERT_EQ(c.size(), 1u) << trial;
    const Vec2 expect = p - Vec2{2.0, 5.0};
    EXPECT_LT((c[0].center - expect).norm(), 0.03) << trial;
  }
}

TEST(Legs, WallIsRejectedByWidthGate) {
  const World w = load_arena("arena 10 10\nwall 4 0 4 10 2\nrobot 2 5 0\n");
  EXPECT_TRUE(detect_legs(lidar_scan(w)).empty());
}

TEST(Track, NearestWithinGateUpdates) {
  PersonTrack t;
  t.position = {1, 0};
  const std::vector<Vec2> cands{{3, 0}, {1.1, 0}};
  const auto u = associate_track(t, cands, 0.1);
  EXPECT_EQ(u.position, (Vec2{1.1, 0}));
  EXPECT_EQ(u.misses, 0);
  EXPECT_EQ(u.state, TrackState::tracking);
  EXPECT_DOUBLE_EQ(u.last_update, 0.1);
}

TEST(Track, MissesFlipToLostAfterThree) {
  PersonTrack t;
  t.position = {1, 0};
  t = associate_track(t, {}, 0.1);
  EXPECT_EQ(t.misses, 1);
  EXPECT_EQ(t.state, TrackState::tracking);
  const std::vector<Vec2> far{{5, 5}};
  t = associate_track(t, far, 0.2);
  EXPECT_EQ(t.state, TrackState::tracking);
  t = associate_track(t, {}, 0.3);
  EXPECT_EQ(t.state, TrackState::lost);
  EXPECT_EQ(track_line(t, 0.3), "track t=0.30 state=lost 1.000 0.000");
  const std::vector<Vec2> back{{1.2, 0}};
  t = associate_track(t, back, 0.4);
  EXPECT_EQ(t.state, TrackState::tracking);
}

TEST(Color, IdenticalDisjointAndHalfOverlap) {
  const auto a = hist(2, 2, {0.5, 0.5, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(color_similarity(a, a), 1.0);
  EXPECT_DOUBLE_EQ(color_similarity(a, hist(2, 2, {0, 0, 0.5, 0.5})), 0.0);
  // min(.5,.5) + min(.5,0) + min(0,.5) + min(0,0)
  EXPECT_DOUBLE_EQ(color_similarity(a, hist(2, 2, {0.5, 0.0, 0.5, 0.0})), 0.5);
  EXPECT_THROW(color_similarity(a, hist(4, 1, {1, 0, 0, 0})), std::invalid_argument);
}

TEST(Color, PropertiesOverRandomHistograms) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_hist(rng), b = random_hist(rng);
    EXPECT_NEAR(a.sum(), 1.0, 1e-9);
    EXPECT_NEAR(color_similarity(a, a), 1.0, 1e-9);
    const double s = color_similarity(a, b);
    EXPECT_EQ(s, color_similarity(b, a));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Color, HistogramFromSamplesIsNormalized) {
  const std::vector<Rgb> px{{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {128, 128, 128}};
  const auto h = make_histogram(px);
  EXPECT_NEAR(h.sum(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(h.bins[0 * 8 + 7], 0.25);  // red, saturated
  EXPECT_DOUBLE_EQ(h.bins[2 * 8 + 7], 0.25);  // green at 120 deg
  EXPECT_DOUBLE_EQ(h.bins[5 * 8 + 7], 0.25);  // blue at 240 deg
  EXPECT_DOUBLE_EQ(h.bins[0], 0.25);          // gray
  EXPECT_THROW(make_histogram(std::vector<Rgb>{}), std::invalid_argument);
}

TEST(Reid, ExactMatchBelowThresholdAndTie) {
  const Rgb red{220, 20, 20}, blue{20, 20, 220};
  const auto target = make_histogram(std::vector<Rgb>{red});
  std::vector<Skeleton> sk{skel("b", {3, 0}, blue), skel("a", {4, 0}, red)};
  EXPECT_EQ(reidentify(target, sk, 0.6, {0, 0}), "a");
  std::vector<Skeleton> none{skel("b", {3, 0}, blue)};
  EXPECT_FALSE(reidentify(target, none, 0.6, {0, 0}));
  std::vector<Skeleton> tie{skel("far", {5, 0}, red), skel("near", {2, 1}, red)};
  EXPECT_EQ(reidentify(target, tie, 0.6, {0, 0}), "near");
  EXPECT_FALSE(reidentify(target, {}, 0.6, {0, 0}));
}

TEST(Wave, SinusoidDetectedStaticAndWalkingRejected) {
  EXPECT_TRUE(detect_wave(sinusoid(0.3, 2.0, 10.0, 5), 0.1));
  EXPECT_FALSE(detect_wave(sinusoid(0.0, 2.0, 10.0, 5), 0.1));
  EXPECT_FALSE(detect_wave(sinusoid(0.0, 2.0, 10.0, 20, {1.2, 0.4, 0.0}), 0.1));
  EXPECT_THROW(detect_wave(sinusoid(0.3, 2.0, 10.0, 4), 0.1), std::invalid_argument);
}

TEST(Wave, EveryPhaseOfTheSinusoidIsDetected) {
  // frame-to-frame speed 2A|sin(pi f dt) cos(.)|/dt; phases 72 deg apart leave at most one slow frame
  for (int k = 0; k < 100; ++k) {
    auto frames = sinusoid(0.3, 2.0, 10.0, 5 + k);
    EXPECT_TRUE(detect_wave(frames, 0.1)) << k;
  }
}

TEST(Wave, InvariantToWholeBodyTranslation) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> v(-2.0, 2.0), amp(0.0, 0.4), hz(0.2, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = amp(rng), f = hz(rng);
    const auto still = sinusoid(a, f, 10.0, 12);
    const auto moving = sinusoid(a, f, 10.0, 12, {v(rng), v(rng), 0.0});
    EXPECT_EQ(detect_wave(still, 0.1), detect_wave(moving, 0.1)) << trial;
  }
}

TEST(Wave, SimulatedSkeletonStream) {
  World w = load_arena(
      "arena 10 10\nrobot 2 5 0\n"
      "person waver color 0 200 0 wave 0 100 waypoints 0,5,4.5\n"
      "person idle color 0 0 200 waypoints 0,5,5.5\n");
  std::map<std::string, std::vector<ArmFrame>> hist;
  for (int i = 0; i < 6; ++i) {
    for (const auto& s : skeleton_detect(w)) hist[s.person_id].push_back(arm_frame(s));
    w = step(w, 0.1, {});
  }
  ASSERT_EQ(hist.size(), 2u);
  EXPECT_TRUE(detect_wave(hist["waver"], 0.1));
  EXPECT_FALSE(detect_wave(hist["idle"], 0.1));
}
