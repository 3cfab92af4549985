#include "foothold/criteria.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace foothold;
using namespace oracle;

TEST(Kinematic, HipAboveCenter) {
  const RobotGeometry g;
  const auto w = make_window([](int, int) { return 0.0; });
  FootQuery q;
  q.hip_touchdown = Vec3(0.0, 0.0, 0.60);
  const auto k = eval_kinematic(w, q, g);
  EXPECT_TRUE(k[(W / 2) * W + W / 2]);
  // Cell 0.40 m away horizontally is beyond r_max.
  HeightmapWindow wide = w;
  wide.resolution = 0.025;
  const auto k2 = eval_kinematic(wide, q, g);
  EXPECT_NEAR(std::hypot(0.60, 16 * 0.025), 0.721, 1e-3);
  EXPECT_FALSE(k2[(W / 2) * W + 0]);
  EXPECT_EQ(k, oracle_kinematic(w, q.hip_touchdown, g.r_min, g.r_max));
}

TEST(Kinematic, HipTooHigh) {
  const auto w = make_window([](int, int) { return 0.0; });
  FootQuery q;
  q.hip_touchdown = Vec3(0.0, 0.0, 1.0);
  EXPECT_EQ(count_true(eval_kinematic(w, q, RobotGeometry{})), 0);
}

TEST(Kinematic, MatchesOracleOnRandomWindows) {
  std::mt19937_64 rng(3);
  const RobotGeometry g;
  for (int k = 0; k < 30; ++k) {
    const auto w = random_window(rng);
    const auto q = query_above_center(w, 0.45 + 0.01 * k);
    EXPECT_EQ(eval_kinematic(w, q, g), oracle_kinematic(w, q.hip_touchdown, g.r_min, g.r_max));
  }
}

TEST(Roughness, FlatIsSmooth) {
  const auto w = make_window([](int, int) { return 0.3; });
  EXPECT_EQ(count_true(eval_roughness(w, RobotGeometry{})), kWindowCells);
}

TEST(Roughness, SingleSpike) {
  const auto w = make_window([](int i, int j) { return i == 10 && j == 12 ? 0.10 : 0.0; });
  const auto r = eval_roughness(w, RobotGeometry{});
  EXPECT_FALSE(r[10 * W + 12]);
  for (int di = -1; di <= 1; ++di)
    for (int dj = -1; dj <= 1; ++dj)
      if (di || dj) EXPECT_TRUE(r[(10 + di) * W + 12 + dj]);
  EXPECT_EQ(count_true(r), kWindowCells - 1);
  EXPECT_EQ(r, oracle_roughness(w, 0.04, 2));
}

TEST(Roughness, StepEdgeBands) {
  const auto w = make_window([](int, int j) { return j >= 16 ? 0.10 : 0.0; });
  const auto r = eval_roughness(w, RobotGeometry{});
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) EXPECT_EQ(r[i * W + j], j != 15 && j != 16) << i << "," << j;
  EXPECT_EQ(r, oracle_roughness(w, 0.04, 2));
}

TEST(Roughness, MatchesOracleOnRandomWindows) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const auto w = random_window(rng);
    RobotGeometry g;
    g.roughness_h = 0.01 + 0.002 * k;
    g.roughness_kmin = 1 + k % 8;
    EXPECT_EQ(eval_roughness(w, g), oracle_roughness(w, g.roughness_h, g.roughness_kmin));
  }
}

TEST(Roughness, MonotoneInThreshold) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 40; ++k) {
    const auto w = random_window(rng);
    RobotGeometry lo, hi;
    lo.roughness_h = 0.02;
    hi.roughness_h = 0.02 + 0.003 * (k + 1);
    const auto a = eval_roughness(w, lo), b = eval_roughness(w, hi);
    for (int c = 0; c < kWindowCells; ++c)
      if (a[c]) EXPECT_TRUE(b[c]);
  }
}

TEST(Frontal, FlatAllClear) {
  const auto w = make_window([](int, int) { return 0.0; });
  const auto q = query_above_center(w, 0.55);
  EXPECT_EQ(count_true(eval_frontal_collision(w, q, RobotGeometry{})), kWindowCells);
}

TEST(Frontal, WallShadowsCellsBehindIt) {
  // 0.12 m thick, 0.30 m tall wall across the window, lift-off in front of it.
  const auto w = make_window([](int, int j) { return j >= 16 && j < 22 ? 0.30 : 0.0; });
  FootQuery q = query_above_center(w, 0.55);
  q.foot_liftoff = Vec3(cell_xy(w, 16, 4).x(), 0.0, 0.0);
  const RobotGeometry g;
  const auto f = eval_frontal_collision(w, q, g);
  for (int i = 0; i < W; ++i)
    for (int j = 22; j < W; ++j) EXPECT_FALSE(f[i * W + j]) << i << "," << j;
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) EXPECT_EQ(f[i * W + j], oracle_frontal_cell(w, q, g, i, j));
}

TEST(Frontal, LowStepIsCleared) {
  const auto w = make_window([](int, int j) { return j >= 16 ? 0.05 : 0.0; });
  FootQuery q = query_above_center(w, 0.55);
  q.foot_liftoff = Vec3(cell_xy(w, 16, 4).x(), 0.0, 0.0);
  const RobotGeometry g;
  const auto f = eval_frontal_collision(w, q, g);
  EXPECT_TRUE(f[16 * W + 24]);
  EXPECT_TRUE(oracle_frontal_cell(w, q, g, 16, 24));
  // The worst sample keeps more than the foot radius of clearance.
  const Vec3 target(cell_xy(w, 16, 24).x(), 0.0, 0.05);
  double worst = 1e9;
  for (int k = 1; k <= g.n_phase_samples; ++k) {
    const Vec3 p = path_point(q.foot_liftoff, target, g.swing_apex, k / (g.n_phase_samples + 1.0));
    worst = std::min(worst, p.z() - terrain_at(w, p.x(), p.y()));
  }
  EXPECT_GT(worst, g.foot_radius);
}

TEST(Frontal, MatchesOracleOnRandomWindows) {
  std::mt19937_64 rng(7);
  const RobotGeometry g;
  for (int k = 0; k < 20; ++k) {
    const auto w = random_window(rng);
    const auto q = query_above_center(w, 0.55, 0.1 + 0.01 * k);
    const auto f = eval_frontal_collision(w, q, g);
    for (int i = 0; i < W; ++i)
      for (int j = 0; j < W; ++j) ASSERT_EQ(f[i * W + j], oracle_frontal_cell(w, q, g, i, j)) << k;
  }
}

TEST(LegCollision, FlatCrouchAllClear) {
  const auto w = make_window([](int, int) { return 0.0; });
  const auto q = query_above_center(w, 0.55);
  const RobotGeometry g;
  const auto kin = eval_kinematic(w, q, g);
  const auto leg = eval_leg_collision(w, q, g);
  for (int c = 0; c < kWindowCells; ++c)
    if (kin[c]) EXPECT_TRUE(leg[c]) << c;
}

// The flat-ground reduction only holds near nominal height: in a deep crouch a
// forward reach puts the backward-bent knee low, and the shin near the foot
// comes within the collision margin of the ground.
TEST(LegCollision, DeepCrouchRejectsForwardReach) {
  const auto w = make_window([](int, int) { return 0.0; });
  const auto q = query_above_center(w, 0.40);
  const RobotGeometry g;
  const auto kin = eval_kinematic(w, q, g);
  const auto leg = eval_leg_collision(w, q, g);
  int rejected = 0;
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) {
      const int c = i * W + j;
      ASSERT_EQ(leg[c], oracle_leg_cell(w, q, g, i, j)) << i << " " << j;
      rejected += kin[c] && !leg[c];
    }
  EXPECT_GT(rejected, 0);
}

TEST(LegCollision, ShinClipsRiserBehindFoot) {
  // Hip over a 0.40 m ledge, candidate at the bottom just past its edge: the
  // backward-bent knee drops below the ledge and the shin cuts the riser.
  const auto w = make_window([](int, int j) { return j < 20 ? 0.40 : 0.0; });
  FootQuery q;
  q.hip_touchdown = Vec3(0.0, 0.0, 0.55);
  q.foot_liftoff = Vec3(-0.1, 0.0, 0.40);
  const RobotGeometry g;
  const int j = 21;
  const Vec3 foot(cell_xy(w, 16, j).x(), 0.0, 0.0);
  Vec3 knee;
  ASSERT_TRUE(oracle_knee(q.hip_touchdown, foot, g.l_upper, g.l_lower, 0.0, knee));
  EXPECT_LT(knee.x(), foot.x());
  EXPECT_LT(knee.z(), 0.40);
  EXPECT_FALSE(eval_leg_collision(w, q, g)[16 * W + j]);
  EXPECT_FALSE(oracle_leg_cell(w, q, g, 16, j));
}

TEST(LegCollision, OutOfReachIsUnsafe) {
  const auto w = make_window([](int, int) { return 0.0; });
  FootQuery q;
  q.hip_touchdown = Vec3(0.0, 0.0, 0.70);
  const RobotGeometry g;
  const auto leg = eval_leg_collision(w, q, g);
  // Corner cell: sqrt(0.32^2 + 0.32^2 + 0.7^2) > 0.74.
  EXPECT_GT(std::hypot(0.32, 0.32, 0.70), g.l_upper + g.l_lower);
  EXPECT_FALSE(leg[0]);
}

TEST(LegCollision, MatchesOracleOnRandomWindows) {
  std::mt19937_64 rng(8);
  const RobotGeometry g;
  for (int k = 0; k < 12; ++k) {
    const auto w = random_window(rng);
    auto q = query_above_center(w, 0.50 + 0.01 * k);
    q.heading = 0.3 * (k - 6);
    if (k % 2) {
      q.stance_base_heights.assign(g.n_phase_samples, q.hip_touchdown.z());
      for (int s = 0; s < g.n_phase_samples; ++s) q.stance_base_heights[s] -= 0.005 * s;
    }
    const auto leg = eval_leg_collision(w, q, g);
    int mismatches = 0;
    for (int i = 0; i < W; ++i)
      for (int j = 0; j < W; ++j) mismatches += leg[i * W + j] != oracle_leg_cell(w, q, g, i, j);
    // Different but equivalent arithmetic; allow the odd tie at a tolerance boundary.
    EXPECT_LE(mismatches, 2) << k;
  }
}

TEST(LegCollision, RejectsWrongSampleCount) {
  const auto w = make_window([](int, int) { return 0.0; });
  FootQuery q = query_above_center(w, 0.55);
  q.stance_base_heights = {0.5, 0.5};
  EXPECT_THROW(eval_leg_collision(w, q, RobotGeometry{}), InvalidArgument);
}

TEST(Evaluate, FlatEqualsAnnulus) {
  const auto w = make_window([](int, int) { return 0.0; });
  const auto q = query_above_center(w, 0.55);
  const RobotGeometry g;
  const auto m = evaluate(w, q, g);
  EXPECT_EQ(m.safe, oracle_kinematic(w, q.hip_touchdown, g.r_min, g.r_max));
  EXPECT_GT(m.safe_count(), 0);
  EXPECT_GE(m.eval_time_us, 0.0);
}

TEST(Evaluate, StairsExcludeRiserBandsAndShadow) {
  const auto w = make_window([](int, int j) { return j >= 18 ? 0.15 : 0.0; });
  FootQuery q = query_above_center(w, 0.55);
  q.foot_liftoff = Vec3(cell_xy(w, 16, 2).x(), 0.0, 0.0);
  const RobotGeometry g;
  const auto m = evaluate(w, q, g);
  const auto rough = oracle_roughness(w, g.roughness_h, g.roughness_kmin);
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) {
      const int c = i * W + j;
      EXPECT_EQ(m.roughness[c], rough[c]);
      EXPECT_EQ(m.frontal[c], oracle_frontal_cell(w, q, g, i, j));
      if (j == 17 || j == 18) EXPECT_FALSE(m.safe[c]);
    }
}

TEST(Evaluate, EmptyReachMeansEmptyMask) {
  const auto w = make_window([](int i, int j) { return 0.01 * ((i * 7 + j * 3) % 5); });
  FootQuery q = query_above_center(w, 1.2);
  const auto m = evaluate(w, q, RobotGeometry{});
  EXPECT_EQ(count_true(m.kinematic), 0);
  EXPECT_EQ(m.safe_count(), 0);
}

TEST(Evaluate, ConjunctionAndDeterminism) {
  std::mt19937_64 rng(9);
  const RobotGeometry g;
  for (int k = 0; k < 20; ++k) {
    const auto w = random_window(rng);
    const auto q = query_above_center(w, 0.5 + 0.005 * k);
    const auto a = evaluate(w, q, g), b = evaluate(w, q, g);
    for (int c = 0; c < kWindowCells; ++c)
      ASSERT_EQ(a.safe[c], a.kinematic[c] && a.roughness[c] && a.frontal[c] && a.leg[c]);
    EXPECT_EQ(a.safe, b.safe);
    EXPECT_EQ(a.leg, b.leg);
  }
}

TEST(Evaluate, TranslationEquivariant) {
  std::mt19937_64 rng(10);
  const RobotGeometry g;
  for (int k = 0; k < 10; ++k) {
    auto w = random_window(rng);
    const auto q = query_above_center(w, 0.55);
    const Vec2 d(0.5 * (k - 5), 0.25 * k);
    auto ws = w;
    ws.center_xy += d;
    auto qs = q;
    qs.hip_touchdown.head<2>() += d;
    qs.foot_liftoff.head<2>() += d;
    const auto a = evaluate(w, q, g), b = evaluate(ws, qs, g);
    int diff = 0;
    for (int c = 0; c < kWindowCells; ++c) diff += a.safe[c] != b.safe[c];
    EXPECT_EQ(diff, 0) << k;
  }
}

TEST(Geometry, Validation) {
  RobotGeometry g;
  g.r_max = 0.8;
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = RobotGeometry{};
  g.roughness_kmin = 9;
  EXPECT_THROW(g.validate(), InvalidArgument);
  g = RobotGeometry{};
  g.n_phase_samples = 3;
  EXPECT_THROW(g.validate(), InvalidArgument);
  EXPECT_NO_THROW(RobotGeometry{}.validate());
}
