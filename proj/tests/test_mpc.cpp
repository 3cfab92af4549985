#include "foothold/mpc.hpp"
#include "foothold/sim.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace foothold;

namespace {

const std::array<Vec3, kNumLegs> kFeet{Vec3(0.44, 0.20, 0.0), Vec3(0.44, -0.20, 0.0), Vec3(-0.44, 0.20, 0.0),
                                       Vec3(-0.44, -0.20, 0.0)};

MpcInput standing_input(const MpcParams& p, const SrbdState& s) {
  MpcInput in;
  in.state = s;
  in.x_ref.assign(p.horizon, s.stacked());
  in.stance.assign(p.horizon, {true, true, true, true});
  in.feet.assign(p.horizon, kFeet);
  return in;
}

SrbdState standing_state() {
  SrbdState s;
  s.p = Vec3(0.0, 0.0, 0.55);
  return s;
}

// LF/RH in stance for the first half of the horizon, RF/LH afterwards; RF's
// touchdown is the decision variable.
MpcInput trot_input(const MpcParams& p, const std::vector<Halfspace>& region, const Vec2& nominal) {
  MpcInput in = standing_input(p, standing_state());
  const int td = p.horizon / 2;
  for (int k = 0; k < p.horizon; ++k) {
    const bool first = k < td;
    in.stance[k] = {first, !first, !first, first};
    in.feet[k][RF] = Vec3(nominal.x(), nominal.y(), 0.0);
  }
  FootholdDecision fd;
  fd.leg = RF;
  fd.touchdown_step = td;
  fd.halfspaces = region;
  fd.nominal_xy = nominal;
  in.footholds.push_back(fd);
  return in;
}

double sum_fz(const MpcSolution& s, int k = 0) {
  double f = 0.0;
  for (const auto& v : s.forces[k]) f += v.z();
  return f;
}

}  // namespace

TEST(Linearize, FreeFall) {
  MpcParams p;
  SrbdState s = standing_state();
  s.v = Vec3(0.1, 0.0, 0.2);
  const auto m = linearize_dynamics(0.0, s.p, {}, p);
  const Vec12 x1 = m.A * s.stacked() + m.g;
  EXPECT_NEAR(x1[5], 0.55 + 0.2 * 0.04, 1e-15);
  EXPECT_NEAR(x1[11] - s.v.z(), -0.3924, 1e-12);
  EXPECT_NEAR(x1[3], 0.1 * 0.04, 1e-15);
  EXPECT_EQ(m.B.cols(), 0);
}

TEST(Linearize, ZeroMomentArm) {
  MpcParams p;
  const Vec3 com(0.2, -0.1, 0.5);
  const auto m = linearize_dynamics(0.3, com, {com}, p);
  EXPECT_EQ(m.B.block(6, 0, 3, 3).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR((m.B.block(9, 0, 3, 3) - Mat3::Identity() * p.dt / p.mass).norm(), 0.0, 1e-15);
}

TEST(Linearize, TorqueFromForwardFoot) {
  MpcParams p;
  const Vec3 com(0.0, 0.0, 0.5);
  const Vec3 foot = com + Vec3(0.3, 0.0, -0.5);
  const auto m = linearize_dynamics(0.0, com, {foot}, p);
  const Vec3 f(0.0, 0.0, 1.0);
  // Angular-velocity increment times inertia over dt recovers the torque.
  const Vec3 torque = p.inertia_body * (m.B.block(6, 0, 3, 3) * f) / p.dt;
  const Vec3 r = foot - com;
  const Vec3 expected(r.y() * f.z() - r.z() * f.y(), r.z() * f.x() - r.x() * f.z(), r.x() * f.y() - r.y() * f.x());
  EXPECT_NEAR((expected - Vec3(0.0, -0.3, 0.0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((torque - expected).norm(), 0.0, 1e-12);
}

TEST(BuildQp, NoStanceAnywhereIsAnError) {
  MpcParams p;
  auto in = standing_input(p, standing_state());
  for (auto& s : in.stance) s = {false, false, false, false};
  EXPECT_THROW(build_qp(in, p), InvalidArgument);
}

TEST(BuildQp, VariableCount) {
  MpcParams p;
  auto with = trot_input(p, {}, Vec2(0.44, -0.2));
  auto without = with;
  without.footholds.clear();
  EXPECT_EQ(build_qp(with, p).qp.n(), 2 * 3 * p.horizon + 2);
  EXPECT_EQ(build_qp(without, p).qp.n(), 2 * 3 * p.horizon);
  ConvexMpc mpc(p);
  const auto s = mpc.solve(without);
  EXPECT_EQ(s.n_variables, 2 * 3 * p.horizon);
  EXPECT_TRUE(s.footholds.empty());
}

TEST(Solve, StandingEquilibrium) {
  MpcParams p;
  ConvexMpc mpc(p);
  const auto s = mpc.solve(standing_input(p, standing_state()));
  ASSERT_EQ(s.status, QpStatus::solved);
  const double mg = 140.0 * 9.81;
  EXPECT_NEAR(sum_fz(s), mg, 0.01 * mg);
  for (const auto& f : s.forces[0]) {
    EXPECT_NEAR(f.z(), mg / 4.0, 0.01 * mg / 4.0);
    EXPECT_LT(std::abs(f.x()) + std::abs(f.y()), 1.0);
  }
}

TEST(Solve, FrictionSaturates) {
  MpcParams p;
  for (int i : {0, 1, 2, 6, 7, 8}) p.q_weights[i] = 0.0;  // nothing competes with the lateral demand
  auto in = standing_input(p, standing_state());
  // Demand a lateral velocity of 3 m/s immediately: far beyond mu*g of acceleration.
  for (auto& x : in.x_ref) x[10] = 3.0;
  const MpcQp built = build_qp(in, p);
  QpSettings tight;
  tight.eps_pri = tight.eps_dua = 1e-7;
  const auto qs = AdmmSolver(tight).solve(built.qp);
  ASSERT_EQ(qs.status, QpStatus::solved);
  const auto r = kkt_residuals(built.qp, qs.x, qs.y);
  EXPECT_LT(r.primal, 1e-6);
  EXPECT_LT(r.dual, 1e-6);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 f = qs.x.segment<3>(built.force_col[0][leg]);
    EXPECT_NEAR(f.y(), p.mu * f.z(), 1e-4) << leg;
  }
}

TEST(Solve, RegionClipsFoothold) {
  MpcParams p;
  // Without attitude weights the foothold only pays W_p: a 1-D clamped quadratic.
  for (int i : {0, 1, 2, 6, 7, 8}) p.q_weights[i] = 0.0;
  p.qp.eps_pri = p.qp.eps_dua = 1e-8;
  ConvexMpc mpc(p);
  const auto s = mpc.solve(trot_input(p, {Halfspace{Vec2(1.0, 0.0), 0.1}}, Vec2(0.2, -0.2)));
  ASSERT_EQ(s.status, QpStatus::solved);
  ASSERT_EQ(s.footholds.size(), 1u);
  EXPECT_NEAR(s.footholds[0].position.x(), 0.1, 1e-6);
  EXPECT_NEAR(s.footholds[0].position.y(), -0.2, 1e-6);
}

TEST(Solve, LargeFootholdWeightProjectsNominal) {
  MpcParams p;
  p.foothold_weight = 1e6;
  p.qp.eps_pri = p.qp.eps_dua = 1e-7;
  // Triangle x >= 0.5, y <= -0.25, x - y <= 0.9.
  const std::vector<Halfspace> region{{Vec2(-1.0, 0.0), -0.5}, {Vec2(0.0, 1.0), -0.25},
                                      {Vec2(1.0, -1.0) / std::sqrt(2.0), 0.9 / std::sqrt(2.0)}};
  for (const Vec2 nominal : {Vec2(0.44, -0.2), Vec2(0.6, -0.1), Vec2(0.45, -0.35), Vec2(0.55, -0.3)}) {
    ConvexMpc mpc(p);
    const auto s = mpc.solve(trot_input(p, region, nominal));
    ASSERT_EQ(s.status, QpStatus::solved);
    // Projection by brute force over a fine grid of the region.
    Vec2 best = nominal;
    double bd = 1e300;
    for (int a = 0; a <= 800; ++a)
      for (int b = 0; b <= 800; ++b) {
        const Vec2 q(0.5 + 0.4 * a / 800.0, -0.65 + 0.4 * b / 800.0);
        bool in = true;
        for (const auto& h : region) in = in && h.normal.dot(q) <= h.offset + 1e-12;
        if (in && (q - nominal).norm() < bd) bd = (q - nominal).norm(), best = q;
      }
    EXPECT_LT((s.footholds[0].position.head<2>() - best).norm(), 2e-3) << nominal.transpose();
  }
}

TEST(Solve, LongerHorizonCostsMore) {
  // Stage costs are non-negative, so the N=2 optimum can only add to N=1.
  MpcParams p1, p2;
  p1.horizon = 1;
  p2.horizon = 2;
  p1.qp.eps_pri = p1.qp.eps_dua = p2.qp.eps_pri = p2.qp.eps_dua = 1e-8;
  SrbdState s = standing_state();
  s.v = Vec3(0.1, -0.05, 0.02);
  s.theta = Vec3(0.02, -0.01, 0.0);
  auto in1 = standing_input(p1, s), in2 = standing_input(p2, s);
  for (auto* in : {&in1, &in2})
    for (auto& x : in->x_ref) x.segment<3>(9).setZero(), x.segment<3>(0).setZero();
  const auto a = ConvexMpc(p1).solve(in1), b = ConvexMpc(p2).solve(in2);
  ASSERT_EQ(a.status, QpStatus::solved);
  ASSERT_EQ(b.status, QpStatus::solved);
  EXPECT_GE(b.cost, a.cost - 1e-6);
}

TEST(Solve, ForcesAndFootholdsFeasible) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MpcParams p;
  for (int k = 0; k < 20; ++k) {
    const std::vector<Halfspace> region{{Vec2(1.0, 0.0), 0.5 + 0.1 * u(rng)}, {Vec2(0.0, -1.0), 0.3 + 0.1 * u(rng)},
                                        {Vec2(-1.0, 0.0), -0.3 + 0.05 * u(rng)}};
    auto in = trot_input(p, region, Vec2(0.44 + 0.2 * u(rng), -0.2 + 0.1 * u(rng)));
    in.state.v = Vec3(0.5 * u(rng), 0.5 * u(rng), 0.1 * u(rng));
    in.state.theta = Vec3(0.1 * u(rng), 0.1 * u(rng), 0.3 * u(rng));
    in.state.omega = Vec3(0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng));
    ConvexMpc mpc(p);
    const auto s = mpc.solve(in);
    for (int step = 0; step < p.horizon; ++step)
      for (int leg = 0; leg < kNumLegs; ++leg) {
        const Vec3& f = s.forces[step][leg];
        if (!in.stance[step][leg]) {
          EXPECT_EQ(f, Vec3::Zero());
          continue;
        }
        EXPECT_LE(std::abs(f.x()), p.mu * f.z() + 1e-6);
        EXPECT_LE(std::abs(f.y()), p.mu * f.z() + 1e-6);
        EXPECT_GE(f.z(), p.fz_min - 1e-6);
        EXPECT_LE(f.z(), p.fz_max + 1e-6);
      }
    for (const auto& fh : s.footholds) {
      for (const auto& h : region) EXPECT_LE(h.normal.dot(fh.position.head<2>()), h.offset + 1e-6);
      EXPECT_LE((fh.position.head<2>() - in.footholds[0].nominal_xy).cwiseAbs().maxCoeff(), p.foothold_box + 1e-6);
    }
  }
}

TEST(Solve, FirstFailureThrowsLaterFailureDegrades) {
  MpcParams p;
  p.qp.max_iters = 400;
  const std::vector<Halfspace> impossible{{Vec2(1.0, 0.0), -5.0}};
  {
    ConvexMpc mpc(p);
    EXPECT_THROW(mpc.solve(trot_input(p, impossible, Vec2(0.44, -0.2))), std::runtime_error);
  }
  ConvexMpc mpc(p);
  const auto good = mpc.solve(standing_input(p, standing_state()));
  ASSERT_EQ(good.status, QpStatus::solved);
  const auto bad = mpc.solve(trot_input(p, impossible, Vec2(0.44, -0.2)));
  EXPECT_TRUE(bad.degraded);
  EXPECT_NE(bad.status, QpStatus::solved);
  EXPECT_TRUE(bad.footholds.empty());
  // Legs in swing now carry nothing.
  EXPECT_EQ(bad.forces[0][RF], Vec3::Zero());
  EXPECT_EQ(bad.forces[0][LH], Vec3::Zero());
}

TEST(Params, Validation) {
  MpcParams p;
  p.horizon = 0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = MpcParams{};
  p.inertia_body(0, 0) = -1.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = MpcParams{};
  p.mu = 0.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(ClosedLoop, TrotInPlaceHoldsHeight) {
  SimConfig cfg;
  cfg.terrain.kind = "flat";
  cfg.duration = 5.0;
  cfg.disturbance.reset();
  cfg.desired_velocity = Vec2::Zero();
  cfg.mode = ControllerMode::convex_region;
  const auto log = run_scenario(cfg);
  ASSERT_FALSE(log.fell);
  double worst = 0.0;
  for (const auto& s : log.samples) worst = std::max(worst, std::abs(s.p.z() - cfg.body_height));
  EXPECT_LT(worst, 0.02);
  std::printf("max |CoM height error| %.4f m\n", worst);
}
