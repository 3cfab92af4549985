#pragma once

#include "foothold/common.hpp"
#include "foothold/qp.hpp"
#include "foothold/regions.hpp"

#include <array>
#include <optional>
#include <vector>

namespace foothold {

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

/// Single-rigid-body state. omega is the angular velocity of the body
/// expressed in the world frame.
struct SrbdState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 theta = Vec3::Zero();  // roll, pitch, yaw
  Vec3 omega = Vec3::Zero();

  // Stacked as (theta, p, omega, v).
  Vec12 stacked() const {
    Vec12 x;
    x << theta, p, omega, v;
    return x;
  }
  static SrbdState from_stacked(const Vec12& x) {
    SrbdState s;
    s.theta = x.segment<3>(0);
    s.p = x.segment<3>(3);
    s.omega = x.segment<3>(6);
    s.v = x.segment<3>(9);
    return s;
  }
};

struct MpcParams {
  int horizon = 12;
  double dt = 0.04;
  double mass = 140.0;
  Mat3 inertia_body = Vec3(4.5, 11.0, 12.0).asDiagonal();
  double mu = 0.7;
  double fz_min = 0.0;
  double fz_max = 2500.0;
  Vec12 q_weights = (Vec12() << 550, 550, 200, 100, 100, 300, 1, 1, 1, 10, 10, 10).finished();
  double r_weight = 1e-5;
  double foothold_weight = 1e3;
  double foothold_box = 0.25;
  // Forces are only needed to the ADMM tolerance; skipping the final polish saves a KKT solve per tick.
  QpSettings qp = [] {
    QpSettings s;
    s.polish_converged = false;
    return s;
  }();

  void validate() const {
    if (horizon < 1) throw InvalidArgument("MPC horizon must be >= 1");
    if (!(dt > 0.0)) throw InvalidArgument("MPC dt must be positive");
    if (!(mass > 0.0)) throw InvalidArgument("MPC mass must be positive");
    if (Eigen::LLT<Mat3>(inertia_body).info() != Eigen::Success)
      throw InvalidArgument("MPC inertia must be positive definite");
    if (!(mu > 0.0)) throw InvalidArgument("MPC friction coefficient must be positive");
    if (!(fz_min >= 0.0) || !(fz_max > fz_min)) throw InvalidArgument("MPC requires 0 <= fz_min < fz_max");
  }
};

/// Discrete affine model x+ = A x + B f + g for one step.
struct DiscreteModel {
  Mat12 A = Mat12::Identity();
  Eigen::MatrixXd B;  // 12 x 3k, one block per stance foot in the given order
  Vec12 g = Vec12::Zero();
};

/// Forward-Euler discretization of the SRBD with rotation linearized about
/// the current yaw. `feet` are world foot positions, `com` the CoM used for
/// the moment arms.
inline DiscreteModel linearize_dynamics(double yaw, const Vec3& com, const std::vector<Vec3>& feet,
                                        const MpcParams& params) {
  DiscreteModel m;
  const Mat3 rz = rot_z(yaw);
  const Mat3 inertia_world = rz * params.inertia_body * rz.transpose();
  const Mat3 inertia_inv = inertia_world.inverse();
  m.A.block<3, 3>(0, 6) = rz.transpose() * params.dt;
  m.A.block<3, 3>(3, 9) = Mat3::Identity() * params.dt;
  m.B = Eigen::MatrixXd::Zero(12, 3 * static_cast<Eigen::Index>(feet.size()));
  for (std::size_t i = 0; i < feet.size(); ++i) {
    const auto c = 3 * static_cast<Eigen::Index>(i);
    m.B.block<3, 3>(6, c) = inertia_inv * skew(feet[i] - com) * params.dt;
    m.B.block<3, 3>(9, c) = Mat3::Identity() * (params.dt / params.mass);
  }
  m.g(11) = -kGravity * params.dt;
  return m;
}

/// Optimized touchdown of one swing leg inside its convex region.
struct FootholdDecision {
  int leg = 0;
  int touchdown_step = 0;  // first horizon step in which the leg carries load
  std::vector<Halfspace> halfspaces;
  double terrain_z_ref = 0.0;
  Vec2 nominal_xy = Vec2::Zero();
};

/// Everything the MPC needs for one tick.
struct MpcInput {
  SrbdState state;
  std::vector<Vec12> x_ref;                        // references for x_1..x_N
  std::vector<std::array<bool, kNumLegs>> stance;  // contact per step 0..N-1
  // Foot positions used for moment arms at each step (nominal touchdowns for future contacts).
  std::vector<std::array<Vec3, kNumLegs>> feet;
  std::vector<FootholdDecision> footholds;
};

struct OptimizedFoothold {
  int leg = 0;
  Vec3 position = Vec3::Zero();
};

struct MpcSolution {
  std::vector<std::array<Vec3, kNumLegs>> forces;  // per step, zero for swing legs
  std::vector<OptimizedFoothold> footholds;
  std::vector<Vec12> predicted;  // x_1..x_N
  QpStatus status = QpStatus::max_iters;
  int iterations = 0;
  double solve_time_us = 0.0;
  double cost = 0.0;  // full tracking cost including constant terms
  int n_variables = 0;
  bool degraded = false;
};

/// Condensed QP over stance forces and touchdown footholds.
struct MpcQp {
  QpProblem qp;
  // Column of the first force component per (step, leg); -1 for swing legs.
  std::vector<std::array<int, kNumLegs>> force_col;
  std::vector<int> foothold_col;  // per entry of MpcInput::footholds
  Eigen::MatrixXd G;              // predicted stacked states = G z + h
  Eigen::VectorXd h;
  double constant = 0.0;  // cost terms independent of z
};

/// Footholds enter the torque map through (p - p_nominal) x f_ref with f_ref
/// the weight shared evenly among the stance legs of that step; moment arms
/// of the forces are frozen at the nominal footholds.
inline MpcQp build_qp(const MpcInput& in, const MpcParams& params) {
  params.validate();
  const int N = params.horizon;
  if (static_cast<int>(in.x_ref.size()) != N || static_cast<int>(in.stance.size()) != N ||
      static_cast<int>(in.feet.size()) != N)
    throw InvalidArgument("MPC input sequences must match the horizon length");

  MpcQp out;
  out.force_col.resize(N);
  int nf = 0;
  for (int k = 0; k < N; ++k)
    for (int leg = 0; leg < kNumLegs; ++leg) {
      out.force_col[k][leg] = in.stance[k][leg] ? nf : -1;
      if (in.stance[k][leg]) nf += 3;
    }
  if (nf == 0) throw InvalidArgument("MPC horizon has no stance legs");
  int nz = nf;
  for (std::size_t d = 0; d < in.footholds.size(); ++d) {
    out.foothold_col.push_back(nz);
    nz += 2;
  }

  const double yaw = in.state.theta.z();
  const Mat3 rz = rot_z(yaw);
  const Mat3 inertia_inv = (rz * params.inertia_body * rz.transpose()).inverse();
  const Vec12 x0 = in.state.stacked();

  // Roll the affine dynamics forward: x_{k+1} = A x_k + B_k z + c_k.
  out.G = Eigen::MatrixXd::Zero(12 * N, nz);
  out.h = Eigen::VectorXd::Zero(12 * N);
  Eigen::MatrixXd Gk = Eigen::MatrixXd::Zero(12, nz);
  Vec12 hk = x0;
  for (int k = 0; k < N; ++k) {
    const Vec3 com = k == 0 ? in.state.p : Vec3(in.x_ref[k - 1].segment<3>(3));
    std::vector<Vec3> feet;
    std::vector<int> legs;
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (in.stance[k][leg]) {
        feet.push_back(in.feet[k][leg]);
        legs.push_back(leg);
      }
    DiscreteModel dm = linearize_dynamics(yaw, com, feet, params);
    Eigen::MatrixXd Bk = Eigen::MatrixXd::Zero(12, nz);
    for (std::size_t i = 0; i < legs.size(); ++i)
      Bk.block(0, out.force_col[k][legs[i]], 12, 3) = dm.B.block(0, 3 * static_cast<Eigen::Index>(i), 12, 3);
    Vec12 ck = dm.g;
    if (!legs.empty()) {
      const double fz_ref = params.mass * kGravity / static_cast<double>(legs.size());
      for (std::size_t d = 0; d < in.footholds.size(); ++d) {
        const auto& fd = in.footholds[d];
        if (k < fd.touchdown_step || !in.stance[k][fd.leg]) continue;
        Eigen::Matrix<double, 3, 2> M;
        M << 0.0, fz_ref, -fz_ref, 0.0, 0.0, 0.0;
        const Eigen::Matrix<double, 3, 2> E = inertia_inv * M * params.dt;
        Bk.block(6, out.foothold_col[d], 3, 2) += E;
        ck.segment<3>(6) -= E * fd.nominal_xy;
      }
    }
    Gk = dm.A * Gk + Bk;
    hk = dm.A * hk + ck;
    out.G.block(12 * k, 0, 12, nz) = Gk;
    out.h.segment<12>(12 * k) = hk;
  }

  Eigen::VectorXd qbar(12 * N), xref(12 * N);
  for (int k = 0; k < N; ++k) {
    qbar.segment<12>(12 * k) = params.q_weights;
    xref.segment<12>(12 * k) = in.x_ref[k];
  }
  const Eigen::VectorXd err = out.h - xref;
  Eigen::VectorXd rbar = Eigen::VectorXd::Constant(nz, params.r_weight);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(nz);
  out.constant = err.dot(qbar.cwiseProduct(err));
  // Forces are regularized toward an even share of the weight.
  for (int k = 0; k < N; ++k) {
    int n_stance = 0;
    for (int leg = 0; leg < kNumLegs; ++leg) n_stance += in.stance[k][leg];
    if (n_stance == 0) continue;
    const double fz_share = params.mass * kGravity / n_stance;
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (const int c = out.force_col[k][leg]; c >= 0) {
        lin(c + 2) = -2.0 * params.r_weight * fz_share;
        out.constant += params.r_weight * fz_share * fz_share;
      }
  }
  for (std::size_t d = 0; d < in.footholds.size(); ++d) {
    const int c = out.foothold_col[d];
    rbar.segment<2>(c).setConstant(params.foothold_weight);
    lin.segment<2>(c) = -2.0 * params.foothold_weight * in.footholds[d].nominal_xy;
    out.constant += params.foothold_weight * in.footholds[d].nominal_xy.squaredNorm();
  }

  QpProblem& qp = out.qp;
  qp.P = 2.0 * (out.G.transpose() * qbar.asDiagonal() * out.G);
  qp.P.diagonal() += 2.0 * rbar;
  qp.P = 0.5 * (qp.P + qp.P.transpose()).eval();
  qp.q = 2.0 * out.G.transpose() * qbar.cwiseProduct(err) + lin;

  // Friction pyramid and normal-force bounds, then region and box rows.
  int rows = (nf / 3) * 5;
  for (const auto& fd : in.footholds) rows += static_cast<int>(fd.halfspaces.size()) + 2;
  qp.A = Eigen::MatrixXd::Zero(rows, nz);
  qp.l = Eigen::VectorXd::Constant(rows, -kQpInfinity);
  qp.u = Eigen::VectorXd::Constant(rows, kQpInfinity);
  int r = 0;
  for (int c = 0; c < nf; c += 3) {
    qp.A(r, c) = 1.0, qp.A(r, c + 2) = -params.mu, qp.u(r) = 0.0, ++r;
    qp.A(r, c) = 1.0, qp.A(r, c + 2) = params.mu, qp.l(r) = 0.0, ++r;
    qp.A(r, c + 1) = 1.0, qp.A(r, c + 2) = -params.mu, qp.u(r) = 0.0, ++r;
    qp.A(r, c + 1) = 1.0, qp.A(r, c + 2) = params.mu, qp.l(r) = 0.0, ++r;
    qp.A(r, c + 2) = 1.0, qp.l(r) = params.fz_min, qp.u(r) = params.fz_max, ++r;
  }
  for (std::size_t d = 0; d < in.footholds.size(); ++d) {
    const int c = out.foothold_col[d];
    for (const auto& hs : in.footholds[d].halfspaces) {
      qp.A(r, c) = hs.normal.x(), qp.A(r, c + 1) = hs.normal.y(), qp.u(r) = hs.offset, ++r;
    }
    for (int a = 0; a < 2; ++a) {
      qp.A(r, c + a) = 1.0;
      qp.l(r) = in.footholds[d].nominal_xy[a] - params.foothold_box;
      qp.u(r) = in.footholds[d].nominal_xy[a] + params.foothold_box;
      ++r;
    }
  }
  return out;
}

/// Feasible set of one foothold decision (region halfspaces intersected with
/// the box around the nominal) as a convex polygon; nullopt when empty.
inline std::optional<ConvexRegion> foothold_feasible_set(const FootholdDecision& fd, double box) {
  const Vec2& c = fd.nominal_xy;
  std::vector<Vec2> poly{c + Vec2(-box, -box), c + Vec2(box, -box), c + Vec2(box, box), c + Vec2(-box, box)};
  for (const auto& h : fd.halfspaces) {
    poly = geometry::clip_halfplane(poly, h.normal, h.offset);
    if (poly.size() < 3) return std::nullopt;
  }
  poly = geometry::remove_collinear(poly, 1e-12);
  if (poly.size() < 3 || !(geometry::signed_area(poly) > 0.0)) return std::nullopt;
  return make_region(Polygon{poly}, fd.terrain_z_ref);
}

// Clamp into the friction pyramid and normal-force bounds.
inline Vec3 project_force(const Vec3& f, const MpcParams& params) {
  Vec3 out = f;
  out.z() = std::clamp(f.z(), params.fz_min, params.fz_max);
  const double t = params.mu * out.z();
  out.x() = std::clamp(f.x(), -t, t);
  out.y() = std::clamp(f.y(), -t, t);
  return out;
}

/// Receding-horizon controller; keeps the previous solution for warm starts
/// and for the degraded mode used when a solve fails.
class ConvexMpc {
 public:
  explicit ConvexMpc(MpcParams params = {}) : params_(std::move(params)), solver_(params_.qp) { params_.validate(); }

  const MpcParams& params() const { return params_; }
  bool has_previous() const { return previous_.has_value(); }

  MpcSolution solve(const MpcInput& in) {
    Stopwatch sw;
    const MpcQp built = build_qp(in, params_);
    if (warm_x_ && warm_x_->size() == built.qp.n() && warm_y_->size() == built.qp.m())
      solver_.set_warm_start(*warm_x_, *warm_y_);
    else
      solver_.clear_warm_start();
    const QpSolution qs = solver_.solve(built.qp);

    if (qs.status != QpStatus::solved || !qs.x.allFinite()) {
      if (!previous_) throw std::runtime_error(std::string("MPC failed on its first solve: ") + to_string(qs.status));
      MpcSolution shifted = shift(*previous_, in);
      shifted.status = qs.status;
      shifted.iterations = qs.iterations;
      shifted.solve_time_us = sw.elapsed_us();
      previous_ = shifted;
      return shifted;
    }
    warm_x_ = qs.x;
    warm_y_ = qs.y;

    MpcSolution sol;
    sol.status = qs.status;
    sol.iterations = qs.iterations;
    sol.n_variables = static_cast<int>(built.qp.n());
    sol.cost = qs.objective + built.constant;
    const int N = params_.horizon;
    sol.forces.assign(N, {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()});
    for (int k = 0; k < N; ++k)
      for (int leg = 0; leg < kNumLegs; ++leg)
        if (const int c = built.force_col[k][leg]; c >= 0)
          sol.forces[k][leg] = project_force(qs.x.segment<3>(c), params_);
    for (std::size_t d = 0; d < in.footholds.size(); ++d) {
      const auto& fd = in.footholds[d];
      Vec2 xy = qs.x.segment<2>(built.foothold_col[d]);
      if (auto feasible = foothold_feasible_set(fd, params_.foothold_box)) xy = project_onto_region(*feasible, xy);
      sol.footholds.push_back({fd.leg, Vec3(xy.x(), xy.y(), fd.terrain_z_ref)});
    }
    const Eigen::VectorXd xs = built.G * qs.x + built.h;
    for (int k = 0; k < N; ++k) sol.predicted.push_back(xs.segment<12>(12 * k));
    sol.solve_time_us = sw.elapsed_us();
    previous_ = sol;
    return sol;
  }

  void reset() {
    previous_.reset();
    warm_x_.reset();
    warm_y_.reset();
  }

 private:
  MpcSolution shift(const MpcSolution& prev, const MpcInput& in) const {
    MpcSolution s = prev;
    s.degraded = true;
    s.footholds.clear();  // decisions may refer to other legs now
    if (s.forces.size() > 1) {
      s.forces.erase(s.forces.begin());
      s.forces.push_back(s.forces.back());
    }
    if (s.predicted.size() > 1) {
      s.predicted.erase(s.predicted.begin());
      s.predicted.push_back(s.predicted.back());
    }
    // Only legs in contact now may carry load.
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (!in.stance[0][leg]) s.forces[0][leg].setZero();
    return s;
  }

  MpcParams params_;
  AdmmSolver solver_;
  std::optional<MpcSolution> previous_;
  std::optional<Eigen::VectorXd> warm_x_;
  std::optional<Eigen::VectorXd> warm_y_;
};

}  // namespace foothold
