#pragma once

#include "foothold/common.hpp"
#include "foothold/criteria.hpp"
#include "foothold/locomotion.hpp"
#include "foothold/mpc.hpp"
#include "foothold/regions.hpp"
#include "foothold/safenet.hpp"
#include "foothold/terrain.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace foothold {

enum class ControllerMode { heuristic, convex_region };

inline const char* to_string(ControllerMode m) {
  return m == ControllerMode::heuristic ? "heuristic" : "convex_region";
}

struct TerrainConfig {
  std::string kind = "stairs";  // stairs | rough | flat
  GridSpec grid{Vec2(-1.5, -1.5), 0.02, 151, 351};
  double step_rise = 0.10;
  double step_run = 0.30;
  int n_steps = 5;
  double first_riser_x = 0.90;
  double amplitude = 0.05;
  double correlation_len = 0.30;
  std::uint64_t seed = 1;

  TerrainGrid build() const {
    if (kind == "stairs") return generate_stairs(step_rise, step_run, n_steps, grid, first_riser_x);
    if (kind == "rough") return generate_rough(amplitude, correlation_len, seed, grid);
    if (kind == "flat") return TerrainGrid::flat(grid);
    throw InvalidArgument("unknown terrain kind: " + kind);
  }
};

struct Disturbance {
  Vec3 force = Vec3(0.0, 700.0, 0.0);
  double start = 3.0;
  double duration = 0.2;

  bool active(double t) const { return t >= start - 1e-12 && t < start + duration - 1e-12; }
};

struct SimConfig {
  TerrainConfig terrain;
  GaitSchedule gait = GaitSchedule::trot();
  ControllerMode mode = ControllerMode::convex_region;
  double duration = 9.0;
  double control_rate = 150.0;
  double physics_dt = 0.001;
  std::optional<Disturbance> disturbance = Disturbance{};
  MpcParams mpc;
  RobotGeometry robot;
  FootholdHeuristic heuristic;
  Vec2 desired_velocity{0.3, 0.0};
  double body_height = 0.55;
  Vec2 start_xy{0.0, 0.0};
  double fall_angle = 0.6;
  std::uint64_t seed = 0;
  // Surrogate perception: when set, masks come from this network instead of the exact criteria.
  std::shared_ptr<const NetWeights> surrogate;
  // Benchmarking: also run perception for stance legs (results unused) so the
  // tick time covers all four legs.
  bool perceive_all_legs = false;

  void validate() const {
    if (!(duration > 0.0)) throw InvalidArgument("sim duration must be positive");
    if (!(control_rate > 0.0)) throw InvalidArgument("control_rate must be positive");
    if (!(physics_dt > 0.0) || physics_dt > 1.0 / control_rate + 1e-12)
      throw InvalidArgument("physics_dt must be positive and at most one control period");
    gait.validate();
    robot.validate();
    mpc.validate();
  }
};

struct SimSample {
  double t = 0.0;
  Vec3 rpy = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  std::array<bool, kNumLegs> contact{};
  std::array<Vec3, kNumLegs> feet{};
};

struct FootholdEvent {
  double t = 0.0;
  int leg = 0;
  Vec3 position = Vec3::Zero();
  std::optional<ConvexRegion> region;  // convex mode with a region
  bool on_safe_cell = false;           // heuristic mode: target is a safe mask cell
};

struct TickRecord {
  double t = 0.0;
  double solve_us = 0.0;
  double criteria_us = 0.0;
  double regions_us = 0.0;
  double pipeline_us = 0.0;  // whole tick: perception, regions, MPC
  int region_count = 0;
  int qp_iterations = 0;
  QpStatus status = QpStatus::solved;
  bool degraded = false;
};

struct SimLog {
  ControllerMode mode = ControllerMode::convex_region;
  std::vector<SimSample> samples;
  std::vector<FootholdEvent> footholds;
  std::vector<TickRecord> ticks;
  bool fell = false;
  double fall_time = -1.0;
  std::string fall_reason;
};

struct SimSummary {
  ControllerMode mode = ControllerMode::convex_region;
  bool fell = false;
  double fall_time = -1.0;
  double peak_roll = 0.0;
  double peak_pitch = 0.0;
  double mean_solve_us = 0.0;
  double mean_criteria_us = 0.0;
  double mean_pipeline_us = 0.0;
  double final_x = 0.0;
  int ticks = 0;
  int degraded_ticks = 0;
};

inline SimSummary summarize(const SimLog& log) {
  SimSummary s;
  s.mode = log.mode;
  s.fell = log.fell;
  s.fall_time = log.fall_time;
  for (const auto& smp : log.samples) {
    s.peak_roll = std::max(s.peak_roll, std::abs(smp.rpy.x()));
    s.peak_pitch = std::max(s.peak_pitch, std::abs(smp.rpy.y()));
  }
  for (const auto& tk : log.ticks) {
    s.mean_solve_us += tk.solve_us;
    s.mean_criteria_us += tk.criteria_us;
    s.mean_pipeline_us += tk.pipeline_us;
    s.degraded_ticks += tk.degraded;
  }
  s.ticks = static_cast<int>(log.ticks.size());
  if (s.ticks > 0) {
    s.mean_solve_us /= s.ticks;
    s.mean_criteria_us /= s.ticks;
    s.mean_pipeline_us /= s.ticks;
  }
  if (!log.samples.empty()) s.final_x = log.samples.back().p.x();
  return s;
}

inline Mat3 world_inertia(const Vec3& rpy, const Mat3& inertia_body) {
  const Mat3 r = rotation_from_rpy(rpy);
  return r * inertia_body * r.transpose();
}

/// One plant step of the nonlinear single rigid body. Translation uses the
/// exact constant-acceleration update, rotation propagates world angular
/// momentum and the attitude by the exponential map.
inline SrbdState step_physics(const SrbdState& state, const std::vector<Vec3>& stance_feet,
                              const std::vector<Vec3>& forces, const Vec3& external_force, double dt, double mass,
                              const Mat3& inertia_body) {
  if (!(dt > 0.0)) throw InvalidArgument("step_physics requires dt > 0");
  if (stance_feet.size() != forces.size()) throw InvalidArgument("one force per stance foot required");
  Vec3 f_total = external_force + Vec3(0.0, 0.0, -mass * kGravity);
  Vec3 torque = Vec3::Zero();
  for (std::size_t i = 0; i < forces.size(); ++i) {
    f_total += forces[i];
    torque += (stance_feet[i] - state.p).cross(forces[i]);
  }
  SrbdState next = state;
  const Vec3 acc = f_total / mass;
  next.p = state.p + state.v * dt + 0.5 * acc * dt * dt;
  next.v = state.v + acc * dt;

  const Mat3 r = rotation_from_rpy(state.theta);
  const Vec3 momentum = r * inertia_body * r.transpose() * state.omega + torque * dt;
  const double angle = state.omega.norm() * dt;
  Mat3 r_next = r;
  if (angle > 0.0) r_next = Eigen::AngleAxisd(angle, state.omega.normalized()).toRotationMatrix() * r;
  const Mat3 inertia_next = r_next * inertia_body * r_next.transpose();
  next.omega = inertia_next.ldlt().solve(momentum);
  next.theta = rpy_from_rotation(r_next);
  return next;
}

inline double mechanical_energy(const SrbdState& s, double mass, const Mat3& inertia_body) {
  const Mat3 iw = world_inertia(s.theta, inertia_body);
  return 0.5 * mass * s.v.squaredNorm() + mass * kGravity * s.p.z() + 0.5 * s.omega.dot(iw * s.omega);
}

namespace detail {

struct LegPlan {
  Vec3 target = Vec3::Zero();  // where the swing foot will land
  std::optional<ConvexRegion> region;
  std::optional<FootholdDecision> decision;
  bool on_safe_cell = false;
  Vec2 nominal = Vec2::Zero();
};

}  // namespace detail

/// Closed-loop run: perception per swing leg, foothold choice (nearest safe
/// cell or convex region), MPC, and plant integration. Falls end the run
/// early and are reported in the log.
inline SimLog run_scenario(const SimConfig& cfg) {
  cfg.validate();
  const TerrainGrid terrain = cfg.terrain.build();
  const GaitSchedule& gait = cfg.gait;
  const RobotGeometry& geom = cfg.robot;
  const MpcParams& mp = cfg.mpc;
  ConvexMpc mpc(mp);

  SimLog log;
  log.mode = cfg.mode;

  SrbdState state;
  state.p = Vec3(cfg.start_xy.x(), cfg.start_xy.y(), 0.0);
  state.p.z() = sample_height(terrain, cfg.start_xy) + cfg.body_height;

  auto hip_world = [&](const SrbdState& s, int leg) {
    return Vec3(s.p + rotation_from_rpy(s.theta) * geom.hip_offsets[leg]);
  };

  std::array<Vec3, kNumLegs> feet;
  std::array<Vec3, kNumLegs> liftoff;
  std::array<detail::LegPlan, kNumLegs> plan;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 hip = hip_world(state, leg);
    feet[leg] = Vec3(hip.x(), hip.y(), sample_height(terrain, hip.head<2>()));
    liftoff[leg] = feet[leg];
    plan[leg].target = feet[leg];
    plan[leg].nominal = feet[leg].head<2>();
  }
  ContactState contact = contact_state(gait, 0.0);
  std::array<Vec3, kNumLegs> applied{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};

  const auto n_steps = static_cast<long>(std::llround(cfg.duration / cfg.physics_dt));
  const double tick_period = 1.0 / cfg.control_rate;
  long next_tick = 0;

  auto ground_reference = [&] {
    double z = 0.0;
    for (int leg = 0; leg < kNumLegs; ++leg) z += contact.stance[leg] ? feet[leg].z() : plan[leg].target.z();
    return z / kNumLegs;
  };

  bool perception_off_map = false;
  auto perceive = [&](int leg, double t_now, TickRecord& rec) {
    detail::LegPlan lp;
    const double t_td = contact.time_to_touchdown(leg, gait);
    const Vec3 hip_td = predict_hip_touchdown(hip_world(state, leg), Vec3(state.v.x(), state.v.y(), 0.0), t_td);
    auto off_map = [&] {
      perception_off_map = true;
      lp.target = plan[leg].target;
      return lp;
    };
    Vec3 nominal;
    try {
      nominal = nominal_foothold(hip_td, state.v.head<2>(), cfg.desired_velocity, gait, terrain, cfg.heuristic);
    } catch (const OutOfExtent&) {
      return off_map();
    }
    lp.nominal = nominal.head<2>();
    const auto [r, c] = terrain.nearest_cell(lp.nominal);
    const int half = kWindowSize / 2;
    if (r - half < 0 || c - half < 0 || r + half >= terrain.rows() || c + half >= terrain.cols()) return off_map();
    const HeightmapWindow window = extract_window(terrain, terrain.cell_center(r, c));

    FootQuery q;
    q.leg_id = leg;
    q.hip_touchdown = hip_td;
    q.hip_touchdown.z() = std::max(hip_td.z(), ground_reference() + cfg.body_height);
    q.foot_liftoff = liftoff[leg];
    q.heading = state.theta.z();
    Stopwatch sw;
    const SafetyMask mask = cfg.surrogate ? predict_mask(*cfg.surrogate, window) : evaluate(window, q, geom);
    rec.criteria_us += sw.elapsed_us();

    auto fallback = [&] {
      if (auto cell = nearest_safe_cell(mask, lp.nominal)) {
        lp.target = Vec3(cell->x(), cell->y(), window.lookup_clamped(cell->x(), cell->y()));
        lp.on_safe_cell = true;
      } else {
        lp.target = nominal;
      }
    };

    if (cfg.mode == ControllerMode::heuristic) {
      fallback();
      return lp;
    }
    Stopwatch rs;
    const RegionResult rr = decompose_and_select(mask, lp.nominal, geom, &window);
    rec.regions_us += rs.elapsed_us();
    rec.region_count += static_cast<int>(rr.candidates.size());
    if (!rr.has_region()) {
      fallback();
      return lp;
    }
    lp.region = rr.region();
    FootholdDecision fd;
    fd.leg = leg;
    fd.halfspaces = rr.region().halfspaces;
    fd.terrain_z_ref = rr.region().terrain_z_ref;
    fd.nominal_xy = lp.nominal;
    lp.decision = fd;
    lp.target = Vec3(lp.nominal.x(), lp.nominal.y(), fd.terrain_z_ref);
    if (auto feasible = foothold_feasible_set(fd, mp.foothold_box)) {
      const Vec2 xy = project_onto_region(*feasible, lp.nominal);
      lp.target = Vec3(xy.x(), xy.y(), fd.terrain_z_ref);
    } else {
      lp.decision.reset();
      lp.region.reset();
      fallback();
    }
    (void)t_now;
    return lp;
  };

  auto control_tick = [&](double t) {
    Stopwatch tick_sw;
    TickRecord rec;
    rec.t = t;
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (!contact.stance[leg]) plan[leg] = perceive(leg, t, rec);
      else if (cfg.perceive_all_legs) (void)perceive(leg, t, rec);

    const int N = mp.horizon;
    MpcInput in;
    in.state = state;
    const double z_ref = ground_reference() + cfg.body_height;
    for (int k = 1; k <= N; ++k) {
      Vec12 x;
      x.setZero();
      x.segment<3>(3) = Vec3(state.p.x() + cfg.desired_velocity.x() * k * mp.dt,
                             state.p.y() + cfg.desired_velocity.y() * k * mp.dt, z_ref);
      x.segment<3>(9) = Vec3(cfg.desired_velocity.x(), cfg.desired_velocity.y(), 0.0);
      in.x_ref.push_back(x);
    }
    std::array<std::optional<int>, kNumLegs> touchdown_step;
    for (int k = 0; k < N; ++k) {
      const ContactState cs = contact_state(gait, t + k * mp.dt);
      std::array<bool, kNumLegs> st = cs.stance;
      std::array<Vec3, kNumLegs> fk;
      for (int leg = 0; leg < kNumLegs; ++leg) {
        const double tk = k * mp.dt;
        if (contact.stance[leg]) {
          const double t_lift = (gait.duty_factor - contact.phase[leg]) * gait.cycle_time;
          if (tk < t_lift) {
            fk[leg] = feet[leg];
          } else {
            // Next touchdown after the coming swing: nominal under the predicted hip.
            const double t_td = t_lift + gait.swing_time();
            const Vec3 hip = hip_world(state, leg) + Vec3(cfg.desired_velocity.x(), cfg.desired_velocity.y(), 0.0) * t_td;
            Vec2 xy = hip.head<2>() + cfg.desired_velocity * gait.stance_time() / 2.0;
            fk[leg] = Vec3(xy.x(), xy.y(), terrain.contains(xy) ? sample_height(terrain, xy) : feet[leg].z());
          }
        } else {
          fk[leg] = plan[leg].decision ? Vec3(plan[leg].nominal.x(), plan[leg].nominal.y(), plan[leg].target.z())
                                       : plan[leg].target;
          if (st[leg] && !touchdown_step[leg]) touchdown_step[leg] = k;
        }
      }
      in.stance.push_back(st);
      in.feet.push_back(fk);
    }
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (!contact.stance[leg] && plan[leg].decision && touchdown_step[leg]) {
        FootholdDecision fd = *plan[leg].decision;
        fd.touchdown_step = *touchdown_step[leg];
        in.footholds.push_back(fd);
      }

    const MpcSolution sol = mpc.solve(in);
    rec.solve_us = sol.solve_time_us;
    rec.qp_iterations = sol.iterations;
    rec.status = sol.status;
    rec.degraded = sol.degraded;
    for (const auto& of : sol.footholds) plan[of.leg].target = of.position;
    for (int leg = 0; leg < kNumLegs; ++leg) applied[leg] = contact.stance[leg] ? sol.forces[0][leg] : Vec3::Zero();
    rec.pipeline_us = tick_sw.elapsed_us();
    log.ticks.push_back(rec);
  };

  for (long step = 0; step <= n_steps; ++step) {
    const double t = step * cfg.physics_dt;

    // Schedule-driven contact switching.
    const ContactState next = contact_state(gait, t);
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (next.stance[leg] && !contact.stance[leg]) {
        feet[leg] = plan[leg].target;
        FootholdEvent ev;
        ev.t = t;
        ev.leg = leg;
        ev.position = feet[leg];
        ev.region = plan[leg].region;
        ev.on_safe_cell = plan[leg].on_safe_cell;
        log.footholds.push_back(std::move(ev));
        applied[leg].setZero();
      } else if (!next.stance[leg] && contact.stance[leg]) {
        liftoff[leg] = feet[leg];
        applied[leg].setZero();
      }
    }
    contact = next;
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (!contact.stance[leg])
        feet[leg] = swing_trajectory(liftoff[leg], plan[leg].target, geom.swing_apex, contact.swing_progress(leg, gait));

    if (static_cast<double>(step) * cfg.physics_dt >= next_tick * tick_period - 1e-12) {
      control_tick(t);
      ++next_tick;
    }

    SimSample smp;
    smp.t = t;
    smp.rpy = state.theta;
    smp.p = state.p;
    smp.v = state.v;
    smp.contact = contact.stance;
    smp.feet = feet;
    log.samples.push_back(smp);

    const bool off_map = !terrain.contains(state.p.head<2>());
    const double ground = off_map ? -std::numeric_limits<double>::infinity() : sample_height(terrain, state.p.head<2>());
    std::string reason;
    if (std::abs(state.theta.x()) > cfg.fall_angle) reason = "roll";
    else if (std::abs(state.theta.y()) > cfg.fall_angle) reason = "pitch";
    else if (off_map || perception_off_map) reason = "left terrain";
    else if (state.p.z() < ground) reason = "base below terrain";
    if (!reason.empty()) {
      log.fell = true;
      log.fall_time = t;
      log.fall_reason = reason;
      break;
    }
    if (step == n_steps) break;

    std::vector<Vec3> stance_feet, forces;
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (contact.stance[leg]) {
        stance_feet.push_back(feet[leg]);
        forces.push_back(applied[leg]);
      }
    const Vec3 ext = cfg.disturbance && cfg.disturbance->active(t) ? cfg.disturbance->force : Vec3::Zero();
    state = step_physics(state, stance_feet, forces, ext, cfg.physics_dt, mp.mass, mp.inertia_body);
  }
  return log;
}

struct ModeComparison {
  SimLog heuristic;
  SimLog convex;
  SimSummary heuristic_summary;
  SimSummary convex_summary;

  // Convex mode stays up and rolls strictly less than the heuristic (or the heuristic falls).
  bool convex_better() const {
    return !convex_summary.fell &&
           (heuristic_summary.fell || convex_summary.peak_roll < heuristic_summary.peak_roll);
  }
};

inline ModeComparison compare_modes(const SimConfig& cfg) {
  ModeComparison out;
  SimConfig c = cfg;
  c.mode = ControllerMode::heuristic;
  out.heuristic = run_scenario(c);
  c.mode = ControllerMode::convex_region;
  out.convex = run_scenario(c);
  out.heuristic_summary = summarize(out.heuristic);
  out.convex_summary = summarize(out.convex);
  return out;
}

/// Per-physics-step CSV. Contains no timing data, so identical runs give identical files.
inline void write_log_csv(const SimLog& log, std::ostream& os) {
  os << "t,roll,pitch,yaw,px,py,pz,vx,vy,vz,c_LF,c_RF,c_LH,c_RH";
  for (int leg = 0; leg < kNumLegs; ++leg)
    for (const char* ax : {"x", "y", "z"}) os << ",foot_" << leg_name(leg) << "_" << ax;
  os << "\n";
  os.precision(17);
  for (const auto& s : log.samples) {
    os << s.t << ',' << s.rpy.x() << ',' << s.rpy.y() << ',' << s.rpy.z() << ',' << s.p.x() << ',' << s.p.y() << ','
       << s.p.z() << ',' << s.v.x() << ',' << s.v.y() << ',' << s.v.z();
    for (bool c : s.contact) os << ',' << (c ? 1 : 0);
    for (const auto& f : s.feet) os << ',' << f.x() << ',' << f.y() << ',' << f.z();
    os << "\n";
  }
}

inline void write_ticks_csv(const SimLog& log, std::ostream& os) {
  os << "t,solve_us,criteria_us,regions_us,pipeline_us,region_count,qp_iterations,status,degraded\n";
  for (const auto& r : log.ticks)
    os << r.t << ',' << r.solve_us << ',' << r.criteria_us << ',' << r.regions_us << ',' << r.pipeline_us << ',' << r.region_count << ','
       << r.qp_iterations << ',' << to_string(r.status) << ',' << (r.degraded ? 1 : 0) << "\n";
}

inline void write_footholds_csv(const SimLog& log, std::ostream& os) {
  os << "t,leg,x,y,z,has_region,on_safe_cell\n";
  os.precision(17);
  for (const auto& e : log.footholds)
    os << e.t << ',' << leg_name(e.leg) << ',' << e.position.x() << ',' << e.position.y() << ',' << e.position.z()
       << ',' << (e.region ? 1 : 0) << ',' << (e.on_safe_cell ? 1 : 0) << "\n";
}

}  // namespace foothold
