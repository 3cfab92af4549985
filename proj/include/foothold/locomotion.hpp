#pragma once

#include "foothold/common.hpp"
#include "foothold/terrain.hpp"

#include <array>

namespace foothold {

struct GaitSchedule {
  double cycle_time = 0.70;
  double duty_factor = 0.5;
  std::array<double, kNumLegs> phase_offsets{0.0, 0.5, 0.5, 0.0};

  static GaitSchedule trot(double cycle_time = 0.70, double duty_factor = 0.5) {
    GaitSchedule g;
    g.cycle_time = cycle_time;
    g.duty_factor = duty_factor;
    g.validate();
    return g;
  }

  void validate() const {
    if (!(cycle_time > 0.0)) throw InvalidArgument("gait cycle_time must be positive");
    if (!(duty_factor > 0.0 && duty_factor < 1.0)) throw InvalidArgument("gait duty_factor must lie in (0,1)");
    for (double o : phase_offsets)
      if (!(o >= 0.0 && o < 1.0)) throw InvalidArgument("gait phase offsets must lie in [0,1)");
  }

  double stance_time() const { return duty_factor * cycle_time; }
  double swing_time() const { return (1.0 - duty_factor) * cycle_time; }
};

struct ContactState {
  std::array<bool, kNumLegs> stance{};
  std::array<double, kNumLegs> phase{};  // wrapped cycle phase in [0,1)

  // Progress through the current swing in [0,1); only meaningful for swing legs.
  double swing_progress(int leg, const GaitSchedule& gait) const {
    return (phase[leg] - gait.duty_factor) / (1.0 - gait.duty_factor);
  }
  double time_to_touchdown(int leg, const GaitSchedule& gait) const {
    return (1.0 - phase[leg]) * gait.cycle_time;
  }
};

inline double wrapped_phase(const GaitSchedule& gait, int leg, double t) {
  const double p = t / gait.cycle_time + gait.phase_offsets[leg];
  double w = p - std::floor(p);
  if (w >= 1.0) w = 0.0;
  return w;
}

inline ContactState contact_state(const GaitSchedule& gait, double t) {
  if (t < 0.0) throw InvalidArgument("contact_state requires t >= 0");
  ContactState cs;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    cs.phase[leg] = wrapped_phase(gait, leg, t);
    cs.stance[leg] = cs.phase[leg] < gait.duty_factor;
  }
  return cs;
}

struct FootholdHeuristic {
  double capture_gain = 0.03;  // s
};

/// Raibert-style touchdown target: hip projection, half a stance of travel,
/// plus a velocity-error capture term. z comes from the terrain.
inline Vec3 nominal_foothold(const Vec3& hip_world, const Vec2& v_base, const Vec2& v_des, const GaitSchedule& gait,
                             const TerrainGrid& terrain, const FootholdHeuristic& heuristic = {}) {
  const Vec2 xy = hip_world.head<2>() + v_base * gait.stance_time() / 2.0 + heuristic.capture_gain * (v_base - v_des);
  return {xy.x(), xy.y(), sample_height(terrain, xy)};
}

/// Straight-line xy interpolation; z follows the start-end chord plus a
/// half-sine lift of height `apex`.
inline Vec3 swing_trajectory(const Vec3& start, const Vec3& end, double apex, double s) {
  s = std::clamp(s, 0.0, 1.0);
  Vec3 p = start + s * (end - start);
  p.z() += apex * std::sin(std::numbers::pi * s);
  return p;
}

// Constant-velocity extrapolation of the hip to its touchdown instant.
inline Vec3 predict_hip_touchdown(const Vec3& hip_now, const Vec3& v_base, double time_to_touchdown) {
  return hip_now + v_base * std::max(0.0, time_to_touchdown);
}

}  // namespace foothold
