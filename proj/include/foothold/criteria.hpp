#pragma once

#include "foothold/common.hpp"
#include "foothold/locomotion.hpp"
#include "foothold/terrain.hpp"

#include <array>
#include <vector>

namespace foothold {

struct RobotGeometry {
  // Hip positions in the base frame, ordered LF, RF, LH, RH.
  std::array<Vec3, kNumLegs> hip_offsets{Vec3(0.44, 0.20, 0.0), Vec3(0.44, -0.20, 0.0), Vec3(-0.44, 0.20, 0.0),
                                         Vec3(-0.44, -0.20, 0.0)};
  double l_upper = 0.36;
  double l_lower = 0.38;
  double r_min = 0.30;
  double r_max = 0.70;
  double foot_radius = 0.02;
  double roughness_h = 0.04;
  int roughness_kmin = 2;
  double swing_apex = 0.12;
  double collision_margin = 0.02;
  int n_phase_samples = 10;

  void validate() const {
    if (!(r_min > 0.0 && r_min < r_max && r_max <= l_upper + l_lower + 1e-12))
      throw InvalidArgument("geometry requires 0 < r_min < r_max <= l_upper + l_lower");
    if (roughness_kmin < 1 || roughness_kmin > 8) throw InvalidArgument("roughness_kmin must lie in [1,8]");
    if (n_phase_samples < 4) throw InvalidArgument("n_phase_samples must be >= 4");
    if (!(foot_radius >= 0.0) || !(roughness_h >= 0.0) || !(swing_apex >= 0.0) || !(collision_margin >= 0.0))
      throw InvalidArgument("geometry thresholds must be non-negative");
  }
};

struct FootQuery {
  int leg_id = LF;
  Vec3 hip_touchdown{0.0, 0.0, 0.55};
  Vec3 foot_liftoff{0.0, 0.0, 0.0};
  // World hip height at each phase sample of one cycle (swing half first, then
  // stance). Empty means the hip stays at hip_touchdown.z.
  std::vector<double> stance_base_heights;
  double heading = 0.0;  // base yaw, defines "backward" for the knee
};

using MaskLayer = std::array<bool, kWindowCells>;

struct SafetyMask {
  Vec2 center_xy{0.0, 0.0};
  double resolution = 0.02;
  MaskLayer safe{};
  MaskLayer kinematic{};
  MaskLayer roughness{};
  MaskLayer frontal{};
  MaskLayer leg{};
  double eval_time_us = 0.0;

  bool at(int i, int j) const { return safe[static_cast<std::size_t>(i) * kWindowSize + j]; }

  Vec2 cell_center(int i, int j) const {
    return center_xy + Vec2((j - kWindowSize / 2) * resolution, (i - kWindowSize / 2) * resolution);
  }

  int safe_count() const {
    int n = 0;
    for (bool b : safe) n += b;
    return n;
  }

  // Mask whose layers all equal `layer`.
  static SafetyMask uniform(const Vec2& center, double res, const MaskLayer& layer) {
    SafetyMask m;
    m.center_xy = center;
    m.resolution = res;
    m.safe = m.kinematic = m.roughness = m.frontal = m.leg = layer;
    return m;
  }
};

inline MaskLayer eval_kinematic(const HeightmapWindow& window, const FootQuery& query, const RobotGeometry& geom) {
  MaskLayer out{};
  for (int i = 0; i < kWindowSize; ++i)
    for (int j = 0; j < kWindowSize; ++j) {
      const Vec2 xy = window.cell_center(i, j);
      const double d = (Vec3(xy.x(), xy.y(), window.at(i, j)) - query.hip_touchdown).norm();
      out[i * kWindowSize + j] = d >= geom.r_min && d <= geom.r_max;
    }
  return out;
}

/// A cell is rough when at least k_min of its existing 8-neighbours differ
/// from it by more than h_r.
inline MaskLayer eval_roughness(const HeightmapWindow& window, const RobotGeometry& geom) {
  MaskLayer out{};
  for (int i = 0; i < kWindowSize; ++i)
    for (int j = 0; j < kWindowSize; ++j) {
      const double h = window.at(i, j);
      int offenders = 0;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const int ni = i + di, nj = j + dj;
          if (ni < 0 || nj < 0 || ni >= kWindowSize || nj >= kWindowSize) continue;
          offenders += std::abs(window.at(ni, nj) - h) > geom.roughness_h;
        }
      out[i * kWindowSize + j] = offenders < geom.roughness_kmin;
    }
  return out;
}

namespace detail {

// Interior phase samples of a swing, endpoints excluded (they touch the terrain by construction).
inline double swing_sample(int k, int n) { return static_cast<double>(k + 1) / (n + 1); }

}  // namespace detail

/// Foot-vs-terrain check along the swing executed by the controller, from
/// the lift-off point to each candidate cell.
inline MaskLayer eval_frontal_collision(const HeightmapWindow& window, const FootQuery& query,
                                        const RobotGeometry& geom) {
  MaskLayer out{};
  const int n = geom.n_phase_samples;
  for (int i = 0; i < kWindowSize; ++i)
    for (int j = 0; j < kWindowSize; ++j) {
      const Vec2 xy = window.cell_center(i, j);
      const Vec3 target(xy.x(), xy.y(), window.at(i, j));
      bool clear = true;
      for (int k = 0; k < n && clear; ++k) {
        const Vec3 p = swing_trajectory(query.foot_liftoff, target, geom.swing_apex, detail::swing_sample(k, n));
        clear = window.lookup_clamped(p.x(), p.y()) <= p.z() - geom.foot_radius;
      }
      out[i * kWindowSize + j] = clear;
    }
  return out;
}

/// Planar two-link inverse kinematics in the vertical plane through hip and
/// foot, knee pointing backward. Returns false when the foot is out of reach.
namespace detail {

inline bool knee_from_backward(const Vec3& hip, const Vec3& foot, double l_upper, double l_lower, const Vec3& backward,
                               Vec3& knee) {
  const Vec3 d = foot - hip;
  const double dist = d.norm();
  if (dist > l_upper + l_lower || dist < std::abs(l_upper - l_lower) || dist < 1e-9) return false;
  Vec3 horiz(d.x(), d.y(), 0.0);
  if (horiz.norm() < 1e-9) horiz = -backward;
  horiz.normalize();
  const Vec3 u = d / dist;
  // In-plane unit vector perpendicular to u.
  const double uh = u.dot(horiz), uz = u.z();
  const Vec3 w = -uz * horiz + uh * Vec3::UnitZ();
  const double cos_a = std::clamp((l_upper * l_upper + dist * dist - l_lower * l_lower) / (2.0 * l_upper * dist), -1.0, 1.0);
  const double sin_a = std::sqrt(1.0 - cos_a * cos_a);
  const Vec3 k1 = hip + l_upper * (cos_a * u + sin_a * w);
  const Vec3 k2 = hip + l_upper * (cos_a * u - sin_a * w);
  knee = (k1 - k2).dot(backward) >= 0.0 ? k1 : k2;
  return true;
}

}  // namespace detail

inline bool knee_position(const Vec3& hip, const Vec3& foot, double l_upper, double l_lower, double heading,
                          Vec3& knee) {
  return detail::knee_from_backward(hip, foot, l_upper, l_lower, Vec3(-std::cos(heading), -std::sin(heading), 0.0),
                                    knee);
}

/// Thigh and shin vs terrain over one full step cycle (swing, then stance).
inline MaskLayer eval_leg_collision(const HeightmapWindow& window, const FootQuery& query, const RobotGeometry& geom) {
  const int n = geom.n_phase_samples;
  if (!query.stance_base_heights.empty() && static_cast<int>(query.stance_base_heights.size()) != n)
    throw InvalidArgument("stance_base_heights must hold one entry per phase sample");
  std::vector<double> hip_z(static_cast<std::size_t>(n), query.hip_touchdown.z());
  if (!query.stance_base_heights.empty()) hip_z = query.stance_base_heights;

  auto segment_clear = [&](const Vec3& a, const Vec3& b) {
    for (int k = 1; k <= 5; ++k) {
      const Vec3 p = a + (k / 6.0) * (b - a);
      if (p.z() < window.lookup_clamped(p.x(), p.y()) + geom.collision_margin) return false;
    }
    return true;
  };

  const Vec3 backward(-std::cos(query.heading), -std::sin(query.heading), 0.0);
  std::vector<double> lift(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) lift[k] = geom.swing_apex * std::sin(std::numbers::pi * std::clamp((k + 0.5) / n / 0.5, 0.0, 1.0));

  MaskLayer out{};
  for (int i = 0; i < kWindowSize; ++i)
    for (int j = 0; j < kWindowSize; ++j) {
      const Vec2 xy = window.cell_center(i, j);
      const Vec3 target(xy.x(), xy.y(), window.at(i, j));
      bool ok = true;
      for (int k = 0; k < n && ok; ++k) {
        const double phase = (k + 0.5) / n;
        const bool stance = phase >= 0.5;
        // Stance samples with an unchanged hip repeat the previous pose exactly.
        if (stance && k > 0 && (k - 0.5) / n >= 0.5 && hip_z[k] == hip_z[k - 1]) continue;
        Vec3 foot = target;
        if (!stance) {  // same arithmetic as swing_trajectory with the lift precomputed
          foot = query.foot_liftoff + std::clamp(phase / 0.5, 0.0, 1.0) * (target - query.foot_liftoff);
          foot.z() += lift[k];
        }
        const Vec3 hip(query.hip_touchdown.x(), query.hip_touchdown.y(), hip_z[k]);
        Vec3 knee;
        ok = detail::knee_from_backward(hip, foot, geom.l_upper, geom.l_lower, backward, knee) && segment_clear(hip, knee) &&
             segment_clear(knee, foot);
      }
      out[i * kWindowSize + j] = ok;
    }
  return out;
}

/// Runs all four criteria and combines them; records the wall-clock time.
inline SafetyMask evaluate(const HeightmapWindow& window, const FootQuery& query, const RobotGeometry& geom) {
  Stopwatch sw;
  SafetyMask m;
  m.center_xy = window.center_xy;
  m.resolution = window.resolution;
  m.kinematic = eval_kinematic(window, query, geom);
  m.roughness = eval_roughness(window, geom);
  m.frontal = eval_frontal_collision(window, query, geom);
  m.leg = eval_leg_collision(window, query, geom);
  for (int c = 0; c < kWindowCells; ++c) m.safe[c] = m.kinematic[c] && m.roughness[c] && m.frontal[c] && m.leg[c];
  m.eval_time_us = sw.elapsed_us();
  return m;
}

}  // namespace foothold
