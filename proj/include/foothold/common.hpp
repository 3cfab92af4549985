#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace foothold {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kGravity = 9.81;

// Window edge length in cells, shared by criteria, the network and the file formats.
inline constexpr int kWindowSize = 32;
inline constexpr int kWindowCells = kWindowSize * kWindowSize;

enum Leg : int { LF = 0, RF = 1, LH = 2, RH = 3 };
inline constexpr int kNumLegs = 4;

inline const char* leg_name(int leg) {
  static constexpr const char* names[] = {"LF", "RF", "LH", "RH"};
  return names[leg];
}

// Invalid arguments or violated preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Query outside the extent of a terrain grid.
class OutOfExtent : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Malformed or unreadable files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_us() const {
    return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::fmod(a + pi, 2.0 * pi);
  if (a <= 0.0) a += 2.0 * pi;
  return a - pi;
}

inline Mat3 rot_z(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

// ZYX convention: R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Mat3 rotation_from_rpy(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

inline Vec3 rpy_from_rotation(const Mat3& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {wrap_angle(roll), wrap_angle(pitch), wrap_angle(yaw)};
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

}  // namespace foothold
