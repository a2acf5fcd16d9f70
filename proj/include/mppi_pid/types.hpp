// Copyright 2026 The MPPI-PID Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MPPI_PID_TYPES_HPP_
#define MPPI_PID_TYPES_HPP_

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mppi_pid {

inline constexpr int kStateDim = 7;
inline constexpr int kInputDim = 2;

using StateVector = std::array<double, kStateDim>;
using InputVector = std::array<double, kInputDim>;

// Index of each field inside a StateVector.
enum StateIndex : int { kX = 0, kY, kSin, kCos, kVx, kVy, kYawRate };

inline constexpr std::array<const char*, kStateDim> kStateNames = {
    "X", "Y", "s", "c", "vX", "vY", "r"};

/// Planar vehicle state. Heading is carried as (s, c) = (sin psi, cos psi) so
/// that no angle wrapping is needed inside the dynamics.
struct State {
  double X = 0.0;
  double Y = 0.0;
  double s = 0.0;
  double c = 1.0;
  double vX = 0.0;
  double vY = 0.0;
  double r = 0.0;

  static State FromArray(const StateVector& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
  static State FromPose(double x, double y, double psi, double speed = 0.0) {
    const double sn = std::sin(psi);
    const double cs = std::cos(psi);
    return {x, y, sn, cs, speed * cs, speed * sn, 0.0};
  }
  StateVector ToArray() const { return {X, Y, s, c, vX, vY, r}; }

  double Speed() const { return std::sqrt(vX * vX + vY * vY); }
  double Heading() const { return std::atan2(s, c); }
  bool IsFinite() const {
    for (double v : ToArray()) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const State&) const = default;
};

/// Accelerator command a in [0, 100] and steering angle in degrees.
struct ControlInput {
  double a = 0.0;
  double delta = 0.0;

  static ControlInput FromArray(const InputVector& v) { return {v[0], v[1]}; }
  InputVector ToArray() const { return {a, delta}; }
  double operator[](int i) const { return i == 0 ? a : delta; }
  double& operator[](int i) { return i == 0 ? a : delta; }

  bool operator==(const ControlInput&) const = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  double Dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double Norm() const { return std::sqrt(x * x + y * y); }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  bool operator==(const Vec2&) const = default;
};

inline double DegToRad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double RadToDeg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle to (-pi, pi].
inline double WrapAngle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

// Error types. Each maps to a distinct failure class in the CLI exit codes.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateHeadingError : public std::runtime_error {
 public:
  DegenerateHeadingError()
      : std::runtime_error("degenerate heading: s = c = 0") {}
};

class IdentifiabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mppi_pid

#endif  // MPPI_PID_TYPES_HPP_
