// Copyright 2026 The tmpc_planner Authors
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

#ifndef TMPC__TRAJOPT__BICYCLE_HPP_
#define TMPC__TRAJOPT__BICYCLE_HPP_

#include "tmpc/common.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

namespace tmpc::trajopt
{

/// Kinematic bicycle state, referenced at the rear axle.
struct VehicleState
{
  double x{0.0};
  double y{0.0};
  double heading{0.0};
  double v{0.0};
  double steering{0.0};
  double s{0.0};

  static constexpr int kSize = 6;
  using Vector = Eigen::Matrix<double, kSize, 1>;

  [[nodiscard]] Vector vec() const { return (Vector() << x, y, heading, v, steering, s).finished(); }
  static VehicleState from(const Vector & z) { return {z(0), z(1), z(2), z(3), z(4), z(5)}; }
  [[nodiscard]] Vec2 position() const { return {x, y}; }
};

struct ControlInput
{
  double acceleration{0.0};
  double steering_rate{0.0};

  static constexpr int kSize = 2;
  using Vector = Eigen::Matrix<double, kSize, 1>;

  [[nodiscard]] Vector vec() const { return {acceleration, steering_rate}; }
  static ControlInput from(const Vector & u) { return {u(0), u(1)}; }
};

struct VehicleLimits
{
  double wheelbase{2.7};
  double v_min{0.0};
  double v_max{5.0};
  double a_max{3.0};
  double steering_max{0.45};
  double steering_rate_max{0.6};
};

/// Collision footprint: discs along the body axis, offsets measured from the
/// rear axle in the heading direction.
struct Footprint
{
  std::vector<double> offsets{-0.15, 1.35, 2.85};
  double disc_radius{1.0};
  double center_offset{1.35};  ///< rear axle to geometric center

  [[nodiscard]] int count() const { return static_cast<int>(offsets.size()); }
};

using StateMatrix = Eigen::Matrix<double, VehicleState::kSize, VehicleState::kSize>;
using InputMatrix = Eigen::Matrix<double, VehicleState::kSize, ControlInput::kSize>;

namespace detail
{
inline VehicleState::Vector bicycle_rhs(
  const VehicleState::Vector & z, const ControlInput::Vector & u, double wheelbase)
{
  VehicleState::Vector dz;
  const double c = std::cos(z(2));
  const double s = std::sin(z(2));
  dz << z(3) * c, z(3) * s, z(3) / wheelbase * std::tan(z(4)), u(0), u(1), z(3);
  return dz;
}

inline void bicycle_rhs_jacobian(
  const VehicleState::Vector & z, double wheelbase, StateMatrix & fx, InputMatrix & fu)
{
  const double c = std::cos(z(2));
  const double s = std::sin(z(2));
  const double t = std::tan(z(4));
  fx.setZero();
  fx(0, 2) = -z(3) * s;
  fx(0, 3) = c;
  fx(1, 2) = z(3) * c;
  fx(1, 3) = s;
  fx(2, 3) = t / wheelbase;
  fx(2, 4) = z(3) / wheelbase * (1.0 + t * t);
  fx(5, 3) = 1.0;
  fu.setZero();
  fu(3, 0) = 1.0;
  fu(4, 1) = 1.0;
}
}  // namespace detail

/// One RK4 step of x' = v cos(psi), y' = v sin(psi), psi' = v tan(delta) / L,
/// v' = a, delta' = omega, s' = v under a zero-order-hold input.
inline VehicleState::Vector bicycle_step(
  const VehicleState::Vector & z, const ControlInput::Vector & u, double dt, double wheelbase)
{
  const auto k1 = detail::bicycle_rhs(z, u, wheelbase);
  const auto k2 = detail::bicycle_rhs(z + 0.5 * dt * k1, u, wheelbase);
  const auto k3 = detail::bicycle_rhs(z + 0.5 * dt * k2, u, wheelbase);
  const auto k4 = detail::bicycle_rhs(z + dt * k3, u, wheelbase);
  return z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline VehicleState bicycle_step(
  const VehicleState & state, const ControlInput & u, double dt, double wheelbase = 2.7)
{
  if (!(dt > 0.0)) {
    throw InvalidInput("integration step must be positive");
  }
  return VehicleState::from(bicycle_step(state.vec(), u.vec(), dt, wheelbase));
}

/// RK4 step with its exact Jacobians with respect to state and input.
inline VehicleState::Vector bicycle_step_jacobian(
  const VehicleState::Vector & z, const ControlInput::Vector & u, double dt, double wheelbase,
  StateMatrix & a, InputMatrix & b)
{
  StateMatrix fx;
  InputMatrix fu;
  const StateMatrix eye = StateMatrix::Identity();

  const auto k1 = detail::bicycle_rhs(z, u, wheelbase);
  detail::bicycle_rhs_jacobian(z, wheelbase, fx, fu);
  const StateMatrix k1x = fx;
  const InputMatrix k1u = fu;

  const VehicleState::Vector z2 = z + 0.5 * dt * k1;
  const auto k2 = detail::bicycle_rhs(z2, u, wheelbase);
  detail::bicycle_rhs_jacobian(z2, wheelbase, fx, fu);
  const StateMatrix k2x = fx * (eye + 0.5 * dt * k1x);
  const InputMatrix k2u = fx * (0.5 * dt * k1u) + fu;

  const VehicleState::Vector z3 = z + 0.5 * dt * k2;
  const auto k3 = detail::bicycle_rhs(z3, u, wheelbase);
  detail::bicycle_rhs_jacobian(z3, wheelbase, fx, fu);
  const StateMatrix k3x = fx * (eye + 0.5 * dt * k2x);
  const InputMatrix k3u = fx * (0.5 * dt * k2u) + fu;

  const VehicleState::Vector z4 = z + dt * k3;
  const auto k4 = detail::bicycle_rhs(z4, u, wheelbase);
  detail::bicycle_rhs_jacobian(z4, wheelbase, fx, fu);
  const StateMatrix k4x = fx * (eye + dt * k3x);
  const InputMatrix k4u = fx * (dt * k3u) + fu;

  a = eye + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  b = dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
  return z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Clamps speed and steering to the vehicle limits (used by plants, not by the optimizer).
inline VehicleState clamp_state(VehicleState s, const VehicleLimits & lim)
{
  s.v = std::clamp(s.v, lim.v_min, lim.v_max);
  s.steering = std::clamp(s.steering, -lim.steering_max, lim.steering_max);
  return s;
}

inline ControlInput clamp_input(ControlInput u, const VehicleLimits & lim)
{
  u.acceleration = std::clamp(u.acceleration, -lim.a_max, lim.a_max);
  u.steering_rate = std::clamp(u.steering_rate, -lim.steering_rate_max, lim.steering_rate_max);
  return u;
}

}  // namespace tmpc::trajopt

#endif  // TMPC__TRAJOPT__BICYCLE_HPP_
