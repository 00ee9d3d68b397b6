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

#ifndef TMPC__TRACKING__SINGLE_TRACK_HPP_
#define TMPC__TRACKING__SINGLE_TRACK_HPP_

#include "tmpc/common.hpp"
#include "tmpc/tracking/fiala.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>

namespace tmpc::tracking
{

struct SingleTrackParams
{
  double mass{1500.0};
  double yaw_inertia{2500.0};
  double lf{1.2};
  double lr{1.5};
  double cornering_front{60000.0};
  double cornering_rear{60000.0};
  double mu{0.9};
  double gravity{9.81};
  double drive_front{0.5};  ///< share of F_x on the front axle
  double steering_max{0.45};
  double steering_rate_max{0.6};
  double force_max{4500.0};  ///< |F_x| bound, N
  double force_rate_max{20000.0};
  double blend_low{1.0};  ///< below: kinematic behaviour
  double blend_high{3.0};  ///< above: tire dynamics only
  double relax_time{0.1};
  double max_substep{0.005};

  [[nodiscard]] double wheelbase() const { return lf + lr; }
  [[nodiscard]] double fz_front() const { return mass * gravity * lr / wheelbase(); }
  [[nodiscard]] double fz_rear() const { return mass * gravity * lf / wheelbase(); }
  [[nodiscard]] FialaTireParams front_tire() const { return {cornering_front, mu, fz_front()}; }
  [[nodiscard]] FialaTireParams rear_tire() const { return {cornering_rear, mu, fz_rear()}; }

  static SingleTrackParams slippery()
  {
    SingleTrackParams p;
    p.mu = 0.4;
    return p;
  }
};

struct SingleTrackState
{
  double x{0.0};
  double y{0.0};
  double heading{0.0};
  double vx{0.0};
  double vy{0.0};
  double yaw_rate{0.0};
  double steering{0.0};
  double fx{0.0};  ///< N
  double s{0.0};

  static constexpr int kSize = 9;
  using Vector = Eigen::Matrix<double, kSize, 1>;

  [[nodiscard]] Vector vec() const
  {
    return (Vector() << x, y, heading, vx, vy, yaw_rate, steering, fx, s).finished();
  }
  static SingleTrackState from(const Vector & z)
  {
    return {z(0), z(1), z(2), z(3), z(4), z(5), z(6), z(7), z(8)};
  }
  [[nodiscard]] Vec2 position() const { return {x, y}; }
};

struct TrackerCommand
{
  double steering_rate{0.0};
  double force_rate{0.0};  ///< N/s
};

struct AxleForces
{
  double fx_front{0.0};
  double fx_rear{0.0};
  double fy_front{0.0};
  double fy_rear{0.0};
};

/// Slip angles (front, rear) of the body-frame velocity state. Uses |vx| so
/// that the small negative speeds an optimizer may probe stay well defined.
inline std::array<double, 2> slip_angles(const SingleTrackState::Vector & z, const SingleTrackParams & p)
{
  const double vx = std::abs(z(3));
  const double vy = z(4);
  const double r = z(5);
  return {std::atan2(vy + p.lf * r, vx) - z(6), std::atan2(vy - p.lr * r, vx)};
}

inline AxleForces axle_forces(const SingleTrackState::Vector & z, const SingleTrackParams & p)
{
  const auto alpha = slip_angles(z, p);
  return {
    p.drive_front * z(7), (1.0 - p.drive_front) * z(7), fiala_lateral_force(alpha[0], p.front_tire()),
    fiala_lateral_force(alpha[1], p.rear_tire())};
}

/// Friction-circle margin per axle, mu Fz - |(F_x, F_y)|.
inline std::array<double, 2> friction_circle_margin(const SingleTrackState & state, const SingleTrackParams & p)
{
  const auto f = axle_forces(state.vec(), p);
  return {
    p.mu * p.fz_front() - std::hypot(f.fx_front, f.fy_front),
    p.mu * p.fz_rear() - std::hypot(f.fx_rear, f.fy_rear)};
}

/// Single-track dynamics with Fiala tires, blended into kinematic behaviour at
/// walking speed where slip angles are ill-conditioned. Input: (steering rate,
/// force rate in N/s). With hold_at_rest a braking force cannot push the
/// vehicle backwards.
inline SingleTrackState::Vector single_track_rhs(
  const SingleTrackState::Vector & z, const Eigen::Vector2d & u, const SingleTrackParams & p,
  bool hold_at_rest = true)
{
  const double psi = z(2);
  const double vx = z(3);
  const double vy = z(4);
  const double r = z(5);
  const double delta = z(6);
  const double fx = z(7);
  const double cd = std::cos(delta);
  const double sd = std::sin(delta);

  const auto f = axle_forces(z, p);
  const double dvx_dyn = (f.fx_rear + f.fx_front * cd - f.fy_front * sd) / p.mass + vy * r;
  const double dvy_dyn = (f.fy_rear + f.fx_front * sd + f.fy_front * cd) / p.mass - vx * r;
  const double dr_dyn = (p.lf * (f.fy_front * cd + f.fx_front * sd) - p.lr * f.fy_rear) / p.yaw_inertia;

  // Kinematic limit: vy = vx lr tan(delta) / L, r = vx tan(delta) / L.
  const double l = p.wheelbase();
  const double td = std::tan(delta);
  const double dvx_kin = fx / p.mass;
  const double dtd = u(0) / (cd * cd);
  const double dvy_kin = (dvx_kin * td + vx * dtd) * p.lr / l + (vx * td * p.lr / l - vy) / p.relax_time;
  const double dr_kin = (dvx_kin * td + vx * dtd) / l + (vx * td / l - r) / p.relax_time;

  const double w = std::clamp((vx - p.blend_low) / (p.blend_high - p.blend_low), 0.0, 1.0);
  SingleTrackState::Vector dz;
  dz(0) = vx * std::cos(psi) - vy * std::sin(psi);
  dz(1) = vx * std::sin(psi) + vy * std::cos(psi);
  dz(2) = r;
  dz(3) = w * dvx_dyn + (1.0 - w) * dvx_kin;
  dz(4) = w * dvy_dyn + (1.0 - w) * dvy_kin;
  dz(5) = w * dr_dyn + (1.0 - w) * dr_kin;
  dz(6) = u(0);
  dz(7) = u(1);
  dz(8) = vx;
  if (hold_at_rest && vx <= 0.0 && dz(3) < 0.0) {
    dz(3) = 0.0;
  }
  return dz;
}

/// RK4 over dt split into substeps no longer than max_substep; the command is
/// held constant. Speed is kept non-negative unless hold_at_rest is false,
/// which keeps the map smooth for optimization.
inline SingleTrackState::Vector single_track_step(
  SingleTrackState::Vector z, const Eigen::Vector2d & u, const SingleTrackParams & p, double dt,
  double max_substep, bool hold_at_rest = true)
{
  const int n = std::max(1, static_cast<int>(std::ceil(dt / max_substep - 1e-9)));
  const double h = dt / n;
  for (int i = 0; i < n; ++i) {
    const auto k1 = single_track_rhs(z, u, p, hold_at_rest);
    const auto k2 = single_track_rhs(z + 0.5 * h * k1, u, p, hold_at_rest);
    const auto k3 = single_track_rhs(z + 0.5 * h * k2, u, p, hold_at_rest);
    const auto k4 = single_track_rhs(z + h * k3, u, p, hold_at_rest);
    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (hold_at_rest) {
      z(3) = std::max(z(3), 0.0);
    }
  }
  return z;
}

inline SingleTrackState single_track_step(
  const SingleTrackState & state, const TrackerCommand & cmd, const SingleTrackParams & p, double dt)
{
  if (!(dt > 0.0)) {
    throw InvalidInput("integration step must be positive");
  }
  return SingleTrackState::from(single_track_step(
    state.vec(), Eigen::Vector2d(cmd.steering_rate, cmd.force_rate), p, dt, p.max_substep));
}

}  // namespace tmpc::tracking

#endif  // TMPC__TRACKING__SINGLE_TRACK_HPP_
