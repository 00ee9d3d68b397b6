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

#ifndef TMPC__SIM__WORLD_HPP_
#define TMPC__SIM__WORLD_HPP_

#include "tmpc/common.hpp"
#include "tmpc/prediction/prediction.hpp"
#include "tmpc/random.hpp"
#include "tmpc/trajopt/bicycle.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace tmpc::sim
{

using prediction::ObstacleState;
using trajopt::Footprint;
using trajopt::VehicleState;

/// Advances pedestrians by constant velocity; with q_accel > 0 adds a sample
/// of the exactly discretized white-acceleration noise.
inline void step_pedestrians(std::vector<ObstacleState> & peds, double dt, double q_accel, Rng & rng)
{
  if (!(dt > 0.0)) {
    throw InvalidInput("step must be positive");
  }
  if (q_accel <= 0.0) {
    for (auto & p : peds) {
      p.position += dt * p.velocity;
    }
    return;
  }
  // Per axis the noise is 2x2 over (position, velocity).
  Eigen::Matrix2d q;
  q << q_accel * dt * dt * dt / 3.0, q_accel * dt * dt / 2.0, q_accel * dt * dt / 2.0, q_accel * dt;
  const Eigen::Matrix2d l = q.llt().matrixL();
  for (auto & p : peds) {
    p.position += dt * p.velocity;
    for (int axis = 0; axis < 2; ++axis) {
      const Eigen::Vector2d w = l * Eigen::Vector2d(rng.normal(), rng.normal());
      p.position(axis) += w(0);
      p.velocity(axis) += w(1);
    }
  }
}

inline std::vector<Vec2> footprint_discs(const VehicleState & ego, const Footprint & fp)
{
  std::vector<Vec2> discs;
  const Vec2 h = heading_vector(ego.heading);
  for (double o : fp.offsets) {
    discs.push_back(ego.position() + o * h);
  }
  return discs;
}

/// Smallest gap between any footprint disc and any pedestrian disc; negative
/// on overlap, +inf without pedestrians.
inline double clearance(const VehicleState & ego, const Footprint & fp, std::span<const ObstacleState> peds)
{
  double c = std::numeric_limits<double>::infinity();
  const auto discs = footprint_discs(ego, fp);
  for (const auto & p : peds) {
    for (const auto & d : discs) {
      c = std::min(c, (d - p.position).norm() - fp.disc_radius - p.radius);
    }
  }
  return c;
}

inline bool overlaps(const VehicleState & ego, const Footprint & fp, const ObstacleState & ped)
{
  for (const auto & d : footprint_discs(ego, fp)) {
    if ((d - ped.position).norm() < fp.disc_radius + ped.radius) {
      return true;
    }
  }
  return false;
}

inline bool collision_check(const VehicleState & ego, const Footprint & fp, std::span<const ObstacleState> peds)
{
  return std::any_of(peds.begin(), peds.end(), [&](const auto & p) { return overlaps(ego, fp, p); });
}

}  // namespace tmpc::sim

#endif  // TMPC__SIM__WORLD_HPP_
