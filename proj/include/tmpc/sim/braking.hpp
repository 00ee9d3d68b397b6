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

#ifndef TMPC__SIM__BRAKING_HPP_
#define TMPC__SIM__BRAKING_HPP_

#include "tmpc/geometry/reference_path.hpp"
#include "tmpc/prediction/prediction.hpp"
#include "tmpc/trajopt/bicycle.hpp"
#include "tmpc/trajopt/planner_problem.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace tmpc::sim
{

struct BrakingParams
{
  double v_ref{2.0};
  double corridor_half_width{2.0};  ///< lateral reach from the path that counts as intrusion
  double lookahead_time{3.0};
  double lookahead_distance{10.0};  ///< beyond the vehicle front
  double prediction_dt{0.2};
  double standoff{1.0};  ///< minimum clearance to keep to a blocking pedestrian
  double comfort_decel{1.5};
  double speed_gain{2.0};
  double steering_time_constant{0.2};
  double pursuit_min{3.0};
  double pursuit_gain{1.5};  ///< pure-pursuit lookahead per m/s
  trajopt::VehicleLimits limits;
  trajopt::Footprint footprint;
};

struct BrakingDecision
{
  trajopt::ControlInput input;
  double target_speed{0.0};
  double intrusion{0.0};
};

/// Path follower that slows down in proportion to how far any predicted
/// pedestrian mean intrudes into the corridor ahead, and stops short of it.
inline BrakingDecision braking_control(
  const trajopt::VehicleState & ego, std::span<const prediction::ObstacleState> obstacles,
  const geometry::ReferencePath & path, const BrakingParams & p)
{
  const auto & fp = p.footprint;
  const double front = fp.offsets.back() + fp.disc_radius;
  const double s_ego = ego.s;
  double intrusion = 0.0;
  double gap = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::ceil(p.lookahead_time / p.prediction_dt - 1e-9));
  for (const auto & o : obstacles) {
    double s_guess = s_ego;
    for (int k = 0; k <= n; ++k) {
      const Vec2 m = o.position + (k * p.prediction_dt) * o.velocity;
      const double s = geometry::project_to_path(path, m, s_guess).s;
      s_guess = s;
      const auto f = path.frame(s);
      const double lateral = std::abs((m - f.position).dot(f.normal));
      const double ahead = s - s_ego;
      if (lateral >= p.corridor_half_width || ahead < fp.offsets.front() - fp.disc_radius ||
        ahead > front + p.lookahead_distance)
      {
        continue;
      }
      intrusion = std::max(intrusion, 1.0 - lateral / p.corridor_half_width);
      if (k == 0) {
        gap = std::min(gap, ahead - front - o.radius);
      }
    }
  }
  BrakingDecision d;
  d.intrusion = intrusion;
  d.target_speed = p.v_ref * (1.0 - intrusion);
  if (std::isfinite(gap)) {
    d.target_speed = std::min(d.target_speed, std::sqrt(2.0 * p.comfort_decel * std::max(0.0, gap - p.standoff - 0.5)));
  }
  const auto & lim = p.limits;
  d.input.acceleration = std::clamp(p.speed_gain * (d.target_speed - ego.v), -lim.a_max, lim.a_max);

  const double ld = std::max(p.pursuit_min, p.pursuit_gain * ego.v);
  const Vec2 target = path.frame(s_ego + ld).position;
  const Vec2 rel = target - ego.position();
  const double alpha = wrap_angle(std::atan2(rel.y(), rel.x()) - ego.heading);
  const double delta = std::clamp(
    std::atan2(2.0 * lim.wheelbase * std::sin(alpha), rel.norm()), -lim.steering_max, lim.steering_max);
  d.input.steering_rate = (delta - ego.steering) / p.steering_time_constant;
  d.input = trajopt::clamp_input(d.input, lim);
  return d;
}

/// Closed-loop rollout of the braking law against constant-velocity obstacle
/// means, used as the trajectory handed to a tracking controller.
inline trajopt::PlannerSolution braking_planner(
  trajopt::VehicleState ego, std::span<const prediction::ObstacleState> obstacles,
  const geometry::ReferencePath & path, const BrakingParams & p, int steps = 35, double dt = 0.2)
{
  trajopt::PlannerSolution sol;
  std::vector<prediction::ObstacleState> obs(obstacles.begin(), obstacles.end());
  ego.s = geometry::project_to_path(path, ego.position(), ego.s).s;
  sol.states.push_back(ego);
  for (int k = 0; k < steps; ++k) {
    auto u = braking_control(ego, obs, path, p).input;
    u.acceleration = std::clamp(u.acceleration, -ego.v / dt, (p.limits.v_max - ego.v) / dt);
    sol.inputs.push_back(u);
    ego = trajopt::bicycle_step(ego, u, dt, p.limits.wheelbase);
    ego.s = geometry::project_to_path(path, ego.position(), ego.s).s;
    sol.states.push_back(ego);
    for (auto & o : obs) {
      o.position += dt * o.velocity;
    }
  }
  sol.feasible = true;
  return sol;
}

}  // namespace tmpc::sim

#endif  // TMPC__SIM__BRAKING_HPP_
