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

#ifndef TMPC__SIM__SCENARIO_HPP_
#define TMPC__SIM__SCENARIO_HPP_

#include "tmpc/common.hpp"
#include "tmpc/geometry/reference_path.hpp"
#include "tmpc/planner/tmpc_planner.hpp"
#include "tmpc/prediction/prediction.hpp"
#include "tmpc/random.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tmpc::sim
{

enum class PlannerKind { kTmpcpp, kTmpcppNoFallback, kLmpcc, kBraking };
enum class PlantKind { kKinematic, kSingleTrack };

inline const char * to_string(PlannerKind k)
{
  switch (k) {
    case PlannerKind::kTmpcpp: return "tmpcpp";
    case PlannerKind::kTmpcppNoFallback: return "tmpcpp_no_fallback";
    case PlannerKind::kLmpcc: return "lmpcc";
    case PlannerKind::kBraking: return "braking";
  }
  return "?";
}

inline std::optional<PlannerKind> parse_planner(std::string_view name)
{
  for (auto k : {PlannerKind::kTmpcpp, PlannerKind::kTmpcppNoFallback, PlannerKind::kLmpcc, PlannerKind::kBraking}) {
    if (name == to_string(k)) {
      return k;
    }
  }
  return std::nullopt;
}

inline const char * to_string(PlantKind k)
{
  return k == PlantKind::kKinematic ? "kinematic" : "single_track";
}

inline std::optional<PlantKind> parse_plant(std::string_view name)
{
  if (name == "kinematic") {
    return PlantKind::kKinematic;
  }
  if (name == "single_track") {
    return PlantKind::kSingleTrack;
  }
  return std::nullopt;
}

struct ScenarioConfig
{
  std::uint64_t seed{0};
  int n_pedestrians{0};
  std::vector<geometry::Waypoint> waypoints{{0.0, 0.0}, {56.0, 0.0}};
  double goal_progress{36.0};  ///< success once the rear axle passes this arc length
  double v_ref{2.0};
  double ped_speed_min{0.8};
  double ped_speed_max{1.5};
  double ped_radius{0.3};
  double ped_offset_min{4.5};  ///< lateral start distance from the path
  double ped_offset_max{10.0};
  double crossing_min{6.0};  ///< crossing points are clamped to this arc-length window
  double crossing_max{32.0};
  double crossing_jitter{3.0};
  double ped_noise{0.0};  ///< white-acceleration intensity of the pedestrians, (m/s^2)^2
  double time_limit{60.0};
  double sim_dt{0.05};
  double planner_period{0.1};
  double controller_period{0.05};
  PlannerKind planner{PlannerKind::kTmpcpp};
  PlantKind plant{PlantKind::kKinematic};
  bool slippery{false};
  int guided_planners{4};
  bool audit_cold_start{false};
  double initial_speed{0.0};
  std::vector<prediction::ObstacleState> fixed_pedestrians;  ///< replaces the random spawn when nonempty
  planner::TmpcConfig tuning;  ///< planner parameters; seed and variant fields are set per episode

  void validate() const
  {
    if (!(time_limit > 0.0) || !(sim_dt > 0.0) || !(planner_period > 0.0) || !(controller_period > 0.0)) {
      throw InvalidInput("time limit and periods must be positive");
    }
    if (!(ped_speed_min > 0.0) || ped_speed_max < ped_speed_min) {
      throw InvalidInput("pedestrian speed range must be positive and ordered");
    }
    if (n_pedestrians < 0 || waypoints.size() < 2 || !(v_ref > 0.0)) {
      throw InvalidInput("invalid scenario");
    }
    if (!(ped_offset_min > 0.0) || ped_offset_max < ped_offset_min || crossing_max < crossing_min) {
      throw InvalidInput("invalid crossing geometry");
    }
  }
};

/// Crossing pedestrians: each starts off the corridor on a random side and
/// walks straight through a crossing point timed so that it reaches the path
/// roughly when the ego, at the reference speed, would.
inline std::vector<prediction::ObstacleState> spawn_pedestrians(
  const ScenarioConfig & cfg, const geometry::ReferencePath & path, Rng & rng)
{
  std::vector<prediction::ObstacleState> peds;
  if (!cfg.fixed_pedestrians.empty()) {
    return cfg.fixed_pedestrians;
  }
  for (int i = 0; i < cfg.n_pedestrians; ++i) {
    const double side = rng.coin() ? 1.0 : -1.0;
    const double offset = rng.uniform(cfg.ped_offset_min, cfg.ped_offset_max);
    const double speed = rng.uniform(cfg.ped_speed_min, cfg.ped_speed_max);
    const double t_cross = offset / speed;
    const double s_cross = std::clamp(
      cfg.v_ref * t_cross + rng.uniform(-cfg.crossing_jitter, cfg.crossing_jitter), cfg.crossing_min,
      cfg.crossing_max);
    const double along = rng.uniform(-2.0, 2.0);
    const auto f = path.frame(s_cross);
    const Vec2 start = f.position + side * offset * f.normal + along * f.tangent;
    prediction::ObstacleState o;
    o.id = i + 1;
    o.position = start;
    o.velocity = speed * (f.position - start).normalized();
    o.radius = cfg.ped_radius;
    peds.push_back(o);
  }
  return peds;
}

}  // namespace tmpc::sim

#endif  // TMPC__SIM__SCENARIO_HPP_
