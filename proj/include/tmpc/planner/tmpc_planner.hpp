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

#ifndef TMPC__PLANNER__TMPC_PLANNER_HPP_
#define TMPC__PLANNER__TMPC_PLANNER_HPP_

#include "tmpc/common.hpp"
#include "tmpc/geometry/reference_path.hpp"
#include "tmpc/guidance/guidance.hpp"
#include "tmpc/prediction/prediction.hpp"
#include "tmpc/random.hpp"
#include "tmpc/topology/winding.hpp"
#include "tmpc/trajopt/planner_problem.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace tmpc::planner
{

using trajopt::ControlInput;
using trajopt::PlannerSolution;
using trajopt::VehicleState;

enum class CandidateSource { kGuided, kFallback };

inline const char * to_string(CandidateSource s)
{
  return s == CandidateSource::kGuided ? "guided" : "fallback";
}

struct TmpcConfig
{
  guidance::GuidanceParams guidance;
  trajopt::PlannerWeights weights;
  trajopt::HorizonSpec horizon;
  trajopt::VehicleLimits limits;
  trajopt::Footprint footprint;
  trajopt::SqpOptions sqp;
  int num_guided{4};        ///< 0 gives the single-planner LMPCC baseline
  bool fallback{true};      ///< false gives T-MPC++ without the fallback planner
  double consistency_bonus{0.1};
  double replan_period{0.1};
  int prediction_steps{20};  ///< 4 s forecast, extended to the horizon
  double q_accel{0.026};  ///< 2-sigma position spread of ~1.5 m at 4 s
  prediction::ExtensionPolicy extension{prediction::ExtensionPolicy::kGrow};
  double lookahead_time{0.8};
  std::vector<double> warm_start_time_scales{0.75, 0.5, 0.25};  ///< guided retries, fastest first
  bool audit_cold_start{false};  ///< extra zero-input solve, recorded but never selected
  int threads{1};
  std::uint64_t seed{0};
};

struct Candidate
{
  PlannerSolution solution;
  CandidateSource source{CandidateSource::kGuided};
  int guidance_index{-1};
};

struct PlanningCycleResult
{
  PlannerSolution selected;
  std::vector<Candidate> candidates;
  int selected_index{-1};  ///< -1 for the emergency trajectory
  bool feasible{false};
  double cycle_time{0.0};
  double guidance_time{0.0};
  topology::TopologySignature selected_signature;
  std::vector<guidance::GuidanceTrajectory> guidance;
  std::optional<PlannerSolution> cold_audit;
};

/// Clamps an input so that one step keeps speed and steering inside the limits.
inline ControlInput admissible_input(
  const VehicleState & x, ControlInput u, const trajopt::VehicleLimits & lim, double dt)
{
  u = trajopt::clamp_input(u, lim);
  u.acceleration = std::clamp(u.acceleration, (lim.v_min - x.v) / dt, (lim.v_max - x.v) / dt);
  u.steering_rate = std::clamp(
    u.steering_rate, (-lim.steering_max - x.steering) / dt, (lim.steering_max - x.steering) / dt);
  return u;
}

/// Receding-horizon shift: inputs resampled dt later (linear between stages,
/// last input held) and states re-integrated from the measured ego state.
inline std::pair<std::vector<VehicleState>, std::vector<ControlInput>> shift_warm_start(
  const PlannerSolution & prev, double dt, const VehicleState & ego, double stage_dt,
  double wheelbase = 2.7)
{
  if (prev.inputs.empty()) {
    throw InvalidInput("cannot shift an empty plan");
  }
  const auto n = prev.inputs.size();
  std::vector<ControlInput> inputs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = static_cast<double>(k) + dt / stage_dt;
    const auto i = std::min(static_cast<std::size_t>(pos), n - 1);
    const double f = pos - static_cast<double>(i);
    const auto & a = prev.inputs[i];
    const auto & b = prev.inputs[std::min(i + 1, n - 1)];
    inputs[k] = {
      (1.0 - f) * a.acceleration + f * b.acceleration, (1.0 - f) * a.steering_rate + f * b.steering_rate};
    if (i == n - 1) {
      inputs[k] = prev.inputs.back();
    }
  }
  return {trajopt::simulate_inputs(ego, inputs, stage_dt, wheelbase), std::move(inputs)};
}

/// Maximum braking with the given steering-rate profile (zero if empty).
inline std::vector<ControlInput> braking_inputs(
  const VehicleState & ego, std::span<const ControlInput> steering_profile, int steps,
  const trajopt::VehicleLimits & lim, double dt)
{
  std::vector<ControlInput> inputs;
  VehicleState x = ego;
  for (int k = 0; k < steps; ++k) {
    ControlInput u{-lim.a_max, 0.0};
    if (static_cast<std::size_t>(k) < steering_profile.size()) {
      u.steering_rate = steering_profile[static_cast<std::size_t>(k)].steering_rate;
    }
    u = admissible_input(x, u, lim, dt);
    inputs.push_back(u);
    x = trajopt::bicycle_step(x, u, dt, lim.wheelbase);
  }
  return inputs;
}

/// Inverse dynamics of a guidance spline: speed from the spline derivative and
/// steering from pure pursuit of a point lookahead seconds ahead, both
/// clamped to stay admissible. The spline is replayed at time_scale times its
/// own pace; scale 0 holds its start point and brakes.
inline std::vector<ControlInput> guidance_warm_start(
  const VehicleState & ego, const guidance::GuidanceTrajectory & traj, const TmpcConfig & cfg,
  double time_scale = 1.0)
{
  const auto & lim = cfg.limits;
  const double dt = cfg.horizon.dt;
  const double center = cfg.footprint.center_offset;
  std::vector<ControlInput> inputs;
  VehicleState x = ego;
  for (int k = 0; k < cfg.horizon.steps; ++k) {
    const double t = k * dt;
    const double v_target = time_scale * traj.velocity(time_scale * (t + dt)).norm();
    const Vec2 c = x.position() + center * heading_vector(x.heading);
    const Vec2 target = traj.position(time_scale * (t + cfg.lookahead_time));
    const Vec2 rel = target - c;
    double delta_target = x.steering;
    if (rel.norm() > 0.2) {
      const double alpha = wrap_angle(std::atan2(rel.y(), rel.x()) - x.heading);
      const double ld = rel.norm() + center;
      delta_target = std::atan2(2.0 * lim.wheelbase * std::sin(alpha), ld);
    }
    delta_target = std::clamp(delta_target, -lim.steering_max, lim.steering_max);
    ControlInput u{(v_target - x.v) / dt, (delta_target - x.steering) / dt};
    u = admissible_input(x, u, lim, dt);
    inputs.push_back(u);
    x = trajopt::bicycle_step(x, u, dt, lim.wheelbase);
  }
  return inputs;
}

inline std::vector<prediction::GaussianPrediction> predict_obstacles(
  std::span<const prediction::ObstacleState> obstacles, const TmpcConfig & cfg)
{
  std::vector<prediction::GaussianPrediction> out;
  out.reserve(obstacles.size());
  for (const auto & o : obstacles) {
    auto p = prediction::propagate_cv(o, cfg.q_accel, cfg.horizon.dt, cfg.prediction_steps);
    if (cfg.prediction_steps < cfg.horizon.steps) {
      p = prediction::extend_prediction(p, cfg.horizon.steps, cfg.extension);
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Passing labels of the vehicle center; a trajectory running through an
/// obstacle mean has no defined class and gets an empty signature.
inline topology::TopologySignature solution_signature(
  std::span<const VehicleState> states, std::span<const prediction::GaussianPrediction> predictions,
  const TmpcConfig & cfg)
{
  if (predictions.empty()) {
    return {};
  }
  try {
    return topology::passing_signature(
      trajopt::center_positions(states, cfg.footprint), predictions, cfg.guidance.passing_threshold);
  } catch (const DegenerateGeometry &) {
    return {};
  }
}

/// Labels shared by both signatures agree (and at least one obstacle is shared,
/// or both are empty).
inline bool consistent(const topology::TopologySignature & a, const topology::TopologySignature & b)
{
  if (a.labels.empty() && b.labels.empty()) {
    return true;
  }
  bool shared = false;
  for (const auto & [id, label] : a.labels) {
    const auto it = b.labels.find(id);
    if (it != b.labels.end()) {
      shared = true;
      if (it->second != label) {
        return false;
      }
    }
  }
  return shared;
}

/// Index of the selected candidate: argmin of cost (1 - beta consistency) over
/// feasible candidates, ties to the lower index. -1 if none is feasible.
inline int select_candidate(
  std::span<const Candidate> candidates, const std::optional<topology::TopologySignature> & previous,
  double beta)
{
  int best = -1;
  double best_score = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto & sol = candidates[i].solution;
    if (!sol.feasible) {
      continue;
    }
    const bool same = previous && consistent(sol.signature, *previous);
    const double score = sol.cost * (1.0 - (same ? beta : 0.0));
    if (best < 0 || score < best_score) {
      best = static_cast<int>(i);
      best_score = score;
    }
  }
  return best;
}

/// Parallel local planners seeded by topologically distinct guidance
/// trajectories plus one non-guided fallback.
/// Retry start for a guided solve that ended infeasible: the fastest slowed
/// replay of the guidance spline, over the time scales below 1 in
/// cfg.warm_start_time_scales, whose rollout meets every constraint of nlp;
/// otherwise the least violating one. Empty without such scales.
inline std::vector<ControlInput> slowed_guidance_warm_start(
  const VehicleState & ego, const guidance::GuidanceTrajectory & traj, const TmpcConfig & cfg,
  const trajopt::NonlinearProgram & nlp)
{
  std::vector<ControlInput> best;
  double best_violation = std::numeric_limits<double>::infinity();
  for (const double scale : cfg.warm_start_time_scales) {
    if (!(scale < 1.0)) {
      continue;
    }
    auto inputs = guidance_warm_start(ego, traj, cfg, scale);
    std::vector<trajopt::NonlinearProgram::InputVec> u;
    u.reserve(inputs.size());
    for (const auto & in : inputs) {
      u.push_back(in.vec());
    }
    const double violation = trajopt::rollout(nlp, nlp.initial_state().vec(), u).violation_max;
    if (violation < best_violation) {
      best_violation = violation;
      best = std::move(inputs);
    }
    if (violation <= cfg.sqp.feasibility_tolerance) {
      break;
    }
  }
  return best;
}

class TmpcPlanner
{
public:
  explicit TmpcPlanner(TmpcConfig config = {})
  : config_(std::move(config)), guidance_(config_.guidance)
  {
    config_.weights.validate();
  }

  PlanningCycleResult plan(
    VehicleState ego, std::span<const prediction::ObstacleState> obstacles,
    const geometry::ReferencePath & path)
  {
    const auto t_start = std::chrono::steady_clock::now();
    const auto & cfg = config_;
    const auto & fp = cfg.footprint;
    ego.s = geometry::project_to_path(path, ego.position(), ego.s).s;

    const auto predictions = predict_obstacles(obstacles, cfg);
    const trajopt::NonlinearProgram nlp(
      ego, path, predictions, cfg.weights, cfg.horizon, cfg.limits, fp);

    PlanningCycleResult out;
    std::vector<std::vector<ControlInput>> warm;
    std::vector<Candidate> candidates;

    if (cfg.num_guided > 0) {
      const Vec2 center = ego.position() + fp.center_offset * heading_vector(ego.heading);
      const double s_center = geometry::project_to_path(path, center, ego.s + fp.center_offset).s;
      Rng rng(cfg.seed, cycle_);
      const auto t_guidance = std::chrono::steady_clock::now();
      auto trajs = guidance_.plan(center, s_center, path, predictions, cycle_ > 0 ? cfg.replan_period : 0.0, rng);
      out.guidance_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_guidance).count();
      if (static_cast<int>(trajs.size()) > cfg.num_guided) {
        trajs.resize(static_cast<std::size_t>(cfg.num_guided));
      }
      for (std::size_t i = 0; i < trajs.size(); ++i) {
        warm.push_back(guidance_warm_start(ego, trajs[i], cfg));
        candidates.push_back({{}, CandidateSource::kGuided, static_cast<int>(i)});
      }
      out.guidance = std::move(trajs);
    }
    if (cfg.fallback || cfg.num_guided == 0) {
      if (previous_) {
        warm.push_back(shift_warm_start(*previous_, cfg.replan_period, ego, cfg.horizon.dt, cfg.limits.wheelbase).second);
      } else {
        warm.push_back(braking_inputs(ego, {}, cfg.horizon.steps, cfg.limits, cfg.horizon.dt));
      }
      candidates.push_back({{}, CandidateSource::kFallback, -1});
    }

    auto solve = [&](const std::vector<ControlInput> & w) {
        auto sol = trajopt::solve_sqp(nlp, w, cfg.sqp);
        sol.signature = solution_signature(sol.states, predictions, cfg);
        return sol;
      };
    // A guided solve that ends infeasible is retried once from a slowed replay
    // of its guidance trajectory.
    auto solve_candidate = [&](std::size_t i) {
        auto sol = solve(warm[i]);
        const auto & c = candidates[i];
        if (sol.feasible || c.source != CandidateSource::kGuided) {
          return sol;
        }
        const auto slowed = slowed_guidance_warm_start(
          ego, out.guidance[static_cast<std::size_t>(c.guidance_index)], cfg, nlp);
        if (slowed.empty()) {
          return sol;
        }
        auto retry = solve(slowed);
        retry.iterations += sol.iterations;
        retry.solve_time += sol.solve_time;
        return retry.feasible ? retry : sol;
      };
    if (cfg.threads > 1 && warm.size() > 1) {
      std::vector<std::future<PlannerSolution>> jobs;
      for (std::size_t i = 0; i < warm.size(); ++i) {
        jobs.push_back(std::async(std::launch::async, solve_candidate, i));
      }
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        candidates[i].solution = jobs[i].get();
      }
    } else {
      for (std::size_t i = 0; i < warm.size(); ++i) {
        candidates[i].solution = solve_candidate(i);
      }
    }
    if (cfg.audit_cold_start) {
      out.cold_audit = solve(std::vector<ControlInput>(static_cast<std::size_t>(cfg.horizon.steps)));
    }

    out.selected_index = select_candidate(candidates, previous_signature_, cfg.consistency_bonus);
    if (out.selected_index >= 0) {
      out.selected = candidates[static_cast<std::size_t>(out.selected_index)].solution;
      out.feasible = true;
    } else {
      out.selected = emergency(ego, nlp);
      out.feasible = false;
    }
    out.selected_signature = out.selected.signature;
    out.candidates = std::move(candidates);

    previous_ = out.selected;
    previous_signature_ = out.feasible ? std::optional(out.selected_signature) : std::nullopt;
    ++cycle_;
    out.cycle_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
  }

  void reset()
  {
    previous_.reset();
    previous_signature_.reset();
    guidance_.reset();
    cycle_ = 0;
  }

  [[nodiscard]] const TmpcConfig & config() const { return config_; }
  [[nodiscard]] std::uint64_t cycle() const { return cycle_; }

private:
  PlannerSolution emergency(const VehicleState & ego, const trajopt::NonlinearProgram & nlp) const
  {
    const auto & cfg = config_;
    std::vector<ControlInput> steer;
    if (previous_) {
      steer = shift_warm_start(*previous_, cfg.replan_period, ego, cfg.horizon.dt, cfg.limits.wheelbase).second;
    }
    PlannerSolution sol;
    sol.inputs = braking_inputs(ego, steer, cfg.horizon.steps, cfg.limits, cfg.horizon.dt);
    sol.states = trajopt::simulate_inputs(ego, sol.inputs, cfg.horizon.dt, cfg.limits.wheelbase);
    sol.cost = trajopt::evaluate_cost(sol.states, sol.inputs, cfg.weights, nlp.path(), cfg.horizon.dt);
    sol.feasible = false;
    sol.signature = solution_signature(sol.states, nlp.predictions(), cfg);
    return sol;
  }

  TmpcConfig config_;
  guidance::GuidancePlanner guidance_;
  std::optional<PlannerSolution> previous_;
  std::optional<topology::TopologySignature> previous_signature_;
  std::uint64_t cycle_{0};
};

}  // namespace tmpc::planner

#endif  // TMPC__PLANNER__TMPC_PLANNER_HPP_
