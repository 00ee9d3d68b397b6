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

#ifndef TMPC__SIM__EPISODE_HPP_
#define TMPC__SIM__EPISODE_HPP_

#include "tmpc/planner/tmpc_planner.hpp"
#include "tmpc/sim/braking.hpp"
#include "tmpc/sim/scenario.hpp"
#include "tmpc/sim/world.hpp"
#include "tmpc/tracking/mpcc.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace tmpc::sim
{

struct SolveCounts
{
  int solves{0};
  int infeasible{0};

  [[nodiscard]] double fraction() const
  {
    return solves > 0 ? static_cast<double>(infeasible) / solves : 0.0;
  }
  void add(bool feasible)
  {
    ++solves;
    infeasible += feasible ? 0 : 1;
  }
};

struct MetricsRecord
{
  double duration{0.0};
  int collisions{0};
  bool timed_out{false};
  bool reached_goal{false};
  double progress{0.0};  ///< rear-axle arc length travelled
  double avg_velocity{0.0};
  double min_clearance{std::numeric_limits<double>::infinity()};
  int cycles{0};
  int infeasible_cycles{0};
  double infeasible_cycle_fraction{0.0};
  std::vector<double> cycle_times;
  SolveCounts guided;
  SolveCounts fallback;
  SolveCounts cold;  ///< zero-input audit solves
  SolveCounts guided_cycles;  ///< cycles with guided candidates; infeasible when none is feasible
  // Single-track plant only.
  int tracking_samples{0};
  double tracking_rms_contouring{0.0};
  double max_tracking_speed{0.0};
  double min_friction_margin{std::numeric_limits<double>::infinity()};
  int friction_violations{0};
  bool failed{false};
  std::string error;

  [[nodiscard]] double mean_cycle_time() const
  {
    return cycle_times.empty() ? 0.0 :
           std::accumulate(cycle_times.begin(), cycle_times.end(), 0.0) / static_cast<double>(cycle_times.size());
  }
};

inline geometry::ReferencePath scenario_path(const ScenarioConfig & cfg)
{
  return geometry::fit_reference_path(cfg.waypoints);
}

inline std::vector<ObstacleState> scenario_pedestrians(const ScenarioConfig & cfg, const geometry::ReferencePath & path)
{
  Rng rng(cfg.seed);
  return spawn_pedestrians(cfg, path, rng);
}

inline planner::TmpcConfig planner_config(const ScenarioConfig & cfg)
{
  planner::TmpcConfig base = cfg.tuning;
  base.seed = cfg.seed;
  base.weights.v_ref = cfg.v_ref;
  base.replan_period = cfg.planner_period;
  base.audit_cold_start = cfg.audit_cold_start;
  base.num_guided = cfg.guided_planners;
  base.fallback = true;
  if (cfg.planner == PlannerKind::kTmpcppNoFallback) {
    base.fallback = false;
  } else if (cfg.planner == PlannerKind::kLmpcc) {
    base.num_guided = 0;
  }
  return base;
}

namespace detail
{

inline nlohmann::json xy(const Vec2 & p) { return nlohmann::json::array({p.x(), p.y()}); }

inline nlohmann::json polyline(std::span<const VehicleState> states)
{
  auto a = nlohmann::json::array();
  for (const auto & s : states) {
    a.push_back(xy(s.position()));
  }
  return a;
}

inline void emit(std::ostream * log, const nlohmann::json & j)
{
  if (log != nullptr) {
    *log << j.dump() << '\n';
  }
}

inline VehicleState rear_axle_state(const tracking::SingleTrackState & st, const tracking::SingleTrackParams & p)
{
  VehicleState v;
  const Vec2 r = st.position() - p.lr * heading_vector(st.heading);
  v.x = r.x();
  v.y = r.y();
  v.heading = st.heading;
  v.v = st.vx;
  v.steering = st.steering;
  return v;
}

}  // namespace detail

/// Closed-loop episode. Pedestrians do not react to the vehicle; a collision
/// counts once per pedestrian each time its disc starts to overlap the
/// footprint, and the episode goes on.
inline MetricsRecord run_episode(const ScenarioConfig & cfg, std::ostream * log = nullptr)
{
  cfg.validate();
  const auto path = scenario_path(cfg);
  auto peds = scenario_pedestrians(cfg, path);
  Rng noise_rng(cfg.seed, 0x9e3779b9ULL);
  const auto pcfg = planner_config(cfg);
  const auto & fp = pcfg.footprint;
  const auto & lim = pcfg.limits;
  BrakingParams bparams;
  bparams.v_ref = cfg.v_ref;
  bparams.limits = lim;
  bparams.footprint = fp;

  std::optional<planner::TmpcPlanner> tmpc;
  if (cfg.planner != PlannerKind::kBraking) {
    tmpc.emplace(pcfg);
  }
  tracking::SingleTrackParams st_params = cfg.slippery ? tracking::SingleTrackParams::slippery() : tracking::SingleTrackParams{};
  tracking::MpccController tracker(st_params);

  MetricsRecord m;
  const auto start = path.frame(0.0);
  VehicleState ego;
  ego.x = start.position.x();
  ego.y = start.position.y();
  ego.heading = std::atan2(start.tangent.y(), start.tangent.x());
  ego.v = cfg.initial_speed;
  tracking::SingleTrackState st;
  {
    const Vec2 cog = ego.position() + st_params.lr * heading_vector(ego.heading);
    st.x = cog.x();
    st.y = cog.y();
    st.heading = ego.heading;
    st.vx = ego.v;
  }

  if (log != nullptr) {
    nlohmann::json h;
    h["type"] = "header";
    h["seed"] = cfg.seed;
    h["planner"] = to_string(cfg.planner);
    h["plant"] = to_string(cfg.plant);
    h["n_pedestrians"] = cfg.n_pedestrians;
    h["goal_progress"] = cfg.goal_progress;
    auto pts = nlohmann::json::array();
    const double end = std::min(path.length(), cfg.goal_progress + 6.0);
    for (double s = 0.0; s <= end + 1e-9; s += 0.5) {
      pts.push_back(detail::xy(path.frame(s).position));
    }
    h["path"] = pts;
    h["footprint"] = {{"offsets", fp.offsets}, {"radius", fp.disc_radius}};
    detail::emit(log, h);
  }

  const auto sim_steps_per_plan = std::max(1, static_cast<int>(std::lround(cfg.planner_period / cfg.sim_dt)));
  const auto sim_steps_per_control = std::max(1, static_cast<int>(std::lround(cfg.controller_period / cfg.sim_dt)));
  const int max_steps = static_cast<int>(std::floor(cfg.time_limit / cfg.sim_dt + 1e-9));
  std::vector<bool> in_contact(peds.size(), false);
  trajopt::ControlInput held{};
  tracking::TrackerCommand command{};
  std::optional<tracking::TrackingReference> reference;
  double sq_contouring = 0.0;
  double plan_time = 0.0;
  double t = 0.0;
  int step = 0;

  auto log_step = [&]() {
      if (log == nullptr) {
        return;
      }
      nlohmann::json s;
      s["type"] = "step";
      s["t"] = t;
      s["ego"] = {ego.x, ego.y, ego.heading, ego.v, ego.s};
      auto ps = nlohmann::json::array();
      for (const auto & p : peds) {
        ps.push_back({p.id, p.position.x(), p.position.y(), p.radius});
      }
      s["peds"] = ps;
      detail::emit(log, s);
    };
  log_step();

  try {
    for (; step < max_steps; ++step) {
      const bool single = cfg.plant == PlantKind::kSingleTrack;
      if (single) {
        const double s = ego.s;
        ego = detail::rear_axle_state(st, st_params);
        ego.s = geometry::project_to_path(path, ego.position(), s).s;
      }
      if (ego.s >= cfg.goal_progress) {
        m.reached_goal = true;
        break;
      }

      if (step % sim_steps_per_plan == 0) {
        trajopt::PlannerSolution plan;
        ++m.cycles;
        if (tmpc) {
          const auto res = tmpc->plan(ego, peds, path);
          plan = res.selected;
          m.cycle_times.push_back(res.cycle_time);
          m.infeasible_cycles += res.feasible ? 0 : 1;
          int guided = 0;
          bool guided_ok = false;
          for (const auto & c : res.candidates) {
            const bool is_guided = c.source == planner::CandidateSource::kGuided;
            (is_guided ? m.guided : m.fallback).add(c.solution.feasible);
            guided += is_guided ? 1 : 0;
            guided_ok = guided_ok || (is_guided && c.solution.feasible);
          }
          if (guided > 0) {
            m.guided_cycles.add(guided_ok);
          }
          if (res.cold_audit) {
            m.cold.add(res.cold_audit->feasible);
          }
          if (log != nullptr) {
            nlohmann::json c;
            c["type"] = "cycle";
            c["t"] = t;
            c["feasible"] = res.feasible;
            c["selected"] = res.selected_index;
            c["cycle_ms"] = 1e3 * res.cycle_time;
            auto cands = nlohmann::json::array();
            for (const auto & cand : res.candidates) {
              cands.push_back(
                {{"source", planner::to_string(cand.source)}, {"feasible", cand.solution.feasible},
                  {"cost", cand.solution.cost}, {"signature", cand.solution.signature.str()},
                  {"xy", detail::polyline(cand.solution.states)}});
            }
            c["candidates"] = cands;
            c["plan"] = detail::polyline(res.selected.states);
            auto preds = nlohmann::json::array();
            for (const auto & p : planner::predict_obstacles(peds, pcfg)) {
              for (std::size_t k : {5u, 10u, 20u}) {
                if (k < p.size()) {
                  const auto & cov = p.covariances[k];
                  preds.push_back(
                    {{"id", p.obstacle_id}, {"k", k}, {"t", t + static_cast<double>(k) * pcfg.horizon.dt},
                      {"mean", detail::xy(p.means[k])}, {"cov", {cov(0, 0), cov(0, 1), cov(1, 1)}},
                      {"radius", p.radius}});
                }
              }
            }
            c["predictions"] = preds;
            detail::emit(log, c);
          }
        } else {
          const auto t0 = std::chrono::steady_clock::now();
          if (single) {
            plan = braking_planner(ego, peds, path, bparams, pcfg.horizon.steps, pcfg.horizon.dt);
          } else {
            plan.inputs = {braking_control(ego, peds, path, bparams).input};
          }
          m.cycle_times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
          if (log != nullptr && !plan.states.empty()) {
            detail::emit(log, {{"type", "cycle"}, {"t", t}, {"feasible", true}, {"plan", detail::polyline(plan.states)}});
          }
        }
        if (single) {
          reference = tracking::reference_from_plan(plan.states, st_params, 2.0, pcfg.horizon.dt);
          plan_time = t;
        } else {
          held = planner::admissible_input(ego, plan.inputs.front(), lim, cfg.planner_period);
        }
      }

      if (cfg.plant == PlantKind::kKinematic) {
        const double s = ego.s;
        ego = trajopt::clamp_state(trajopt::bicycle_step(ego, held, cfg.sim_dt, lim.wheelbase), lim);
        ego.s = geometry::project_to_path(path, ego.position(), s).s;
      } else {
        if (step % sim_steps_per_control == 0) {
          reference->time_offset = t - plan_time;
          command = tracker.solve(st, *reference).command;
        }
        st = tracking::single_track_step(st, command, st_params, cfg.sim_dt);
        const auto e = geometry::contouring_errors(
          reference->path, st.position(), geometry::project_to_path(reference->path, st.position(), 0.0).s);
        sq_contouring += e.contouring * e.contouring;
        ++m.tracking_samples;
        m.max_tracking_speed = std::max(m.max_tracking_speed, st.vx);
        const auto margin = tracking::friction_circle_margin(st, st_params);
        const double worst = std::min(margin[0], margin[1]);
        m.min_friction_margin = std::min(m.min_friction_margin, worst);
        m.friction_violations += worst < 0.0 ? 1 : 0;
        const double s = ego.s;
        ego = detail::rear_axle_state(st, st_params);
        ego.s = geometry::project_to_path(path, ego.position(), s).s;
      }
      step_pedestrians(peds, cfg.sim_dt, cfg.ped_noise, noise_rng);
      t = (step + 1) * cfg.sim_dt;

      m.min_clearance = std::min(m.min_clearance, clearance(ego, fp, peds));
      for (std::size_t i = 0; i < peds.size(); ++i) {
        const bool hit = overlaps(ego, fp, peds[i]);
        m.collisions += (hit && !in_contact[i]) ? 1 : 0;
        in_contact[i] = hit;
      }
      log_step();
    }
  } catch (const std::exception & e) {
    m.failed = true;
    m.error = e.what();
  }
  if (!m.reached_goal && !m.failed) {
    m.reached_goal = ego.s >= cfg.goal_progress;
    m.timed_out = !m.reached_goal;
  }
  m.duration = t;
  m.progress = ego.s;
  m.avg_velocity = t > 0.0 ? m.progress / m.duration : 0.0;
  m.infeasible_cycle_fraction = m.cycles > 0 ? static_cast<double>(m.infeasible_cycles) / m.cycles : 0.0;
  if (m.tracking_samples > 0) {
    m.tracking_rms_contouring = std::sqrt(sq_contouring / m.tracking_samples);
  }
  if (log != nullptr) {
    detail::emit(
      log, {{"type", "metrics"}, {"duration", m.duration}, {"collisions", m.collisions}, {"timed_out", m.timed_out},
        {"avg_velocity", m.avg_velocity}, {"min_clearance", std::isfinite(m.min_clearance) ? m.min_clearance : -1.0},
        {"failed", m.failed}});
  }
  return m;
}

}  // namespace tmpc::sim

#endif  // TMPC__SIM__EPISODE_HPP_
