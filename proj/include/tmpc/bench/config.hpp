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

#ifndef TMPC__BENCH__CONFIG_HPP_
#define TMPC__BENCH__CONFIG_HPP_

#include "tmpc/sim/scenario.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tmpc::bench
{

using nlohmann::json;

class ConfigError : public InvalidInput
{
public:
  using InvalidInput::InvalidInput;
};

namespace detail
{

inline std::pair<double, double> range(const json & j, const char * key, std::pair<double, double> def)
{
  if (!j.contains(key)) {
    return def;
  }
  const auto & r = j.at(key);
  if (!r.is_array() || r.size() != 2) {
    throw ConfigError(std::string(key) + " must be a [min, max] pair");
  }
  return {r[0].get<double>(), r[1].get<double>()};
}

inline Vec2 vec2(const json & j)
{
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError("expected an [x, y] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void apply_tuning(const json & j, planner::TmpcConfig & t)
{
  t.q_accel = j.value("q_accel", t.q_accel);
  t.consistency_bonus = j.value("consistency_bonus", t.consistency_bonus);
  t.prediction_steps = j.value("prediction_steps", t.prediction_steps);
  t.threads = j.value("threads", t.threads);
  t.horizon.steps = j.value("horizon_steps", t.horizon.steps);
  t.horizon.dt = j.value("horizon_dt", t.horizon.dt);
  t.sqp.max_iterations = j.value("sqp_max_iterations", t.sqp.max_iterations);
  t.guidance.n_samples = j.value("guidance_samples", t.guidance.n_samples);
  auto & w = t.weights;
  if (j.contains("weights")) {
    const auto & jw = j.at("weights");
    w.contouring = jw.value("contouring", w.contouring);
    w.lag = jw.value("lag", w.lag);
    w.preview = jw.value("preview", w.preview);
    w.velocity = jw.value("velocity", w.velocity);
    w.acceleration = jw.value("acceleration", w.acceleration);
    w.steering_rate = jw.value("steering_rate", w.steering_rate);
  }
  w.eps_joint = j.value("eps_joint", w.eps_joint);
}

}  // namespace detail

/// Scenario document. Every key is optional and falls back to the built-in
/// crossing scenario:
///   waypoints [[x, y], ...], goal_progress, v_ref, initial_speed,
///   pedestrians (count), pedestrian_speed [min, max], pedestrian_radius,
///   lateral_offset [min, max], crossing_window [min, max], crossing_jitter,
///   pedestrian_noise, fixed_pedestrians [{position, velocity, radius}],
///   time_limit, sim_dt, planner_period, controller_period,
///   planner, plant, slippery, guided_planners, audit_cold_start, seed,
///   planner_params {q_accel, eps_joint, consistency_bonus, prediction_steps,
///   horizon_steps, horizon_dt, sqp_max_iterations, guidance_samples,
///   threads, weights {...}}.
inline sim::ScenarioConfig scenario_from_json(const json & j)
{
  if (!j.is_object()) {
    throw ConfigError("scenario must be a JSON object");
  }
  sim::ScenarioConfig c;
  try {
    if (j.contains("waypoints")) {
      c.waypoints.clear();
      for (const auto & w : j.at("waypoints")) {
        const Vec2 p = detail::vec2(w);
        c.waypoints.push_back({p.x(), p.y()});
      }
    }
    c.goal_progress = j.value("goal_progress", c.goal_progress);
    c.v_ref = j.value("v_ref", c.v_ref);
    c.initial_speed = j.value("initial_speed", c.initial_speed);
    c.n_pedestrians = j.value("pedestrians", c.n_pedestrians);
    std::tie(c.ped_speed_min, c.ped_speed_max) =
      detail::range(j, "pedestrian_speed", {c.ped_speed_min, c.ped_speed_max});
    c.ped_radius = j.value("pedestrian_radius", c.ped_radius);
    std::tie(c.ped_offset_min, c.ped_offset_max) =
      detail::range(j, "lateral_offset", {c.ped_offset_min, c.ped_offset_max});
    std::tie(c.crossing_min, c.crossing_max) = detail::range(j, "crossing_window", {c.crossing_min, c.crossing_max});
    c.crossing_jitter = j.value("crossing_jitter", c.crossing_jitter);
    c.ped_noise = j.value("pedestrian_noise", c.ped_noise);
    c.time_limit = j.value("time_limit", c.time_limit);
    c.sim_dt = j.value("sim_dt", c.sim_dt);
    c.planner_period = j.value("planner_period", c.planner_period);
    c.controller_period = j.value("controller_period", c.controller_period);
    c.seed = j.value("seed", c.seed);
    c.slippery = j.value("slippery", c.slippery);
    c.guided_planners = j.value("guided_planners", c.guided_planners);
    c.audit_cold_start = j.value("audit_cold_start", c.audit_cold_start);
    if (j.contains("planner")) {
      const auto p = sim::parse_planner(j.at("planner").get<std::string>());
      if (!p) {
        throw ConfigError("unknown planner " + j.at("planner").dump());
      }
      c.planner = *p;
    }
    if (j.contains("plant")) {
      const auto p = sim::parse_plant(j.at("plant").get<std::string>());
      if (!p) {
        throw ConfigError("unknown plant " + j.at("plant").dump());
      }
      c.plant = *p;
    }
    if (j.contains("fixed_pedestrians")) {
      int id = 1;
      for (const auto & jp : j.at("fixed_pedestrians")) {
        prediction::ObstacleState o;
        o.id = id++;
        o.position = detail::vec2(jp.at("position"));
        o.velocity = detail::vec2(jp.value("velocity", json::array({0.0, 0.0})));
        o.radius = jp.value("radius", c.ped_radius);
        c.fixed_pedestrians.push_back(o);
      }
    }
    if (j.contains("planner_params")) {
      detail::apply_tuning(j.at("planner_params"), c.tuning);
    }
  } catch (const json::exception & e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  c.validate();
  return c;
}

struct CellExclusion
{
  sim::PlannerKind planner;
  int pedestrians;
};

struct BatchSpec
{
  sim::ScenarioConfig scenario;
  std::vector<sim::PlannerKind> planners{
    sim::PlannerKind::kBraking, sim::PlannerKind::kLmpcc, sim::PlannerKind::kTmpcppNoFallback,
    sim::PlannerKind::kTmpcpp};
  std::vector<int> pedestrian_counts{0, 2, 4};
  std::vector<CellExclusion> exclude;
  int runs{25};
  std::uint64_t base_seed{0};
  std::filesystem::path output{"bench_out"};
  int jobs{1};
  bool record_timing{true};  ///< wall-clock column; off for byte-reproducible output
  bool write_logs{false};

  void validate() const
  {
    if (runs < 1) {
      throw ConfigError("runs must be at least 1");
    }
    if (planners.empty()) {
      throw ConfigError("planner list is empty");
    }
    if (pedestrian_counts.empty()) {
      throw ConfigError("pedestrian count list is empty");
    }
    for (int n : pedestrian_counts) {
      if (n < 0) {
        throw ConfigError("pedestrian counts must be non-negative");
      }
    }
    if (jobs < 1) {
      throw ConfigError("jobs must be at least 1");
    }
  }

  [[nodiscard]] bool excluded(sim::PlannerKind p, int n) const
  {
    for (const auto & e : exclude) {
      if (e.planner == p && e.pedestrians == n) {
        return true;
      }
    }
    return false;
  }
};

inline std::vector<sim::PlannerKind> parse_planner_list(const json & j)
{
  std::vector<sim::PlannerKind> out;
  for (const auto & p : j) {
    const auto k = sim::parse_planner(p.get<std::string>());
    if (!k) {
      throw ConfigError("unknown planner " + p.dump());
    }
    out.push_back(*k);
  }
  return out;
}

inline json read_json_file(const std::filesystem::path & file)
{
  std::ifstream in(file);
  if (!in) {
    throw ConfigError("cannot open " + file.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception & e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

/// Batch document: scenario (file path relative to the spec, or an inline
/// object), planners, pedestrians [counts], runs, base_seed, output, jobs,
/// exclude [{planner, pedestrians}], record_timing, write_logs.
inline BatchSpec batch_from_json(const json & j, const std::filesystem::path & base_dir = ".")
{
  if (!j.is_object()) {
    throw ConfigError("batch spec must be a JSON object");
  }
  BatchSpec b;
  try {
    if (j.contains("scenario")) {
      const auto & s = j.at("scenario");
      b.scenario = s.is_string() ? scenario_from_json(read_json_file(base_dir / s.get<std::string>())) :
                                   scenario_from_json(s);
    }
    if (j.contains("planners")) {
      b.planners = parse_planner_list(j.at("planners"));
    }
    if (j.contains("pedestrians")) {
      b.pedestrian_counts = j.at("pedestrians").get<std::vector<int>>();
    }
    if (j.contains("exclude")) {
      for (const auto & e : j.at("exclude")) {
        const auto k = sim::parse_planner(e.at("planner").get<std::string>());
        if (!k) {
          throw ConfigError("unknown planner " + e.at("planner").dump());
        }
        b.exclude.push_back({*k, e.at("pedestrians").get<int>()});
      }
    }
    b.runs = j.value("runs", b.runs);
    b.base_seed = j.value("base_seed", b.base_seed);
    if (j.contains("output")) {
      b.output = base_dir / j.at("output").get<std::string>();
    }
    b.jobs = j.value("jobs", b.jobs);
    b.record_timing = j.value("record_timing", b.record_timing);
    b.write_logs = j.value("write_logs", b.write_logs);
  } catch (const json::exception & e) {
    throw ConfigError(std::string("batch spec: ") + e.what());
  }
  b.validate();
  return b;
}

inline BatchSpec load_batch_spec(const std::filesystem::path & file)
{
  return batch_from_json(read_json_file(file), file.parent_path());
}

}  // namespace tmpc::bench

#endif  // TMPC__BENCH__CONFIG_HPP_
