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

#include "tmpc/planner/tmpc_planner.hpp"

#include "planner_fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

namespace tmpc::planner
{
namespace
{

using prediction::ObstacleState;
using testing_fixtures::straight_path;

ObstacleState pedestrian(int id, Vec2 p, Vec2 v)
{
  ObstacleState o;
  o.id = id;
  o.position = p;
  o.velocity = v;
  return o;
}

VehicleState cruising(double v = 2.0)
{
  VehicleState x;
  x.v = v;
  return x;
}

TEST(ShiftWarmStart, ZeroShiftReintegrates)
{
  PlannerSolution prev;
  for (int k = 0; k < 35; ++k) {
    prev.inputs.push_back({0.3 * std::sin(0.2 * k), 0.1 * std::cos(0.3 * k)});
  }
  const VehicleState ego = cruising();
  prev.states = trajopt::simulate_inputs(ego, prev.inputs, 0.2);
  const auto [states, inputs] = shift_warm_start(prev, 0.0, ego, 0.2);
  ASSERT_EQ(inputs.size(), prev.inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    EXPECT_EQ(inputs[k].acceleration, prev.inputs[k].acceleration);
    EXPECT_EQ(inputs[k].steering_rate, prev.inputs[k].steering_rate);
  }
  for (std::size_t k = 0; k < states.size(); ++k) {
    EXPECT_LT((states[k].vec() - prev.states[k].vec()).norm(), 1e-12);
  }
  EXPECT_THROW(shift_warm_start(PlannerSolution{}, 0.1, ego, 0.2), InvalidInput);
}

TEST(ShiftWarmStart, ConstantVelocityPlanIsTranslated)
{
  PlannerSolution prev;
  prev.inputs.assign(35, ControlInput{});
  VehicleState ego = cruising();
  prev.states = trajopt::simulate_inputs(ego, prev.inputs, 0.2);
  ego.x += 0.2;  // where the vehicle is 0.1 s later
  const auto [states, inputs] = shift_warm_start(prev, 0.1, ego, 0.2);
  for (std::size_t k = 0; k < states.size(); ++k) {
    EXPECT_NEAR(states[k].x - prev.states[k].x, 0.2, 1e-12);
    EXPECT_NEAR(states[k].y, prev.states[k].y, 1e-12);
    EXPECT_NEAR(states[k].v, prev.states[k].v, 1e-12);
  }
}

TEST(ShiftWarmStart, CutsSolverIterationsAgainstColdStart)
{
  // Closed-loop single planner (guidance off) around a crossing pedestrian;
  // every cycle also solves the same problem from zero inputs.
  TmpcConfig cfg;
  cfg.num_guided = 0;
  cfg.audit_cold_start = true;
  TmpcPlanner planner(cfg);
  const auto path = straight_path();
  VehicleState ego = cruising();
  ObstacleState ped = pedestrian(1, {11.0, -3.5}, {0.0, 1.0});
  std::vector<int> shifted, cold;
  for (int cycle = 0; cycle < 51; ++cycle) {
    const std::vector<ObstacleState> obs = {ped};
    const auto res = planner.plan(ego, obs, path);
    ASSERT_EQ(res.candidates.size(), 1u);
    ASSERT_TRUE(res.cold_audit.has_value());
    if (cycle > 0) {
      shifted.push_back(res.candidates.front().solution.iterations);
      cold.push_back(res.cold_audit->iterations);
    }
    ego = trajopt::bicycle_step(ego, res.selected.inputs.front(), 0.1);
    ped.position += 0.1 * ped.velocity;
  }
  auto median = [](std::vector<int> v) {
      std::sort(v.begin(), v.end());
      return v[v.size() / 2];
    };
  EXPECT_LT(median(shifted), median(cold));
}

TEST(SelectCandidate, CostArgminWithConsistencyDiscount)
{
  std::vector<Candidate> c(3);
  c[0].solution.cost = 10.0;
  c[0].solution.feasible = true;
  c[0].solution.signature.labels = {{1, topology::PassingLabel::kLeft}};
  c[1].solution.cost = 9.5;
  c[1].solution.feasible = true;
  c[1].solution.signature.labels = {{1, topology::PassingLabel::kRight}};
  c[2].solution.cost = 1.0;
  c[2].solution.feasible = false;
  EXPECT_EQ(select_candidate(c, std::nullopt, 0.1), 1);
  topology::TopologySignature left;
  left.labels = {{1, topology::PassingLabel::kLeft}};
  EXPECT_EQ(select_candidate(c, left, 0.1), 0);
  EXPECT_EQ(select_candidate(c, left, 0.0), 1);
  c[0].solution.feasible = false;
  c[1].solution.feasible = false;
  EXPECT_EQ(select_candidate(c, left, 0.1), -1);
}

TEST(TmpcPlanner, EmptyWorldCandidatesAgree)
{
  TmpcPlanner planner;
  const auto path = straight_path();
  const auto res = planner.plan(cruising(), {}, path);
  ASSERT_TRUE(res.feasible);
  EXPECT_LT(res.selected.cost, 1e-3);
  ASSERT_GE(res.candidates.size(), 2u);
  for (const auto & c : res.candidates) {
    ASSERT_TRUE(c.solution.feasible);
    EXPECT_LT(c.solution.cost, 1e-3);
    for (const auto & s : c.solution.states) {
      EXPECT_LT(std::abs(s.y), 1e-3);
    }
  }
  EXPECT_EQ(res.candidates.back().source, CandidateSource::kFallback);
}

TEST(TmpcPlanner, CrossingPedestrianGivesDistinctFeasibleClasses)
{
  const auto path = straight_path();
  const std::vector<ObstacleState> obs = {pedestrian(1, {9.0, -3.5}, {0.0, 1.0})};
  int distinct = 0;
  for (int seed = 0; seed < 100; ++seed) {
    TmpcConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    TmpcPlanner planner(cfg);
    const auto res = planner.plan(cruising(), obs, path);
    std::set<std::string> classes;
    double best = std::numeric_limits<double>::infinity();
    for (const auto & c : res.candidates) {
      if (c.solution.feasible) {
        classes.insert(c.solution.signature.str());
        best = std::min(best, c.solution.cost);
      }
    }
    distinct += classes.size() >= 2;
    // No previous class on the first cycle, so the pick is the plain cost argmin.
    ASSERT_TRUE(res.feasible);
    EXPECT_EQ(res.selected.cost, best);
    EXPECT_TRUE(res.candidates[static_cast<std::size_t>(res.selected_index)].solution.feasible);
  }
  EXPECT_GE(distinct, 80);
}

TEST(SlowedGuidanceWarmStart, ReplaysSlowerAndNeedsScalesBelowOne)
{
  const auto path = straight_path();
  const std::vector<ObstacleState> obs = {pedestrian(1, {9.0, -3.5}, {0.0, 1.0})};
  TmpcConfig cfg;
  const VehicleState ego = cruising();
  const auto res = TmpcPlanner(cfg).plan(ego, obs, path);
  ASSERT_FALSE(res.guidance.empty());
  const auto & g = res.guidance.front();
  const auto preds = predict_obstacles(obs, cfg);
  const trajopt::NonlinearProgram nlp(ego, path, preds, cfg.weights, cfg.horizon, cfg.limits, cfg.footprint);

  cfg.warm_start_time_scales = {0.25};
  const auto slowed = slowed_guidance_warm_start(ego, g, cfg, nlp);
  ASSERT_EQ(slowed.size(), 35u);
  const auto full = trajopt::simulate_inputs(ego, guidance_warm_start(ego, g, cfg), cfg.horizon.dt);
  const auto slow = trajopt::simulate_inputs(ego, slowed, cfg.horizon.dt);
  EXPECT_LT(slow.back().x, full.back().x);

  cfg.warm_start_time_scales = {1.0};
  EXPECT_TRUE(slowed_guidance_warm_start(ego, g, cfg, nlp).empty());
}

TEST(TmpcPlanner, WallLeadsToFlaggedBraking)
{
  const auto path = straight_path();
  std::vector<ObstacleState> wall;
  for (int j = 0; j < 11; ++j) {
    wall.push_back(pedestrian(j, {4.0, -5.0 + j}, {0.0, 0.0}));
  }
  TmpcPlanner planner;
  const auto res = planner.plan(cruising(), wall, path);
  EXPECT_FALSE(res.feasible);
  EXPECT_EQ(res.selected_index, -1);
  EXPECT_FALSE(res.selected.feasible);
  for (const auto & c : res.candidates) {
    EXPECT_FALSE(c.solution.feasible);
  }
  ASSERT_EQ(res.selected.inputs.size(), 35u);
  EXPECT_DOUBLE_EQ(res.selected.inputs.front().acceleration, -3.0);
  for (std::size_t k = 1; k < res.selected.states.size(); ++k) {
    EXPECT_LE(res.selected.states[k].v, res.selected.states[k - 1].v);
    EXPECT_GE(res.selected.states[k].v, 0.0);
  }
  EXPECT_NEAR(res.selected.states.back().v, 0.0, 1e-12);
}

TEST(TmpcPlanner, BaselineVariantsShareTheCodePath)
{
  const auto path = straight_path();
  const std::vector<ObstacleState> obs = {pedestrian(1, {9.0, -3.5}, {0.0, 1.0})};
  TmpcConfig lmpcc;
  lmpcc.num_guided = 0;
  const auto a = TmpcPlanner(lmpcc).plan(cruising(), obs, path);
  ASSERT_EQ(a.candidates.size(), 1u);
  EXPECT_EQ(a.candidates.front().source, CandidateSource::kFallback);
  EXPECT_TRUE(a.guidance.empty());

  TmpcConfig no_fallback;
  no_fallback.fallback = false;
  const auto b = TmpcPlanner(no_fallback).plan(cruising(), obs, path);
  ASSERT_FALSE(b.candidates.empty());
  for (const auto & c : b.candidates) {
    EXPECT_EQ(c.source, CandidateSource::kGuided);
  }
  EXPECT_LE(b.candidates.size(), 4u);
}

TEST(TmpcPlanner, DeterministicAcrossRunsAndScheduling)
{
  const auto path = straight_path();
  auto run = [&](int threads) {
      TmpcConfig cfg;
      cfg.seed = 7;
      cfg.threads = threads;
      TmpcPlanner planner(cfg);
      VehicleState ego = cruising();
      std::vector<ObstacleState> obs = {
        pedestrian(1, {9.0, -3.5}, {0.0, 1.0}), pedestrian(2, {14.0, 4.0}, {0.0, -1.2})};
      std::vector<VehicleState> trace;
      for (int cycle = 0; cycle < 5; ++cycle) {
        const auto res = planner.plan(ego, obs, path);
        trace.insert(trace.end(), res.selected.states.begin(), res.selected.states.end());
        ego = trajopt::bicycle_step(ego, res.selected.inputs.front(), 0.1);
        for (auto & o : obs) {
          o.position += 0.1 * o.velocity;
        }
      }
      return trace;
    };
  const auto a = run(1);
  const auto b = run(1);
  const auto c = run(3);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].vec(), b[i].vec());
    EXPECT_EQ(a[i].vec(), c[i].vec());
  }
}

}  // namespace
}  // namespace tmpc::planner
