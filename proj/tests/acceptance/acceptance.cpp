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

// Acceptance run: one PASS/FAIL line per criterion, details on the lines
// below it. Exit status is the number of criteria with a failed check that is
// not marked as known.

#include "tmpc/bench/batch.hpp"
#include "tmpc/bench/config.hpp"
#include "tmpc/guidance/guidance.hpp"
#include "tmpc/planner/tmpc_planner.hpp"
#include "tmpc/random.hpp"
#include "tmpc/sim/episode.hpp"
#include "tmpc/sim/world.hpp"
#include "tmpc/topology/winding.hpp"
#include "tmpc/tracking/fiala.hpp"
#include "tmpc/tracking/mpcc.hpp"
#include "tmpc/tracking/single_track.hpp"
#include "tmpc/trajopt/chance_constraint.hpp"
#include "tmpc/trajopt/planner_problem.hpp"

#include "../planner_fixtures.hpp"
#include "../topology_fixtures.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace
{

using namespace tmpc;
using Clock = std::chrono::steady_clock;

struct Outcome
{
  bool pass{true};
  bool unexpected{false};
  std::vector<std::string> notes;

  // A known check cannot hold as stated; it still fails the criterion.
  void check(bool ok, const std::string & what, bool known = false)
  {
    pass = pass && ok;
    unexpected = unexpected || (!ok && !known);
    notes.push_back(std::string(ok ? "ok   " : known ? "FAIL [known] " : "FAIL ") + what);
  }
};

std::string fmt(const char * f, double a)
{
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char * f, double a, double b)
{
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char * f, double a, double b, double c)
{
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int worker_count()
{
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

bench::BatchSpec table_spec()
{
  auto spec = bench::load_batch_spec(std::string(TMPC_SOURCE_DIR) + "/scenarios/table1.json");
  spec.exclude.clear();  // LMPCC at 0 pedestrians is needed for the 0 -> 4 comparison
  spec.runs = 25;
  spec.record_timing = false;
  spec.jobs = worker_count();
  return spec;
}

// ---------------------------------------------------------------- criterion 1

struct TableRun
{
  bench::BatchSpec spec;
  bench::BatchResult result;
  double wall{0.0};
};

Outcome table_reproduction(const TableRun & run)
{
  Outcome out;
  std::map<std::pair<std::string, int>, bench::SummaryRow> cell;
  for (const auto & s : run.result.summary) {
    cell[{s.planner, s.n_peds}] = s;
    out.notes.push_back(
      "     " + s.planner + "@" + std::to_string(s.n_peds) +
      fmt(": duration %.2f (%.2f)", s.mean_duration, s.std_duration) +
      fmt(", avg vel %.3f, collisions %.0f", s.mean_avg_velocity, s.total_collisions) +
      fmt(", timeouts %.0f, failures %.0f", s.total_timeouts, s.failures));
  }
  auto get = [&](const char * p, int n) { return cell.at({p, n}); };

  const auto t0 = get("tmpcpp", 0);
  out.check(std::abs(t0.mean_duration - 19.4) <= 1.94,
    fmt("T-MPC++ empty-world duration %.2f s within 19.4 +- 10%%", t0.mean_duration));
  for (const auto & [k, s] : cell) {
    if (k.second == 0) {
      out.check(s.total_collisions == 0 && s.total_timeouts == 0,
        k.first + " at 0 pedestrians: no collisions, no time-outs");
    }
  }
  for (const char * p : {"tmpcpp", "tmpcpp_no_fallback"}) {
    const auto s = get(p, 4);
    out.check(s.total_collisions == 0 && s.total_timeouts == 0,
      std::string(p) + " at 4 pedestrians: no collisions, no time-outs");
  }
  const auto t4 = get("tmpcpp", 4);
  const auto l4 = get("lmpcc", 4);
  const auto b4 = get("braking", 4);
  out.check(t4.mean_duration < l4.mean_duration,
    fmt("4 pedestrians: duration T-MPC++ %.2f < LMPCC %.2f", t4.mean_duration, l4.mean_duration));
  out.check(t4.mean_avg_velocity >= l4.mean_avg_velocity && l4.mean_avg_velocity >= b4.mean_avg_velocity,
    fmt("4 pedestrians: avg velocity %.3f >= %.3f >= %.3f", t4.mean_avg_velocity, l4.mean_avg_velocity,
      b4.mean_avg_velocity));
  for (const auto & p : run.spec.planners) {
    const std::string name = sim::to_string(p);
    std::vector<double> d;
    for (int n : run.spec.pedestrian_counts) {
      d.push_back(get(name.c_str(), n).mean_duration);
    }
    out.check(std::is_sorted(d.begin(), d.end()) && std::adjacent_find(d.begin(), d.end()) == d.end(),
      name + ": duration increases strictly with pedestrian count");
  }
  const double dt_tmpc = t4.mean_duration - t0.mean_duration;
  const double dt_lmpcc = l4.mean_duration - get("lmpcc", 0).mean_duration;
  out.check(dt_tmpc < dt_lmpcc, fmt("0 -> 4 increase T-MPC++ %+.2f s < LMPCC %+.2f s", dt_tmpc, dt_lmpcc));
  out.check(run.result.failures == 0, "no failed episodes");
  out.check(run.wall <= 900.0,
    fmt("batch wall time %.0f s on %.0f worker thread(s), limit 900 s", run.wall, run.spec.jobs));
  return out;
}

// ---------------------------------------------------------------- criterion 2

Outcome chance_constraints()
{
  Outcome out;
  const auto t_start = Clock::now();
  const auto path = testing_fixtures::straight_path();
  const double q = 0.026;

  // Pedestrian walking into the corridor ahead of the ego.
  prediction::ObstacleState ped;
  ped.id = 1;
  ped.position = {13.0, -3.0};
  ped.velocity = {0.0, 0.3};
  ped.covariance.diagonal() << 0.01, 0.01, 0.01, 0.01;
  const trajopt::HorizonSpec horizon;
  const auto pred = prediction::propagate_cv(ped, q, horizon.dt, horizon.steps);
  const trajopt::PlannerWeights weights;
  const trajopt::VehicleState x0{0, 0, 0, 2.0, 0, 0};
  const auto nlp = trajopt::build_problem(x0, path, {pred}, weights);
  const auto sol = trajopt::solve_sqp(nlp, testing_fixtures::zero_inputs(horizon.steps));
  out.check(sol.feasible, "planner solution is feasible");

  const trajopt::Footprint fp;
  const double eps_k = weights.eps_joint / horizon.steps;
  const double gamma = trajopt::risk_quantile(eps_k);
  const double r_sum = fp.disc_radius + ped.radius;
  double tightest = 1e9;
  for (int k = 1; k <= horizon.steps; ++k) {
    const auto & st = sol.states[static_cast<std::size_t>(k)];
    for (double off : fp.offsets) {
      const Vec2 p = st.position() + off * heading_vector(st.heading);
      tightest = std::min(tightest, trajopt::chance_constraint_value(p, pred.means[static_cast<std::size_t>(k)],
        pred.covariances[static_cast<std::size_t>(k)], r_sum, gamma).value);
    }
  }
  out.check(std::abs(tightest) <= 1e-3, fmt("a chance constraint is active (min margin %.2e m)", tightest));

  // Sample pedestrian trajectories from the same Gaussian process model.
  constexpr int kSamples = 100000;
  Rng rng(2026);
  const Eigen::Matrix4d l0 = ped.covariance.llt().matrixL();
  std::vector<int> hits(static_cast<std::size_t>(horizon.steps) + 1, 0);
  int joint = 0;
  for (int i = 0; i < kSamples; ++i) {
    Eigen::Vector4d z0;
    z0 << rng.normal(), rng.normal(), rng.normal(), rng.normal();
    const Eigen::Vector4d x = l0 * z0;
    std::vector<prediction::ObstacleState> o = {ped};
    o[0].position += x.head<2>();
    o[0].velocity += x.tail<2>();
    bool any = false;
    for (int k = 1; k <= horizon.steps; ++k) {
      sim::step_pedestrians(o, horizon.dt, q, rng);
      if (sim::overlaps(sol.states[static_cast<std::size_t>(k)], fp, o[0])) {
        ++hits[static_cast<std::size_t>(k)];
        any = true;
      }
    }
    joint += any;
  }
  const double worst = static_cast<double>(*std::max_element(hits.begin(), hits.end())) / kSamples;
  const double joint_rate = static_cast<double>(joint) / kSamples;
  out.check(worst <= eps_k + 0.01, fmt("worst per-step collision frequency %.4f <= %.4f", worst, eps_k + 0.01));
  out.check(joint_rate <= weights.eps_joint + 0.01,
    fmt("whole-horizon violation %.4f <= %.4f", joint_rate, weights.eps_joint + 0.01));
  const double wall = seconds_since(t_start);
  out.check(wall < 60.0, fmt("runtime %.1f s", wall));
  return out;
}

// ---------------------------------------------------------------- criterion 3

Outcome topology_suite()
{
  Outcome out;
  Rng rng(303);
  double anti = 0.0, rigid = 0.0, refine = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto [ego, obs] = testing_fixtures::random_pair(rng);
    const double w = topology::winding_number(ego, obs);
    anti = std::max(anti, std::abs(topology::winding_number(obs, ego) + w));

    const Eigen::Rotation2Dd rot(rng.uniform(-kPi, kPi));
    const Vec2 shift(rng.uniform(-100, 100), rng.uniform(-100, 100));
    Positions e2, o2, e3, o3;
    for (std::size_t k = 0; k < ego.size(); ++k) {
      e2.push_back(rot * ego[k] + shift);
      o2.push_back(rot * obs[k] + shift);
      if (k > 0) {
        e3.push_back(0.5 * (ego[k - 1] + ego[k]));
        o3.push_back(0.5 * (obs[k - 1] + obs[k]));
      }
      e3.push_back(ego[k]);
      o3.push_back(obs[k]);
    }
    rigid = std::max(rigid, std::abs(topology::winding_number(e2, o2) - w));
    refine = std::max(refine, std::abs(topology::winding_number(e3, o3) - w));
  }
  out.check(anti <= 1e-9, fmt("antisymmetry under role swap: max |w(o,e) + w(e,o)| = %.3g", anti) +
    " (exchanging roles rotates every relative vector by pi, so w(o,e) = w(e,o))", true);
  out.check(rigid <= 1e-9, fmt("rigid-motion invariance: max error %.3g", rigid));
  out.check(refine <= 1e-9, fmt("refinement invariance: max error %.3g", refine));

  // Closed-loop guidance cycles with four pedestrians.
  int multi_cycles = 0, distinct_cycles = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    sim::ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.n_pedestrians = 4;
    const auto path = sim::scenario_path(cfg);
    auto peds = sim::scenario_pedestrians(cfg, path);
    planner::TmpcPlanner pl(sim::planner_config(cfg));
    trajopt::VehicleState ego;
    Rng noise(seed);
    for (int cycle = 0; cycle < 120 && ego.s < cfg.goal_progress; ++cycle) {
      const auto res = pl.plan(ego, peds, path);
      if (res.guidance.size() >= 2) {
        ++multi_cycles;
        std::set<std::string> sigs;
        for (const auto & g : res.guidance) {
          sigs.insert(g.signature.str());
        }
        distinct_cycles += sigs.size() == res.guidance.size();
      }
      const auto u = planner::admissible_input(ego, res.selected.inputs.front(), {}, cfg.planner_period);
      for (int k = 0; k < 2; ++k) {
        ego = trajopt::clamp_state(trajopt::bicycle_step(ego, u, cfg.sim_dt), {});
      }
      sim::step_pedestrians(peds, cfg.planner_period, 0.0, noise);
    }
  }
  out.check(multi_cycles > 0 && distinct_cycles == multi_cycles,
    fmt("pairwise-distinct guidance signatures in %.0f of %.0f multi-trajectory cycles", distinct_cycles,
      multi_cycles));

  const auto path = testing_fixtures::straight_path();
  const guidance::GuidanceParams params;
  auto walker = [](int id, Vec2 p, Vec2 v) {
      prediction::ObstacleState o;
      o.id = id;
      o.position = p;
      o.velocity = v;
      return prediction::propagate_cv(o, 0.0, 0.2, 35);
    };
  const std::vector<prediction::GaussianPrediction> scene = {
    walker(1, {6.0, -3.0}, {0.0, 1.0}), walker(2, {10.0, 4.0}, {0.0, -1.0})};
  int multi = 0;
  for (int seed = 0; seed < 100; ++seed) {
    guidance::GuidancePlanner gp(params);
    Rng r(static_cast<std::uint64_t>(seed), 0);
    const auto trajs = gp.plan({0, 0}, 0.0, path, scene, 0.0, r);
    std::set<std::string> sigs;
    for (const auto & t : trajs) {
      sigs.insert(t.signature.str());
    }
    multi += sigs.size() >= 2;
  }
  out.check(multi >= 90, fmt("two-pedestrian crossing: >= 2 classes in %.0f/100 seeds", multi));
  return out;
}

// ---------------------------------------------------------------- criterion 4

Outcome optimizer_correctness()
{
  Outcome out;
  Rng rng(404);
  const std::vector<geometry::Waypoint> bend = {{0, 0}, {10, 0}, {20, 3}, {30, 10}, {40, 20}};
  const auto curved = geometry::fit_reference_path(bend);
  const auto straight = testing_fixtures::straight_path();
  double worst = 0.0;
  int points = 0;
  auto track = [&](double a, double fd) {
      worst = std::max(worst, std::abs(a - fd) / std::max(1.0, std::abs(fd)));
    };
  while (points < 100) {
    const auto & p = points % 2 ? curved : straight;
    std::vector<prediction::GaussianPrediction> preds = {testing_fixtures::static_obstacle(
      1, {rng.uniform(5, 30), rng.uniform(-4, 4)}, rng.uniform(0.05, 0.4))};
    auto nlp = trajopt::build_problem(trajopt::VehicleState{}, p, preds, trajopt::PlannerWeights{});
    nlp.set_exact_constraint_jacobian(true);
    const int k = 1 + static_cast<int>(rng.uniform() * 34.999);
    trajopt::NonlinearProgram::StateVec x;
    const double s = rng.uniform(2.0, p.length() - 4.0);
    const Vec2 c = p.position(s);
    x << c.x() + rng.uniform(-2, 2), c.y() + rng.uniform(-2, 2), p.heading(s) + rng.uniform(-0.5, 0.5),
      rng.uniform(0, 5), rng.uniform(-0.4, 0.4), s + rng.uniform(-1, 1);
    if ((x.head<2>() - preds[0].means[static_cast<std::size_t>(k)]).norm() < 1.5) {
      continue;
    }
    ++points;
    const trajopt::NonlinearProgram::InputVec u(rng.uniform(-3, 3), rng.uniform(-0.6, 0.6));
    const double h = 1e-6;
    Eigen::MatrixXd dummy(0, 0);

    // Dynamics.
    trajopt::StateMatrix a;
    trajopt::InputMatrix b;
    trajopt::bicycle_step_jacobian(x, u, 0.2, 2.7, a, b);
    for (int col = 0; col < 8; ++col) {
      auto xp = x, xm = x;
      auto up = u, um = u;
      (col < 6 ? xp(col) : up(col - 6)) += h;
      (col < 6 ? xm(col) : um(col - 6)) -= h;
      const auto fd = ((trajopt::bicycle_step(xp, up, 0.2, 2.7) - trajopt::bicycle_step(xm, um, 0.2, 2.7)) /
        (2 * h)).eval();
      for (int row = 0; row < 6; ++row) {
        track(col < 6 ? a(row, col) : b(row, col - 6), fd(row));
      }
    }
    // Cost residuals, stage and terminal.
    for (int stage : {k, nlp.horizon()}) {
      const auto * up = stage < nlp.horizon() ? &u : nullptr;
      Eigen::VectorXd r(5), rp(5), rm(5);
      Eigen::MatrixXd jx(5, 6), ju(5, 2);
      nlp.residuals(stage, x, up, r, jx, ju, true);
      for (int col = 0; col < (up ? 8 : 6); ++col) {
        auto xp = x, xm = x;
        auto upp = u, umm = u;
        (col < 6 ? xp(col) : upp(col - 6)) += h;
        (col < 6 ? xm(col) : umm(col - 6)) -= h;
        nlp.residuals(stage, xp, up ? &upp : nullptr, rp, dummy, dummy, false);
        nlp.residuals(stage, xm, up ? &umm : nullptr, rm, dummy, dummy, false);
        const Eigen::VectorXd fd = (rp - rm) / (2 * h);
        for (int row = 0; row < 5; ++row) {
          track(col < 6 ? jx(row, col) : ju(row, col - 6), fd(row));
        }
      }
    }
    // Chance and bound constraints.
    const int nc = nlp.num_constraints(k);
    Eigen::VectorXd cv(nc), cp(nc), cm(nc);
    Eigen::MatrixXd cx(nc, 6);
    nlp.constraints(k, x, cv, cx, true);
    for (int col = 0; col < 6; ++col) {
      auto xp = x, xm = x;
      xp(col) += h;
      xm(col) -= h;
      nlp.constraints(k, xp, cp, dummy, false);
      nlp.constraints(k, xm, cm, dummy, false);
      const Eigen::VectorXd fd = (cp - cm) / (2 * h);
      for (int row = 0; row < nc; ++row) {
        track(cx(row, col), fd(row));
      }
    }
  }
  out.check(worst <= 1e-4, fmt("Jacobians vs central differences at 100 points: max relative error %.2e", worst));

  // Re-simulation of feasible solutions from a few constrained problems.
  double resim = 0.0;
  int feasible = 0;
  for (int i = 0; i < 10; ++i) {
    const trajopt::VehicleState x0{0, rng.uniform(-0.5, 0.5), rng.uniform(-0.1, 0.1), rng.uniform(1, 3), 0, 0};
    std::vector<prediction::GaussianPrediction> preds = {
      testing_fixtures::static_obstacle(1, {rng.uniform(8, 20), rng.uniform(-2, 2)}, 0.1)};
    const auto nlp = trajopt::build_problem(x0, straight, preds, trajopt::PlannerWeights{});
    const auto sol = trajopt::solve_sqp(nlp, testing_fixtures::zero_inputs());
    if (!sol.feasible) {
      continue;
    }
    ++feasible;
    const auto again = trajopt::simulate_inputs(x0, sol.inputs, 0.2);
    for (std::size_t k = 0; k < again.size(); ++k) {
      resim = std::max(resim, (again[k].position() - sol.states[k].position()).norm());
    }
  }
  out.check(feasible > 0 && resim <= 1e-6,
    fmt("%.0f feasible solutions re-simulate within %.2e m", feasible, resim));

  const auto empty = trajopt::build_problem(
    trajopt::VehicleState{0, 0, 0, 2.0, 0, 0}, straight, {}, trajopt::PlannerWeights{});
  const auto sol = trajopt::solve_sqp(empty, testing_fixtures::zero_inputs());
  out.check(sol.cost < 1e-6 && sol.iterations <= 2,
    fmt("empty world: cost %.2e after %.0f SQP iteration(s)", sol.cost, sol.iterations));
  return out;
}

// ---------------------------------------------------------------- criterion 5

Outcome real_time()
{
  Outcome out;
  std::vector<double> times;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    sim::ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.n_pedestrians = 4;
    const auto m = sim::run_episode(cfg);
    out.check(!m.failed, "episode " + std::to_string(seed) + " ran");
    times.insert(times.end(), m.cycle_times.begin(), m.cycle_times.end());
  }
  std::sort(times.begin(), times.end());
  if (times.empty()) {
    out.check(false, "no planning cycles recorded");
    return out;
  }
  const double median = 1e3 * times[times.size() / 2];
  const double p95 = 1e3 * times[std::min(times.size() - 1, static_cast<std::size_t>(0.95 * times.size()))];
  out.check(median <= 100.0,
    fmt("%.0f cycles (4 guided + fallback, 4 pedestrians, N = 35): median %.1f ms, p95 %.1f ms",
      static_cast<double>(times.size()), median, p95));
  return out;
}

// ---------------------------------------------------------------- criterion 6

Outcome tracking_controller()
{
  Outcome out;
  using namespace tracking;
  const FialaTireParams tire;
  const double a_sl = std::atan(tire.saturation_tan());
  const double mfz = tire.mu * tire.fz;
  bool odd = true;
  Rng rng(606);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-0.5, 0.5);
    odd = odd && fiala_lateral_force(-a, tire) == -fiala_lateral_force(a, tire);
  }
  out.check(odd, "Fiala force is odd in slip angle (exact)");
  out.check(fiala_lateral_force(1.5 * a_sl, tire) == -mfz && fiala_lateral_force(-1.5 * a_sl, tire) == mfz &&
      std::abs(fiala_lateral_force(a_sl, tire)) == mfz,
    "Fiala force saturates at exactly mu Fz");
  const double below = fiala_lateral_force(std::nextafter(a_sl, 0.0), tire);
  out.check(std::abs(below + mfz) <= 1e-9 * mfz, fmt("continuous at the saturation slip (gap %.2e N)", below + mfz));

  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    sim::ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.n_pedestrians = 4;
    cfg.plant = sim::PlantKind::kSingleTrack;
    const auto m = sim::run_episode(cfg);
    out.check(!m.failed && m.reached_goal, "single-track episode " + std::to_string(seed) + " reaches the goal");
    // Over the whole episode, which includes any stretch above 2 m/s.
    out.check(m.tracking_rms_contouring <= 0.15,
      fmt("  RMS contouring error %.2e m over all samples (max speed %.2f m/s)", m.tracking_rms_contouring,
        m.max_tracking_speed));
    out.check(m.friction_violations == 0,
      fmt("  friction circle never violated (%.0f violations, min margin %.0f N)", m.friction_violations,
        m.min_friction_margin));
  }

  const SingleTrackParams p;
  std::vector<Vec2> pts;
  std::vector<double> v;
  for (int i = 0; i <= 6; ++i) {
    pts.emplace_back(10.0 * i, 0.0);
    v.push_back(2.0);
  }
  const auto ref = make_tracking_reference(pts, v);
  MpccController ctrl(p);
  SingleTrackState s;
  s.vx = 2.0;
  s.y = 0.5;
  double settled_at = -1.0;
  bool friction_ok = true;
  for (int i = 0; i < 120; ++i) {
    s = single_track_step(s, ctrl.solve(s, ref).command, p, 0.05);
    const auto mm = friction_circle_margin(s, p);
    friction_ok = friction_ok && std::min(mm[0], mm[1]) >= 0.0;
    if (std::abs(s.y) >= 0.05) {
      settled_at = -1.0;
    } else if (settled_at < 0.0) {
      settled_at = 0.05 * (i + 1);
    }
  }
  out.check(settled_at > 0.0 && settled_at <= 4.0 && friction_ok,
    fmt("0.5 m lateral offset settles within 5 cm after %.2f s", settled_at));
  return out;
}

// ---------------------------------------------------------------- criterion 7

std::string csv_text(const std::vector<bench::EpisodeRow> & rows)
{
  std::ostringstream o;
  o << bench::kCsvHeader << '\n';
  for (const auto & r : rows) {
    o << bench::format_row(r) << '\n';
  }
  return o.str();
}

Outcome determinism(const TableRun & table)
{
  Outcome out;
  auto spec = table.spec;
  spec.planners = {sim::PlannerKind::kTmpcpp, sim::PlannerKind::kBraking};
  spec.pedestrian_counts = {2, 4};
  spec.runs = 3;
  spec.jobs = 1;
  const std::string a = csv_text(bench::run_batch(spec).rows);
  spec.jobs = 3;
  const std::string b = csv_text(bench::run_batch(spec).rows);
  out.check(a == b, "rerun with 1 and 3 worker threads gives byte-identical CSV");

  std::map<std::tuple<std::string, int, std::uint64_t>, std::string> full;
  for (const auto & r : table.result.rows) {
    full[{r.planner, r.n_peds, r.seed}] = bench::format_row(r);
  }
  std::istringstream in(a);
  bool same = true;
  int compared = 0;
  for (const auto & r : bench::parse_csv(in)) {
    const auto it = full.find({r.planner, r.n_peds, r.seed});
    same = same && it != full.end() && it->second == bench::format_row(r);
    ++compared;
  }
  out.check(same && compared == 12, fmt("%.0f rows match the full acceptance batch byte for byte", compared));

  bool paired = true;
  for (int n : table.spec.pedestrian_counts) {
    for (int run = 0; run < table.spec.runs; ++run) {
      std::vector<std::vector<prediction::ObstacleState>> spawns;
      for (auto p : table.spec.planners) {
        const auto cfg = bench::job_config(
          table.spec, {p, n, table.spec.base_seed + static_cast<std::uint64_t>(run)});
        spawns.push_back(sim::scenario_pedestrians(cfg, sim::scenario_path(cfg)));
      }
      for (const auto & sp : spawns) {
        paired = paired && sp.size() == spawns.front().size();
        for (std::size_t i = 0; paired && i < sp.size(); ++i) {
          paired = sp[i].id == spawns.front()[i].id && sp[i].position == spawns.front()[i].position &&
            sp[i].velocity == spawns.front()[i].velocity && sp[i].radius == spawns.front()[i].radius;
        }
      }
    }
  }
  out.check(paired, "paired seeds give identical pedestrian spawns across all planners");
  return out;
}

// ---------------------------------------------------------------- criterion 8

Outcome infeasibility(const TableRun & table)
{
  Outcome out;
  auto spec = table.spec;
  spec.planners = {sim::PlannerKind::kTmpcpp};
  spec.pedestrian_counts = {4};
  spec.scenario.audit_cold_start = true;
  const auto res = bench::run_batch(spec);
  const auto report = bench::source_report(res.rows);
  if (report.size() != 1) {
    out.check(false, "expected one batch cell");
    return out;
  }
  const auto & r = report.front();
  out.notes.push_back(fmt("     infeasible fraction per solve: guided %.4f, fallback %.4f, cold start %.4f",
    r.guided.fraction(), r.fallback.fraction(), r.cold.fraction()));
  out.check(r.guided_cycles.solves > 0 && r.cold.solves > 0, "guided and cold-start cycles recorded");
  // One cold-start solve per cycle, so its per-solve and per-cycle fractions coincide.
  out.check(r.guided_cycles.fraction() < r.cold.fraction(),
    fmt("infeasible-cycle fraction: guided planners %.4f < cold start %.4f", r.guided_cycles.fraction(),
      r.cold.fraction()));

  // The audit solve is never selected, so the episodes match the main batch.
  std::map<std::uint64_t, std::string> main_rows;
  for (const auto & row : table.result.rows) {
    if (row.planner == "tmpcpp" && row.n_peds == 4) {
      auto copy = row;
      copy.solves[4] = copy.solves[5] = 0;
      main_rows[row.seed] = bench::format_row(copy);
    }
  }
  bool same = true;
  for (auto row : res.rows) {
    row.solves[4] = row.solves[5] = 0;
    same = same && main_rows[row.seed] == bench::format_row(row);
  }
  out.check(same, "cold-start audit leaves the closed loop unchanged");
  return out;
}

}  // namespace

int main(int argc, char ** argv)
{
  struct Criterion
  {
    int id;
    const char * name;
    std::function<Outcome()> run;
  };
  TableRun table;
  table.spec = table_spec();

  const std::vector<Criterion> criteria = {
    {1, "Table 1 qualitative reproduction", [&] {
        const auto t0 = Clock::now();
        table.result = bench::run_batch(table.spec);
        table.wall = seconds_since(t0);
        return table_reproduction(table);
      }},
    {2, "chance-constraint validity", chance_constraints},
    {3, "topology suite", topology_suite},
    {4, "optimizer correctness", optimizer_correctness},
    {5, "real-time planning cycle", real_time},
    {6, "tracking controller", tracking_controller},
    {7, "determinism", [&] { return determinism(table); }},
    {8, "infeasibility by warm-start source", [&] { return infeasibility(table); }},
  };

  // Optional arguments select criteria by number; 7 and 8 need 1.
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    only.insert(std::atoi(argv[i]));
  }
  int unexpected = 0;
  for (const auto & c : criteria) {
    if (!only.empty() && !only.count(c.id)) {
      continue;
    }
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception & e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %d: %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, seconds_since(t0),
      !o.pass && !o.unexpected ? " [known]" : "");
    for (const auto & n : o.notes) {
      std::printf("    %s\n", n.c_str());
    }
    std::fflush(stdout);
    unexpected += o.unexpected ? 1 : 0;
  }
  return unexpected;
}
