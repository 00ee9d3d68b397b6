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

#ifndef TMPC__BENCH__BATCH_HPP_
#define TMPC__BENCH__BATCH_HPP_

#include "tmpc/bench/config.hpp"
#include "tmpc/sim/episode.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace tmpc::bench
{

struct EpisodeRow
{
  std::uint64_t seed{0};
  std::string planner;
  int n_peds{0};
  double duration_s{0.0};
  int collisions{0};
  bool timed_out{false};
  double avg_vel_mps{0.0};
  double min_clearance_m{0.0};
  double infeasible_frac{0.0};
  std::optional<double> mean_cycle_ms;  ///< empty when timing is not recorded
  bool failed{false};
  /// Solve counts and infeasible counts: guided, fallback, cold start, then
  /// cycles with guided candidates and those where none was feasible.
  std::array<int, 8> solves{};
};

inline constexpr const char * kCsvHeader =
  "seed,planner,n_peds,duration_s,collisions,timed_out,avg_vel_mps,min_clearance_m,infeasible_frac,"
  "mean_cycle_ms,failed,guided_solves,guided_infeasible,fallback_solves,fallback_infeasible,cold_solves,"
  "cold_infeasible,guided_cycles,guided_cycles_infeasible";

namespace detail
{

/// Shortest round-trip representation, so parsing a row gives back the exact value.
inline std::string num(double v)
{
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), r.ptr};
}

inline double parse_double(const std::string & s, int line)
{
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

inline long long parse_int(const std::string & s, int line)
{
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError("line " + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline EpisodeRow make_row(
  std::uint64_t seed, sim::PlannerKind planner, int n_peds, const sim::MetricsRecord & m, bool timing)
{
  EpisodeRow r;
  r.seed = seed;
  r.planner = sim::to_string(planner);
  r.n_peds = n_peds;
  r.duration_s = m.duration;
  r.collisions = m.collisions;
  r.timed_out = m.timed_out;
  r.avg_vel_mps = m.avg_velocity;
  r.min_clearance_m = std::isfinite(m.min_clearance) ? m.min_clearance : -1.0;
  r.infeasible_frac = m.infeasible_cycle_fraction;
  if (timing) {
    r.mean_cycle_ms = 1e3 * m.mean_cycle_time();
  }
  r.failed = m.failed;
  r.solves = {
    m.guided.solves, m.guided.infeasible, m.fallback.solves, m.fallback.infeasible, m.cold.solves,
    m.cold.infeasible, m.guided_cycles.solves, m.guided_cycles.infeasible};
  return r;
}

inline std::string format_row(const EpisodeRow & r)
{
  std::ostringstream o;
  o << r.seed << ',' << r.planner << ',' << r.n_peds << ',' << detail::num(r.duration_s) << ',' << r.collisions
    << ',' << (r.timed_out ? 1 : 0) << ',' << detail::num(r.avg_vel_mps) << ',' << detail::num(r.min_clearance_m)
    << ',' << detail::num(r.infeasible_frac) << ',' << (r.mean_cycle_ms ? detail::num(*r.mean_cycle_ms) : "NA")
    << ',' << (r.failed ? 1 : 0);
  for (int v : r.solves) {
    o << ',' << v;
  }
  return o.str();
}

/// Parses episode CSV text (header required); errors name the line.
inline std::vector<EpisodeRow> parse_csv(std::istream & in)
{
  std::string line;
  int no = 1;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ConfigError("line 1: unexpected CSV header");
  }
  std::vector<EpisodeRow> rows;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      f.push_back(cell);
    }
    if (f.size() != 19) {
      throw ConfigError("line " + std::to_string(no) + ": expected 19 fields");
    }
    EpisodeRow r;
    r.seed = static_cast<std::uint64_t>(detail::parse_int(f[0], no));
    r.planner = f[1];
    r.n_peds = static_cast<int>(detail::parse_int(f[2], no));
    r.duration_s = detail::parse_double(f[3], no);
    r.collisions = static_cast<int>(detail::parse_int(f[4], no));
    r.timed_out = detail::parse_int(f[5], no) != 0;
    r.avg_vel_mps = detail::parse_double(f[6], no);
    r.min_clearance_m = detail::parse_double(f[7], no);
    r.infeasible_frac = detail::parse_double(f[8], no);
    if (f[9] != "NA") {
      r.mean_cycle_ms = detail::parse_double(f[9], no);
    }
    r.failed = detail::parse_int(f[10], no) != 0;
    for (std::size_t i = 0; i < r.solves.size(); ++i) {
      r.solves[i] = static_cast<int>(detail::parse_int(f[11 + i], no));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

struct SummaryRow
{
  int n_peds{0};
  std::string planner;
  int episodes{0};
  double mean_duration{0.0};
  double std_duration{0.0};  ///< sample standard deviation
  int total_collisions{0};
  int total_timeouts{0};
  double mean_avg_velocity{0.0};
  int failures{0};
};

inline int planner_rank(const std::string & name)
{
  static const std::array<const char *, 4> order = {"braking", "lmpcc", "tmpcpp_no_fallback", "tmpcpp"};
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (name == order[i]) {
      return static_cast<int>(i);
    }
  }
  return static_cast<int>(order.size());
}

/// One row per (pedestrian count, planner), ordered as in the comparison grid.
inline std::vector<SummaryRow> summarize(const std::vector<EpisodeRow> & rows)
{
  std::map<std::tuple<int, int, std::string>, std::vector<const EpisodeRow *>> cells;
  for (const auto & r : rows) {
    cells[{r.n_peds, planner_rank(r.planner), r.planner}].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto & [key, list] : cells) {
    SummaryRow s;
    s.n_peds = std::get<0>(key);
    s.planner = std::get<2>(key);
    s.episodes = static_cast<int>(list.size());
    double sum = 0.0;
    double vel = 0.0;
    for (const auto * r : list) {
      sum += r->duration_s;
      vel += r->avg_vel_mps;
      s.total_collisions += r->collisions;
      s.total_timeouts += r->timed_out ? 1 : 0;
      s.failures += r->failed ? 1 : 0;
    }
    s.mean_duration = sum / s.episodes;
    s.mean_avg_velocity = vel / s.episodes;
    double sq = 0.0;
    for (const auto * r : list) {
      sq += (r->duration_s - s.mean_duration) * (r->duration_s - s.mean_duration);
    }
    s.std_duration = s.episodes > 1 ? std::sqrt(sq / (s.episodes - 1)) : 0.0;
    out.push_back(s);
  }
  return out;
}

inline std::string summary_csv(const std::vector<SummaryRow> & rows)
{
  std::ostringstream o;
  o << "n_peds,planner,episodes,mean_duration_s,std_duration_s,collisions,timeouts,mean_avg_vel_mps,failures\n";
  for (const auto & s : rows) {
    o << s.n_peds << ',' << s.planner << ',' << s.episodes << ',' << detail::num(s.mean_duration) << ','
      << detail::num(s.std_duration) << ',' << s.total_collisions << ',' << s.total_timeouts << ','
      << detail::num(s.mean_avg_velocity) << ',' << s.failures << '\n';
  }
  return o.str();
}

inline const char * planner_label(const std::string & name)
{
  if (name == "braking") {
    return "Braking baseline";
  }
  if (name == "lmpcc") {
    return "LMPCC";
  }
  if (name == "tmpcpp_no_fallback") {
    return "T-MPC++ (w/o fallback)";
  }
  if (name == "tmpcpp") {
    return "T-MPC++";
  }
  return "?";
}

/// Fixed-width comparison grid: one block per pedestrian count.
inline std::string format_grid(const std::vector<SummaryRow> & rows)
{
  std::ostringstream o;
  char buf[160];
  std::snprintf(
    buf, sizeof(buf), "%-6s %-24s %-14s %-11s %-9s %-14s\n", "#Peds", "Method", "Dur. [s]", "Collisions",
    "Time-outs", "Avg. Vel. [m/s]");
  o << buf;
  int last = -1;
  for (const auto & s : rows) {
    if (s.n_peds != last && last != -1) {
      o << '\n';
    }
    char dur[32];
    std::snprintf(dur, sizeof(dur), "%.1f (%.1f)", s.mean_duration, s.std_duration);
    std::snprintf(
      buf, sizeof(buf), "%-6s %-24s %-14s %-11d %-9d %-14.2f\n",
      s.n_peds != last ? std::to_string(s.n_peds).c_str() : "", planner_label(s.planner), dur, s.total_collisions,
      s.total_timeouts, s.mean_avg_velocity);
    o << buf;
    last = s.n_peds;
  }
  return o.str();
}

struct SourceReport
{
  std::string planner;
  int n_peds{0};
  sim::SolveCounts guided;
  sim::SolveCounts fallback;
  sim::SolveCounts cold;
  sim::SolveCounts guided_cycles;
};

/// Infeasible fractions per warm-start source and cell, per solve and, for
/// the guided planners together, per cycle.
inline std::vector<SourceReport> source_report(const std::vector<EpisodeRow> & rows)
{
  std::map<std::tuple<int, int, std::string>, SourceReport> cells;
  for (const auto & r : rows) {
    auto & c = cells[{r.n_peds, planner_rank(r.planner), r.planner}];
    c.planner = r.planner;
    c.n_peds = r.n_peds;
    c.guided.solves += r.solves[0];
    c.guided.infeasible += r.solves[1];
    c.fallback.solves += r.solves[2];
    c.fallback.infeasible += r.solves[3];
    c.cold.solves += r.solves[4];
    c.cold.infeasible += r.solves[5];
    c.guided_cycles.solves += r.solves[6];
    c.guided_cycles.infeasible += r.solves[7];
  }
  std::vector<SourceReport> out;
  for (auto & [k, v] : cells) {
    out.push_back(v);
  }
  return out;
}

inline std::string format_source_report(const std::vector<SourceReport> & rows)
{
  std::ostringstream o;
  o << "n_peds,planner,guided_solves,guided_infeasible_frac,fallback_solves,fallback_infeasible_frac,cold_solves,"
       "cold_infeasible_frac,guided_cycles,guided_cycle_infeasible_frac\n";
  for (const auto & r : rows) {
    o << r.n_peds << ',' << r.planner << ',' << r.guided.solves << ',' << detail::num(r.guided.fraction()) << ','
      << r.fallback.solves << ',' << detail::num(r.fallback.fraction()) << ',' << r.cold.solves << ','
      << detail::num(r.cold.fraction()) << ',' << r.guided_cycles.solves << ','
      << detail::num(r.guided_cycles.fraction()) << '\n';
  }
  return o.str();
}

struct EpisodeJob
{
  sim::PlannerKind planner;
  int n_peds{0};
  std::uint64_t seed{0};
};

/// Spec order: pedestrian count, then planner, then run index. Seeds are
/// base_seed + run for every planner, so cells are paired.
inline std::vector<EpisodeJob> batch_jobs(const BatchSpec & spec)
{
  std::vector<EpisodeJob> jobs;
  for (int n : spec.pedestrian_counts) {
    for (auto p : spec.planners) {
      if (spec.excluded(p, n)) {
        continue;
      }
      for (int r = 0; r < spec.runs; ++r) {
        jobs.push_back({p, n, spec.base_seed + static_cast<std::uint64_t>(r)});
      }
    }
  }
  return jobs;
}

inline sim::ScenarioConfig job_config(const BatchSpec & spec, const EpisodeJob & job)
{
  auto cfg = spec.scenario;
  cfg.planner = job.planner;
  cfg.n_pedestrians = job.n_peds;
  cfg.seed = job.seed;
  return cfg;
}

struct BatchResult
{
  std::vector<EpisodeRow> rows;
  std::vector<SummaryRow> summary;
  int failures{0};
};

/// Runs every job, calling sink(row) in spec order as soon as the row and all
/// rows before it are done. Episodes run on spec.jobs worker threads.
inline BatchResult run_batch(
  const BatchSpec & spec, const std::function<void(const EpisodeRow &)> & sink = {},
  const std::function<std::ostream *(const EpisodeJob &)> & log_for = {})
{
  spec.validate();
  const auto jobs = batch_jobs(spec);
  std::vector<std::optional<EpisodeRow>> done(jobs.size());
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        const auto & job = jobs[i];
        std::ostream * log = log_for ? log_for(job) : nullptr;
        sim::MetricsRecord m;
        try {
          m = sim::run_episode(job_config(spec, job), log);
        } catch (const std::exception & e) {
          m.failed = true;
          m.error = e.what();
        }
        {
          std::lock_guard lock(mu);
          done[i] = make_row(job.seed, job.planner, job.n_peds, m, spec.record_timing);
        }
        cv.notify_all();
      }
    };
  std::vector<std::thread> pool;
  const int threads = std::min<int>(spec.jobs, static_cast<int>(jobs.size()));
  for (int t = 1; t < threads; ++t) {
    pool.emplace_back(worker);
  }

  BatchResult out;
  std::thread writer([&]() {
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return done[i].has_value(); });
        const EpisodeRow row = *done[i];
        lock.unlock();
        if (sink) {
          sink(row);
        }
        out.rows.push_back(row);
      }
    });
  worker();
  for (auto & t : pool) {
    t.join();
  }
  writer.join();

  // Summaries come from the rows as they read back from CSV text.
  std::ostringstream csv;
  csv << kCsvHeader << '\n';
  for (const auto & r : out.rows) {
    csv << format_row(r) << '\n';
    out.failures += r.failed ? 1 : 0;
  }
  std::istringstream back(csv.str());
  out.summary = summarize(parse_csv(back));
  return out;
}

}  // namespace tmpc::bench

#endif  // TMPC__BENCH__BATCH_HPP_
