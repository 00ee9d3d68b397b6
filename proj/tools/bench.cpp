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

#include "tmpc/bench/batch.hpp"
#include "tmpc/bench/config.hpp"
#include "tmpc/bench/plot.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace tmpc;

namespace
{

int run_command(
  const std::string & spec_file, const std::optional<std::uint64_t> & seed, const std::string & out,
  const std::vector<std::string> & planners, const std::vector<int> & peds, int runs, int jobs, bool logs,
  bool no_timing)
{
  auto spec = bench::load_batch_spec(spec_file);
  if (seed) {
    spec.base_seed = *seed;
  }
  if (!out.empty()) {
    spec.output = out;
  }
  if (!planners.empty()) {
    spec.planners = bench::parse_planner_list(nlohmann::json(planners));
  }
  if (!peds.empty()) {
    spec.pedestrian_counts = peds;
  }
  if (runs > 0) {
    spec.runs = runs;
  }
  if (jobs > 0) {
    spec.jobs = jobs;
  }
  spec.write_logs = spec.write_logs || logs;
  spec.record_timing = spec.record_timing && !no_timing;
  spec.validate();

  std::error_code ec;
  fs::create_directories(spec.output, ec);
  std::ofstream csv(spec.output / "episodes.csv", std::ios::trunc);
  if (ec || !csv) {
    throw bench::ConfigError("cannot write to " + spec.output.string());
  }
  if (spec.write_logs) {
    fs::create_directories(spec.output / "logs");
  }
  csv << bench::kCsvHeader << '\n' << std::flush;

  std::mutex log_mu;
  std::vector<std::unique_ptr<std::ofstream>> open_logs;
  auto log_for = [&](const bench::EpisodeJob & job) -> std::ostream * {
      if (!spec.write_logs) {
        return nullptr;
      }
      const auto name = std::string(sim::to_string(job.planner)) + "_" + std::to_string(job.n_peds) + "peds_seed" +
        std::to_string(job.seed) + ".ndjson";
      std::lock_guard lock(log_mu);
      open_logs.push_back(std::make_unique<std::ofstream>(spec.output / "logs" / name));
      return open_logs.back().get();
    };
  std::size_t done = 0;
  const auto total = bench::batch_jobs(spec).size();
  const auto result = bench::run_batch(spec, [&](const bench::EpisodeRow & r) {
        csv << bench::format_row(r) << '\n' << std::flush;
        std::fprintf(
          stderr, "[%zu/%zu] %s peds=%d seed=%llu dur=%.2f coll=%d%s\n", ++done, total, r.planner.c_str(), r.n_peds,
          static_cast<unsigned long long>(r.seed), r.duration_s, r.collisions, r.failed ? " FAILED" : "");
      }, log_for);

  const auto grid = bench::format_grid(result.summary);
  std::ofstream(spec.output / "summary.csv") << bench::summary_csv(result.summary);
  std::ofstream(spec.output / "summary.txt") << grid;
  std::ofstream(spec.output / "sources.csv") << bench::format_source_report(bench::source_report(result.rows));
  std::cout << grid;
  return result.failures > 0 ? 2 : 0;
}

int plot_command(const std::string & log_file, std::string out, double snapshot_period)
{
  std::ifstream in(log_file);
  if (!in) {
    throw bench::ConfigError("cannot open " + log_file);
  }
  const auto log = bench::parse_episode_log(in);
  if (out.empty()) {
    out = fs::path(log_file).replace_extension(".svg").string();
  }
  bench::PlotOptions opt;
  opt.snapshot_period = snapshot_period;
  std::ofstream svg(out);
  if (!svg) {
    throw bench::ConfigError("cannot write " + out);
  }
  svg << bench::plot_episode(log, opt);
  std::cout << out << '\n';
  return 0;
}

int summarize_command(const std::string & csv_file)
{
  std::ifstream in(csv_file);
  if (!in) {
    throw bench::ConfigError("cannot open " + csv_file);
  }
  const auto rows = bench::parse_csv(in);
  std::cout << bench::format_grid(bench::summarize(rows)) << '\n'
            << bench::format_source_report(bench::source_report(rows));
  for (const auto & r : rows) {
    if (r.failed) {
      return 2;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Seeded closed-loop benchmark for topology-driven MPC"};
  app.require_subcommand(1);

  auto * run = app.add_subcommand("run", "run a batch spec");
  std::string spec_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> planners;
  std::vector<int> peds;
  int runs = 0;
  int jobs = 0;
  bool logs = false;
  bool no_timing = false;
  run->add_option("spec", spec_file, "batch spec (JSON)")->required();
  run->add_option("--seed", seed, "base seed");
  run->add_option("--out", out, "output directory");
  run->add_option("--planner", planners, "planner(s): tmpcpp, tmpcpp_no_fallback, lmpcc, braking");
  run->add_option("--peds", peds, "pedestrian count(s)");
  run->add_option("--runs", runs, "runs per cell");
  run->add_option("--jobs", jobs, "parallel episodes");
  run->add_flag("--logs", logs, "write one NDJSON log per episode");
  run->add_flag("--no-timing", no_timing, "leave the wall-clock column empty (byte-reproducible CSV)");

  auto * plot = app.add_subcommand("plot", "render an episode log to SVG");
  std::string log_file;
  std::string svg_out;
  double snapshot_period = 5.0;
  plot->add_option("log", log_file, "episode log (NDJSON)")->required();
  plot->add_option("--out", svg_out, "output SVG file");
  plot->add_option("--snapshot-period", snapshot_period, "seconds between drawn planning snapshots");

  auto * summarize = app.add_subcommand("summarize", "aggregate an episode CSV");
  std::string csv_file;
  summarize->add_option("csv", csv_file, "episodes.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    if (*run) {
      return run_command(spec_file, seed, out, planners, peds, runs, jobs, logs, no_timing);
    }
    if (*plot) {
      return plot_command(log_file, svg_out, snapshot_period);
    }
    return summarize_command(csv_file);
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
