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

#ifndef TMPC__BENCH__PLOT_HPP_
#define TMPC__BENCH__PLOT_HPP_

#include "tmpc/bench/batch.hpp"
#include "tmpc/common.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace tmpc::bench
{

struct LogPose
{
  double t{0.0};
  double x{0.0};
  double y{0.0};
  double heading{0.0};
  double v{0.0};
};

struct LogPrediction
{
  int id{0};
  Vec2 mean{Vec2::Zero()};
  Mat2 cov{Mat2::Zero()};
  double radius{0.0};
};

struct LogCandidate
{
  std::string source;
  bool feasible{false};
  std::string signature;
  std::vector<Vec2> xy;
};

struct LogCycle
{
  double t{0.0};
  int selected{-1};
  std::vector<LogCandidate> candidates;
  std::vector<Vec2> plan;
  std::vector<LogPrediction> predictions;
};

struct EpisodeLog
{
  std::vector<Vec2> path;
  double goal_progress{0.0};
  std::string planner;
  std::vector<LogPose> poses;
  std::map<int, std::vector<Vec2>> pedestrians;
  std::vector<LogCycle> cycles;
};

namespace detail
{

inline Vec2 pt(const json & j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline std::vector<Vec2> pts(const json & j)
{
  std::vector<Vec2> out;
  for (const auto & p : j) {
    out.push_back(pt(p));
  }
  return out;
}

}  // namespace detail

/// Reads an episode log; any malformed line raises ConfigError naming it.
inline EpisodeLog parse_episode_log(std::istream & in)
{
  EpisodeLog log;
  std::string line;
  int no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) {
      continue;
    }
    try {
      const auto j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        header = true;
        log.path = detail::pts(j.at("path"));
        log.goal_progress = j.at("goal_progress").get<double>();
        log.planner = j.at("planner").get<std::string>();
      } else if (type == "step") {
        const auto & e = j.at("ego");
        log.poses.push_back(
          {j.at("t").get<double>(), e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>(),
            e.at(3).get<double>()});
        for (const auto & p : j.at("peds")) {
          log.pedestrians[p.at(0).get<int>()].push_back({p.at(1).get<double>(), p.at(2).get<double>()});
        }
      } else if (type == "cycle") {
        LogCycle c;
        c.t = j.at("t").get<double>();
        c.selected = j.value("selected", -1);
        if (j.contains("plan")) {
          c.plan = detail::pts(j.at("plan"));
        }
        if (j.contains("candidates")) {
          for (const auto & jc : j.at("candidates")) {
            c.candidates.push_back(
              {jc.at("source").get<std::string>(), jc.at("feasible").get<bool>(),
                jc.at("signature").get<std::string>(), detail::pts(jc.at("xy"))});
          }
        }
        if (j.contains("predictions")) {
          for (const auto & jp : j.at("predictions")) {
            LogPrediction p;
            p.id = jp.at("id").get<int>();
            p.mean = detail::pt(jp.at("mean"));
            const auto & cv = jp.at("cov");
            p.cov << cv.at(0).get<double>(), cv.at(1).get<double>(), cv.at(1).get<double>(), cv.at(2).get<double>();
            p.radius = jp.at("radius").get<double>();
            c.predictions.push_back(p);
          }
        }
        log.cycles.push_back(std::move(c));
      } else if (type != "metrics") {
        throw ConfigError("unknown record type '" + type + "'");
      }
    } catch (const json::exception & e) {
      throw ConfigError("line " + std::to_string(no) + ": " + e.what());
    } catch (const ConfigError & e) {
      throw ConfigError("line " + std::to_string(no) + ": " + e.what());
    }
  }
  if (!header) {
    throw ConfigError("line " + std::to_string(no + 1) + ": missing header record");
  }
  return log;
}

struct PlotOptions
{
  double snapshot_period{5.0};  ///< seconds between cycles drawn with candidates and predictions
  double pixels_per_metre{20.0};
  double v_max_colour{3.0};  ///< speed mapped to full green
};

namespace detail
{

inline std::string speed_colour(double v, double v_max)
{
  const double f = std::clamp(v / v_max, 0.0, 1.0);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", 0, static_cast<int>(std::lround(200.0 * f)),
    static_cast<int>(std::lround(255.0 * (1.0 - f))));
  return buf;
}

inline std::string points_attr(const std::vector<Vec2> & p)
{
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i > 0) {
      s += ' ';
    }
    s += num(p[i].x()) + ',' + num(p[i].y());
  }
  return s;
}

inline constexpr std::array<const char *, 6> kCandidateColours = {
  "#e6194b", "#f58231", "#911eb4", "#f032e6", "#9a6324", "#808000"};

}  // namespace detail

/// Static SVG of one episode in world coordinates (y up): reference path,
/// ego trajectory coloured by speed from blue (slow) to green (fast),
/// pedestrian tracks, and at snapshot cycles the candidate trajectories and
/// 1- and 2-sigma prediction ellipses.
inline std::string plot_episode(const EpisodeLog & log, const PlotOptions & opt = {})
{
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  auto grow = [&](const Vec2 & p) {
      xmin = std::min(xmin, p.x());
      xmax = std::max(xmax, p.x());
      ymin = std::min(ymin, p.y());
      ymax = std::max(ymax, p.y());
    };
  for (const auto & p : log.path) {
    grow(p);
  }
  for (const auto & p : log.poses) {
    grow({p.x, p.y});
  }
  for (const auto & [id, track] : log.pedestrians) {
    for (const auto & p : track) {
      grow(p);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = ymin = 0.0;
    xmax = ymax = 1.0;
  }
  const double pad = 3.0;
  xmin -= pad;
  ymin -= pad;
  xmax += pad;
  ymax += pad;
  const double k = opt.pixels_per_metre;
  const double w = (xmax - xmin) * k;
  const double h = (ymax - ymin) * k;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num(std::round(w)) << "\" height=\""
    << detail::num(std::round(h)) << "\" viewBox=\"0 0 " << detail::num(std::round(w)) << ' '
    << detail::num(std::round(h)) << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<g id=\"world\" transform=\"translate(" << detail::num(-xmin * k) << ',' << detail::num(ymax * k)
    << ") scale(" << detail::num(k) << ',' << detail::num(-k) << ")\" fill=\"none\" stroke-linecap=\"round\">\n";
  o << "<polyline id=\"path\" points=\"" << detail::points_attr(log.path)
    << "\" stroke=\"#999999\" stroke-width=\"0.08\" stroke-dasharray=\"0.5 0.3\"/>\n";

  for (const auto & [id, track] : log.pedestrians) {
    o << "<polyline class=\"pedestrian\" data-id=\"" << id << "\" points=\"" << detail::points_attr(track)
      << "\" stroke=\"#d62728\" stroke-width=\"0.05\" opacity=\"0.6\"/>\n";
    if (!track.empty()) {
      o << "<circle cx=\"" << detail::num(track.front().x()) << "\" cy=\"" << detail::num(track.front().y())
        << "\" r=\"0.3\" fill=\"#d62728\" opacity=\"0.4\"/>\n";
    }
  }

  double next_snapshot = 0.0;
  int snapshot = 0;
  for (const auto & c : log.cycles) {
    if (c.t + 1e-9 < next_snapshot) {
      continue;
    }
    next_snapshot = c.t + opt.snapshot_period;
    o << "<g class=\"snapshot\" data-t=\"" << detail::num(c.t) << "\">\n";
    for (const auto & p : c.predictions) {
      Eigen::SelfAdjointEigenSolver<Mat2> es(p.cov);
      const Vec2 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      const Vec2 axis = es.eigenvectors().col(1);
      const double angle = std::atan2(axis.y(), axis.x()) * 180.0 / kPi;
      for (double level : {1.0, 2.0}) {
        o << "<ellipse class=\"uncertainty\" cx=\"" << detail::num(p.mean.x()) << "\" cy=\""
          << detail::num(p.mean.y()) << "\" rx=\"" << detail::num(level * ev(1) + p.radius) << "\" ry=\""
          << detail::num(level * ev(0) + p.radius) << "\" transform=\"rotate(" << detail::num(angle) << ' '
          << detail::num(p.mean.x()) << ' ' << detail::num(p.mean.y())
          << ")\" stroke=\"#d62728\" stroke-width=\"0.03\" opacity=\"" << (level == 1.0 ? "0.5" : "0.25")
          << "\"/>\n";
      }
    }
    for (std::size_t i = 0; i < c.candidates.size(); ++i) {
      const auto & cand = c.candidates[i];
      o << "<polyline class=\"candidate\" data-cycle=\"" << snapshot << "\" data-source=\"" << cand.source
        << "\" data-signature=\"" << cand.signature << "\" points=\"" << detail::points_attr(cand.xy)
        << "\" stroke=\"" << detail::kCandidateColours[i % detail::kCandidateColours.size()]
        << "\" stroke-width=\"" << (static_cast<int>(i) == c.selected ? "0.12" : "0.06") << "\""
        << (cand.feasible ? "" : " stroke-dasharray=\"0.3 0.2\"") << "/>\n";
    }
    o << "</g>\n";
    ++snapshot;
  }

  for (std::size_t i = 1; i < log.poses.size(); ++i) {
    const auto & a = log.poses[i - 1];
    const auto & b = log.poses[i];
    o << "<line x1=\"" << detail::num(a.x) << "\" y1=\"" << detail::num(a.y) << "\" x2=\"" << detail::num(b.x)
      << "\" y2=\"" << detail::num(b.y) << "\" stroke=\"" << detail::speed_colour(0.5 * (a.v + b.v), opt.v_max_colour)
      << "\" stroke-width=\"0.2\"/>\n";
  }
  std::vector<Vec2> ego;
  for (const auto & p : log.poses) {
    ego.push_back({p.x, p.y});
  }
  o << "<polyline id=\"ego\" points=\"" << detail::points_attr(ego) << "\" stroke=\"none\"/>\n";
  o << "</g>\n</svg>\n";
  return o.str();
}

}  // namespace tmpc::bench

#endif  // TMPC__BENCH__PLOT_HPP_
