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

#ifndef TMPC__GUIDANCE__GUIDANCE_HPP_
#define TMPC__GUIDANCE__GUIDANCE_HPP_

#include "tmpc/common.hpp"
#include "tmpc/geometry/cubic_spline.hpp"
#include "tmpc/geometry/reference_path.hpp"
#include "tmpc/prediction/prediction.hpp"
#include "tmpc/random.hpp"
#include "tmpc/topology/winding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <vector>

namespace tmpc::guidance
{

using prediction::GaussianPrediction;

enum class NodeKind { kGuard, kConnector, kStart, kGoal };
enum class TrajectorySource { kFresh, kPropagated };

struct SpaceTimeNode
{
  Vec2 position{Vec2::Zero()};
  double t{0.0};
  NodeKind kind{NodeKind::kGuard};
  bool propagated{false};  ///< carried over from an earlier planning cycle
};

struct GuidanceParams
{
  int steps{35};
  double dt{0.2};
  double v_max{3.0};
  double corridor_half_width{4.0};
  int n_samples{300};
  int max_paths{4};
  double ego_radius{1.0};
  double margin{0.1};
  int visibility_checks{10};
  int n_goals{5};
  double goal_spacing{2.0};
  double v_ref{2.0};
  double passing_threshold{0.25};
  int max_rejections{100};
  int max_search_pops{20000};
  int max_nodes{400};

  [[nodiscard]] double horizon() const { return steps * dt; }
};

/// Undirected roadmap whose edges are traversed forward in time.
class GuidanceGraph
{
public:
  int add_node(const SpaceTimeNode & node)
  {
    nodes_.push_back(node);
    adj_.emplace_back();
    const int id = static_cast<int>(nodes_.size()) - 1;
    if (node.kind == NodeKind::kStart) {
      start_ = id;
    } else if (node.kind == NodeKind::kGoal) {
      goals_.push_back(id);
    }
    return id;
  }

  void add_edge(int a, int b)
  {
    if (a == b || connected(a, b)) {
      return;
    }
    adj_[static_cast<std::size_t>(a)].push_back(b);
    adj_[static_cast<std::size_t>(b)].push_back(a);
  }

  [[nodiscard]] bool connected(int a, int b) const
  {
    const auto & n = adj_[static_cast<std::size_t>(a)];
    return std::find(n.begin(), n.end(), b) != n.end();
  }

  [[nodiscard]] const SpaceTimeNode & node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::vector<SpaceTimeNode> & nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<int> & neighbors(int i) const { return adj_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] int size() const { return static_cast<int>(nodes_.size()); }
  [[nodiscard]] int start() const { return start_; }
  [[nodiscard]] const std::vector<int> & goals() const { return goals_; }

  [[nodiscard]] int num_edges() const
  {
    std::size_t total = 0;
    for (const auto & a : adj_) {
      total += a.size();
    }
    return static_cast<int>(total / 2);
  }

  [[nodiscard]] int count(NodeKind kind) const
  {
    return static_cast<int>(std::count_if(
      nodes_.begin(), nodes_.end(), [kind](const SpaceTimeNode & n) { return n.kind == kind; }));
  }

  [[nodiscard]] bool is_goal(int i) const { return node(i).kind == NodeKind::kGoal; }

private:
  std::vector<SpaceTimeNode> nodes_;
  std::vector<std::vector<int>> adj_;
  int start_{-1};
  std::vector<int> goals_;
};

/// Smoothed guidance path x(t), y(t) over [0, T].
struct GuidanceTrajectory
{
  geometry::CubicSpline x;
  geometry::CubicSpline y;
  topology::TopologySignature signature;
  TrajectorySource source{TrajectorySource::kFresh};
  std::vector<int> node_ids;
  std::vector<SpaceTimeNode> nodes;
  double length{0.0};

  [[nodiscard]] Vec2 position(double t) const
  {
    t = std::clamp(t, x.front(), x.back());
    return {x(t), y(t)};
  }

  [[nodiscard]] Vec2 velocity(double t) const
  {
    t = std::clamp(t, x.front(), x.back());
    return {x.eval(t)[1], y.eval(t)[1]};
  }

  /// Positions on the planner grid t_k = k dt, k = 0..steps.
  [[nodiscard]] Positions sample(int steps, double dt) const
  {
    Positions out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) {
      out.push_back(position(k * dt));
    }
    return out;
  }
};

/// Predicted obstacle mean at continuous time t, linear between forecast steps
/// and extrapolated at the last displacement beyond the forecast.
inline Vec2 mean_at(const GaussianPrediction & pred, double t, double dt)
{
  const auto & m = pred.means;
  if (m.size() == 1 || t <= 0.0) {
    return m.front();
  }
  const double k = t / dt;
  const auto last = m.size() - 1;
  if (k >= static_cast<double>(last)) {
    return m[last] + (k - static_cast<double>(last)) * (m[last] - m[last - 1]);
  }
  const auto i = static_cast<std::size_t>(k);
  const double f = k - static_cast<double>(i);
  return (1.0 - f) * m[i] + f * m[i + 1];
}

/// Straight space-time segment test: speed bound plus obstacle clearance at
/// visibility_checks evenly spaced times including both ends.
inline bool visible(
  const SpaceTimeNode & a, const SpaceTimeNode & b, std::span<const GaussianPrediction> predictions,
  const GuidanceParams & params)
{
  if (a.t == b.t) {
    return false;
  }
  const SpaceTimeNode & lo = a.t < b.t ? a : b;
  const SpaceTimeNode & hi = a.t < b.t ? b : a;
  const double span = hi.t - lo.t;
  const Vec2 delta = hi.position - lo.position;
  if (delta.norm() > params.v_max * span * (1.0 + 1e-12)) {
    return false;
  }
  const int m = std::max(2, params.visibility_checks);
  for (int i = 0; i < m; ++i) {
    const double f = static_cast<double>(i) / (m - 1);
    const double t = lo.t + f * span;
    const Vec2 p = lo.position + f * delta;
    for (const auto & pred : predictions) {
      const double clearance = pred.radius + params.ego_radius + params.margin;
      if ((p - mean_at(pred, t, params.dt)).squaredNorm() < clearance * clearance) {
        return false;
      }
    }
  }
  return true;
}

/// Uniform sample at a given time: longitudinal offset along the path in
/// [0, v_max t], lateral offset in [-w, w], rejected until reachable.
inline std::optional<SpaceTimeNode> sample_at_time(
  const Vec2 & ego, double s_ego, const geometry::ReferencePath & path, double t,
  const GuidanceParams & params, Rng & rng)
{
  for (int attempt = 0; attempt < params.max_rejections; ++attempt) {
    const double lon = rng.uniform(0.0, params.v_max * t);
    const double lat = rng.uniform(-params.corridor_half_width, params.corridor_half_width);
    const auto f = path.frame(s_ego + lon);
    const Vec2 p = f.position + lat * f.normal;
    if ((p - ego).norm() <= params.v_max * t) {
      return SpaceTimeNode{p, t, NodeKind::kGuard, false};
    }
  }
  return std::nullopt;
}

inline SpaceTimeNode sample_spacetime(
  const Vec2 & ego, double s_ego, const geometry::ReferencePath & path,
  const GuidanceParams & params, Rng & rng)
{
  const double horizon = params.horizon();
  double t = horizon * rng.uniform_open_low();
  while (true) {
    if (auto node = sample_at_time(ego, s_ego, path, t, params, rng)) {
      return *node;
    }
    t = std::min(horizon, 2.0 * t);
  }
}

/// Goal nodes at t = T: points on the path spaced around s_ego + v_ref T.
inline std::vector<Vec2> goal_positions(
  double s_ego, const geometry::ReferencePath & path, const GuidanceParams & params)
{
  std::vector<Vec2> goals;
  const double center = s_ego + params.v_ref * params.horizon();
  for (int i = 0; i < params.n_goals; ++i) {
    const double offset = (i - 0.5 * (params.n_goals - 1)) * params.goal_spacing;
    const double s = std::clamp(center + offset, 0.0, path.length());
    const Vec2 p = path.position(s);
    const bool dup = std::any_of(
      goals.begin(), goals.end(), [&](const Vec2 & g) { return (g - p).norm() < 1e-6; });
    if (!dup) {
      goals.push_back(p);
    }
  }
  return goals;
}

namespace detail
{

struct DisjointSets
{
  std::vector<int> parent;

  int find(int i)
  {
    grow(i);
    while (parent[static_cast<std::size_t>(i)] != i) {
      parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
      i = parent[static_cast<std::size_t>(i)];
    }
    return i;
  }

  void unite(int a, int b)
  {
    a = find(a);
    b = find(b);
    if (a != b) {
      parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  }

  void grow(int i)
  {
    while (static_cast<int>(parent.size()) <= i) {
      parent.push_back(static_cast<int>(parent.size()));
    }
  }
};

/// Winding of a local polyline through nodes (time-ordered) around each
/// obstacle, evaluated on a fine uniform time grid.
inline std::vector<double> local_winding(
  std::span<const SpaceTimeNode> path, std::span<const GaussianPrediction> predictions, double dt)
{
  constexpr int kSamples = 24;
  const double t0 = path.front().t;
  const double t1 = path.back().t;
  Positions ego;
  ego.reserve(kSamples + 1);
  std::size_t seg = 0;
  for (int i = 0; i <= kSamples; ++i) {
    const double t = t0 + (t1 - t0) * i / kSamples;
    while (seg + 2 < path.size() && t > path[seg + 1].t) {
      ++seg;
    }
    const auto & a = path[seg];
    const auto & b = path[seg + 1];
    const double f = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
    ego.push_back(a.position + f * (b.position - a.position));
  }
  std::vector<double> out;
  for (const auto & pred : predictions) {
    Positions obs;
    bool degenerate = false;
    for (int i = 0; i <= kSamples; ++i) {
      obs.push_back(mean_at(pred, t0 + (t1 - t0) * i / kSamples, dt));
      degenerate = degenerate || (obs.back() - ego[static_cast<std::size_t>(i)]).squaredNorm() == 0.0;
    }
    out.push_back(degenerate ? 0.0 : topology::winding_number(ego, obs));
  }
  return out;
}

inline bool distinct_local_class(const std::vector<double> & a, const std::vector<double> & b)
{
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > 0.5) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Visibility-PRM in (x, y, t). With a previous (already propagated) graph the
/// surviving guards and connectors are reused and the goal set is replaced.
/// Stops after n_samples samples or once max_paths distinct classes exist.
GuidanceGraph build_prm(
  const Vec2 & ego, double s_ego, const geometry::ReferencePath & path,
  std::span<const Vec2> goals, std::span<const GaussianPrediction> predictions,
  const GuidanceGraph * previous, const GuidanceParams & params, Rng & rng);

std::vector<GuidanceTrajectory> extract_paths(
  const GuidanceGraph & graph, std::span<const GaussianPrediction> predictions,
  const GuidanceParams & params, int max_paths = -1);

inline GuidanceGraph build_prm(
  const Vec2 & ego, double s_ego, const geometry::ReferencePath & path,
  std::span<const Vec2> goals, std::span<const GaussianPrediction> predictions,
  const GuidanceGraph * previous, const GuidanceParams & params, Rng & rng)
{
  if (goals.empty()) {
    throw InvalidInput("guidance needs at least one goal");
  }
  const double horizon = params.horizon();
  GuidanceGraph g;
  detail::DisjointSets sets;
  std::vector<int> guards;

  if (previous != nullptr) {
    // Copy everything but the old goals; remember who linked to a goal.
    std::vector<int> remap(static_cast<std::size_t>(previous->size()), -1);
    std::vector<int> linked_goal;
    for (int i = 0; i < previous->size(); ++i) {
      const auto & n = previous->node(i);
      if (n.kind == NodeKind::kGoal) {
        continue;
      }
      SpaceTimeNode copy = n;
      if (n.kind == NodeKind::kStart) {
        copy.position = ego;
        copy.t = 0.0;
      }
      remap[static_cast<std::size_t>(i)] = g.add_node(copy);
    }
    for (int i = 0; i < previous->size(); ++i) {
      const int a = remap[static_cast<std::size_t>(i)];
      if (a < 0) {
        continue;
      }
      for (int j : previous->neighbors(i)) {
        const int b = remap[static_cast<std::size_t>(j)];
        if (b >= 0) {
          g.add_edge(a, b);
        } else if (std::find(linked_goal.begin(), linked_goal.end(), a) == linked_goal.end()) {
          linked_goal.push_back(a);
        }
      }
    }
    std::vector<int> goal_ids;
    for (const auto & p : goals) {
      goal_ids.push_back(g.add_node({p, horizon, NodeKind::kGoal, false}));
    }
    for (int a : linked_goal) {
      for (int gid : goal_ids) {
        if (visible(g.node(a), g.node(gid), predictions, params)) {
          g.add_edge(a, gid);
        }
      }
    }
  } else {
    g.add_node({ego, 0.0, NodeKind::kStart, false});
    for (const auto & p : goals) {
      g.add_node({p, horizon, NodeKind::kGoal, false});
    }
  }
  if (g.start() < 0) {
    g.add_node({ego, 0.0, NodeKind::kStart, false});
  }

  for (int gid : g.goals()) {
    sets.unite(g.goals().front(), gid);
    if (visible(g.node(g.start()), g.node(gid), predictions, params)) {
      g.add_edge(g.start(), gid);
    }
  }
  for (int i = 0; i < g.size(); ++i) {
    const auto kind = g.node(i).kind;
    if (kind != NodeKind::kConnector) {
      guards.push_back(i);
    }
    for (int j : g.neighbors(i)) {
      sets.unite(i, j);
    }
  }

  auto class_count = [&]() {
      return static_cast<int>(extract_paths(g, predictions, params, params.max_paths).size());
    };

  // Tries to insert a candidate with the guard/connector rules. Returns true
  // when a connector was added.
  auto try_insert = [&](const SpaceTimeNode & cand) -> bool {
      std::vector<int> seen;
      for (int gi : guards) {
        if (visible(cand, g.node(gi), predictions, params)) {
          seen.push_back(gi);
        }
      }
      if (seen.empty()) {
        SpaceTimeNode node = cand;
        node.kind = NodeKind::kGuard;
        guards.push_back(g.add_node(node));
        return false;
      }
      for (int a : seen) {
        if (!(g.node(a).t < cand.t)) {
          continue;
        }
        for (int b : seen) {
          if (!(g.node(b).t > cand.t)) {
            continue;
          }
          bool accept = sets.find(a) != sets.find(b);
          if (!accept) {
            // Same component: accept only a new local homotopy class between a and b.
            const std::vector<SpaceTimeNode> mine = {g.node(a), cand, g.node(b)};
            const auto w = detail::local_winding(mine, predictions, params.dt);
            accept = true;
            if (g.connected(a, b)) {
              const std::vector<SpaceTimeNode> direct = {g.node(a), g.node(b)};
              accept = detail::distinct_local_class(w, detail::local_winding(direct, predictions, params.dt));
            }
            for (int c : g.neighbors(a)) {
              if (!accept) {
                break;
              }
              if (g.node(c).kind != NodeKind::kConnector || !g.connected(c, b)) {
                continue;
              }
              const std::vector<SpaceTimeNode> other = {g.node(a), g.node(c), g.node(b)};
              accept = detail::distinct_local_class(w, detail::local_winding(other, predictions, params.dt));
            }
          }
          if (accept) {
            SpaceTimeNode node = cand;
            node.kind = NodeKind::kConnector;
            const int id = g.add_node(node);
            g.add_edge(id, a);
            g.add_edge(id, b);
            sets.unite(id, a);
            sets.unite(id, b);
            return true;
          }
        }
      }
      return false;
    };

  for (int i = 0; i < params.n_samples && g.size() < params.max_nodes; ++i) {
    const SpaceTimeNode cand = sample_spacetime(ego, s_ego, path, params, rng);
    if (try_insert(cand) && class_count() >= params.max_paths) {
      break;
    }
  }
  return g;
}

/// Enumerates start-to-goal paths in order of increasing space-time length
/// (uniform-cost search over time-monotone edges, ties by node id sequence),
/// smooths each into splines and keeps the shortest per topology class.
inline std::vector<GuidanceTrajectory> extract_paths(
  const GuidanceGraph & graph, std::span<const GaussianPrediction> predictions,
  const GuidanceParams & params, int max_paths)
{
  if (max_paths < 0) {
    max_paths = params.max_paths;
  }
  std::vector<GuidanceTrajectory> out;
  if (graph.start() < 0 || max_paths == 0) {
    return out;
  }
  auto edge_cost = [&](int a, int b) {
      const Vec2 d = graph.node(b).position - graph.node(a).position;
      const double dt = graph.node(b).t - graph.node(a).t;
      return std::sqrt(d.squaredNorm() + dt * dt);
    };
  struct Partial
  {
    double cost;
    std::vector<int> ids;
  };
  auto worse = [](const Partial & a, const Partial & b) {
      if (a.cost != b.cost) {
        return a.cost > b.cost;
      }
      return a.ids > b.ids;
    };
  std::priority_queue<Partial, std::vector<Partial>, decltype(worse)> open(worse);
  open.push({0.0, {graph.start()}});
  const double horizon = params.horizon();

  int pops = 0;
  while (!open.empty() && pops < params.max_search_pops) {
    Partial cur = open.top();
    open.pop();
    ++pops;
    const int last = cur.ids.back();
    if (graph.is_goal(last)) {
      GuidanceTrajectory traj;
      std::vector<double> ts, xs, ys;
      for (int id : cur.ids) {
        const auto & n = graph.node(id);
        ts.push_back(n.t);
        xs.push_back(n.position.x());
        ys.push_back(n.position.y());
        traj.nodes.push_back(n);
        if (n.propagated && n.kind != NodeKind::kStart) {
          traj.source = TrajectorySource::kPropagated;
        }
      }
      if (ts.back() < horizon) {
        // Hold the goal until the end of the horizon.
        ts.push_back(horizon);
        xs.push_back(xs.back());
        ys.push_back(ys.back());
      }
      traj.x = geometry::CubicSpline(ts, xs);
      traj.y = geometry::CubicSpline(ts, ys);
      traj.node_ids = cur.ids;
      traj.length = cur.cost;
      const Positions samples = traj.sample(params.steps, params.dt);
      try {
        traj.signature =
          topology::passing_signature(samples, predictions, params.passing_threshold);
      } catch (const DegenerateGeometry &) {
        continue;
      }
      const bool duplicate = std::any_of(out.begin(), out.end(), [&](const GuidanceTrajectory & o) {
            return o.signature == traj.signature;
          });
      if (!duplicate) {
        out.push_back(std::move(traj));
        if (static_cast<int>(out.size()) >= max_paths) {
          break;
        }
      }
      continue;
    }
    std::vector<int> next(graph.neighbors(last));
    std::sort(next.begin(), next.end());
    for (int j : next) {
      if (graph.node(j).t > graph.node(last).t) {
        Partial p{cur.cost + edge_cost(last, j), cur.ids};
        p.ids.push_back(j);
        open.push(std::move(p));
      }
    }
  }
  return out;
}

/// Shifts the roadmap by dt: node times decrease by dt, nodes at t <= 0 are
/// dropped, edges are re-validated against the new predictions, the start
/// moves to the new ego position and connectors left with fewer than two
/// links are removed.
inline GuidanceGraph propagate_graph(
  const GuidanceGraph & g, double dt, const Vec2 & new_ego,
  std::span<const GaussianPrediction> predictions, const GuidanceParams & params)
{
  if (!(dt >= 0.0)) {
    throw InvalidInput("propagation step must be non-negative");
  }
  std::vector<SpaceTimeNode> shifted(g.nodes());
  std::vector<char> keep(shifted.size(), 0);
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    auto & n = shifted[i];
    if (n.kind == NodeKind::kStart) {
      n.position = new_ego;
      n.t = 0.0;
      keep[i] = 1;
      continue;
    }
    n.t -= dt;
    n.propagated = true;
    keep[i] = n.t > 0.0;
  }
  // Re-validated edges among survivors.
  std::vector<std::vector<int>> adj(shifted.size());
  for (int i = 0; i < g.size(); ++i) {
    if (!keep[static_cast<std::size_t>(i)]) {
      continue;
    }
    for (int j : g.neighbors(i)) {
      if (j > i && keep[static_cast<std::size_t>(j)] &&
          visible(shifted[static_cast<std::size_t>(i)], shifted[static_cast<std::size_t>(j)], predictions, params))
      {
        adj[static_cast<std::size_t>(i)].push_back(j);
        adj[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  }
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    if (keep[i] && shifted[i].kind == NodeKind::kConnector && adj[i].size() < 2) {
      keep[i] = 0;
    }
  }
  GuidanceGraph out;
  std::vector<int> remap(shifted.size(), -1);
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    if (keep[i]) {
      remap[i] = out.add_node(shifted[i]);
    }
  }
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    if (remap[i] < 0) {
      continue;
    }
    for (int j : adj[i]) {
      if (remap[static_cast<std::size_t>(j)] >= 0) {
        out.add_edge(remap[i], remap[static_cast<std::size_t>(j)]);
      }
    }
  }
  return out;
}

/// Keeps the roadmap between planning cycles and produces guidance
/// trajectories for the current one.
class GuidancePlanner
{
public:
  explicit GuidancePlanner(GuidanceParams params = {}) : params_(params) {}

  std::vector<GuidanceTrajectory> plan(
    const Vec2 & ego, double s_ego, const geometry::ReferencePath & path,
    std::span<const GaussianPrediction> predictions, double elapsed, Rng & rng)
  {
    const auto goals = goal_positions(s_ego, path, params_);
    if (graph_ && elapsed > 0.0) {
      const auto propagated = propagate_graph(*graph_, elapsed, ego, predictions, params_);
      graph_ = build_prm(ego, s_ego, path, goals, predictions, &propagated, params_, rng);
    } else {
      graph_ = build_prm(ego, s_ego, path, goals, predictions, nullptr, params_, rng);
    }
    return extract_paths(*graph_, predictions, params_);
  }

  void reset() { graph_.reset(); }
  [[nodiscard]] const std::optional<GuidanceGraph> & graph() const { return graph_; }
  [[nodiscard]] const GuidanceParams & params() const { return params_; }

private:
  GuidanceParams params_;
  std::optional<GuidanceGraph> graph_;
};

}  // namespace tmpc::guidance

#endif  // TMPC__GUIDANCE__GUIDANCE_HPP_
