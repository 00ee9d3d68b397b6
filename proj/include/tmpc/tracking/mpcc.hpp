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

#ifndef TMPC__TRACKING__MPCC_HPP_
#define TMPC__TRACKING__MPCC_HPP_

#include "tmpc/common.hpp"
#include "tmpc/geometry/reference_path.hpp"
#include "tmpc/tracking/single_track.hpp"
#include "tmpc/trajopt/bicycle.hpp"
#include "tmpc/trajopt/sqp.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace tmpc::tracking
{

/// Path to follow plus a speed profile over its arc length, or over time
/// when timed_speeds is set.
struct TrackingReference
{
  geometry::ReferencePath path;
  std::vector<double> knots;   ///< arc length of each speed sample
  std::vector<double> speeds;
  std::vector<double> timed_speeds;  ///< planned speed every time_step from the plan start
  double time_step{0.0};
  double time_offset{0.0};  ///< time elapsed since the plan start

  [[nodiscard]] bool timed() const { return !timed_speeds.empty() && time_step > 0.0; }

  /// Planned speed t seconds after time_offset.
  [[nodiscard]] double speed_at(double t) const
  {
    const double pos = std::max(0.0, (time_offset + t) / time_step);
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= timed_speeds.size()) {
      return timed_speeds.back();
    }
    const double f = pos - static_cast<double>(i);
    return (1.0 - f) * timed_speeds[i] + f * timed_speeds[i + 1];
  }

  [[nodiscard]] double speed(double s) const
  {
    if (s <= knots.front()) {
      return speeds.front();
    }
    if (s >= knots.back()) {
      return speeds.back();
    }
    const auto it = std::upper_bound(knots.begin(), knots.end(), s);
    const auto i = static_cast<std::size_t>(it - knots.begin()) - 1;
    const double f = (s - knots[i]) / (knots[i + 1] - knots[i]);
    return (1.0 - f) * speeds[i] + f * speeds[i + 1];
  }

  [[nodiscard]] double speed_slope(double s) const
  {
    if (s <= knots.front() || s >= knots.back()) {
      return 0.0;
    }
    const auto it = std::upper_bound(knots.begin(), knots.end(), s);
    const auto i = static_cast<std::size_t>(it - knots.begin()) - 1;
    return (speeds[i + 1] - speeds[i]) / (knots[i + 1] - knots[i]);
  }
};

/// Builds a tracking reference from waypoints and per-waypoint speeds.
inline TrackingReference make_tracking_reference(std::span<const Vec2> points, std::span<const double> speeds)
{
  if (points.size() != speeds.size() || points.size() < 2) {
    throw InvalidInput("tracking reference needs matching points and speeds");
  }
  std::vector<geometry::Waypoint> wp;
  for (const auto & p : points) {
    wp.push_back({p.x(), p.y()});
  }
  TrackingReference ref{geometry::fit_reference_path(wp), {}, {}, {}, 0.0, 0.0};
  ref.knots = ref.path.waypoint_knots();
  ref.speeds.assign(speeds.begin(), speeds.end());
  return ref;
}

/// Reference from a planner trajectory (rear-axle states): centre-of-gravity
/// points lr ahead of the rear axle, thinned to 0.1 m spacing and extended
/// straight ahead when the plan is shorter than min_length. The speed
/// profile is kept over time (stage length plan_dt) as well.
inline TrackingReference reference_from_plan(
  std::span<const trajopt::VehicleState> plan, const SingleTrackParams & p, double min_length = 2.0,
  double plan_dt = 0.2)
{
  if (plan.empty()) {
    throw InvalidInput("empty plan");
  }
  std::vector<Vec2> pts;
  std::vector<double> v;
  double length = 0.0;
  for (const auto & x : plan) {
    const Vec2 c = x.position() + p.lr * heading_vector(x.heading);
    if (pts.empty() || (c - pts.back()).norm() >= 0.1) {
      if (!pts.empty()) {
        length += (c - pts.back()).norm();
      }
      pts.push_back(c);
      v.push_back(std::max(x.v, 0.0));
    }
  }
  if (length < min_length) {
    const Vec2 h = heading_vector(plan.back().heading);
    pts.push_back(pts.back() + (min_length - length + 0.1) * h);
    v.push_back(0.0);
  }
  auto ref = make_tracking_reference(pts, v);
  for (const auto & x : plan) {
    ref.timed_speeds.push_back(std::max(x.v, 0.0));
  }
  ref.time_step = plan_dt;
  return ref;
}

struct MpccWeights
{
  double contouring{20.0};
  double lag{20.0};
  double velocity{2.0};
  double steering_rate{1.0};
  double force_rate{0.02};  ///< per (kN/s)^2
};

struct MpccOptions
{
  int steps{20};
  double dt{0.05};
  MpccWeights weights;
  double prediction_substep{0.01};
  trajopt::SqpOptions sqp{.max_iterations = 10};
};

/// Tracking problem for the SQP. Internal units: F_x in kN, force rate in kN/s.
class MpccModel
{
public:
  static constexpr int kNx = SingleTrackState::kSize;
  static constexpr int kNu = 2;
  using StateVec = SingleTrackState::Vector;
  using InputVec = Eigen::Vector2d;
  using StateMat = Eigen::Matrix<double, kNx, kNx>;
  using InputMat = Eigen::Matrix<double, kNx, kNu>;

  MpccModel(const TrackingReference & ref, const SingleTrackParams & params, const MpccOptions & opts)
  : ref_(&ref), params_(params), opts_(opts)
  {
  }

  static StateVec to_internal(const SingleTrackState & s)
  {
    StateVec z = s.vec();
    z(7) *= 1e-3;
    return z;
  }

  static SingleTrackState from_internal(StateVec z)
  {
    z(7) *= 1e3;
    return SingleTrackState::from(z);
  }

  [[nodiscard]] int horizon() const { return opts_.steps; }

  StateVec step(int, const StateVec & x, const InputVec & u) const
  {
    StateVec z = x;
    z(7) *= 1e3;
    z = single_track_step(z, InputVec(u(0), 1e3 * u(1)), params_, opts_.dt, opts_.prediction_substep, false);
    z(7) *= 1e-3;
    return z;
  }

  StateVec step(int k, const StateVec & x, const InputVec & u, StateMat & a, InputMat & b) const
  {
    for (int i = 0; i < kNx; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x(i)));
      StateVec xp = x;
      StateVec xm = x;
      xp(i) += h;
      xm(i) -= h;
      a.col(i) = (step(k, xp, u) - step(k, xm, u)) / (2.0 * h);
    }
    for (int i = 0; i < kNu; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(u(i)));
      InputVec up = u;
      InputVec um = u;
      up(i) += h;
      um(i) -= h;
      b.col(i) = (step(k, x, up) - step(k, x, um)) / (2.0 * h);
    }
    return step(k, x, u);
  }

  [[nodiscard]] int num_residuals(int) const { return 5; }

  /// Contouring, lag and speed errors, then steering-rate and force-rate penalties.
  void residuals(
    int k, const StateVec & x, const InputVec * u, Eigen::Ref<Eigen::VectorXd> r,
    Eigen::Ref<Eigen::MatrixXd> jx, Eigen::Ref<Eigen::MatrixXd> ju, bool with_jac) const
  {
    const auto & w = opts_.weights;
    const double wc = std::sqrt(w.contouring);
    const double wl = std::sqrt(w.lag);
    const double wv = std::sqrt(w.velocity);
    const auto cj = geometry::contouring_errors_with_jacobian(ref_->path, Vec2(x(0), x(1)), x(8));
    r(0) = wc * cj.errors.contouring;
    r(1) = wl * cj.errors.lag;
    const bool timed = ref_->timed();
    r(2) = wv * (x(3) - (timed ? ref_->speed_at(k * opts_.dt) : ref_->speed(x(8))));
    r(3) = 0.0;
    r(4) = 0.0;
    if (with_jac) {
      jx.setZero();
      ju.setZero();
      jx(0, 0) = wc * cj.d_contouring(0);
      jx(0, 1) = wc * cj.d_contouring(1);
      jx(0, 8) = wc * cj.d_contouring(2);
      jx(1, 0) = wl * cj.d_lag(0);
      jx(1, 1) = wl * cj.d_lag(1);
      jx(1, 8) = wl * cj.d_lag(2);
      jx(2, 3) = wv;
      jx(2, 8) = timed ? 0.0 : -wv * ref_->speed_slope(x(8));
    }
    if (k < horizon() && u != nullptr) {
      const double wd = std::sqrt(w.steering_rate);
      const double wf = std::sqrt(w.force_rate);
      r(3) = wd * (*u)(0);
      r(4) = wf * (*u)(1);
      if (with_jac) {
        ju(3, 0) = wd;
        ju(4, 1) = wf;
      }
    }
  }

  [[nodiscard]] int num_constraints(int) const { return 6; }

  /// Steering and force bounds, then front and rear friction circles (kN).
  void constraints(
    int, const StateVec & x, Eigen::Ref<Eigen::VectorXd> c, Eigen::Ref<Eigen::MatrixXd> jx,
    bool with_jac) const
  {
    const double fmax = 1e-3 * params_.force_max;
    c(0) = params_.steering_max - x(6);
    c(1) = x(6) + params_.steering_max;
    c(2) = fmax - x(7);
    c(3) = x(7) + fmax;
    const auto m = margins(x);
    c(4) = m[0];
    c(5) = m[1];
    if (with_jac) {
      jx.setZero();
      jx(0, 6) = -1.0;
      jx(1, 6) = 1.0;
      jx(2, 7) = -1.0;
      jx(3, 7) = 1.0;
      for (int i = 3; i <= 7; ++i) {
        const double h = 1e-6 * (1.0 + std::abs(x(i)));
        StateVec xp = x;
        StateVec xm = x;
        xp(i) += h;
        xm(i) -= h;
        const auto mp = margins(xp);
        const auto mm = margins(xm);
        jx(4, i) = (mp[0] - mm[0]) / (2.0 * h);
        jx(5, i) = (mp[1] - mm[1]) / (2.0 * h);
      }
    }
  }

  [[nodiscard]] InputVec input_lower() const
  {
    return {-params_.steering_rate_max, -1e-3 * params_.force_rate_max};
  }
  [[nodiscard]] InputVec input_upper() const
  {
    return {params_.steering_rate_max, 1e-3 * params_.force_rate_max};
  }

  [[nodiscard]] const TrackingReference & reference() const { return *ref_; }

private:
  [[nodiscard]] std::array<double, 2> margins(const StateVec & x) const
  {
    const auto m = friction_circle_margin(from_internal(x), params_);
    return {1e-3 * m[0], 1e-3 * m[1]};
  }

  const TrackingReference * ref_;
  SingleTrackParams params_;
  MpccOptions opts_;
};

static_assert(trajopt::LeastSquaresOcp<MpccModel>);

/// Tracking objective of a state/input sequence (states N+1, inputs N).
inline double mpcc_cost(
  const MpccModel & model, std::span<const SingleTrackState> states, std::span<const TrackerCommand> inputs)
{
  double cost = 0.0;
  Eigen::VectorXd r(5);
  Eigen::MatrixXd dummy(0, 0);
  for (std::size_t k = 0; k < states.size(); ++k) {
    MpccModel::InputVec u = MpccModel::InputVec::Zero();
    if (k < inputs.size()) {
      u = {inputs[k].steering_rate, 1e-3 * inputs[k].force_rate};
    }
    model.residuals(
      static_cast<int>(k), MpccModel::to_internal(states[k]), k < inputs.size() ? &u : nullptr, r, dummy,
      dummy, false);
    cost += r.squaredNorm();
  }
  return cost;
}

struct MpccResult
{
  TrackerCommand command;
  bool feasible{false};
  bool degraded{false};
  int iterations{0};
  double solve_time{0.0};
  std::vector<SingleTrackState> predicted;
};

/// Receding-horizon MPCC; keeps the previous input sequence as warm start.
class MpccController
{
public:
  explicit MpccController(SingleTrackParams params = {}, MpccOptions opts = {})
  : params_(params), opts_(opts)
  {
  }

  MpccResult solve(SingleTrackState state, const TrackingReference & ref)
  {
    state.s = geometry::project_to_path(ref.path, state.position(), 0.0).s;
    const MpccModel model(ref, params_, opts_);
    std::vector<MpccModel::InputVec> warm(static_cast<std::size_t>(opts_.steps), MpccModel::InputVec::Zero());
    if (!previous_.empty()) {
      for (std::size_t k = 0; k < warm.size(); ++k) {
        warm[k] = previous_[std::min(k + 1, previous_.size() - 1)];
      }
    }
    const trajopt::SqpSolver<MpccModel> solver(opts_.sqp);
    const auto res = solver.solve(model, MpccModel::to_internal(state), warm);

    MpccResult out;
    out.feasible = res.feasible;
    out.iterations = res.iterations;
    out.solve_time = res.solve_time;
    for (const auto & z : res.states) {
      out.predicted.push_back(MpccModel::from_internal(z));
    }
    if (res.feasible) {
      out.command = {res.inputs.front()(0), 1e3 * res.inputs.front()(1)};
      previous_ = res.inputs;
    } else {
      out.command = last_;
      out.degraded = true;
      previous_.clear();
    }
    last_ = out.command;
    return out;
  }

  void reset()
  {
    previous_.clear();
    last_ = {};
  }

  [[nodiscard]] const SingleTrackParams & params() const { return params_; }
  [[nodiscard]] const MpccOptions & options() const { return opts_; }

private:
  SingleTrackParams params_;
  MpccOptions opts_;
  std::vector<MpccModel::InputVec> previous_;
  TrackerCommand last_;
};

/// One-shot solve without warm start.
inline TrackerCommand mpcc_solve(
  const SingleTrackState & state, const TrackingReference & ref, const MpccOptions & opts = {},
  const SingleTrackParams & params = {})
{
  MpccController controller(params, opts);
  return controller.solve(state, ref).command;
}

}  // namespace tmpc::tracking

#endif  // TMPC__TRACKING__MPCC_HPP_
