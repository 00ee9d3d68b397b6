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

#ifndef TMPC__TRAJOPT__PLANNER_PROBLEM_HPP_
#define TMPC__TRAJOPT__PLANNER_PROBLEM_HPP_

#include "tmpc/geometry/reference_path.hpp"
#include "tmpc/prediction/prediction.hpp"
#include "tmpc/topology/winding.hpp"
#include "tmpc/trajopt/bicycle.hpp"
#include "tmpc/trajopt/chance_constraint.hpp"
#include "tmpc/trajopt/sqp.hpp"

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <vector>

namespace tmpc::trajopt
{

struct PlannerWeights
{
  double contouring{1.0};
  double lag{1.0};
  double preview{1.0};
  double velocity{0.5};
  double acceleration{0.1};
  double steering_rate{0.5};
  double v_ref{2.0};
  double eps_joint{0.35};
  RiskAllocation allocation{RiskAllocation::kUniform};
  double preview_distance{2.0};

  void validate() const
  {
    const double w[] = {contouring, lag, preview, velocity, acceleration, steering_rate};
    double sum = 0.0;
    for (double v : w) {
      if (!(v >= 0.0)) {
        throw InvalidInput("planner weights must be non-negative");
      }
      sum += v;
    }
    if (!(sum > 0.0)) {
      throw InvalidInput("at least one planner weight must be positive");
    }
    if (!(eps_joint > 0.0 && eps_joint < 0.5)) {
      throw InvalidInput("joint risk must lie in (0, 0.5)");
    }
  }

  [[nodiscard]] PlannerWeights scaled(double factor) const
  {
    PlannerWeights w = *this;
    w.contouring *= factor;
    w.lag *= factor;
    w.preview *= factor;
    w.velocity *= factor;
    w.acceleration *= factor;
    w.steering_rate *= factor;
    return w;
  }
};

struct HorizonSpec
{
  int steps{35};
  double dt{0.2};
};

struct PlannerSolution
{
  std::vector<VehicleState> states;
  std::vector<ControlInput> inputs;
  double cost{0.0};
  bool feasible{false};
  double kkt_residual{0.0};
  double max_violation{0.0};
  int iterations{0};
  double solve_time{0.0};
  bool converged{false};
  topology::TopologySignature signature;
};

/// Chance-constrained contouring problem over the kinematic bicycle model,
/// exposed as a least-squares optimal control problem for SqpSolver.
class NonlinearProgram
{
public:
  static constexpr int kNx = VehicleState::kSize;
  static constexpr int kNu = ControlInput::kSize;
  using StateVec = VehicleState::Vector;
  using InputVec = ControlInput::Vector;
  using StateMat = StateMatrix;
  using InputMat = InputMatrix;

  static constexpr int kBoundRowsPerStage = 4;

  NonlinearProgram(
    const VehicleState & x_init, const geometry::ReferencePath & path,
    std::vector<prediction::GaussianPrediction> predictions, const PlannerWeights & weights,
    HorizonSpec horizon = {}, VehicleLimits limits = {}, Footprint footprint = {})
  : x_init_(x_init),
    path_(&path),
    predictions_(std::move(predictions)),
    weights_(weights),
    horizon_(horizon),
    limits_(limits),
    footprint_(std::move(footprint))
  {
    weights_.validate();
    for (const auto & p : predictions_) {
      if (static_cast<int>(p.size()) < horizon_.steps + 1) {
        throw InvalidInput("prediction shorter than the planning horizon");
      }
    }
    const auto risks = allocate_risk(
      weights_.eps_joint, horizon_.steps, static_cast<int>(predictions_.size()), weights_.allocation);
    gammas_.reserve(risks.size());
    for (double eps : risks) {
      gammas_.push_back(risk_quantile(eps));
    }
  }

  [[nodiscard]] int horizon() const { return horizon_.steps; }
  [[nodiscard]] double dt() const { return horizon_.dt; }
  [[nodiscard]] const VehicleState & initial_state() const { return x_init_; }
  [[nodiscard]] const geometry::ReferencePath & path() const { return *path_; }
  [[nodiscard]] const PlannerWeights & weights() const { return weights_; }
  [[nodiscard]] const VehicleLimits & limits() const { return limits_; }
  [[nodiscard]] const Footprint & footprint() const { return footprint_; }
  [[nodiscard]] const std::vector<prediction::GaussianPrediction> & predictions() const
  {
    return predictions_;
  }
  [[nodiscard]] int num_obstacles() const { return static_cast<int>(predictions_.size()); }

  /// Use the exact gradient of the nonlinear chance function instead of the
  /// fixed half-plane normal when linearizing.
  void set_exact_constraint_jacobian(bool on) { exact_jacobian_ = on; }

  // Constraint bookkeeping of the full-space formulation.
  [[nodiscard]] int num_variables() const { return (horizon() + 1) * kNx + horizon() * kNu; }
  [[nodiscard]] int num_dynamics_constraints() const { return (horizon() + 1) * kNx; }
  [[nodiscard]] int num_bound_constraints() const
  {
    return horizon() * (2 * kNu + kBoundRowsPerStage);
  }
  [[nodiscard]] int num_chance_constraints() const
  {
    return horizon() * num_obstacles() * footprint_.count();
  }
  [[nodiscard]] int num_total_constraints() const
  {
    return num_dynamics_constraints() + num_bound_constraints() + num_chance_constraints();
  }

  [[nodiscard]] double gamma(int k, int j) const
  {
    return gammas_[static_cast<std::size_t>((k - 1) * num_obstacles() + j)];
  }

  StateVec step(int, const StateVec & x, const InputVec & u) const
  {
    return bicycle_step(x, u, horizon_.dt, limits_.wheelbase);
  }

  StateVec step(int, const StateVec & x, const InputVec & u, StateMat & a, InputMat & b) const
  {
    return bicycle_step_jacobian(x, u, horizon_.dt, limits_.wheelbase, a, b);
  }

  [[nodiscard]] int num_residuals(int) const { return 5; }

  void residuals(
    int k, const StateVec & x, const InputVec * u, Eigen::Ref<Eigen::VectorXd> r,
    Eigen::Ref<Eigen::MatrixXd> jx, Eigen::Ref<Eigen::MatrixXd> ju, bool with_jac) const
  {
    const double wc = std::sqrt(weights_.contouring);
    const double wl = std::sqrt(weights_.lag);
    const double wv = std::sqrt(weights_.velocity);
    const Vec2 pos(x(0), x(1));
    const auto cj = geometry::contouring_errors_with_jacobian(*path_, pos, x(5));
    r(0) = wc * cj.errors.contouring;
    r(1) = wl * cj.errors.lag;
    r(2) = wv * (x(3) - weights_.v_ref);
    if (with_jac) {
      jx.setZero();
      ju.setZero();
      jx(0, 0) = wc * cj.d_contouring(0);
      jx(0, 1) = wc * cj.d_contouring(1);
      jx(0, 5) = wc * cj.d_contouring(2);
      jx(1, 0) = wl * cj.d_lag(0);
      jx(1, 1) = wl * cj.d_lag(1);
      jx(1, 5) = wl * cj.d_lag(2);
      jx(2, 3) = wv;
    }
    if (k < horizon()) {
      const double wa = std::sqrt(weights_.acceleration);
      const double ww = std::sqrt(weights_.steering_rate);
      r(3) = wa * (*u)(0);
      r(4) = ww * (*u)(1);
      if (with_jac) {
        ju(3, 0) = wa;
        ju(4, 1) = ww;
      }
      return;
    }
    // Terminal path preview: contouring error of a point ahead of the vehicle
    // and heading misalignment with the path tangent.
    const double wp = std::sqrt(weights_.preview);
    const double dp = weights_.preview_distance;
    const Vec2 h = heading_vector(x(2));
    const Vec2 dh(-h.y(), h.x());
    const Vec2 ahead = pos + dp * h;
    const auto pj = geometry::contouring_errors_with_jacobian(*path_, ahead, x(5) + dp);
    const double s_end = std::clamp(x(5), 0.0, path_->length());
    const auto d = path_->derivatives(s_end);
    const double speed = d.d1.norm();
    const Vec2 t = d.d1 / speed;
    const Vec2 n = left_normal(t);
    const bool inside = x(5) >= 0.0 && x(5) <= path_->length();
    const Vec2 dn = inside ? Vec2(left_normal((d.d2 - t * t.dot(d.d2)) / speed)) : Vec2::Zero();
    r(3) = wp * pj.errors.contouring;
    r(4) = wp * n.dot(h);  // sin(heading - path heading)
    if (with_jac) {
      jx(3, 0) = wp * pj.d_contouring(0);
      jx(3, 1) = wp * pj.d_contouring(1);
      jx(3, 2) = wp * dp * pj.d_contouring.head<2>().dot(dh);
      jx(3, 5) = wp * pj.d_contouring(2);
      jx(4, 2) = wp * n.dot(dh);
      jx(4, 5) = wp * dn.dot(h);
    }
  }

  [[nodiscard]] int num_constraints(int) const
  {
    return kBoundRowsPerStage + num_obstacles() * footprint_.count();
  }

  [[nodiscard]] int num_hard_constraints(int) const { return kBoundRowsPerStage; }

  /// Rows: v - v_min, v_max - v, delta + delta_max, delta_max - delta, then one
  /// chance constraint per (obstacle, disc).
  void constraints(
    int k, const StateVec & x, Eigen::Ref<Eigen::VectorXd> c, Eigen::Ref<Eigen::MatrixXd> jx,
    bool with_jac) const
  {
    c(0) = x(3) - limits_.v_min;
    c(1) = limits_.v_max - x(3);
    c(2) = x(4) + limits_.steering_max;
    c(3) = limits_.steering_max - x(4);
    if (with_jac) {
      jx.setZero();
      jx(0, 3) = 1.0;
      jx(1, 3) = -1.0;
      jx(2, 4) = 1.0;
      jx(3, 4) = -1.0;
    }
    const Vec2 h = heading_vector(x(2));
    const Vec2 dh(-h.y(), h.x());
    int row = kBoundRowsPerStage;
    for (int j = 0; j < num_obstacles(); ++j) {
      const auto & pred = predictions_[static_cast<std::size_t>(j)];
      const Vec2 & mean = pred.means[static_cast<std::size_t>(k)];
      const Mat2 & cov = pred.covariances[static_cast<std::size_t>(k)];
      const double radius = pred.radius + footprint_.disc_radius;
      const double g = gamma(k, j);
      for (const double offset : footprint_.offsets) {
        const Vec2 p = Vec2(x(0), x(1)) + offset * h;
        const ChanceValue cv = chance_constraint_value(p, mean, cov, radius, g);
        c(row) = cv.value;
        if (with_jac) {
          const Vec2 grad = exact_jacobian_ ? cv.gradient : cv.plane.normal;
          jx(row, 0) = grad.x();
          jx(row, 1) = grad.y();
          jx(row, 2) = offset * grad.dot(dh);
        }
        ++row;
      }
    }
  }

  [[nodiscard]] InputVec input_lower() const { return {-limits_.a_max, -limits_.steering_rate_max}; }
  [[nodiscard]] InputVec input_upper() const { return {limits_.a_max, limits_.steering_rate_max}; }

private:
  VehicleState x_init_;
  const geometry::ReferencePath * path_;
  std::vector<prediction::GaussianPrediction> predictions_;
  PlannerWeights weights_;
  HorizonSpec horizon_;
  VehicleLimits limits_;
  Footprint footprint_;
  std::vector<double> gammas_;
  bool exact_jacobian_{false};
};

static_assert(LeastSquaresOcp<NonlinearProgram>);

inline NonlinearProgram build_problem(
  const VehicleState & x_init, const geometry::ReferencePath & path,
  std::vector<prediction::GaussianPrediction> predictions, const PlannerWeights & weights,
  HorizonSpec horizon = {}, VehicleLimits limits = {}, Footprint footprint = {})
{
  return NonlinearProgram(
    x_init, path, std::move(predictions), weights, horizon, limits, std::move(footprint));
}

/// Objective of a given trajectory under the planner cost; identical to the
/// value the solver reports for the same trajectory.
inline double evaluate_cost(
  std::span<const VehicleState> states, std::span<const ControlInput> inputs,
  const PlannerWeights & weights, const geometry::ReferencePath & path, double dt = 0.2)
{
  if (states.size() != inputs.size() + 1 || inputs.empty()) {
    throw InvalidInput("trajectory needs N+1 states and N inputs");
  }
  const NonlinearProgram nlp(
    states.front(), path, {}, weights,
    HorizonSpec{static_cast<int>(inputs.size()), dt});
  double cost = 0.0;
  Eigen::VectorXd r(5);
  Eigen::MatrixXd dummy(0, 0);
  const int n = nlp.horizon();
  for (int k = 0; k <= n; ++k) {
    const auto x = states[static_cast<std::size_t>(k)].vec();
    NonlinearProgram::InputVec u = NonlinearProgram::InputVec::Zero();
    if (k < n) {
      u = inputs[static_cast<std::size_t>(k)].vec();
    }
    nlp.residuals(k, x, k < n ? &u : nullptr, r, dummy, dummy, false);
    cost += r.squaredNorm();
  }
  return cost;
}

/// Vehicle geometric-center positions along a trajectory.
inline Positions center_positions(std::span<const VehicleState> states, const Footprint & fp = {})
{
  Positions out;
  out.reserve(states.size());
  for (const auto & s : states) {
    out.push_back(s.position() + fp.center_offset * heading_vector(s.heading));
  }
  return out;
}

/// Open-loop states for an input sequence.
inline std::vector<VehicleState> simulate_inputs(
  const VehicleState & x0, std::span<const ControlInput> inputs, double dt, double wheelbase = 2.7)
{
  std::vector<VehicleState> out;
  out.reserve(inputs.size() + 1);
  out.push_back(x0);
  for (const auto & u : inputs) {
    out.push_back(bicycle_step(out.back(), u, dt, wheelbase));
  }
  return out;
}

/// Runs the SQP from a warm-start input sequence and packages the result.
inline PlannerSolution solve_sqp(
  const NonlinearProgram & nlp, std::span<const ControlInput> warm_start, SqpOptions opts = {})
{
  std::vector<NonlinearProgram::InputVec> u0;
  u0.reserve(warm_start.size());
  for (const auto & u : warm_start) {
    u0.push_back(u.vec());
  }
  const SqpSolver<NonlinearProgram> solver(opts);
  const auto res = solver.solve(nlp, nlp.initial_state().vec(), std::move(u0));
  PlannerSolution sol;
  sol.states.reserve(res.states.size());
  for (const auto & x : res.states) {
    sol.states.push_back(VehicleState::from(x));
  }
  sol.inputs.reserve(res.inputs.size());
  for (const auto & u : res.inputs) {
    sol.inputs.push_back(ControlInput::from(u));
  }
  sol.cost = res.cost;
  sol.feasible = res.feasible;
  sol.kkt_residual = res.kkt_residual;
  sol.max_violation = res.max_violation;
  sol.iterations = res.iterations;
  sol.solve_time = res.solve_time;
  sol.converged = res.converged;
  return sol;
}

}  // namespace tmpc::trajopt

#endif  // TMPC__TRAJOPT__PLANNER_PROBLEM_HPP_
