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

#ifndef TMPC__TRAJOPT__SQP_HPP_
#define TMPC__TRAJOPT__SQP_HPP_

#include "tmpc/qp/dual_active_set.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

namespace tmpc::trajopt
{

/// Optimal control problem over N stages with a least-squares objective
///   sum_{k=0}^{N} |r_k(x_k, u_k)|^2   (no input at k = N)
/// and inequality constraints c_k(x_k) >= 0 for k = 1..N plus input boxes.
template <class M>
concept LeastSquaresOcp = requires(
  const M & m, const typename M::StateVec & x, const typename M::InputVec & u,
  typename M::StateMat & a, typename M::InputMat & b, Eigen::Ref<Eigen::VectorXd> vec,
  Eigen::Ref<Eigen::MatrixXd> mat) {
  { M::kNx } -> std::convertible_to<int>;
  { M::kNu } -> std::convertible_to<int>;
  { m.horizon() } -> std::convertible_to<int>;
  { m.step(0, x, u) } -> std::convertible_to<typename M::StateVec>;
  { m.step(0, x, u, a, b) } -> std::convertible_to<typename M::StateVec>;
  { m.num_residuals(0) } -> std::convertible_to<int>;
  m.residuals(0, x, &u, vec, mat, mat, true);
  { m.num_constraints(1) } -> std::convertible_to<int>;
  m.constraints(1, x, vec, mat, true);
  { m.input_lower() } -> std::convertible_to<typename M::InputVec>;
  { m.input_upper() } -> std::convertible_to<typename M::InputVec>;
};

/// Leading constraint rows of stage k that the soft retry keeps hard. Models
/// opt in with num_hard_constraints(k); rows must be linear in the inputs.
template <class M>
int hard_constraint_rows(const M & model, int k)
{
  if constexpr (requires { { model.num_hard_constraints(k) } -> std::convertible_to<int>; }) {
    return model.num_hard_constraints(k);
  } else {
    return 0;
  }
}

struct SqpOptions
{
  int max_iterations{20};
  double kkt_tolerance{1e-4};
  double feasibility_tolerance{1e-4};
  double slack_penalty{1e4};
  double merit_penalty{1e4};
  double regularization{1e-6};
  int max_line_search{12};
  double stall_tolerance{1e-6};  ///< relative merit decrease treated as a stall
};

template <class M>
struct SqpResult
{
  std::vector<typename M::StateVec> states;
  std::vector<typename M::InputVec> inputs;
  double cost{std::numeric_limits<double>::infinity()};
  double max_violation{std::numeric_limits<double>::infinity()};
  double kkt_residual{std::numeric_limits<double>::infinity()};
  bool feasible{false};
  bool converged{false};
  bool used_slack{false};
  int iterations{0};
  double solve_time{0.0};
  std::vector<double> merit_history;
};

/// Evaluated trajectory: states, cost and constraint values.
template <class M>
struct Rollout
{
  std::vector<typename M::StateVec> states;
  double cost{0.0};
  double violation_sum{0.0};  ///< sum of max(0, -c)
  double violation_max{0.0};
};

template <LeastSquaresOcp M>
Rollout<M> rollout(
  const M & model, const typename M::StateVec & x0, const std::vector<typename M::InputVec> & u)
{
  const int n = model.horizon();
  Rollout<M> out;
  out.states.resize(static_cast<std::size_t>(n) + 1);
  out.states[0] = x0;
  for (int k = 0; k < n; ++k) {
    out.states[static_cast<std::size_t>(k) + 1] = model.step(k, out.states[static_cast<std::size_t>(k)], u[static_cast<std::size_t>(k)]);
  }
  Eigen::VectorXd r;
  Eigen::MatrixXd dummy(0, 0);
  for (int k = 0; k <= n; ++k) {
    r.resize(model.num_residuals(k));
    model.residuals(
      k, out.states[static_cast<std::size_t>(k)], k < n ? &u[static_cast<std::size_t>(k)] : nullptr, r, dummy, dummy, false);
    out.cost += r.squaredNorm();
  }
  Eigen::VectorXd c;
  for (int k = 1; k <= n; ++k) {
    c.resize(model.num_constraints(k));
    model.constraints(k, out.states[static_cast<std::size_t>(k)], c, dummy, false);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (c(i) < 0.0) {
        out.violation_sum -= c(i);
        out.violation_max = std::max(out.violation_max, -c(i));
      }
    }
  }
  return out;
}

/// Single-shooting sequential quadratic programming with a Gauss-Newton
/// Hessian. States are eliminated through the linearized dynamics so each
/// subproblem is a dense QP in the input increments, solved by the dual
/// active-set routine. Steps are globalized by backtracking on an
/// l-infinity merit function; infeasible subproblems are retried with one
/// shared slack, which minimizes the same linearized penalty.
template <LeastSquaresOcp M>
class SqpSolver
{
public:
  static constexpr int kNx = M::kNx;
  static constexpr int kNu = M::kNu;
  using StateVec = typename M::StateVec;
  using InputVec = typename M::InputVec;

  explicit SqpSolver(SqpOptions opts = {}) : opts_(opts) {}

  SqpResult<M> solve(const M & model, const StateVec & x0, std::vector<InputVec> inputs) const
  {
    const auto t_start = std::chrono::steady_clock::now();
    const int n = model.horizon();
    const int nv = n * kNu;
    const InputVec lo = model.input_lower();
    const InputVec hi = model.input_upper();
    inputs.resize(static_cast<std::size_t>(n), InputVec::Zero());
    for (auto & u : inputs) {
      u = u.cwiseMax(lo).cwiseMin(hi);
    }

    SqpResult<M> res;
    Rollout<M> current = rollout(model, x0, inputs);
    double merit = current.cost + opts_.merit_penalty * current.violation_max;
    res.merit_history.push_back(merit);

    int total_res = 0;
    int total_con = 0;
    for (int k = 0; k <= n; ++k) {
      total_res += model.num_residuals(k);
      if (k > 0) {
        total_con += model.num_constraints(k);
      }
    }

    std::vector<typename M::StateMat> a_mats(static_cast<std::size_t>(n));
    std::vector<typename M::InputMat> b_mats(static_cast<std::size_t>(n));
    std::vector<Eigen::MatrixXd> sens(static_cast<std::size_t>(n) + 1, Eigen::MatrixXd::Zero(kNx, nv));
    Eigen::MatrixXd jac(total_res, nv);
    Eigen::VectorXd resid(total_res);
    Eigen::MatrixXd con_jac(total_con, nv);
    Eigen::VectorXd con_val(total_con);
    Eigen::VectorXd slack_col = Eigen::VectorXd::Ones(total_con);
    for (int k = 1, row = 0; k <= n; row += model.num_constraints(k), ++k) {
      slack_col.segment(row, hard_constraint_rows(model, k)).setZero();
    }
    qp::DualActiveSetSolver qp_solver;

    for (int iter = 0; iter < opts_.max_iterations; ++iter) {
      res.iterations = iter + 1;
      const auto & xs = current.states;

      // Linearize dynamics and propagate the input sensitivities dx_k/dU.
      for (int k = 0; k < n; ++k) {
        model.step(k, xs[static_cast<std::size_t>(k)], inputs[static_cast<std::size_t>(k)], a_mats[static_cast<std::size_t>(k)], b_mats[static_cast<std::size_t>(k)]);
      }
      sens[0].setZero();
      for (int k = 0; k < n; ++k) {
        auto & next = sens[static_cast<std::size_t>(k) + 1];
        next.leftCols(k * kNu).noalias() = a_mats[static_cast<std::size_t>(k)] * sens[static_cast<std::size_t>(k)].leftCols(k * kNu);
        next.middleCols(k * kNu, kNu) = b_mats[static_cast<std::size_t>(k)];
        next.rightCols(nv - (k + 1) * kNu).setZero();
      }

      jac.setZero();
      int row = 0;
      for (int k = 0; k <= n; ++k) {
        const int nr = model.num_residuals(k);
        if (nr == 0) {
          continue;
        }
        Eigen::MatrixXd jx(nr, kNx);
        Eigen::MatrixXd ju(nr, kNu);
        ju.setZero();
        model.residuals(
          k, xs[static_cast<std::size_t>(k)], k < n ? &inputs[static_cast<std::size_t>(k)] : nullptr, resid.segment(row, nr), jx, ju, true);
        if (k > 0) {
          jac.block(row, 0, nr, k * kNu).noalias() = jx * sens[static_cast<std::size_t>(k)].leftCols(k * kNu);
        }
        if (k < n) {
          jac.block(row, k * kNu, nr, kNu) += ju;
        }
        row += nr;
      }

      con_jac.setZero();
      row = 0;
      for (int k = 1; k <= n; ++k) {
        const int nc = model.num_constraints(k);
        if (nc == 0) {
          continue;
        }
        Eigen::MatrixXd cx(nc, kNx);
        model.constraints(k, xs[static_cast<std::size_t>(k)], con_val.segment(row, nc), cx, true);
        con_jac.block(row, 0, nc, k * kNu).noalias() = cx * sens[static_cast<std::size_t>(k)].leftCols(k * kNu);
        row += nc;
      }

      Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(nv, nv) * opts_.regularization;
      hess.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose(), 2.0);
      hess = hess.selfadjointView<Eigen::Lower>();
      const Eigen::VectorXd grad = 2.0 * jac.transpose() * resid;

      // Input boxes as rows +du >= lo - u, -du >= u - hi.
      Eigen::VectorXd u_flat(nv);
      for (int k = 0; k < n; ++k) {
        u_flat.segment<kNu>(k * kNu) = inputs[static_cast<std::size_t>(k)];
      }
      Eigen::VectorXd lo_flat = lo.replicate(n, 1);
      Eigen::VectorXd hi_flat = hi.replicate(n, 1);

      qp::QpProblem qp;
      qp.hessian = hess;
      qp.gradient = grad;
      qp.constraints.resize(total_con + 2 * nv, nv);
      qp.lower.resize(total_con + 2 * nv);
      qp.constraints.topRows(total_con) = con_jac;
      qp.lower.head(total_con) = -con_val;
      qp.constraints.middleRows(total_con, nv).setIdentity();
      qp.lower.segment(total_con, nv) = lo_flat - u_flat;
      qp.constraints.bottomRows(nv) = -Eigen::MatrixXd::Identity(nv, nv);
      qp.lower.tail(nv) = u_flat - hi_flat;

      qp::QpResult sol = qp_solver.solve(qp);
      Eigen::VectorXd step;
      Eigen::VectorXd mult;
      bool slack_step = false;
      if (sol.status == qp::QpStatus::kOptimal) {
        step = sol.x;
        mult = sol.multipliers;
      } else {
        // Soft retry: one shared slack on every row that is not hard.
        qp::QpProblem soft;
        soft.hessian = Eigen::MatrixXd::Zero(nv + 1, nv + 1);
        soft.hessian.topLeftCorner(nv, nv) = hess;
        soft.hessian(nv, nv) = 1.0;
        soft.gradient.resize(nv + 1);
        soft.gradient << grad, opts_.slack_penalty;
        const Eigen::Index m = qp.constraints.rows();
        soft.constraints = Eigen::MatrixXd::Zero(m + 1, nv + 1);
        soft.constraints.topLeftCorner(m, nv) = qp.constraints;
        soft.constraints.block(0, nv, total_con, 1) = slack_col;
        soft.constraints(m, nv) = 1.0;
        soft.lower.resize(m + 1);
        soft.lower << qp.lower, 0.0;
        soft.priority = {static_cast<int>(m)};
        qp::QpResult soft_sol = qp_solver.solve(soft);
        if (soft_sol.status != qp::QpStatus::kOptimal) {
          break;
        }
        step = soft_sol.x.head(nv);
        mult = soft_sol.multipliers.head(m);
        slack_step = true;
        res.used_slack = true;
      }

      // KKT measure at the current iterate using the subproblem multipliers.
      double kkt = (hess * step).cwiseAbs().maxCoeff();
      kkt = std::max(kkt, current.violation_max);
      for (Eigen::Index i = 0; i < total_con; ++i) {
        kkt = std::max(kkt, std::abs(mult(i) * con_val(i)));
      }
      res.kkt_residual = kkt;
      if (kkt <= opts_.kkt_tolerance && !slack_step) {
        res.converged = true;
        break;
      }

      // Backtracking on the merit function. A slack step leaves part of the
      // linearized violation in place.
      const double lin_violation =
        total_con > 0 ? std::max(0.0, (-(con_val + con_jac * step)).maxCoeff()) : 0.0;
      const double dir = grad.dot(step) + opts_.merit_penalty * (lin_violation - current.violation_max);
      double alpha = 1.0;
      bool accepted = false;
      const double merit_before = merit;
      std::vector<InputVec> trial(inputs.size());
      for (int ls = 0; ls < opts_.max_line_search; ++ls) {
        for (int k = 0; k < n; ++k) {
          trial[static_cast<std::size_t>(k)] = (inputs[static_cast<std::size_t>(k)] + alpha * step.template segment<kNu>(k * kNu)).cwiseMax(lo).cwiseMin(hi);
        }
        Rollout<M> cand = rollout(model, x0, trial);
        const double cand_merit = cand.cost + opts_.merit_penalty * cand.violation_max;
        if (cand_merit <= merit + 1e-4 * alpha * std::min(dir, 0.0) && cand_merit <= merit) {
          inputs = trial;
          current = std::move(cand);
          merit = cand_merit;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        break;
      }
      res.merit_history.push_back(merit);
      if (merit_before - merit <= opts_.stall_tolerance * (1.0 + std::abs(merit))) {
        break;
      }
    }

    res.inputs = inputs;
    res.states = current.states;
    res.cost = current.cost;
    res.max_violation = current.violation_max;
    res.feasible = std::isfinite(current.cost) &&
                   current.violation_max <= opts_.feasibility_tolerance;
    res.solve_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
  }

  [[nodiscard]] const SqpOptions & options() const { return opts_; }

private:
  SqpOptions opts_;
};

}  // namespace tmpc::trajopt

#endif  // TMPC__TRAJOPT__SQP_HPP_
