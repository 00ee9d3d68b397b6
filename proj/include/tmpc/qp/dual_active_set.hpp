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

#ifndef TMPC__QP__DUAL_ACTIVE_SET_HPP_
#define TMPC__QP__DUAL_ACTIVE_SET_HPP_

#include "tmpc/common.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <vector>

namespace tmpc::qp
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// min 0.5 x'Hx + g'x  s.t.  A x >= b, with H symmetric positive definite.
struct QpProblem
{
  MatrixXd hessian;
  VectorXd gradient;
  MatrixXd constraints;  ///< m x n, one row per inequality
  VectorXd lower;        ///< m
  std::vector<int> priority;  ///< rows picked before any other violated row
};

enum class QpStatus { kOptimal, kInfeasible, kNotConvex, kIterationLimit };

struct QpResult
{
  QpStatus status{QpStatus::kInfeasible};
  VectorXd x;
  VectorXd multipliers;  ///< m, zero for inactive rows
  std::vector<int> active;
  double objective{0.0};
  int iterations{0};
};

/// Dual active-set method of Goldfarb and Idnani. Starts from the unconstrained
/// minimizer and adds the most violated constraint each outer iteration while
/// keeping dual feasibility; primal infeasibility is detected when no step in
/// the dual can restore the violated row.
class DualActiveSetSolver
{
public:
  struct Options
  {
    double feasibility_tol{1e-9};
    int max_iterations{0};  ///< 0 selects 10 * (m + n)
  };

  DualActiveSetSolver() = default;
  explicit DualActiveSetSolver(Options opts) : opts_(opts) {}

  QpResult solve(const QpProblem & qp)
  {
    const Eigen::Index n = qp.hessian.rows();
    const Eigen::Index m = qp.constraints.rows();
    QpResult res;
    res.multipliers = VectorXd::Zero(m);

    Eigen::LLT<MatrixXd> llt(qp.hessian);
    if (llt.info() != Eigen::Success) {
      res.status = QpStatus::kNotConvex;
      res.x = VectorXd::Zero(n);
      return res;
    }
    // J = L^{-T}; columns span the null space of the active normals after updates.
    j_ = llt.matrixU().solve(MatrixXd::Identity(n, n));
    r_ = MatrixXd::Zero(n, n);
    active_.clear();
    u_.clear();
    int iq = 0;

    VectorXd x = -llt.solve(qp.gradient);
    VectorXd slack(m);
    VectorXd d(n), z(n), r(n);
    std::vector<char> is_active(static_cast<std::size_t>(m), 0);

    const int max_iter =
      opts_.max_iterations > 0 ? opts_.max_iterations : static_cast<int>(10 * (m + n) + 10);
    int iter = 0;
    double r_norm = 1.0;

    while (true) {
      if (++iter > max_iter) {
        res.status = QpStatus::kIterationLimit;
        break;
      }
      slack.noalias() = qp.constraints * x - qp.lower;
      Eigen::Index p = -1;
      double worst = 0.0;
      for (const int i : qp.priority) {
        const double tol = opts_.feasibility_tol * (1.0 + std::abs(qp.lower(i)));
        if (!is_active[static_cast<std::size_t>(i)] && slack(i) < -tol && slack(i) < worst) {
          worst = slack(i);
          p = i;
        }
      }
      const bool scan = p < 0;
      for (Eigen::Index i = 0; scan && i < m; ++i) {
        if (is_active[static_cast<std::size_t>(i)]) {
          continue;
        }
        const double tol = opts_.feasibility_tol * (1.0 + std::abs(qp.lower(i)));
        if (slack(i) < -tol && slack(i) < worst) {
          worst = slack(i);
          p = i;
        }
      }
      if (p < 0) {
        res.status = QpStatus::kOptimal;
        break;
      }

      const auto np = qp.constraints.row(p).transpose();
      double sp = slack(p);
      double u_plus = 0.0;
      bool added = false;
      bool infeasible = false;

      while (!added) {
        if (++iter > max_iter) {
          break;
        }
        d.noalias() = j_.transpose() * np;
        z.noalias() = j_.rightCols(n - iq) * d.tail(n - iq);
        if (iq > 0) {
          r.head(iq) = r_.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
        }

        // Partial step: largest dual step before an active multiplier hits zero.
        double t1 = std::numeric_limits<double>::infinity();
        int drop = -1;
        for (int k = 0; k < iq; ++k) {
          if (r(k) > 0.0) {
            const double ratio = u_[static_cast<std::size_t>(k)] / r(k);
            if (ratio < t1) {
              t1 = ratio;
              drop = k;
            }
          }
        }
        // Full step: primal step that makes row p active.
        double t2 = std::numeric_limits<double>::infinity();
        const double zn = z.dot(np);
        if (z.squaredNorm() > 1e-24 && zn > 0.0) {
          t2 = std::max(0.0, -sp / zn);
        }
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          infeasible = true;
          break;
        }
        if (!std::isfinite(t2)) {
          for (int k = 0; k < iq; ++k) {
            u_[static_cast<std::size_t>(k)] -= t * r(k);
          }
          u_plus += t;
          is_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(drop)])] = 0;
          delete_constraint(drop, iq);
          continue;
        }
        x += t * z;
        for (int k = 0; k < iq; ++k) {
          u_[static_cast<std::size_t>(k)] -= t * r(k);
        }
        u_plus += t;
        if (t == t2) {
          if (!add_constraint(d, iq, r_norm)) {
            infeasible = true;
            break;
          }
          active_.push_back(static_cast<int>(p));
          u_.push_back(u_plus);
          is_active[static_cast<std::size_t>(p)] = 1;
          added = true;
        } else {
          is_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(drop)])] = 0;
          delete_constraint(drop, iq);
          sp = qp.constraints.row(p).dot(x) - qp.lower(p);
        }
      }
      if (infeasible) {
        res.status = QpStatus::kInfeasible;
        break;
      }
      if (iter > max_iter) {
        res.status = QpStatus::kIterationLimit;
        break;
      }
    }

    res.iterations = iter;
    res.x = x;
    res.active = active_;
    for (std::size_t k = 0; k < active_.size(); ++k) {
      res.multipliers(active_[k]) = u_[k];
    }
    res.objective = 0.5 * x.dot(qp.hessian * x) + qp.gradient.dot(x);
    return res;
  }

private:
  bool add_constraint(VectorXd & d, int & iq, double & r_norm)
  {
    const Eigen::Index n = d.size();
    for (Eigen::Index j = n - 1; j > iq; --j) {
      const double a = d(j - 1);
      const double b = d(j);
      if (b == 0.0) {
        continue;
      }
      const double h = std::hypot(a, b);
      const double c = a / h;
      const double s = b / h;
      d(j - 1) = h;
      d(j) = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = j_(k, j - 1);
        const double t2 = j_(k, j);
        j_(k, j - 1) = c * t1 + s * t2;
        j_(k, j) = -s * t1 + c * t2;
      }
    }
    if (std::abs(d(iq)) <= 1e-14 * r_norm) {
      return false;
    }
    r_.col(iq).head(iq + 1) = d.head(iq + 1);
    r_norm = std::max(r_norm, std::abs(d(iq)));
    ++iq;
    return true;
  }

  void delete_constraint(int qq, int & iq)
  {
    const Eigen::Index n = j_.rows();
    for (int k = qq; k + 1 < iq; ++k) {
      r_.col(k) = r_.col(k + 1);
    }
    r_.col(iq - 1).setZero();
    active_.erase(active_.begin() + qq);
    u_.erase(u_.begin() + qq);
    --iq;
    for (int j = qq; j < iq; ++j) {
      const double a = r_(j, j);
      const double b = r_(j + 1, j);
      if (b == 0.0) {
        continue;
      }
      const double h = std::hypot(a, b);
      const double c = a / h;
      const double s = b / h;
      r_(j, j) = h;
      r_(j + 1, j) = 0.0;
      for (int k = j + 1; k < iq; ++k) {
        const double t1 = r_(j, k);
        const double t2 = r_(j + 1, k);
        r_(j, k) = c * t1 + s * t2;
        r_(j + 1, k) = -s * t1 + c * t2;
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = j_(k, j);
        const double t2 = j_(k, j + 1);
        j_(k, j) = c * t1 + s * t2;
        j_(k, j + 1) = -s * t1 + c * t2;
      }
    }
  }

  Options opts_{};
  MatrixXd j_;
  MatrixXd r_;
  std::vector<int> active_;
  std::vector<double> u_;
};

inline QpResult solve_qp(const QpProblem & qp) { return DualActiveSetSolver{}.solve(qp); }

}  // namespace tmpc::qp

#endif  // TMPC__QP__DUAL_ACTIVE_SET_HPP_
