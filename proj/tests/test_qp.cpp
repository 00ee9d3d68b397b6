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

#include "tmpc/qp/dual_active_set.hpp"
#include "tmpc/random.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <limits>
#include <optional>

namespace tmpc::qp
{
namespace
{

// Exhaustive active-set enumeration: the optimum is the lowest-objective KKT
// point among all equality-constrained subproblems that are primal feasible.
std::optional<VectorXd> brute_force(const QpProblem & qp)
{
  const int n = static_cast<int>(qp.hessian.rows());
  const int m = static_cast<int>(qp.constraints.rows());
  std::optional<VectorXd> best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<int> rows;
    for (int i = 0; i < m; ++i) {
      if (mask & (1 << i)) {
        rows.push_back(i);
      }
    }
    const int q = static_cast<int>(rows.size());
    if (q > n) {
      continue;
    }
    MatrixXd kkt = MatrixXd::Zero(n + q, n + q);
    VectorXd rhs(n + q);
    kkt.topLeftCorner(n, n) = qp.hessian;
    rhs.head(n) = -qp.gradient;
    for (int r = 0; r < q; ++r) {
      kkt.block(n + r, 0, 1, n) = qp.constraints.row(rows[r]);
      kkt.block(0, n + r, n, 1) = -qp.constraints.row(rows[r]).transpose();
      rhs(n + r) = qp.lower(rows[r]);
    }
    Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (lu.rank() < n + q) {
      continue;
    }
    const VectorXd sol = lu.solve(rhs);
    const VectorXd x = sol.head(n);
    if (((qp.constraints * x - qp.lower).array() < -1e-9).any()) {
      continue;
    }
    if ((sol.tail(q).array() < -1e-9).any()) {
      continue;
    }
    const double obj = 0.5 * x.dot(qp.hessian * x) + qp.gradient.dot(x);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

QpProblem random_problem(Rng & rng, int n, int m)
{
  QpProblem qp;
  MatrixXd l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      l(i, j) = rng.uniform(-1, 1);
    }
  }
  qp.hessian = l * l.transpose() + 0.1 * MatrixXd::Identity(n, n);
  qp.gradient.resize(n);
  for (int i = 0; i < n; ++i) {
    qp.gradient(i) = rng.uniform(-3, 3);
  }
  qp.constraints.resize(m, n);
  qp.lower.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      qp.constraints(i, j) = rng.uniform(-1, 1);
    }
    qp.lower(i) = rng.uniform(-1, 1);
  }
  return qp;
}

TEST(DualActiveSet, UnconstrainedMinimizer)
{
  QpProblem qp;
  qp.hessian = (MatrixXd(2, 2) << 2, 0, 0, 4).finished();
  qp.gradient = (VectorXd(2) << -2, -8).finished();
  qp.constraints.resize(0, 2);
  qp.lower.resize(0);
  const auto res = solve_qp(qp);
  ASSERT_EQ(res.status, QpStatus::kOptimal);
  EXPECT_NEAR(res.x(0), 1.0, 1e-12);
  EXPECT_NEAR(res.x(1), 2.0, 1e-12);
}

TEST(DualActiveSet, SingleActiveBound)
{
  // min (x-1)^2 + (y-2)^2 s.t. x + y >= 4  -> (1.5, 2.5), multiplier 1.
  QpProblem qp;
  qp.hessian = 2.0 * MatrixXd::Identity(2, 2);
  qp.gradient = (VectorXd(2) << -2, -4).finished();
  qp.constraints = (MatrixXd(1, 2) << 1, 1).finished();
  qp.lower = (VectorXd(1) << 4).finished();
  const auto res = solve_qp(qp);
  ASSERT_EQ(res.status, QpStatus::kOptimal);
  EXPECT_NEAR(res.x(0), 1.5, 1e-10);
  EXPECT_NEAR(res.x(1), 2.5, 1e-10);
  EXPECT_NEAR(res.multipliers(0), 1.0, 1e-10);
}

TEST(DualActiveSet, DetectsInfeasibility)
{
  QpProblem qp;
  qp.hessian = MatrixXd::Identity(1, 1);
  qp.gradient = VectorXd::Zero(1);
  qp.constraints = (MatrixXd(2, 1) << 1, -1).finished();
  qp.lower = (VectorXd(2) << 1, 0).finished();  // x >= 1 and x <= 0
  EXPECT_EQ(solve_qp(qp).status, QpStatus::kInfeasible);
}

TEST(DualActiveSet, RejectsIndefiniteHessian)
{
  QpProblem qp;
  qp.hessian = (MatrixXd(2, 2) << 1, 0, 0, -1).finished();
  qp.gradient = VectorXd::Zero(2);
  qp.constraints.resize(0, 2);
  qp.lower.resize(0);
  EXPECT_EQ(solve_qp(qp).status, QpStatus::kNotConvex);
}

TEST(DualActiveSet, MatchesExhaustiveEnumeration)
{
  Rng rng(123);
  int solved = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 4;
    const int m = 3 + trial % 7;
    const auto qp = random_problem(rng, n, m);
    const auto oracle = brute_force(qp);
    const auto res = solve_qp(qp);
    if (!oracle) {
      EXPECT_EQ(res.status, QpStatus::kInfeasible) << "trial " << trial;
      continue;
    }
    ASSERT_EQ(res.status, QpStatus::kOptimal) << "trial " << trial;
    EXPECT_LT((res.x - *oracle).norm(), 1e-7) << "trial " << trial;
    // Dual feasibility and stationarity.
    EXPECT_GE(res.multipliers.minCoeff(), -1e-9);
    const VectorXd stat = qp.hessian * res.x + qp.gradient - qp.constraints.transpose() * res.multipliers;
    EXPECT_LT(stat.norm(), 1e-7);
    ++solved;
  }
  EXPECT_GT(solved, 100);
}

TEST(DualActiveSet, BoxConstrainedLargeProblem)
{
  // Separable problem with known clipped solution.
  const int n = 60;
  Rng rng(8);
  QpProblem qp;
  qp.hessian = MatrixXd::Zero(n, n);
  qp.gradient.resize(n);
  qp.constraints = MatrixXd::Zero(2 * n, n);
  qp.lower.resize(2 * n);
  VectorXd expected(n);
  for (int i = 0; i < n; ++i) {
    const double h = rng.uniform(0.5, 2.0);
    const double target = rng.uniform(-3, 3);
    qp.hessian(i, i) = h;
    qp.gradient(i) = -h * target;
    qp.constraints(i, i) = 1.0;
    qp.lower(i) = -1.0;
    qp.constraints(n + i, i) = -1.0;
    qp.lower(n + i) = -1.0;
    expected(i) = std::clamp(target, -1.0, 1.0);
  }
  const auto res = solve_qp(qp);
  ASSERT_EQ(res.status, QpStatus::kOptimal);
  EXPECT_LT((res.x - expected).cwiseAbs().maxCoeff(), 1e-10);
}

}  // namespace
}  // namespace tmpc::qp
