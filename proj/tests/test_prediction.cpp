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

#include "tmpc/prediction/prediction.hpp"
#include "tmpc/random.hpp"

#include <Eigen/Cholesky>
#include <gtest/gtest.h>

#include <cmath>

namespace tmpc::prediction
{
namespace
{

ObstacleState walker(Vec2 p, Vec2 v)
{
  ObstacleState o;
  o.id = 1;
  o.position = p;
  o.velocity = v;
  return o;
}

TEST(PropagateCv, NoiselessConstantVelocity)
{
  const auto pred = propagate_cv(walker({0, 0}, {1, 0}), 0.0, 0.2, 10);
  ASSERT_EQ(pred.size(), 11u);
  EXPECT_NEAR(pred.means[10].x(), 2.0, 1e-12);
  EXPECT_NEAR(pred.means[10].y(), 0.0, 1e-12);
  EXPECT_NEAR(pred.covariances[10].norm(), 0.0, 1e-15);
}

TEST(PropagateCv, StationaryStaysPut)
{
  const auto pred = propagate_cv(walker({3, -1}, {0, 0}), 0.0, 0.2, 20);
  for (const auto & m : pred.means) {
    EXPECT_EQ(m, Vec2(3, -1));
  }
}

TEST(PropagateCv, VarianceMatchesClosedFormAndMonteCarlo)
{
  constexpr double q = 0.5;
  constexpr double dt = 0.2;
  constexpr int steps = 20;
  const auto pred = propagate_cv(walker({0, 0}, {1, 0}), q, dt, steps);
  const double t = steps * dt;
  // Integrated white acceleration: Var[p(t)] = q t^3 / 3.
  const double closed = q * t * t * t / 3.0;
  EXPECT_NEAR(pred.covariances[steps](0, 0), closed, 1e-12);
  EXPECT_NEAR(pred.covariances[steps](1, 1), closed, 1e-12);

  // Euler-Maruyama on the continuous model, one axis.
  Rng rng(2024);
  constexpr int kSamples = 100000;
  constexpr int kSub = 10;
  const double h = dt / kSub;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    double p = 0.0, v = 0.0;
    for (int k = 0; k < steps * kSub; ++k) {
      const double dw = std::sqrt(q * h) * rng.normal();
      p += v * h + 0.5 * h * dw;
      v += dw;
    }
    sum += p;
    sum2 += p * p;
  }
  const double mean = sum / kSamples;
  const double var = sum2 / kSamples - mean * mean;
  EXPECT_NEAR(pred.covariances[steps](0, 0), var, 0.03 * var);
}

TEST(PropagateCv, RejectsBadInputs)
{
  auto o = walker({0, 0}, {1, 0});
  EXPECT_THROW(propagate_cv(o, 0.1, 0.0, 10), InvalidInput);
  EXPECT_THROW(propagate_cv(o, 0.1, 0.2, 0), InvalidInput);
  o.covariance(0, 0) = -1.0;
  EXPECT_THROW(propagate_cv(o, 0.1, 0.2, 10), InvalidInput);
  o.covariance.setZero();
  o.covariance(0, 1) = 0.5;
  EXPECT_THROW(propagate_cv(o, 0.1, 0.2, 10), InvalidInput);
}

TEST(ExtendPrediction, ZeroExtensionIsIdentity)
{
  const auto pred = propagate_cv(walker({0, 0}, {1, 0.5}), 0.3, 0.2, 20);
  const auto same = extend_prediction(pred, 20, ExtensionPolicy::kGrow);
  ASSERT_EQ(same.size(), pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    EXPECT_EQ(same.means[k], pred.means[k]);
    EXPECT_EQ(same.covariances[k], pred.covariances[k]);
  }
}

TEST(ExtendPrediction, HoldFreezesCovariance)
{
  const auto pred = propagate_cv(walker({0, 0}, {1, 0.5}), 0.3, 0.2, 20);
  const auto held = extend_prediction(pred, 35, ExtensionPolicy::kHoldCovariance);
  ASSERT_EQ(held.size(), 36u);
  for (std::size_t k = 21; k < held.size(); ++k) {
    EXPECT_EQ(held.covariances[k], pred.covariances[20]);
    EXPECT_NEAR((held.means[k] - held.means[k - 1] - Vec2(0.2, 0.1)).norm(), 0.0, 1e-12);
  }
}

TEST(ExtendPrediction, GrowMatchesDirectPropagation)
{
  const auto o = walker({1, 2}, {1, -0.3});
  const auto grown = extend_prediction(propagate_cv(o, 0.5, 0.2, 20), 35, ExtensionPolicy::kGrow);
  const auto direct = propagate_cv(o, 0.5, 0.2, 35);
  ASSERT_EQ(grown.size(), direct.size());
  for (std::size_t k = 0; k < direct.size(); ++k) {
    EXPECT_LT((grown.means[k] - direct.means[k]).norm(), 1e-9);
    EXPECT_LT((grown.covariances[k] - direct.covariances[k]).norm(), 1e-9);
  }
}

TEST(ExtendPrediction, RejectsShorterTarget)
{
  const auto pred = propagate_cv(walker({0, 0}, {1, 0}), 0.3, 0.2, 20);
  EXPECT_THROW(extend_prediction(pred, 10, ExtensionPolicy::kGrow), InvalidInput);
}

TEST(PredictionProperties, LinearInMeanAndCovarianceIndependent)
{
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec2 p(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const Vec2 v(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec2 delta(rng.uniform(-3, 3), rng.uniform(-3, 3));
    ObstacleState a = walker(p, v);
    a.covariance = Mat4::Identity() * rng.uniform(0.0, 0.2);
    ObstacleState b = a;
    b.position += delta;
    const auto pa = propagate_cv(a, 0.3, 0.2, 35);
    const auto pb = propagate_cv(b, 0.3, 0.2, 35);
    for (std::size_t k = 0; k < pa.size(); ++k) {
      EXPECT_LT((pb.means[k] - pa.means[k] - delta).norm(), 1e-9);
      EXPECT_EQ(pb.covariances[k], pa.covariances[k]);
    }
  }
}

TEST(PredictionProperties, PsdAndTraceNonDecreasing)
{
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ObstacleState o = walker({0, 0}, {rng.uniform(-2, 2), rng.uniform(-2, 2)});
    // Position and velocity uncertainty uncorrelated at the start, as for a
    // fresh track; a negative cross term could legitimately shrink the spread.
    Eigen::Matrix4d l = Eigen::Matrix4d::Zero();
    for (int blk = 0; blk < 4; blk += 2) {
      l(blk, blk) = rng.uniform(-0.3, 0.3);
      l(blk + 1, blk) = rng.uniform(-0.3, 0.3);
      l(blk + 1, blk + 1) = rng.uniform(-0.3, 0.3);
    }
    o.covariance = l * l.transpose();
    const auto pred = propagate_cv(o, rng.uniform(0.05, 1.0), 0.2, 35);
    for (std::size_t k = 1; k < pred.size(); ++k) {
      Eigen::LLT<Mat2> llt(pred.covariances[k]);
      EXPECT_EQ(llt.info(), Eigen::Success);
      EXPECT_GE(pred.covariances[k].trace(), pred.covariances[k - 1].trace() - 1e-12);
    }
  }
}

}  // namespace
}  // namespace tmpc::prediction
