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

#ifndef TMPC__PREDICTION__PREDICTION_HPP_
#define TMPC__PREDICTION__PREDICTION_HPP_

#include "tmpc/common.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <vector>

namespace tmpc::prediction
{

using Mat4 = Eigen::Matrix4d;

struct ObstacleState
{
  int id{0};
  Vec2 position{Vec2::Zero()};
  Vec2 velocity{Vec2::Zero()};
  double radius{0.3};
  Mat4 covariance{Mat4::Zero()};  ///< over (px, py, vx, vy)
};

/// Position marginals of a constant-velocity Gaussian forecast, one entry per
/// horizon step k = 0..N.
struct GaussianPrediction
{
  int obstacle_id{0};
  double radius{0.0};
  std::vector<Vec2> means;
  std::vector<Mat2> covariances;

  // Propagation state at the last step, kept so the forecast can be grown.
  double dt{0.0};
  double q_accel{0.0};
  Vec2 velocity{Vec2::Zero()};
  Mat4 terminal_covariance{Mat4::Zero()};

  [[nodiscard]] std::size_t size() const { return means.size(); }
};

enum class ExtensionPolicy { kHoldCovariance, kGrow };

/// Constant-velocity transition over dt for (px, py, vx, vy).
inline Mat4 cv_transition(double dt)
{
  Mat4 f = Mat4::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

/// Continuous white-noise-acceleration process noise with intensity q_accel.
inline Mat4 white_acceleration_noise(double dt, double q_accel)
{
  Mat4 q = Mat4::Zero();
  const double pp = q_accel * dt * dt * dt / 3.0;
  const double pv = q_accel * dt * dt / 2.0;
  const double vv = q_accel * dt;
  q(0, 0) = q(1, 1) = pp;
  q(0, 2) = q(2, 0) = q(1, 3) = q(3, 1) = pv;
  q(2, 2) = q(3, 3) = vv;
  return q;
}

inline bool is_symmetric_psd(const Mat4 & m, double tol = 1e-12)
{
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Mat4> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol;
}

namespace detail
{
inline void propagate_steps(GaussianPrediction & pred, Mat4 cov, int steps)
{
  const Mat4 f = cv_transition(pred.dt);
  const Mat4 q = white_acceleration_noise(pred.dt, pred.q_accel);
  const Vec2 step = pred.velocity * pred.dt;
  for (int k = 0; k < steps; ++k) {
    cov = f * cov * f.transpose() + q;
    cov = 0.5 * (cov + cov.transpose());
    pred.means.push_back(pred.means.back() + step);
    pred.covariances.push_back(cov.topLeftCorner<2, 2>());
  }
  pred.terminal_covariance = cov;
}
}  // namespace detail

inline GaussianPrediction propagate_cv(const ObstacleState & obs, double q_accel, double dt, int steps)
{
  if (!(dt > 0.0) || steps < 1) {
    throw InvalidInput("propagation needs dt > 0 and at least one step");
  }
  if (!(q_accel >= 0.0)) {
    throw InvalidInput("process noise intensity must be non-negative");
  }
  if (!is_symmetric_psd(obs.covariance)) {
    throw InvalidInput("obstacle covariance must be symmetric positive semi-definite");
  }
  GaussianPrediction pred;
  pred.obstacle_id = obs.id;
  pred.radius = obs.radius;
  pred.dt = dt;
  pred.q_accel = q_accel;
  pred.velocity = obs.velocity;
  pred.means.reserve(static_cast<std::size_t>(steps) + 1);
  pred.covariances.reserve(static_cast<std::size_t>(steps) + 1);
  pred.means.push_back(obs.position);
  pred.covariances.push_back(obs.covariance.topLeftCorner<2, 2>());
  detail::propagate_steps(pred, obs.covariance, steps);
  return pred;
}

/// Extends a forecast to target_steps + 1 entries. Means continue at the last
/// inter-step displacement; covariances are frozen or keep propagating.
inline GaussianPrediction extend_prediction(
  const GaussianPrediction & pred, int target_steps, ExtensionPolicy policy)
{
  const int current_steps = static_cast<int>(pred.size()) - 1;
  if (target_steps < current_steps) {
    throw InvalidInput("extension target shorter than the forecast");
  }
  GaussianPrediction out = pred;
  const int extra = target_steps - current_steps;
  if (extra == 0) {
    return out;
  }
  if (policy == ExtensionPolicy::kGrow) {
    detail::propagate_steps(out, pred.terminal_covariance, extra);
    return out;
  }
  const Vec2 step = pred.size() >= 2 ? Vec2(pred.means.back() - pred.means[pred.size() - 2])
                                     : Vec2(pred.velocity * pred.dt);
  for (int k = 0; k < extra; ++k) {
    out.means.push_back(out.means.back() + step);
    out.covariances.push_back(pred.covariances.back());
  }
  return out;
}

}  // namespace tmpc::prediction

#endif  // TMPC__PREDICTION__PREDICTION_HPP_
