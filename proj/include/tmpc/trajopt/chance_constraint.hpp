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

#ifndef TMPC__TRAJOPT__CHANCE_CONSTRAINT_HPP_
#define TMPC__TRAJOPT__CHANCE_CONSTRAINT_HPP_

#include "tmpc/common.hpp"

#include <cmath>
#include <vector>

namespace tmpc::trajopt
{

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal quantile: Acklam's rational approximation polished by two
/// Newton steps on the erfc-based CDF.
inline double normal_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidInput("quantile probability must lie in (0, 1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
    -2.759285104469687e+02, 1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
    -1.556989798598866e+02, 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
    -2.400758277161838e+00, -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
    2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int i = 0; i < 2; ++i) {
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
    x -= (normal_cdf(x) - p) / pdf;
  }
  return x;
}

/// Half-plane a'p >= b that bounds the collision probability with a Gaussian
/// obstacle by eps, linearized about p_hat.
struct HalfPlane
{
  Vec2 normal{Vec2::UnitX()};
  double offset{0.0};

  [[nodiscard]] double margin(const Vec2 & p) const { return normal.dot(p) - offset; }
};

inline double risk_quantile(double eps)
{
  if (!(eps > 0.0 && eps < 0.5)) {
    throw InvalidInput("risk must lie in (0, 0.5)");
  }
  return normal_quantile(1.0 - eps);
}

inline HalfPlane linearize_chance_constraint(
  const Vec2 & p_hat, const Vec2 & mean, const Mat2 & cov, double radius, double eps)
{
  const Vec2 diff = p_hat - mean;
  const double dist = diff.norm();
  if (!(dist > 0.0)) {
    throw DegenerateGeometry("linearization point coincides with the obstacle mean");
  }
  HalfPlane h;
  h.normal = diff / dist;
  const double spread = std::sqrt(std::max(0.0, h.normal.dot(cov * h.normal)));
  h.offset = h.normal.dot(mean) + radius + risk_quantile(eps) * spread;
  return h;
}

/// Nonlinear chance-constraint function g(p) = |p - mu| - r - gamma sqrt(a'Sigma a)
/// with a = (p - mu)/|p - mu|, and its exact gradient. g >= 0 is the safe set.
struct ChanceValue
{
  double value{0.0};
  Vec2 gradient{Vec2::Zero()};
  HalfPlane plane;
};

inline ChanceValue chance_constraint_value(
  const Vec2 & p, const Vec2 & mean, const Mat2 & cov, double radius, double gamma)
{
  ChanceValue out;
  Vec2 diff = p - mean;
  double dist = diff.norm();
  if (dist < 1e-9) {
    diff = Vec2(1e-9, 0.0);
    dist = 1e-9;
  }
  const Vec2 a = diff / dist;
  const Vec2 sa = cov * a;
  const double spread2 = a.dot(sa);
  const double spread = std::sqrt(std::max(0.0, spread2));
  out.value = dist - radius - gamma * spread;
  out.gradient = a;
  if (spread > 1e-12) {
    const Vec2 proj = sa - a * spread2;  // (I - aa') Sigma a
    out.gradient -= gamma * proj / (spread * dist);
  }
  out.plane.normal = a;
  out.plane.offset = a.dot(mean) + radius + gamma * spread;
  return out;
}

enum class RiskAllocation { kUniform, kPerConstraint };

/// Splits a joint collision risk over N steps and n_obs obstacles.
inline std::vector<double> allocate_risk(
  double eps_joint, int steps, int n_obstacles, RiskAllocation mode)
{
  if (!(eps_joint > 0.0 && eps_joint < 0.5)) {
    throw InvalidInput("joint risk must lie in (0, 0.5)");
  }
  if (n_obstacles <= 0 || steps <= 0) {
    return {};
  }
  const auto count = static_cast<std::size_t>(steps) * static_cast<std::size_t>(n_obstacles);
  const double each = mode == RiskAllocation::kUniform ? eps_joint / static_cast<double>(count)
                                                       : eps_joint;
  return std::vector<double>(count, each);
}

}  // namespace tmpc::trajopt

#endif  // TMPC__TRAJOPT__CHANCE_CONSTRAINT_HPP_
