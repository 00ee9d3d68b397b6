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

#ifndef TMPC__GEOMETRY__REFERENCE_PATH_HPP_
#define TMPC__GEOMETRY__REFERENCE_PATH_HPP_

#include "tmpc/common.hpp"
#include "tmpc/geometry/cubic_spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace tmpc::geometry
{

struct Waypoint
{
  double x{0.0};
  double y{0.0};
};

struct PathFrame
{
  Vec2 position{Vec2::Zero()};
  Vec2 tangent{Vec2::UnitX()};
  Vec2 normal{Vec2::UnitY()};
  double curvature{0.0};
  double s{0.0};
  bool clamped{false};
};

/// Raw spline derivatives at s, needed for exact Jacobians of path-relative errors.
struct PathDerivatives
{
  Vec2 position;
  Vec2 d1;
  Vec2 d2;
};

struct ContouringErrors
{
  double contouring{0.0};  ///< normal component, positive to the left of the path
  double lag{0.0};         ///< tangential component, positive ahead of the path point
};

struct ProjectionResult
{
  double s{0.0};
  bool degraded{false};
  int iterations{0};
};

namespace detail
{
// 5-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 5> kGaussNodes = {
  -0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights = {
  0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
  0.2369268850561891};
}  // namespace detail

/// Cubic-spline centerline x(s), y(s) with s approximately arc length.
/// Immutable after construction.
class ReferencePath
{
public:
  ReferencePath() = default;

  /// Interpolating fit through waypoints with natural end conditions, followed
  /// by one arc-length reparameterization pass.
  explicit ReferencePath(std::span<const Waypoint> waypoints)
  {
    if (waypoints.size() < 2) {
      throw InvalidInput("reference path needs at least two waypoints");
    }
    std::vector<double> xs, ys;
    xs.reserve(waypoints.size());
    ys.reserve(waypoints.size());
    for (const auto & w : waypoints) {
      if (!std::isfinite(w.x) || !std::isfinite(w.y)) {
        throw InvalidInput("waypoint coordinates must be finite");
      }
      xs.push_back(w.x);
      ys.push_back(w.y);
    }
    std::vector<double> knots(waypoints.size(), 0.0);
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      const double chord = std::hypot(xs[i] - xs[i - 1], ys[i] - ys[i - 1]);
      if (!(chord > 1e-9)) {
        throw InvalidInput("consecutive waypoints coincide");
      }
      knots[i] = knots[i - 1] + chord;
    }
    x_ = CubicSpline(knots, xs);
    y_ = CubicSpline(knots, ys);

    // Refit on arc length through the waypoints plus kSubdivisions - 1 points
    // of the chord fit per segment.
    std::vector<double> arc{0.0}, dense_x{xs[0]}, dense_y{ys[0]};
    waypoint_knots_.assign(1, 0.0);
    for (std::size_t i = 1; i < knots.size(); ++i) {
      for (int j = 1; j <= kSubdivisions; ++j) {
        const double a = knots[i - 1] + (knots[i] - knots[i - 1]) * (j - 1) / kSubdivisions;
        const double b = knots[i - 1] + (knots[i] - knots[i - 1]) * j / kSubdivisions;
        arc.push_back(arc.back() + segment_length(a, b));
        dense_x.push_back(j == kSubdivisions ? xs[i] : x_(b));
        dense_y.push_back(j == kSubdivisions ? ys[i] : y_(b));
      }
      waypoint_knots_.push_back(arc.back());
    }
    x_ = CubicSpline(arc, dense_x);
    y_ = CubicSpline(arc, dense_y);
  }

  static constexpr int kSubdivisions = 8;

  [[nodiscard]] double length() const { return x_.back(); }
  [[nodiscard]] const std::vector<double> & knots() const { return x_.knots(); }
  /// Arc-length positions of the input waypoints.
  [[nodiscard]] const std::vector<double> & waypoint_knots() const { return waypoint_knots_; }

  /// Quadrature length of the curve between parameters a and b on the current fit.
  [[nodiscard]] double segment_length(double a, double b) const
  {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t k = 0; k < detail::kGaussNodes.size(); ++k) {
      const double t = mid + half * detail::kGaussNodes[k];
      sum += detail::kGaussWeights[k] * std::hypot(x_.eval(t)[1], y_.eval(t)[1]);
    }
    return half * sum;
  }

  [[nodiscard]] PathDerivatives derivatives(double s) const
  {
    const auto x = x_.eval(s);
    const auto y = y_.eval(s);
    return {{x[0], y[0]}, {x[1], y[1]}, {x[2], y[2]}};
  }

  [[nodiscard]] Vec2 position(double s) const
  {
    s = std::clamp(s, 0.0, length());
    return {x_(s), y_(s)};
  }

  [[nodiscard]] PathFrame frame(double s) const
  {
    if (!std::isfinite(s)) {
      throw InvalidInput("path parameter must be finite");
    }
    PathFrame f;
    const double clamped = std::clamp(s, 0.0, length());
    f.clamped = clamped != s;
    f.s = clamped;
    const PathDerivatives d = derivatives(clamped);
    const double speed = d.d1.norm();
    f.position = d.position;
    f.tangent = d.d1 / speed;
    f.normal = left_normal(f.tangent);
    f.curvature = (d.d1.x() * d.d2.y() - d.d1.y() * d.d2.x()) / (speed * speed * speed);
    return f;
  }

  /// Path heading at s (radians).
  [[nodiscard]] double heading(double s) const
  {
    const PathDerivatives d = derivatives(std::clamp(s, 0.0, length()));
    return std::atan2(d.d1.y(), d.d1.x());
  }

private:
  CubicSpline x_;
  CubicSpline y_;
  std::vector<double> waypoint_knots_;
};

inline ReferencePath fit_reference_path(std::span<const Waypoint> waypoints)
{
  return ReferencePath(waypoints);
}

inline PathFrame eval_path(const ReferencePath & path, double s) { return path.frame(s); }

/// Local closest-point projection by Newton iteration on d/ds |c(s) - p|^2 / 2,
/// with a grid-search reseed when Newton fails to converge.
inline ProjectionResult project_to_path(const ReferencePath & path, const Vec2 & point, double s_guess)
{
  if (!all_finite(point) || !std::isfinite(s_guess)) {
    throw InvalidInput("projection inputs must be finite");
  }
  const double length = path.length();
  constexpr double kTol = 1e-6;
  constexpr int kMaxIter = 50;

  auto newton = [&](double s, int & iters) -> std::pair<double, bool> {
      s = std::clamp(s, 0.0, length);
      for (int it = 0; it < kMaxIter; ++it) {
        ++iters;
        const PathDerivatives d = path.derivatives(s);
        const Vec2 diff = d.position - point;
        const double grad = diff.dot(d.d1);
        const double hess = d.d1.squaredNorm() + diff.dot(d.d2);
        double next;
        if (hess > 1e-12) {
          next = s - grad / hess;
        } else {
          // Concave or flat: step downhill at unit rate.
          next = s - std::copysign(std::min(1.0, std::abs(grad)), grad);
        }
        next = std::clamp(next, 0.0, length);
        if (std::abs(next - s) < kTol) {
          s = next;
          // Converged to an endpoint or an interior stationary point that is a minimum.
          const PathDerivatives e = path.derivatives(s);
          const Vec2 de = e.position - point;
          const bool interior = s > 0.0 && s < length;
          const bool is_min = !interior || e.d1.squaredNorm() + de.dot(e.d2) > 0.0;
          return {s, is_min};
        }
        s = next;
      }
      return {s, false};
    };

  ProjectionResult result;
  auto [s, ok] = newton(s_guess, result.iterations);
  if (ok) {
    result.s = s;
    return result;
  }

  constexpr int kGrid = 200;
  double best_s = 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double si = length * static_cast<double>(i) / kGrid;
    const double di = (path.position(si) - point).squaredNorm();
    if (di < best_d) {
      best_d = di;
      best_s = si;
    }
  }
  auto [s2, ok2] = newton(best_s, result.iterations);
  if (ok2) {
    result.s = s2;
    return result;
  }
  result.s = best_s;
  result.degraded = true;
  return result;
}

inline ContouringErrors contouring_errors(const ReferencePath & path, const Vec2 & position, double s)
{
  const PathFrame f = path.frame(s);
  const Vec2 diff = position - f.position;
  return {diff.dot(f.normal), diff.dot(f.tangent)};
}

/// Contouring/lag errors together with their exact partial derivatives with
/// respect to (x, y, s). Used by the optimizers.
struct ContouringJacobian
{
  ContouringErrors errors;
  Eigen::Vector3d d_contouring;
  Eigen::Vector3d d_lag;
};

inline ContouringJacobian contouring_errors_with_jacobian(
  const ReferencePath & path, const Vec2 & position, double s)
{
  const bool inside = s >= 0.0 && s <= path.length();
  const double sc = std::clamp(s, 0.0, path.length());
  const PathDerivatives d = path.derivatives(sc);
  const double speed = d.d1.norm();
  const Vec2 t = d.d1 / speed;
  const Vec2 n = left_normal(t);
  const Vec2 dt = (d.d2 - t * t.dot(d.d2)) / speed;
  const Vec2 dn = left_normal(dt);
  const Vec2 diff = position - d.position;

  ContouringJacobian j;
  j.errors = {diff.dot(n), diff.dot(t)};
  j.d_contouring << n.x(), n.y(), inside ? dn.dot(diff) - n.dot(d.d1) : 0.0;
  j.d_lag << t.x(), t.y(), inside ? dt.dot(diff) - t.dot(d.d1) : 0.0;
  return j;
}

}  // namespace tmpc::geometry

#endif  // TMPC__GEOMETRY__REFERENCE_PATH_HPP_
