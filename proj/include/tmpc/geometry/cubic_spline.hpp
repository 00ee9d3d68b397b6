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

#ifndef TMPC__GEOMETRY__CUBIC_SPLINE_HPP_
#define TMPC__GEOMETRY__CUBIC_SPLINE_HPP_

#include "tmpc/common.hpp"

#include <algorithm>
#include <array>
#include <span>
#include <vector>

namespace tmpc::geometry
{

/// Natural cubic spline through (knot, value) pairs. On segment i the value is
/// a + b*h + c*h^2 + d*h^3 with h = t - knot[i].
class CubicSpline
{
public:
  struct Segment
  {
    double a, b, c, d;
  };

  CubicSpline() = default;

  CubicSpline(std::span<const double> knots, std::span<const double> values)
  {
    const std::size_t n = knots.size();
    if (n < 2 || values.size() != n) {
      throw InvalidInput("cubic spline needs at least two knots and matching values");
    }
    for (std::size_t i = 1; i < n; ++i) {
      if (!(knots[i] > knots[i - 1])) {
        throw InvalidInput("cubic spline knots must be strictly increasing");
      }
    }
    knots_.assign(knots.begin(), knots.end());

    // Second derivatives M_i from the tridiagonal system, M_0 = M_{n-1} = 0.
    std::vector<double> second(n, 0.0);
    if (n > 2) {
      const std::size_t m = n - 2;
      std::vector<double> diag(m), upper(m), rhs(m);
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t i = j + 1;
        const double h0 = knots[i] - knots[i - 1];
        const double h1 = knots[i + 1] - knots[i];
        diag[j] = 2.0 * (h0 + h1);
        upper[j] = h1;
        rhs[j] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
      }
      // Thomas algorithm; lower diagonal entry for row j is h0 of row j, equal to upper[j-1].
      for (std::size_t j = 1; j < m; ++j) {
        const double w = upper[j - 1] / diag[j - 1];
        diag[j] -= w * upper[j - 1];
        rhs[j] -= w * rhs[j - 1];
      }
      second[m] = rhs[m - 1] / diag[m - 1];
      for (std::size_t j = m - 1; j-- > 0;) {
        second[j + 1] = (rhs[j] - upper[j] * second[j + 2]) / diag[j];
      }
    }

    segments_.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double h = knots[i + 1] - knots[i];
      Segment & seg = segments_[i];
      seg.a = values[i];
      seg.b = (values[i + 1] - values[i]) / h - h * (2.0 * second[i] + second[i + 1]) / 6.0;
      seg.c = second[i] / 2.0;
      seg.d = (second[i + 1] - second[i]) / (6.0 * h);
    }
  }

  [[nodiscard]] double front() const { return knots_.front(); }
  [[nodiscard]] double back() const { return knots_.back(); }
  [[nodiscard]] const std::vector<double> & knots() const { return knots_; }
  [[nodiscard]] const std::vector<Segment> & segments() const { return segments_; }

  [[nodiscard]] std::size_t segment_index(double t) const
  {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    const auto idx = static_cast<std::size_t>(std::distance(knots_.begin(), it));
    return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, segments_.size() - 1);
  }

  /// Value and first two derivatives at t (t is extrapolated by the end segments).
  [[nodiscard]] std::array<double, 3> eval(double t) const
  {
    const std::size_t i = segment_index(t);
    const Segment & s = segments_[i];
    const double h = t - knots_[i];
    return {
      s.a + h * (s.b + h * (s.c + h * s.d)), s.b + h * (2.0 * s.c + 3.0 * h * s.d),
      2.0 * s.c + 6.0 * h * s.d};
  }

  [[nodiscard]] double operator()(double t) const { return eval(t)[0]; }

private:
  std::vector<double> knots_;
  std::vector<Segment> segments_;
};

}  // namespace tmpc::geometry

#endif  // TMPC__GEOMETRY__CUBIC_SPLINE_HPP_
