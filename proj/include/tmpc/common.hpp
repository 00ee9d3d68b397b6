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

#ifndef TMPC__COMMON_HPP_
#define TMPC__COMMON_HPP_

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmpc
{

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Positions = std::vector<Vec2>;

/// Raised when a caller violates an operation's precondition.
class InvalidInput : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when geometry degenerates (coincident points, zero-length directions).
class DegenerateGeometry : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double angle)
{
  double wrapped = std::remainder(angle, 2.0 * kPi);
  if (wrapped <= -kPi) {
    wrapped += 2.0 * kPi;
  }
  return wrapped;
}

inline Vec2 heading_vector(double heading) { return {std::cos(heading), std::sin(heading)}; }

/// Left-hand normal of a direction vector.
inline Vec2 left_normal(const Vec2 & dir) { return {-dir.y(), dir.x()}; }

inline bool all_finite(const Vec2 & v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

/// Splitmix64 finalizer, used to derive independent stream seeds from (seed, index) pairs.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index)
{
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace tmpc

#endif  // TMPC__COMMON_HPP_
