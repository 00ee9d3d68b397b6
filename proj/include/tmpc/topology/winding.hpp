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

#ifndef TMPC__TOPOLOGY__WINDING_HPP_
#define TMPC__TOPOLOGY__WINDING_HPP_

#include "tmpc/common.hpp"
#include "tmpc/prediction/prediction.hpp"

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tmpc::topology
{

enum class PassingLabel { kLeft, kRight, kNonPassing };

inline const char * to_string(PassingLabel label)
{
  switch (label) {
    case PassingLabel::kLeft:
      return "L";
    case PassingLabel::kRight:
      return "R";
    case PassingLabel::kNonPassing:
      return "N";
  }
  return "?";
}

struct TopologySignature
{
  std::map<int, PassingLabel> labels;
  std::map<int, double> winding;

  [[nodiscard]] bool empty() const { return labels.empty(); }

  /// Compact form such as "1:L,3:N", ordered by obstacle id.
  [[nodiscard]] std::string str() const
  {
    std::string out;
    for (const auto & [id, label] : labels) {
      if (!out.empty()) {
        out += ',';
      }
      out += std::to_string(id) + ":" + to_string(label);
    }
    return out;
  }

  friend bool operator==(const TopologySignature & a, const TopologySignature & b)
  {
    return a.labels == b.labels;
  }
};

/// Accumulated relative rotation, in revolutions, of the bearing from the
/// obstacle to the ego vehicle. Each per-step increment is wrapped to (-pi, pi].
/// Positive values mean clockwise rotation of the bearing, i.e. the ego passes
/// the obstacle on the obstacle's left as seen along the ego's direction of
/// travel (the obstacle ends on the ego's right).
inline double winding_number(std::span<const Vec2> ego, std::span<const Vec2> obstacle)
{
  if (ego.size() != obstacle.size() || ego.size() < 2) {
    throw InvalidInput("winding number needs equal-length trajectories with at least two samples");
  }
  double previous = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < ego.size(); ++k) {
    const Vec2 rel = ego[k] - obstacle[k];
    if (rel.x() == 0.0 && rel.y() == 0.0) {
      throw DegenerateGeometry("ego and obstacle coincide at step " + std::to_string(k));
    }
    const double angle = std::atan2(rel.y(), rel.x());
    if (k > 0) {
      total += wrap_angle(angle - previous);
    }
    previous = angle;
  }
  return -total / (2.0 * kPi);
}

inline PassingLabel label_from_winding(double winding, double threshold)
{
  if (winding >= threshold) {
    return PassingLabel::kLeft;
  }
  if (winding <= -threshold) {
    return PassingLabel::kRight;
  }
  return PassingLabel::kNonPassing;
}

/// Labels each predicted obstacle by the winding of the ego trajectory around
/// its predicted mean. Predictions longer than the ego trajectory are truncated.
inline TopologySignature passing_signature(
  std::span<const Vec2> ego, std::span<const prediction::GaussianPrediction> predictions,
  double threshold)
{
  TopologySignature sig;
  for (const auto & pred : predictions) {
    if (pred.means.size() < ego.size()) {
      throw InvalidInput("prediction shorter than the ego trajectory");
    }
    const double w =
      winding_number(ego, std::span<const Vec2>(pred.means.data(), ego.size()));
    sig.winding[pred.obstacle_id] = w;
    sig.labels[pred.obstacle_id] = label_from_winding(w, threshold);
  }
  return sig;
}

inline bool equivalent(const TopologySignature & a, const TopologySignature & b)
{
  if (a.labels.size() != b.labels.size()) {
    throw InvalidInput("signatures cover different obstacle sets");
  }
  auto ia = a.labels.begin();
  auto ib = b.labels.begin();
  bool same = true;
  for (; ia != a.labels.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      throw InvalidInput("signatures cover different obstacle sets");
    }
    same = same && ia->second == ib->second;
  }
  return same;
}

}  // namespace tmpc::topology

#endif  // TMPC__TOPOLOGY__WINDING_HPP_
