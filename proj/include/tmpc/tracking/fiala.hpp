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

#ifndef TMPC__TRACKING__FIALA_HPP_
#define TMPC__TRACKING__FIALA_HPP_

#include "tmpc/common.hpp"

#include <cmath>

namespace tmpc::tracking
{

struct FialaTireParams
{
  double cornering_stiffness{60000.0};  ///< N/rad
  double mu{0.9};
  double fz{8000.0};  ///< vertical load on the axle, N

  void validate() const
  {
    if (!(cornering_stiffness > 0.0 && mu > 0.0 && fz > 0.0)) {
      throw InvalidInput("tire parameters must be positive");
    }
  }

  /// |tan(alpha)| at which the lateral force saturates.
  [[nodiscard]] double saturation_tan() const { return 3.0 * mu * fz / cornering_stiffness; }
};

/// Brush-model lateral force with the cubic Fiala law, saturating at mu Fz.
inline double fiala_lateral_force(double alpha, const FialaTireParams & p)
{
  const double ta = std::tan(alpha);
  const double mfz = p.mu * p.fz;
  if (std::abs(ta) >= p.saturation_tan()) {
    return alpha > 0.0 ? -mfz : (alpha < 0.0 ? mfz : 0.0);
  }
  const double c = p.cornering_stiffness * ta;
  return -c * (1.0 - std::abs(c) / (3.0 * mfz) + c * c / (27.0 * mfz * mfz));
}

}  // namespace tmpc::tracking

#endif  // TMPC__TRACKING__FIALA_HPP_
