// Copyright 2026 The MPPI-PID Authors
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

#include "mppi_pid/cost.hpp"

#include <algorithm>

namespace mppi_pid {

double CostWeights::VRefAt(int step) const {
  if (v_ref_schedule.empty()) return v_ref;
  const int k = std::clamp(step, 0, static_cast<int>(v_ref_schedule.size()) - 1);
  return v_ref_schedule[k];
}

void CostWeights::Validate() const {
  if (w_V < 0 || w_path < 0 || w_align < 0 || w_du < 0 || w_goal < 0) {
    throw ConfigError("cost weights must be nonnegative");
  }
  if (!(eps_goal_pos > 0) || !(eps_goal_vel > 0)) {
    throw ConfigError("goal thresholds must be positive");
  }
}

double GoalPenalty(const State& x, const Vec2& goal, const CostWeights& cw) {
  const double speed = x.Speed();
  const double dist = (Vec2{x.X, x.Y} - goal).Norm();
  if (dist <= cw.eps_goal_pos && speed >= cw.eps_goal_vel) {
    const double excess = speed - cw.eps_goal_vel;
    return excess * excess;
  }
  return 0.0;
}

double StageCost(const State& x, const ControlInput& u,
                 const ControlInput& u_prev, const PathQuery& q,
                 const CostWeights& cw, const Vec2& goal, double v_ref) {
  const double speed = x.Speed();
  const double dv = speed - v_ref;
  const double dx = x.X - q.point.x;
  const double dy = x.Y - q.point.y;
  const double align = 1.0 - (x.c * q.tangent.x + x.s * q.tangent.y);
  const double da = u.a - u_prev.a;
  const double dd = u.delta - u_prev.delta;
  double cost = cw.w_V * dv * dv + cw.w_path * (dx * dx + dy * dy) +
                cw.w_align * align + cw.w_du * (da * da + dd * dd);
  if (cw.w_goal != 0.0) cost += cw.w_goal * GoalPenalty(x, goal, cw);
  // Rounding in the alignment term can dip a hair below zero.
  return std::max(cost, 0.0);
}

}  // namespace mppi_pid
