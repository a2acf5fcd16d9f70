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

#ifndef MPPI_PID_COST_HPP_
#define MPPI_PID_COST_HPP_

#include <vector>

#include "mppi_pid/path.hpp"
#include "mppi_pid/types.hpp"

namespace mppi_pid {

/// Path-following stage cost weights. Defaults are the experiment values.
struct CostWeights {
  double w_V = 50.0;
  double w_path = 500.0;
  double w_align = 10.0;
  double w_du = 0.05;
  double w_goal = 50000.0;
  double eps_goal_pos = 0.10;  // m
  double eps_goal_vel = 0.04;  // m/s
  double v_ref = 0.10;         // m/s, used when the schedule is empty
  // Optional per-step reference speed, indexed by the control step.
  std::vector<double> v_ref_schedule;

  double VRefAt(int step) const;
  void Validate() const;
};

/// Speed restriction penalty inside the goal region. Zero outside it, and
/// discontinuous on its boundary.
double GoalPenalty(const State& x, const Vec2& goal, const CostWeights& cw);

/// l_t = w_V (V - V_ref)^2 + w_path |p - p*|^2 + w_align (1 - [c s] tau*)
///       + w_du |u - u_prev|^2 + w_goal l_goal.
double StageCost(const State& x, const ControlInput& u,
                 const ControlInput& u_prev, const PathQuery& q,
                 const CostWeights& cw, const Vec2& goal, double v_ref);

inline double StageCost(const State& x, const ControlInput& u,
                        const ControlInput& u_prev, const PathQuery& q,
                        const CostWeights& cw, const Vec2& goal) {
  return StageCost(x, u, u_prev, q, cw, goal, cw.v_ref);
}

}  // namespace mppi_pid

#endif  // MPPI_PID_COST_HPP_
