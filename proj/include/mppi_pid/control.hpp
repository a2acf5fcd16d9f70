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

#ifndef MPPI_PID_CONTROL_HPP_
#define MPPI_PID_CONTROL_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mppi_pid/cost.hpp"
#include "mppi_pid/dynamics.hpp"
#include "mppi_pid/path.hpp"
#include "mppi_pid/types.hpp"

namespace mppi_pid {

// ---------------------------------------------------------------------------
// Input constraints

/// Box bounds on the input and on its one-step change.
struct InputConstraints {
  InputVector u_min{0.0, -65.0};
  InputVector u_max{100.0, 65.0};
  InputVector du_min{-32.0 * kDefaultStepSize, -100.0 * kDefaultStepSize};
  InputVector du_max{32.0 * kDefaultStepSize, 100.0 * kDefaultStepSize};

  /// Rate bounds given per second, converted to one-step bounds.
  static InputConstraints FromRates(const InputVector& u_min,
                                    const InputVector& u_max,
                                    const InputVector& rate_max, double h);

  void Validate() const;
  /// max(u_min, u_prev + du_min), componentwise.
  ControlInput Lower(const ControlInput& u_prev) const;
  /// min(u_max, u_prev + du_max), componentwise.
  ControlInput Upper(const ControlInput& u_prev) const;
  /// Exact membership in [Lower(u_prev), Upper(u_prev)].
  bool Contains(const ControlInput& u, const ControlInput& u_prev) const;
};

/// Euclidean projection onto the feasible set, computed as the box clamp.
/// Throws InfeasibleConstraintError when that set is empty.
ControlInput ProjectInput(const ControlInput& u, const ControlInput& u_prev,
                          const InputConstraints& c);

/// Sequential double clip: clip(u_prev + clip(u - u_prev, du), u bounds).
ControlInput ProjectInputSequential(const ControlInput& u,
                                    const ControlInput& u_prev,
                                    const InputConstraints& c);

/// Componentwise clamp to [Lower(u_prev), Upper(u_prev)].
ControlInput ClampToFeasibleBox(const ControlInput& u,
                                const ControlInput& u_prev,
                                const InputConstraints& c);

// ---------------------------------------------------------------------------
// PID law

inline constexpr int kNumPidErrors = 3;
inline constexpr int kNumGains = 9;

/// [KP, KI, KD] for speed->a, then lateral->delta, then angular->delta.
using PidGains = std::array<double, kNumGains>;
using PidErrorVector = std::array<double, kNumPidErrors>;

inline constexpr PidGains kDefaultInitialGains = {50.0, 0.20, 10.0, 100.0, 0.10,
                                                  5.0,  150.0, 0.10, 3.0};
inline constexpr PidGains kDefaultGainSigma = {10.0, 0.10, 5.0, 30.0, 0.05,
                                               2.0,  20.0, 0.05, 2.0};
inline constexpr InputVector kDefaultInputSigma = {8.0, 6.0};
inline constexpr InputVector kDefaultInputBias = {40.0, 0.0};

/// Input row driven by each error (0: accelerator, 1: steering).
inline constexpr std::array<int, kNumPidErrors> kErrorInputRow = {0, 1, 1};

struct PidState {
  PidErrorVector integral{0, 0, 0};
  PidErrorVector prev_error{0, 0, 0};
  bool has_prev = false;
  ControlInput u_prev;

  bool operator==(const PidState&) const = default;
};

/// Row i holds the coefficients of input i as a linear function of the gains.
using ErrorBasis = std::array<std::array<double, kNumGains>, kInputDim>;

struct PidStepResult {
  ControlInput u;      // projected
  ControlInput u_raw;  // u_bias + E theta, before projection
  PidState next;
  ErrorBasis basis{};
};

/// Maps path errors to PID errors. steering_sign multiplies the lateral and
/// angular errors so that positive gains steer back toward the path.
PidErrorVector ToPidErrors(const PidErrors& e, double steering_sign);

/// One PID step: rectangular integral including the current error, backward
/// difference derivative (zero on the first step), projection onto the
/// feasible input set.
PidStepResult PidStep(const PidGains& gains, const PidState& state,
                      const PidErrorVector& errors, const ControlInput& u_bias,
                      double h, const InputConstraints& c);

/// u_bias + E theta.
ControlInput ApplyBasis(const ErrorBasis& basis, const PidGains& gains,
                        const ControlInput& u_bias);

// ---------------------------------------------------------------------------
// Sampling optimizers

struct OptimizerConfig {
  int horizon = 60;
  int samples = 2048;
  int iterations = 3;
  double lambda = 1.0;
  InputVector sigma_u = kDefaultInputSigma;
  PidGains sigma_theta = kDefaultGainSigma;
  std::uint64_t seed = 0;
  int threads = 1;

  void Validate() const;
};

/// Perturbations, costs and weights of one optimizer iteration. Perturbations
/// are stored row-major, one row of `dim` entries per sample.
struct SampleBatch {
  int dim = 0;
  std::vector<double> perturbations;
  std::vector<double> costs;
  std::vector<double> weights;             // exp(-(J - min J) / lambda)
  std::vector<double> normalized_weights;  // sum to one
};

/// Shared weighting kernel: returns sum_i w_i eps_i / sum_i w_i with the sums
/// taken in ascending sample order, and fills batch.weights.
std::vector<double> WeightsAndUpdate(SampleBatch& batch, double lambda);

/// Sample ESS, (sum w)^2 / sum w^2.
double EffectiveSampleSize(std::span<const double> weights);

/// Seed for the normal stream of one sample in one iteration of one step.
std::uint64_t SampleSeed(std::uint64_t seed, std::uint64_t control_step,
                         std::uint64_t iteration, std::uint64_t sample);

/// Everything a rollout needs besides the decision variables.
struct PlanningContext {
  const PredictionModel* model = nullptr;
  const ReferencePath* path = nullptr;
  const NearestPointIndex* index = nullptr;
  CostWeights cost;
  InputConstraints constraints;
  ControlInput u_bias = ControlInput::FromArray(kDefaultInputBias);
  double steering_sign = -1.0;
};

struct PlanStats {
  std::vector<double> ess;       // per iteration
  std::vector<double> min_cost;  // per iteration
};

/// Conventional MPPI over the input sequence.
class MppiPlanner {
 public:
  MppiPlanner(PlanningContext ctx, OptimizerConfig cfg);

  /// Fills the nominal sequence with u.
  void Reset(const ControlInput& u);

  /// Runs the iterations from x0 given the last applied input, returns the
  /// first input and shifts the nominal sequence for the next call.
  ControlInput Plan(const State& x0, const ControlInput& u_prev,
                    int control_step, PlanStats* stats = nullptr);

  const std::vector<ControlInput>& nominal() const { return nominal_; }
  void set_nominal(std::vector<ControlInput> nominal);
  const SampleBatch& last_batch() const { return batch_; }

 private:
  void Rollouts(const State& x0, const ControlInput& u_prev, int control_step,
                int iteration);

  PlanningContext ctx_;
  OptimizerConfig cfg_;
  std::vector<ControlInput> nominal_;
  SampleBatch batch_;
};

struct MppiPidResult {
  ControlInput u;
  PidState next_state;
  PidGains gains{};
};

/// MPPI over the nine PID gains, which stay fixed across the horizon.
class MppiPidPlanner {
 public:
  MppiPidPlanner(PlanningContext ctx, OptimizerConfig cfg,
                 PidGains initial_gains = kDefaultInitialGains);

  /// live is the controller's PID state (its u_prev is the applied input).
  MppiPidResult Plan(const State& x0, const PidState& live, int control_step,
                     PlanStats* stats = nullptr);

  const PidGains& gains() const { return gains_; }
  void set_gains(const PidGains& g) { gains_ = g; }
  const SampleBatch& last_batch() const { return batch_; }

 private:
  void Rollouts(const State& x0, const PidState& live, int control_step,
                int iteration);

  PlanningContext ctx_;
  OptimizerConfig cfg_;
  PidGains gains_;
  SampleBatch batch_;
};

/// Cost of one input sequence from x0 (sum of stage costs, no terminal term).
double RolloutCost(const PlanningContext& ctx, const State& x0,
                   const ControlInput& u_prev,
                   std::span<const ControlInput> inputs, int control_step);

}  // namespace mppi_pid

#endif  // MPPI_PID_CONTROL_HPP_
