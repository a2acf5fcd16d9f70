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

#ifndef MPPI_PID_DYNAMICS_HPP_
#define MPPI_PID_DYNAMICS_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mppi_pid/mlp.hpp"
#include "mppi_pid/types.hpp"

namespace mppi_pid {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr int kMlpHiddenUnits = 50;
inline constexpr double kDefaultStepSize = 0.0667;
inline constexpr double kDefaultResidualSpeedThreshold = 0.20;

/// Identification parameters of the forklift model. Steering enters in
/// radians, so k_delta has units 1/(m rad).
struct PhysicalParams {
  double k_a = 0.0;
  double k_V = 0.0;
  double k_delta = 0.0;
  double k_r = 0.0;

  void Validate() const;
  bool operator==(const PhysicalParams&) const = default;
};

/// Network plus the per-dimension standard deviations used to normalize its
/// inputs (and to denormalize its outputs).
struct MlpParams {
  Mlp net;
  StateVector state_scale{1, 1, 1, 1, 1, 1, 1};
  InputVector input_scale{1, 1};

  void Validate() const;
};

using StateMask = std::array<double, kStateDim>;
inline constexpr StateMask kForkliftResidualMask = {0, 0, 0, 0, 1, 1, 1};

/// Physics model with a learned residual on masked dimensions, weighted by
/// a speed-dependent factor. An empty network means physics only.
struct ResidualDynamicsModel {
  PhysicalParams phys;
  MlpParams nn;
  StateMask mask = kForkliftResidualMask;
  double v_th = kDefaultResidualSpeedThreshold;
  double h = kDefaultStepSize;

  int ResidualDim() const;
  void Validate() const;
};

/// Direct next-state network: x_next = x + state_scale * net(x/sx, u/su).
struct StandardNnModel {
  MlpParams nn;
  double h = kDefaultStepSize;

  void Validate() const;
};

/// Continuous-time right-hand side of the forklift model, laid out like the
/// state: [vX, vY, c r, -s r, dvX, dvY, dr].
StateVector PhysDerivative(const State& x, const ControlInput& u,
                           const PhysicalParams& p);

/// x + h f(x, u). No heading normalization.
State EulerStep(const State& x, const ControlInput& u, const PhysicalParams& p,
                double h);

/// V^2 / (V^2 + v_th^2).
double ResidualWeight(const State& x, double v_th);

/// Rescales (s, c) onto the unit circle. Throws DegenerateHeadingError when
/// both are zero.
State NormalizeTrig(const State& x);

/// Writes the normalized (state, input) features for one sample.
void NormalizedFeatures(const MlpParams& nn, const State& x,
                        const ControlInput& u, std::span<double> out);

/// Network output in normalized units (one entry per masked dimension).
std::vector<double> MlpForward(const MlpParams& nn, const State& x,
                               const ControlInput& u);

/// Physics step plus weighted, masked residual, followed by trig
/// normalization.
State ResidualStep(const ResidualDynamicsModel& m, const State& x,
                   const ControlInput& u);

/// Reusable buffers for batched prediction.
struct StepWorkspace {
  std::vector<double> features;
  std::vector<double> outputs;
  MlpWorkspace mlp;
};

/// A one-step prediction model used by planners and evaluation code.
class PredictionModel {
 public:
  enum class Kind { kPhysical, kResidual, kStandardNn };

  PredictionModel() = default;
  explicit PredictionModel(ResidualDynamicsModel m);
  explicit PredictionModel(StandardNnModel m);

  static PredictionModel Physical(const PhysicalParams& p, double h);

  Kind kind() const;
  double h() const;
  std::string KindName() const;

  State Step(const State& x, const ControlInput& u) const;

  /// out[i] = Step(x[i], u[i]); bit-identical to the scalar call.
  void StepBatch(std::span<const State> x, std::span<const ControlInput> u,
                 std::span<State> out, StepWorkspace& ws) const;

  const ResidualDynamicsModel* residual() const {
    return std::get_if<ResidualDynamicsModel>(&model_);
  }
  const StandardNnModel* standard_nn() const {
    return std::get_if<StandardNnModel>(&model_);
  }

 private:
  std::variant<ResidualDynamicsModel, StandardNnModel> model_;
};

std::string ModelToJson(const PredictionModel& model);
PredictionModel ModelFromJson(const std::string& text);
void SaveModel(const PredictionModel& model, const std::filesystem::path& path);
PredictionModel LoadModel(const std::filesystem::path& path);

}  // namespace mppi_pid

#endif  // MPPI_PID_DYNAMICS_HPP_
