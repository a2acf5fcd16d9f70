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

#ifndef MPPI_PID_LEARNING_HPP_
#define MPPI_PID_LEARNING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mppi_pid/data.hpp"
#include "mppi_pid/dynamics.hpp"

namespace mppi_pid {

struct Transition {
  State x;
  ControlInput u;
  State x_next;
};

std::vector<Transition> TransitionsFromSegments(
    const std::vector<Segment>& segments);

/// Least-squares identification of the four physical parameters from
/// one-step transitions. The velocity rows and the yaw-rate row are
/// independent linear problems in (k_a, k_V) and (k_delta, k_r).
/// Throws IdentifiabilityError naming the block whose regressor is rank
/// deficient.
PhysicalParams FitPhysicalParams(std::span<const Transition> data, double h);

/// Per-dimension standard deviations of states and inputs over the data,
/// replacing zeros by one.
void ComputeNormalization(std::span<const Transition> data, MlpParams& nn);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 1024;
  double grad_clip = 1.0;
  double next_state_noise_std = 1e-4;  // normalized units
  int early_stop_patience = 10;
  int max_epochs = 400;
  int hidden_units = kMlpHiddenUnits;
  std::uint64_t rng_seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void Validate() const;
};

struct EpochLoss {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  PredictionModel model;
  std::vector<EpochLoss> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Mean squared one-step error over all seven normalized state dimensions.
/// target_noise (normalized units, one row per transition) is added to the
/// targets when nonempty; grads receives d loss / d parameters when given.
double OneStepLoss(const ResidualDynamicsModel& model,
                   std::span<const Transition> data,
                   std::span<const StateVector> target_noise,
                   std::vector<DenseLayer>* grads);
double OneStepLoss(const StandardNnModel& model,
                   std::span<const Transition> data,
                   std::span<const StateVector> target_noise,
                   std::vector<DenseLayer>* grads);

/// Same loss without noise, evaluated through PredictionModel::Step.
double OneStepLoss(const PredictionModel& model,
                   std::span<const Transition> data);

/// Called after every Adam step with (clipped gradient norm, max |update|,
/// bound on |update| implied by the Adam moments).
using AdamStepObserver = std::function<void(double, double, double)>;

/// Minibatch Adam training of the residual network with gradient clipping,
/// target noise and early stopping. `init` supplies the physics, mask, v_th
/// and normalization; its network is replaced by a seeded initialization.
TrainResult TrainResidual(const ResidualDynamicsModel& init,
                          std::span<const Transition> train,
                          std::span<const Transition> val,
                          const TrainConfig& cfg,
                          const AdamStepObserver& observer = {});

/// Same procedure for the direct next-state network.
TrainResult TrainStandardNn(const StandardNnModel& init,
                            std::span<const Transition> train,
                            std::span<const Transition> val,
                            const TrainConfig& cfg,
                            const AdamStepObserver& observer = {});

/// CSV epoch,train_loss,val_loss.
void WriteLossHistory(const std::vector<EpochLoss>& history,
                      const std::filesystem::path& file);

struct R2Report {
  std::array<std::optional<double>, kStateDim> per_dim;
  double average = 0.0;  // over the defined dimensions
};

/// Open-loop rollouts over each segment from its first state with recorded
/// inputs, pooled over all segments, R^2 = 1 - SSE/SST per dimension.
R2Report RecursiveR2(const PredictionModel& model,
                     const std::vector<Segment>& segments);

/// R^2 of arbitrary pooled predictions against truth (same pooling rule).
R2Report R2FromPredictions(std::span<const StateVector> truth,
                           std::span<const StateVector> prediction);

struct IdentificationOptions {
  bool train_residual = true;
  bool train_standard_nn = true;
  double v_th = kDefaultResidualSpeedThreshold;
  TrainConfig train;
};

struct IdentificationResult {
  PhysicalParams phys;
  PredictionModel physical;
  std::optional<TrainResult> residual;
  std::optional<TrainResult> standard_nn;
  // Recursive R^2 on the test split.
  R2Report r2_physical;
  std::optional<R2Report> r2_residual;
  std::optional<R2Report> r2_standard_nn;
};

/// Least squares on the training split, then the requested networks, then
/// recursive R^2 of every model on the test split.
IdentificationResult Identify(const DatasetSplit& data, double h,
                              const IdentificationOptions& opt);

}  // namespace mppi_pid

#endif  // MPPI_PID_LEARNING_HPP_
