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

#ifndef MPPI_PID_CONFIG_HPP_
#define MPPI_PID_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mppi_pid/data.hpp"
#include "mppi_pid/learning.hpp"
#include "mppi_pid/sim.hpp"

namespace mppi_pid {

struct ValidationSettings {
  int mc_samples = 1000000;
  int continuity_trials = 100000;
  int continuity_steps = 12;
  int ess_configs = 10;
  std::vector<int> ess_dims{1, 9, 30, 120};
  double gradient_lambda = 0.1;
  std::uint64_t seed = 0;
};

/// Everything the command-line tool can configure.
struct ExperimentConfig {
  GroundTruthPlant plant;
  LogGenConfig logs;
  PreprocessConfig preprocess;
  TrainConfig train;
  double residual_speed_threshold = kDefaultResidualSpeedThreshold;

  std::string scenario = "curve";
  double scenario_duration = 0.0;  // 0 keeps the scenario's own duration
  ControllerKind controller = ControllerKind::kMppiPid;
  OptimizerConfig optimizer;
  CostWeights cost;
  InputVector u_min{0.0, -65.0};
  InputVector u_max{100.0, 65.0};
  InputVector rate_max{32.0, 100.0};  // per second
  ControlInput u_bias = ControlInput::FromArray(kDefaultInputBias);
  PidGains initial_gains = kDefaultInitialGains;
  double steering_sign = -1.0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<int> sample_budgets{2048, 16};

  ValidationSettings validation;

  std::string data_dir = "data";
  std::string model_path = "model.json";
  std::string out_dir = "out";

  InputConstraints Constraints() const;
  /// The named scenario with this config's controller settings applied.
  Scenario MakeScenario() const;
  void Validate() const;
};

/// Defaults merged with the given JSON object. Unknown keys and wrong types
/// throw ConfigError.
ExperimentConfig ConfigFromJson(const std::string& text);
ExperimentConfig LoadConfig(const std::filesystem::path& file);
std::string ConfigToJson(const ExperimentConfig& cfg);

/// Applies "dotted.key=value" overrides. Values are parsed as JSON when
/// possible and taken as strings otherwise.
ExperimentConfig ApplyOverrides(const ExperimentConfig& cfg,
                                const std::vector<std::string>& overrides);

}  // namespace mppi_pid

#endif  // MPPI_PID_CONFIG_HPP_
