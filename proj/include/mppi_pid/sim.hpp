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

#ifndef MPPI_PID_SIM_HPP_
#define MPPI_PID_SIM_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mppi_pid/control.hpp"
#include "mppi_pid/data.hpp"

namespace mppi_pid {

enum class ControllerKind { kFixedPid, kMppi, kMppiPid };

std::string ControllerName(ControllerKind kind);
/// Accepts fixed_pid, mppi, mppi_pid. Throws ConfigError otherwise.
ControllerKind ParseController(const std::string& name);

enum class PlantKind {
  kGroundTruth,     // synthetic plant with residual and process noise
  kPredictionModel  // the controller's own model ("perfect model" ablation)
};

struct Scenario {
  std::string name = "curve";
  Pose2 start;
  // One goal per leg. Each leg follows a Hermite path from the previous
  // pose; intermediate legs hand over once their end is reached.
  std::vector<Pose2> goals{{2.0, 2.0, 1.5707963267948966}};
  double start_speed = 0.0;  // along the start heading
  double duration = 45.0;    // s, over all legs
  bool goal_stop = true;
  int goal_stop_ticks = 10;
  double divergence_distance = 10.0;  // m
  int path_points = kDefaultPathPoints;

  ControllerKind controller = ControllerKind::kMppiPid;
  OptimizerConfig optimizer;
  PidGains fixed_gains = kDefaultInitialGains;
  CostWeights cost;
  InputConstraints constraints;
  ControlInput u_bias = ControlInput::FromArray(kDefaultInputBias);
  double steering_sign = -1.0;

  PlantKind plant_kind = PlantKind::kGroundTruth;
  GroundTruthPlant plant;
  std::uint64_t seed = 0;  // plant noise and optimizer sampling

  double h() const { return plant.h; }
  void Validate() const;
};

/// Straight 8 m path along +X.
Scenario StraightScenario();
/// Single 90 degree left turn.
Scenario CurveScenario();
/// Left then right turn as two chained legs.
Scenario SCurveScenario();
/// Looks a default scenario up by name (straight, curve, s_curve).
Scenario ScenarioByName(const std::string& name);

struct TickRecord {
  int k = 0;
  double t = 0.0;
  State x;
  ControlInput u;
  double e_path = 0.0;
  double da = 0.0;  // |a_k - a_{k-1}|
  double dd = 0.0;  // |delta_k - delta_{k-1}|
  int leg = 0;
  std::vector<double> ess;  // per optimizer iteration
  std::optional<PidGains> gains;
  double wall_seconds = 0.0;
};

enum class Termination { kGoalStop, kOvershoot, kDuration, kDiverged };
std::string TerminationName(Termination t);

struct RunRecord {
  std::string scenario;
  ControllerKind controller = ControllerKind::kFixedPid;
  int samples = 0;
  std::uint64_t seed = 0;
  std::vector<TickRecord> ticks;
  Termination termination = Termination::kDuration;
  bool reached_goal = false;  // entered the final goal ball at some tick
  bool diverged = false;
  State final_state;
  std::vector<std::vector<Vec2>> reference;  // path points per leg
};

/// Closed-loop run. The controllers plan with `model`; the plant is the
/// ground-truth plant unless the scenario selects the prediction model.
RunRecord RunScenario(const Scenario& s, const PredictionModel& model);

struct RunSummary {
  double mean_e_path = 0.0;
  double max_e_path = 0.0;
  double mean_da = 0.0;
  double mean_dd = 0.0;
  double mean_tick_seconds = 0.0;
  int ticks = 0;
  bool reached_goal = false;
  bool diverged = false;
};

RunSummary Summarize(const RunRecord& r);

/// Per-tick CSV. Contents depend only on (scenario, model, seed): timing is
/// written separately by WriteTimingCsv.
void WriteRunCsv(const RunRecord& r, const std::filesystem::path& file);
std::string RunCsvString(const RunRecord& r);
void WriteTimingCsv(const RunRecord& r, const std::filesystem::path& file);

/// {scenario}_{controller}_{I}_{seed}.csv; I is 0 for fixed-gain PID.
std::string RunFileName(const RunRecord& r);

/// Reference paths dashed, trajectories solid.
void WriteTrajectorySvg(const std::vector<const RunRecord*>& runs,
                        const std::filesystem::path& file);

struct MatrixConfig {
  std::vector<Scenario> scenarios;
  std::vector<ControllerKind> controllers{ControllerKind::kFixedPid,
                                          ControllerKind::kMppi,
                                          ControllerKind::kMppiPid};
  std::vector<int> sample_budgets{2048, 16};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::optional<std::filesystem::path> run_dir;  // per-run CSVs when set
};

struct MatrixCell {
  std::string scenario;
  ControllerKind controller = ControllerKind::kFixedPid;
  int samples = 0;
  int runs = 0;
  double mean_e_path = 0.0;  // mean over runs of the per-run mean
  double max_e_path = 0.0;   // max over runs
  double mean_da = 0.0;
  double mean_dd = 0.0;
  double completion_rate = 0.0;
  int diverged = 0;
  double mean_tick_seconds = 0.0;
  std::vector<RunSummary> per_run;
};

/// Runs every (scenario, controller, budget, seed) combination. Fixed-gain
/// PID does not sample, so it runs once per seed with budget 0.
std::vector<MatrixCell> RunMatrix(const MatrixConfig& cfg,
                                  const PredictionModel& model);

const MatrixCell* FindCell(const std::vector<MatrixCell>& cells,
                           const std::string& scenario, ControllerKind c,
                           int samples);

void WriteMatrixCsv(const std::vector<MatrixCell>& cells,
                    const std::filesystem::path& file);
void WriteMatrixJson(const std::vector<MatrixCell>& cells,
                     const std::filesystem::path& file);

}  // namespace mppi_pid

#endif  // MPPI_PID_SIM_HPP_
