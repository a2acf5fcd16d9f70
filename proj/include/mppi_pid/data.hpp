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

#ifndef MPPI_PID_DATA_HPP_
#define MPPI_PID_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "mppi_pid/dynamics.hpp"
#include "mppi_pid/types.hpp"

namespace mppi_pid {

// ---------------------------------------------------------------------------
// Ground-truth plant

/// Unmodeled effects of the synthetic plant. They act on the velocity and
/// yaw-rate rows only.
struct PlantResidual {
  double drag = 1.0;            // quadratic drag, dv -= drag * V * v
  double steer_saturation = 0.6;  // rad, effective steering = s tanh(delta/s)
  double yaw_cubic = 2.0;       // dr -= yaw_cubic * r^3

  bool IsZero() const { return drag == 0 && steer_saturation == 0 && yaw_cubic == 0; }
};

/// Stand-in for the physical vehicle: the identified-model structure with
/// known parameters, an extra analytic residual, and process noise on
/// (vX, vY, r).
struct GroundTruthPlant {
  PhysicalParams phys{0.00275, 1.0, 8.0, 4.0};
  PlantResidual residual;
  std::array<double, 3> process_noise{2e-4, 2e-4, 1e-3};  // per step, vX vY r
  double h = kDefaultStepSize;

  /// Derivative of the residual effects alone.
  StateVector ResidualDerivative(const State& x, const ControlInput& u) const;

  /// One step of the plant. Noise is drawn from rng when given.
  State Step(const State& x, const ControlInput& u,
             std::mt19937_64* rng = nullptr) const;

  /// The physics part of the plant as a prediction model.
  PredictionModel PhysicsOnly() const { return PredictionModel::Physical(phys, h); }
};

// ---------------------------------------------------------------------------
// Raw logs

struct RawRecord {
  double t = 0, X = 0, Y = 0, psi = 0, vX = 0, vY = 0, r = 0, a = 0, delta = 0;
};

struct RawLog {
  std::vector<RawRecord> records;
};

struct LogGenConfig {
  int scenarios = 24;
  double duration = 197.0;           // s per scenario
  double gap_probability = 5e-4;     // chance per sample that a gap starts
  int gap_min_samples = 2;
  int gap_max_samples = 15;
  double timestamp_jitter = 0.003;   // s, uniform
  std::uint64_t seed = 1;

  void Validate() const;
};

/// Simulates the plant under smooth random excitation and records logs with
/// heading as an angle, timestamp jitter and dropped-sample gaps.
std::vector<RawLog> GenerateLogs(const GroundTruthPlant& plant,
                                 const LogGenConfig& cfg);

std::size_t CountSamples(const std::vector<RawLog>& logs);

/// CSV with header t,X,Y,psi,vX,vY,r,a,delta.
void WriteRawLogCsv(const RawLog& log, const std::filesystem::path& file);
RawLog ReadRawLogCsv(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Preprocessing

/// Equally spaced (state, input) series.
struct Segment {
  double t0 = 0.0;
  double h = kDefaultStepSize;
  std::vector<State> states;
  std::vector<ControlInput> inputs;

  std::size_t size() const { return states.size(); }
};

struct PreprocessConfig {
  double gap_threshold = 0.1;     // s
  double h = kDefaultStepSize;
  double segment_duration = 5.0;  // s
  int median_window = 3;
  int pose_window = 9;            // X, Y, psi
  int velocity_window = 7;        // vX, vY, r
  int input_window = 5;           // a, delta
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::uint64_t split_seed = 0;

  int SegmentLength() const;
};

struct DatasetSplit {
  std::vector<Segment> train;
  std::vector<Segment> val;
  std::vector<Segment> test;
  int dropped_intervals = 0;  // shorter than the largest filter window
  int intervals = 0;
};

/// Median filter with windows truncated at the edges.
std::vector<double> MedianFilter(std::span<const double> x, int window);
/// Moving average with windows truncated at the edges.
std::vector<double> MovingAverage(std::span<const double> x, int window);

/// Splits at gaps, resamples, filters, converts heading to (s, c), cuts
/// fixed-length segments and splits them after a seeded shuffle.
DatasetSplit Preprocess(const std::vector<RawLog>& logs,
                        const PreprocessConfig& cfg);

/// Sizes of the validation and test splits for n segments; train gets the
/// rest.
std::array<int, 3> SplitSizes(int n, double train_fraction, double val_fraction);

/// One directory per split, one CSV per segment with header
/// t,X,Y,s,c,vX,vY,r,a,delta.
void WriteDataset(const DatasetSplit& data, const std::filesystem::path& dir);
std::vector<Segment> ReadSegments(const std::filesystem::path& split_dir,
                                  double h = kDefaultStepSize);

}  // namespace mppi_pid

#endif  // MPPI_PID_DATA_HPP_
