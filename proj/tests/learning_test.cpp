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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "mppi_pid/learning.hpp"

namespace mppi_pid {
namespace {

const PhysicalParams kTrue{0.00275, 1.0, 8.0, 4.0};
constexpr double kH = 0.0667;

// Transitions of a plant under random inputs, starting from random states.
std::vector<Transition> PlantTransitions(const GroundTruthPlant& plant, int n,
                                         std::uint64_t seed, bool noisy = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Transition> out;
  State x = State::FromPose(0, 0, 0.3, 0.05);
  for (int k = 0; k < n; ++k) {
    if (k % 50 == 0) {
      x = State::FromPose(u(rng), u(rng), 3 * u(rng), 0.15 * (1 + u(rng)));
      x.r = 0.3 * u(rng);
    }
    const ControlInput in{50 + 50 * u(rng), 65 * u(rng)};
    const State y = plant.Step(x, in, noisy ? &rng : nullptr);
    out.push_back({x, in, y});
    x = y;
  }
  return out;
}

GroundTruthPlant CleanPlant() {
  GroundTruthPlant p;
  p.phys = kTrue;
  p.residual = {0.0, 0.0, 0.0};
  p.process_noise = {0.0, 0.0, 0.0};
  return p;
}

void ExpectRelNear(double got, double want, double rel) {
  EXPECT_LE(std::abs(got - want), rel * std::abs(want)) << got << " vs " << want;
}

TEST(FitPhysicalParams, RecoversTrueParametersOnCleanData) {
  const auto data = PlantTransitions(CleanPlant(), 2000, 1);
  const PhysicalParams p = FitPhysicalParams(data, kH);
  ExpectRelNear(p.k_a, kTrue.k_a, 1e-6);
  ExpectRelNear(p.k_V, kTrue.k_V, 1e-6);
  ExpectRelNear(p.k_delta, kTrue.k_delta, 1e-6);
  ExpectRelNear(p.k_r, kTrue.k_r, 1e-6);
}

TEST(FitPhysicalParams, NoisyDerivativesWithinFivePercent) {
  auto data = PlantTransitions(CleanPlant(), 10000, 11);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1e-3);
  for (Transition& t : data) {
    t.x_next.vX += kH * n(rng);
    t.x_next.vY += kH * n(rng);
    t.x_next.r += kH * n(rng);
  }
  const PhysicalParams p = FitPhysicalParams(data, kH);
  ExpectRelNear(p.k_a, kTrue.k_a, 0.05);
  ExpectRelNear(p.k_V, kTrue.k_V, 0.05);
  ExpectRelNear(p.k_delta, kTrue.k_delta, 0.05);
  ExpectRelNear(p.k_r, kTrue.k_r, 0.05);
}

TEST(FitPhysicalParams, ExactOnHandBuiltEulerTransitions) {
  std::vector<Transition> data;
  const double speeds[] = {0.05, 0.1, 0.2, 0.15};
  const double deltas[] = {10, -20, 30, 5};
  for (int i = 0; i < 4; ++i) {
    State x = State::FromPose(0, 0, 0.5 * i, speeds[i]);
    x.r = 0.1 * (i - 1.5);
    const ControlInput u{20.0 + 10 * i, deltas[i]};
    data.push_back({x, u, EulerStep(x, u, kTrue, kH)});
  }
  const PhysicalParams p = FitPhysicalParams(data, kH);
  ExpectRelNear(p.k_a, kTrue.k_a, 1e-10);
  ExpectRelNear(p.k_V, kTrue.k_V, 1e-10);
  ExpectRelNear(p.k_delta, kTrue.k_delta, 1e-10);
  ExpectRelNear(p.k_r, kTrue.k_r, 1e-10);
}

TEST(FitPhysicalParams, RankDeficientBlocksAreNamed) {
  auto data = PlantTransitions(CleanPlant(), 200, 2);
  auto no_thrust = data;
  for (Transition& t : no_thrust) {
    t.u.a = 0.0;
    t.x_next = EulerStep(t.x, t.u, kTrue, kH);
  }
  try {
    FitPhysicalParams(no_thrust, kH);
    FAIL() << "expected IdentifiabilityError";
  } catch (const IdentifiabilityError& e) {
    EXPECT_NE(std::string(e.what()).find("speed block"), std::string::npos);
  }
  auto no_steer = data;
  for (Transition& t : no_steer) {
    t.u.delta = 0.0;
    t.x_next = EulerStep(t.x, t.u, kTrue, kH);
  }
  try {
    FitPhysicalParams(no_steer, kH);
    FAIL() << "expected IdentifiabilityError";
  } catch (const IdentifiabilityError& e) {
    EXPECT_NE(std::string(e.what()).find("yaw block"), std::string::npos);
  }
  EXPECT_THROW(FitPhysicalParams(std::span(data).first(3), kH), IdentifiabilityError);
}

TEST(Normalization, StdWithZeroReplaced) {
  std::vector<Transition> data(4);
  for (int i = 0; i < 4; ++i) {
    data[i].x.X = i;        // std sqrt(1.25)
    data[i].x.c = 1.0;      // constant -> 1
    data[i].u.a = 2.0 * i;  // std 2 sqrt(1.25)
  }
  MlpParams nn;
  ComputeNormalization(data, nn);
  EXPECT_NEAR(nn.state_scale[kX], std::sqrt(1.25), 1e-15);
  EXPECT_EQ(nn.state_scale[kCos], 1.0);
  EXPECT_EQ(nn.state_scale[kVx], 1.0);
  EXPECT_NEAR(nn.input_scale[0], 2 * std::sqrt(1.25), 1e-15);
}

ResidualDynamicsModel RandomResidual(std::span<const Transition> data,
                                     std::uint64_t seed) {
  ResidualDynamicsModel m;
  m.phys = kTrue;
  ComputeNormalization(data, m.nn);
  m.nn.net = Mlp::RandomInit({9, 50, 50, 3}, seed);
  // make the outputs large enough that (s, c) renormalization matters
  for (DenseLayer& l : m.nn.net.mutable_layers()) {
    for (double& w : l.weight) w *= 1.5;
    for (double& b : l.bias) b += 0.05;
  }
  return m;
}

template <typename Model>
void GradientCheck(Model model, std::span<const Transition> data,
                   std::span<const StateVector> noise) {
  std::vector<DenseLayer> grads;
  OneStepLoss(model, data, noise, &grads);
  const double step = 1e-6;
  double diff2 = 0.0, ref2 = 0.0, worst = 0.0;
  auto& layers = model.nn.net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto check = [&](double& p, double g) {
      const double saved = p;
      p = saved + step;
      const double up = OneStepLoss(model, data, noise, nullptr);
      p = saved - step;
      const double down = OneStepLoss(model, data, noise, nullptr);
      p = saved;
      const double fd = (up - down) / (2 * step);
      diff2 += (fd - g) * (fd - g);
      ref2 += fd * fd;
      // per-entry error relative to the largest gradient scale
      worst = std::max(worst, std::abs(fd - g));
    };
    for (std::size_t k = 0; k < layers[l].weight.size(); ++k) {
      check(layers[l].weight[k], grads[l].weight[k]);
    }
    for (std::size_t k = 0; k < layers[l].bias.size(); ++k) {
      check(layers[l].bias[k], grads[l].bias[k]);
    }
  }
  const double rel = std::sqrt(diff2 / ref2);
  EXPECT_LT(rel, 1e-4);
  EXPECT_GT(ref2, 0.0);
}

TEST(OneStepLoss, ResidualGradientMatchesFiniteDifferences) {
  const auto data = PlantTransitions(GroundTruthPlant{}, 64, 3);
  std::vector<StateVector> noise(data.size());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1e-2);
  for (auto& row : noise) for (double& v : row) v = n(rng);
  GradientCheck(RandomResidual(data, 5), data, noise);
}

TEST(OneStepLoss, StandardGradientMatchesFiniteDifferences) {
  const auto data = PlantTransitions(GroundTruthPlant{}, 64, 6);
  StandardNnModel m;
  ComputeNormalization(data, m.nn);
  m.nn.net = Mlp::RandomInit({9, 50, 50, 7}, 7);
  GradientCheck(m, data, {});
}

TEST(OneStepLoss, AgreesWithStepEvaluation) {
  const auto data = PlantTransitions(GroundTruthPlant{}, 100, 8);
  const ResidualDynamicsModel m = RandomResidual(data, 9);
  EXPECT_NEAR(OneStepLoss(m, data, {}, nullptr),
              OneStepLoss(PredictionModel(m), data), 1e-12);
}

struct TrainingData {
  std::vector<Transition> train, val;
  ResidualDynamicsModel init;
};

TrainingData MakeTrainingData() {
  TrainingData d;
  const GroundTruthPlant plant;
  d.train = PlantTransitions(plant, 3000, 10, true);
  d.val = PlantTransitions(plant, 600, 11, true);
  d.init.phys = FitPhysicalParams(d.train, kH);
  ComputeNormalization(d.train, d.init.nn);
  return d;
}

TrainConfig ShortTraining() {
  TrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.batch_size = 128;
  cfg.learning_rate = 1e-3;
  cfg.rng_seed = 3;
  return cfg;
}

TEST(TrainResidual, ReducesValidationLossAndBoundsUpdates) {
  const TrainingData d = MakeTrainingData();
  int steps = 0;
  bool clipped_ok = true, update_ok = true;
  const TrainConfig cfg = ShortTraining();
  const TrainResult r = TrainResidual(
      d.init, d.train, d.val, cfg,
      [&](double norm, double max_update, double bound) {
        ++steps;
        clipped_ok &= norm <= cfg.grad_clip * (1 + 1e-12);
        update_ok &= max_update <= bound * (1 + 1e-9);
      });
  EXPECT_GT(steps, 0);
  EXPECT_TRUE(clipped_ok);
  EXPECT_TRUE(update_ok);
  ASSERT_FALSE(r.history.empty());
  const double physics_only = OneStepLoss(PredictionModel(d.init), d.val);
  EXPECT_LT(r.best_val_loss, physics_only);
  EXPECT_EQ(r.history[r.best_epoch - 1].val_loss, r.best_val_loss);
  // the returned model is the best snapshot
  EXPECT_NEAR(OneStepLoss(r.model, d.val), r.best_val_loss, 1e-12);
}

TEST(TrainResidual, DeterministicForSeed) {
  const TrainingData d = MakeTrainingData();
  TrainConfig cfg = ShortTraining();
  cfg.max_epochs = 3;
  const TrainResult a = TrainResidual(d.init, d.train, d.val, cfg);
  const TrainResult b = TrainResidual(d.init, d.train, d.val, cfg);
  EXPECT_EQ(ModelToJson(a.model), ModelToJson(b.model));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
  }
}

TEST(TrainResidual, EarlyStoppingHonoursPatience) {
  const TrainingData d = MakeTrainingData();
  TrainConfig cfg = ShortTraining();
  cfg.max_epochs = 400;
  cfg.early_stop_patience = 2;
  cfg.learning_rate = 5e-2;  // noisy enough to stall quickly
  const TrainResult r = TrainResidual(d.init, d.train, d.val, cfg);
  EXPECT_LT(r.history.size(), 400u);
  EXPECT_EQ(static_cast<int>(r.history.size()), r.best_epoch + 2);
}

TEST(TrainResidual, DivergenceNamesEpoch) {
  const TrainingData d = MakeTrainingData();
  TrainConfig cfg = ShortTraining();
  cfg.learning_rate = 1e300;
  cfg.grad_clip = 1e300;
  try {
    TrainResidual(d.init, d.train, d.val, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.Validate(), ConfigError);
}

TEST(LossHistory, CsvLayout) {
  const auto file = std::filesystem::temp_directory_path() / "mppi_pid_loss.csv";
  WriteLossHistory({{1, 0.5, 0.6}, {2, 0.25, 0.3}}, file);
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,train_loss,val_loss");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "1,");
  std::filesystem::remove(file);
}

TEST(R2, HandComputed) {
  std::vector<StateVector> truth(4), pred(4);
  for (int k = 0; k < 4; ++k) {
    truth[k][kX] = k;             // mean 1.5, SST 5
    pred[k][kX] = k + (k == 0 ? 1.0 : 0.0);  // SSE 1
    truth[k][kVx] = 2.0;          // constant: undefined
    pred[k][kVx] = 2.0;
  }
  const R2Report r = R2FromPredictions(truth, pred);
  ASSERT_TRUE(r.per_dim[kX].has_value());
  EXPECT_DOUBLE_EQ(*r.per_dim[kX], 1.0 - 1.0 / 5.0);
  EXPECT_FALSE(r.per_dim[kVx].has_value());
  EXPECT_DOUBLE_EQ(r.average, 0.8);
}

TEST(R2, TrueModelOnCleanSegmentsIsOne) {
  const GroundTruthPlant plant = CleanPlant();
  std::vector<Segment> segs(3);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Segment& s : segs) {
    State x = State::FromPose(u(rng), u(rng), 3 * u(rng), 0.1);
    for (int k = 0; k < 75; ++k) {
      const ControlInput in{50 + 40 * u(rng), 60 * u(rng)};
      s.states.push_back(x);
      s.inputs.push_back(in);
      x = plant.Step(x, in);
    }
  }
  const R2Report r = RecursiveR2(plant.PhysicsOnly(), segs);
  for (int i = 0; i < kStateDim; ++i) {
    ASSERT_TRUE(r.per_dim[i].has_value());
    EXPECT_NEAR(*r.per_dim[i], 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace mppi_pid
