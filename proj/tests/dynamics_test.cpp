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
#include <random>

#include <gtest/gtest.h>

#include "mppi_pid/dynamics.hpp"

namespace mppi_pid {
namespace {

const PhysicalParams kParams{0.003, 1.2, 7.5, 3.5};

State RandomState(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double psi = 3.0 * u(rng);
  const double speed = 0.3 * std::abs(u(rng));
  State x = State::FromPose(2 * u(rng), 2 * u(rng), psi, speed);
  x.vX += 0.02 * u(rng);
  x.vY += 0.02 * u(rng);
  x.r = 0.5 * u(rng);
  return x;
}

ControlInput RandomInput(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(0.0, 100.0);
  std::uniform_real_distribution<double> d(-65.0, 65.0);
  return {a(rng), d(rng)};
}

ResidualDynamicsModel RandomResidualModel(std::uint64_t seed) {
  ResidualDynamicsModel m;
  m.phys = kParams;
  m.nn.net = Mlp::RandomInit({9, 50, 50, 3}, seed);
  m.nn.state_scale = {1.0, 1.0, 0.7, 0.7, 0.08, 0.08, 0.3};
  m.nn.input_scale = {30.0, 25.0};
  return m;
}

TEST(EulerStep, RejectsNonPositiveStep) {
  EXPECT_THROW(EulerStep(State{}, {}, kParams, 0.0), ConfigError);
  EXPECT_THROW(EulerStep(State{}, {}, kParams, -0.1), ConfigError);
}

TEST(EulerStep, ZeroDerivativeIsIdentity) {
  // At rest with no thrust, no steering and no yaw every row vanishes.
  const State x = State::FromPose(1.5, -0.5, 0.7);
  EXPECT_EQ(EulerStep(x, {0.0, 0.0}, kParams, 0.0667), x);
}

TEST(EulerStep, ThrustFromRestIncreasesVx) {
  const State x = State::FromPose(0, 0, 0);
  const State y = EulerStep(x, {40.0, 0.0}, kParams, 0.0667);
  EXPECT_GT(y.vX, 0.0);
  EXPECT_DOUBLE_EQ(y.vX, 0.0667 * kParams.k_a * 40.0);
  EXPECT_EQ(y.vY, 0.0);
}

TEST(PhysDerivative, MatchesHandDerivation) {
  const State x{0.3, -0.2, 0.6, 0.8, 0.08, 0.06, 0.2};
  const ControlInput u{30.0, 20.0};
  const StateVector f = PhysDerivative(x, u, kParams);
  const double speed = 0.1;
  const double delta = 20.0 * std::numbers::pi / 180.0;
  EXPECT_DOUBLE_EQ(f[0], 0.08);
  EXPECT_DOUBLE_EQ(f[1], 0.06);
  EXPECT_DOUBLE_EQ(f[2], 0.8 * 0.2);
  EXPECT_DOUBLE_EQ(f[3], -0.6 * 0.2);
  EXPECT_NEAR(f[4], 0.003 * 30 * 0.8 - 1.2 * 0.08 - 0.2 * 0.06, 1e-15);
  EXPECT_NEAR(f[5], 0.003 * 30 * 0.6 - 1.2 * 0.06 + 0.2 * 0.08, 1e-15);
  EXPECT_NEAR(f[6], 7.5 * speed * delta - 3.5 * 0.2, 1e-14);
}

TEST(PhysDerivative, LongitudinalProjectionIsScalarSpeedLaw) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double speed = 0.5 * std::abs(u(rng));
    State x = State::FromPose(u(rng), u(rng), 3.0 * u(rng), speed);
    x.r = u(rng);
    const ControlInput in = RandomInput(rng);
    const StateVector f = PhysDerivative(x, in, kParams);
    EXPECT_NEAR(f[kVx] * x.c + f[kVy] * x.s,
                kParams.k_a * in.a - kParams.k_V * speed, 1e-10);
  }
}

TEST(Mlp, ZeroWeightsGiveZeroResidual) {
  MlpParams nn;
  nn.net = Mlp::Zeros({9, 50, 50, 3});
  const std::vector<double> out =
      MlpForward(nn, State::FromPose(1, 2, 0.3, 0.2), {50.0, 10.0});
  ASSERT_EQ(out.size(), 3u);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

// 9 -> 1 -> 1 -> 3 network whose first output is ReLU(vX / scale).
MlpParams HandNet() {
  std::vector<DenseLayer> layers(3);
  layers[0] = {9, 1, std::vector<double>(9, 0.0), {0.0}};
  layers[0].W(0, kVx) = 1.0;
  layers[1] = {1, 1, {1.0}, {0.0}};
  layers[2] = {1, 3, {1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  MlpParams nn;
  nn.net = Mlp(std::move(layers));
  nn.state_scale = {1, 1, 1, 1, 0.5, 1, 1};
  return nn;
}

TEST(Mlp, HandNetMatchesClosedForm) {
  const MlpParams nn = HandNet();
  for (double vx : {-0.3, -0.01, 0.0, 0.02, 0.25}) {
    State x;
    x.vX = vx;
    const std::vector<double> out = MlpForward(nn, x, {10.0, 5.0});
    EXPECT_DOUBLE_EQ(out[0], std::max(0.0, vx / 0.5));
    EXPECT_EQ(out[1], 0.0);
    EXPECT_EQ(out[2], 0.0);
  }
}

TEST(Mlp, PiecewiseLinearAlongFixedPattern) {
  const Mlp net = Mlp::RandomInit({9, 50, 50, 3}, 11);
  // Zero biases make the network positively homogeneous.
  Mlp homog = net;
  for (DenseLayer& l : homog.mutable_layers()) {
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> z(9);
  for (double& v : z) v = n(rng);
  const std::vector<double> base = homog.Forward(z);
  for (double alpha : {0.5, 2.0, 7.0}) {
    std::vector<double> za = z;
    for (double& v : za) v *= alpha;
    const std::vector<double> out = homog.Forward(za);
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(out[i], alpha * base[i], 1e-12 * (1 + std::abs(out[i])));
    }
  }
}

TEST(Mlp, DimensionMismatchIsConfigError) {
  MlpParams nn;
  nn.net = Mlp::Zeros({5, 4, 3});
  EXPECT_THROW(MlpForward(nn, State{}, {}), ConfigError);
  MlpParams bad_scale;
  bad_scale.state_scale[2] = 0.0;
  EXPECT_THROW(bad_scale.Validate(), ConfigError);
}

TEST(ResidualWeight, Values) {
  State x;
  EXPECT_EQ(ResidualWeight(x, 0.2), 0.0);
  x.vX = 0.2;
  EXPECT_DOUBLE_EQ(ResidualWeight(x, 0.2), 0.5);
  x.vX = 0.06;
  x.vY = 0.08;  // V = 0.1
  EXPECT_NEAR(ResidualWeight(x, 0.20), 0.2, 1e-15);
}

TEST(ResidualWeight, MonotoneAndBelowOne) {
  double prev = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    State x;
    x.vX = 0.01 * i;
    const double w = ResidualWeight(x, 0.2);
    EXPECT_GT(w, prev);
    EXPECT_GE(w, 0.0);
    EXPECT_LT(w, 1.0);
    prev = w;
  }
}

TEST(NormalizeTrig, Examples) {
  State x;
  x.s = 0.0;
  x.c = 1.0;
  EXPECT_EQ(NormalizeTrig(x), x);
  x.c = 2.0;
  EXPECT_EQ(NormalizeTrig(x).c, 1.0);
  EXPECT_EQ(NormalizeTrig(x).s, 0.0);
  x.s = 0.3;
  x.c = 0.4;
  x.vX = 0.123;
  const State y = NormalizeTrig(x);
  EXPECT_NEAR(y.s, 0.6, 1e-15);
  EXPECT_NEAR(y.c, 0.8, 1e-15);
  EXPECT_EQ(y.vX, 0.123);
  x.s = 0.0;
  x.c = 0.0;
  EXPECT_THROW(NormalizeTrig(x), DegenerateHeadingError);
}

TEST(ResidualStep, ZeroNetworkIsEulerPlusNormalization) {
  ResidualDynamicsModel m;
  m.phys = kParams;
  m.nn.net = Mlp::Zeros({9, 50, 50, 3});
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const State x = RandomState(rng);
    const ControlInput u = RandomInput(rng);
    EXPECT_EQ(ResidualStep(m, x, u), NormalizeTrig(EulerStep(x, u, kParams, m.h)));
  }
}

TEST(ResidualStep, ZeroNetworkRolloutMatchesEulerExactly) {
  ResidualDynamicsModel m;
  m.phys = kParams;
  m.nn.net = Mlp::Zeros({9, 50, 50, 3});
  std::mt19937_64 rng(8);
  State a = RandomState(rng);
  State b = a;
  for (int t = 0; t < 60; ++t) {
    const ControlInput u = RandomInput(rng);
    a = ResidualStep(m, a, u);
    b = NormalizeTrig(EulerStep(b, u, kParams, m.h));
    ASSERT_EQ(a, b) << "step " << t;
  }
}

TEST(ResidualStep, ZeroSpeedHasNoResidual) {
  const ResidualDynamicsModel m = RandomResidualModel(1);
  State x = State::FromPose(0.5, 0.5, 1.0);
  x.r = 0.3;
  const ControlInput u{60.0, -20.0};
  EXPECT_EQ(ResidualStep(m, x, u), NormalizeTrig(EulerStep(x, u, kParams, m.h)));
}

TEST(ResidualStep, MaskedRowsUnchanged) {
  const ResidualDynamicsModel m = RandomResidualModel(2);
  std::mt19937_64 rng(9);
  int changed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const State x = RandomState(rng);
    const ControlInput u = RandomInput(rng);
    const State phys = NormalizeTrig(EulerStep(x, u, kParams, m.h));
    const State res = ResidualStep(m, x, u);
    EXPECT_EQ(res.X, phys.X);
    EXPECT_EQ(res.Y, phys.Y);
    EXPECT_EQ(res.s, phys.s);
    EXPECT_EQ(res.c, phys.c);
    changed += res.vX != phys.vX;
  }
  EXPECT_GT(changed, 90);
}

TEST(ResidualStep, StaysOnUnitCircle) {
  const ResidualDynamicsModel m = RandomResidualModel(3);
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    State x = RandomState(rng);
    for (int t = 0; t < 200; ++t) {
      x = ResidualStep(m, x, RandomInput(rng));
      ASSERT_NEAR(x.s * x.s + x.c * x.c, 1.0, 1e-12);
    }
  }
}

TEST(ResidualStep, BatchMatchesSingle) {
  const PredictionModel model(RandomResidualModel(4));
  std::mt19937_64 rng(12);
  std::vector<State> xs(37);
  std::vector<ControlInput> us(37);
  for (int i = 0; i < 37; ++i) {
    xs[i] = RandomState(rng);
    us[i] = RandomInput(rng);
  }
  std::vector<State> out(37);
  StepWorkspace ws;
  model.StepBatch(xs, us, out, ws);
  for (int i = 0; i < 37; ++i) EXPECT_EQ(out[i], model.Step(xs[i], us[i]));
}

TEST(Model, MaskValidation) {
  ResidualDynamicsModel m = RandomResidualModel(5);
  m.mask[0] = 0.5;
  EXPECT_THROW(m.Validate(), ConfigError);
  m = RandomResidualModel(5);
  m.mask = {1, 1, 0, 0, 1, 1, 1};  // five rows but a 3-output network
  EXPECT_THROW(m.Validate(), ConfigError);
}

TEST(Model, JsonRoundTripIsExact) {
  const PredictionModel model(RandomResidualModel(6));
  const PredictionModel back = ModelFromJson(ModelToJson(model));
  ASSERT_EQ(back.kind(), PredictionModel::Kind::kResidual);
  std::mt19937_64 rng(13);
  for (int i = 0; i < 50; ++i) {
    const State x = RandomState(rng);
    const ControlInput u = RandomInput(rng);
    EXPECT_EQ(back.Step(x, u), model.Step(x, u));
  }
  EXPECT_NE(ModelToJson(model).find("schema_version"), std::string::npos);
}

TEST(Model, StandardNnRoundTrip) {
  StandardNnModel s;
  s.nn.net = Mlp::RandomInit({9, 50, 50, 7}, 4);
  const PredictionModel model(s);
  const PredictionModel back = ModelFromJson(ModelToJson(model));
  ASSERT_EQ(back.kind(), PredictionModel::Kind::kStandardNn);
  const State x = State::FromPose(1, 1, 0.2, 0.1);
  EXPECT_EQ(back.Step(x, {20, 3}), model.Step(x, {20, 3}));
}

TEST(Model, BadJsonIsConfigError) {
  EXPECT_THROW(ModelFromJson("{\"schema_version\": 99}"), ConfigError);
  EXPECT_THROW(ModelFromJson("not json"), ConfigError);
}

}  // namespace
}  // namespace mppi_pid
