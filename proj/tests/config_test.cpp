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

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "mppi_pid/config.hpp"

namespace mppi_pid {
namespace {

TEST(Config, DefaultsMatchTunedValues) {
  const ExperimentConfig c;
  EXPECT_EQ(c.plant.h, 0.0667);
  EXPECT_EQ(c.optimizer.horizon, 60);
  EXPECT_EQ(c.optimizer.samples, 2048);
  EXPECT_EQ(c.optimizer.iterations, 3);
  EXPECT_EQ(c.optimizer.lambda, 1.0);
  EXPECT_EQ(c.optimizer.sigma_u, (InputVector{8.0, 6.0}));
  EXPECT_EQ(c.optimizer.sigma_theta,
            (PidGains{10, 0.1, 5, 30, 0.05, 2, 20, 0.05, 2}));
  EXPECT_EQ(c.initial_gains, (PidGains{50, 0.2, 10, 100, 0.1, 5, 150, 0.1, 3}));
  EXPECT_EQ(c.u_bias, (ControlInput{40.0, 0.0}));
  EXPECT_EQ(c.cost.w_goal, 50000.0);
  EXPECT_EQ(c.cost.v_ref, 0.10);
  EXPECT_EQ(c.train.learning_rate, 1e-4);
  EXPECT_EQ(c.train.batch_size, 1024);
  EXPECT_EQ(c.train.grad_clip, 1.0);
  EXPECT_EQ(c.train.next_state_noise_std, 1e-4);
  EXPECT_EQ(c.train.early_stop_patience, 10);
  EXPECT_EQ(c.residual_speed_threshold, 0.20);
  const InputConstraints k = c.Constraints();
  EXPECT_DOUBLE_EQ(k.du_max[0], 32.0 * 0.0667);
  EXPECT_DOUBLE_EQ(k.du_max[1], 100.0 * 0.0667);
  EXPECT_NO_THROW(c.Validate());
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.optimizer.samples = 16;
  c.cost.w_path = 123.0;
  c.seeds = {4, 5};
  const ExperimentConfig back = ConfigFromJson(ConfigToJson(c));
  EXPECT_EQ(ConfigToJson(back), ConfigToJson(c));
  EXPECT_EQ(back.optimizer.samples, 16);
}

TEST(Config, PartialJsonMergesWithDefaults) {
  const ExperimentConfig c =
      ConfigFromJson(R"({"optimizer": {"samples": 16}, "controller": "mppi"})");
  EXPECT_EQ(c.optimizer.samples, 16);
  EXPECT_EQ(c.optimizer.horizon, 60);
  EXPECT_EQ(c.controller, ControllerKind::kMppi);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(ConfigFromJson(R"({"optimiser": {}})"), ConfigError);
  EXPECT_THROW(ConfigFromJson(R"({"optimizer": {"sample": 16}})"), ConfigError);
}

TEST(Config, WrongTypesAndValuesAreRejected) {
  EXPECT_THROW(ConfigFromJson(R"({"optimizer": {"samples": "many"}})"), ConfigError);
  EXPECT_THROW(ConfigFromJson("{not json"), ConfigError);
  EXPECT_THROW(ConfigFromJson(R"({"controller": "lqr"})"), ConfigError);
  EXPECT_THROW(ConfigFromJson(R"({"logs": {"duration": 0}})"), ConfigError);
}

TEST(Config, DottedOverrides) {
  const ExperimentConfig c = ApplyOverrides(
      ExperimentConfig{}, {"optimizer.samples=16", "cost.w_path=250.5",
                           "scenario=straight", "seeds=[9]"});
  EXPECT_EQ(c.optimizer.samples, 16);
  EXPECT_EQ(c.cost.w_path, 250.5);
  EXPECT_EQ(c.scenario, "straight");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{9}));
  EXPECT_THROW(ApplyOverrides(ExperimentConfig{}, {"optimizer.bogus=1"}), ConfigError);
  EXPECT_THROW(ApplyOverrides(ExperimentConfig{}, {"no_equals_sign"}), ConfigError);
}

TEST(Config, LoadFromFile) {
  const auto file = std::filesystem::temp_directory_path() / "mppi_pid_cfg.json";
  {
    std::ofstream out(file);
    out << R"({"scenario": "s_curve", "scenario_duration": 12.5})";
  }
  const ExperimentConfig c = LoadConfig(file);
  const Scenario s = c.MakeScenario();
  EXPECT_EQ(s.name, "s_curve");
  EXPECT_EQ(s.duration, 12.5);
  std::filesystem::remove(file);
  EXPECT_THROW(LoadConfig(file), ConfigError);
}

}  // namespace
}  // namespace mppi_pid
