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
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mppi_pid/data.hpp"

namespace mppi_pid {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mppi_pid_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

LogGenConfig SmallLogs() {
  LogGenConfig cfg;
  cfg.scenarios = 3;
  cfg.duration = 40.0;
  return cfg;
}

// A log sampled exactly every h with no gaps.
RawLog UniformLog(int n, double h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  RawLog log;
  for (int k = 0; k < n; ++k) {
    RawRecord r;
    r.t = k * h;
    r.X = 0.01 * k;
    r.Y = 0.5 * std::sin(0.01 * k);
    r.psi = 0.002 * k;
    r.vX = 0.1 + 0.001 * g(rng);
    r.a = 40.0;
    log.records.push_back(r);
  }
  return log;
}

TEST(Plant, NoiselessZeroResidualReplaysEuler) {
  GroundTruthPlant plant;
  plant.residual = {0.0, 0.0, 0.0};
  plant.process_noise = {0.0, 0.0, 0.0};
  LogGenConfig cfg = SmallLogs();
  cfg.gap_probability = 0.0;
  cfg.timestamp_jitter = 0.0;
  const std::vector<RawLog> logs = GenerateLogs(plant, cfg);
  for (const RawLog& log : logs) {
    for (std::size_t k = 0; k + 1 < log.records.size(); ++k) {
      const RawRecord& a = log.records[k];
      const RawRecord& b = log.records[k + 1];
      const State x{a.X, a.Y, std::sin(a.psi), std::cos(a.psi), a.vX, a.vY, a.r};
      const State y = EulerStep(x, {a.a, a.delta}, plant.phys, plant.h);
      ASSERT_EQ(b.X, y.X);
      ASSERT_EQ(b.Y, y.Y);
      ASSERT_NEAR(b.vX, y.vX, 1e-14);
      ASSERT_NEAR(b.vY, y.vY, 1e-14);
      ASSERT_NEAR(b.r, y.r, 1e-13);
      ASSERT_NEAR(WrapAngle(b.psi - std::atan2(y.s, y.c)), 0.0, 1e-13);
    }
  }
}

TEST(Plant, ResidualActsOnVelocityRowsOnly) {
  const GroundTruthPlant plant;
  const State x{0.3, 0.2, 0.6, 0.8, 0.2, 0.1, 0.4};
  const StateVector d = plant.ResidualDerivative(x, {50.0, 40.0});
  for (int i = 0; i < 4; ++i) EXPECT_EQ(d[i], 0.0);
  EXPECT_LT(d[kVx], 0.0);
  EXPECT_LT(d[kYawRate], 0.0);
}

TEST(GenerateLogs, DeterministicForSeed) {
  const GroundTruthPlant plant;
  const auto a = GenerateLogs(plant, SmallLogs());
  const auto b = GenerateLogs(plant, SmallLogs());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].records.size(), b[i].records.size());
    for (std::size_t k = 0; k < a[i].records.size(); ++k) {
      const RawRecord& p = a[i].records[k];
      const RawRecord& q = b[i].records[k];
      ASSERT_TRUE(p.t == q.t && p.X == q.X && p.psi == q.psi && p.vX == q.vX &&
                  p.r == q.r && p.a == q.a && p.delta == q.delta);
    }
  }
  LogGenConfig other = SmallLogs();
  other.seed = 99;
  EXPECT_NE(GenerateLogs(plant, other)[0].records[10].X, a[0].records[10].X);
}

TEST(GenerateLogs, RespectsInputBoundsAndHasGaps) {
  LogGenConfig cfg;
  cfg.scenarios = 4;
  cfg.duration = 200.0;
  cfg.gap_probability = 5e-3;
  const auto logs = GenerateLogs(GroundTruthPlant{}, cfg);
  int gaps = 0;
  for (const RawLog& log : logs) {
    for (std::size_t k = 0; k < log.records.size(); ++k) {
      const RawRecord& r = log.records[k];
      ASSERT_GE(r.a, 0.0);
      ASSERT_LE(r.a, 100.0);
      ASSERT_LE(std::abs(r.delta), 65.0);
      if (k > 0) {
        const double dt = r.t - log.records[k - 1].t;
        ASSERT_GT(dt, 0.0);
        gaps += dt > 0.1;
      }
    }
  }
  EXPECT_GT(gaps, 0);
}

TEST(GenerateLogs, DefaultSizeNearTarget) {
  const auto logs = GenerateLogs(GroundTruthPlant{}, LogGenConfig{});
  const double n = static_cast<double>(CountSamples(logs));
  EXPECT_NEAR(n, 70900.0, 0.02 * 70900.0);
}

TEST(GenerateLogs, RejectsShortScenarios) {
  LogGenConfig cfg;
  cfg.duration = 5.0;
  EXPECT_THROW(GenerateLogs(GroundTruthPlant{}, cfg), ConfigError);
}

TEST(RawLogCsv, RoundTrip) {
  const fs::path dir = TempDir("rawlog");
  const RawLog log = GenerateLogs(GroundTruthPlant{}, SmallLogs())[0];
  WriteRawLogCsv(log, dir / "log.csv");
  const RawLog back = ReadRawLogCsv(dir / "log.csv");
  ASSERT_EQ(back.records.size(), log.records.size());
  for (std::size_t k = 0; k < log.records.size(); ++k) {
    ASSERT_EQ(back.records[k].t, log.records[k].t);
    ASSERT_EQ(back.records[k].vY, log.records[k].vY);
    ASSERT_EQ(back.records[k].delta, log.records[k].delta);
  }
  fs::remove_all(dir);
}

TEST(Filters, ConstantSignalUnchanged) {
  const std::vector<double> c(50, 3.25);
  for (int w : {3, 5, 7, 9}) {
    EXPECT_EQ(MedianFilter(c, w), c);
    EXPECT_EQ(MovingAverage(c, w), c);
  }
}

TEST(Filters, MedianRemovesImpulse) {
  std::vector<double> x(30, 40.0);
  x[12] = 95.0;
  const std::vector<double> m = MedianFilter(x, 3);
  for (double v : m) EXPECT_EQ(v, 40.0);
}

TEST(Filters, TruncatedEdgesAndLength) {
  const std::vector<double> x{1, 2, 3, 4, 10};
  const std::vector<double> ma = MovingAverage(x, 5);
  ASSERT_EQ(ma.size(), x.size());
  EXPECT_DOUBLE_EQ(ma[0], 2.0);  // mean of 1, 2, 3
  EXPECT_DOUBLE_EQ(ma[1], 2.5);  // mean of 1..4
  EXPECT_DOUBLE_EQ(ma[2], 4.0);
  EXPECT_DOUBLE_EQ(ma[4], 17.0 / 3.0);
  const std::vector<double> md = MedianFilter(x, 3);
  ASSERT_EQ(md.size(), x.size());
  EXPECT_DOUBLE_EQ(md[0], 1.5);  // even window at the edge
  EXPECT_DOUBLE_EQ(md[4], 7.0);
}

TEST(Preprocess, SixtySecondsGivesTwelveSegmentsSplitEightTwoTwo) {
  const PreprocessConfig cfg;
  const DatasetSplit d = Preprocess({UniformLog(900, cfg.h, 1)}, cfg);
  EXPECT_EQ(d.train.size(), 8u);
  EXPECT_EQ(d.val.size(), 2u);
  EXPECT_EQ(d.test.size(), 2u);
  for (const auto* split : {&d.train, &d.val, &d.test}) {
    for (const Segment& s : *split) EXPECT_EQ(s.size(), 75u);
  }
}

TEST(Preprocess, SplitSizesArithmetic) {
  EXPECT_EQ(SplitSizes(12, 0.7, 0.15), (std::array<int, 3>{8, 2, 2}));
  EXPECT_EQ(SplitSizes(100, 0.7, 0.15), (std::array<int, 3>{70, 15, 15}));
  for (int n = 0; n < 500; ++n) {
    const auto s = SplitSizes(n, 0.7, 0.15);
    EXPECT_EQ(s[0] + s[1] + s[2], n);
    EXPECT_GE(s[0], static_cast<int>(std::floor(0.7 * n)) - 1);
  }
}

TEST(Preprocess, PartitionIsDisjointAndExhaustive) {
  const auto logs = GenerateLogs(GroundTruthPlant{}, SmallLogs());
  const DatasetSplit d = Preprocess(logs, PreprocessConfig{});
  std::set<double> t0s;
  std::size_t total = 0;
  for (const auto* split : {&d.train, &d.val, &d.test}) {
    for (const Segment& s : *split) {
      // segments from different logs can share t0; pair it with X
      t0s.insert(s.t0 * 1e6 + s.states[0].X);
      ++total;
    }
  }
  EXPECT_EQ(t0s.size(), total);
  const auto sizes = SplitSizes(static_cast<int>(total), 0.7, 0.15);
  EXPECT_EQ(static_cast<int>(d.train.size()), sizes[0]);
  EXPECT_EQ(static_cast<int>(d.val.size()), sizes[1]);
}

TEST(Preprocess, UnitHeadingAndUniformSpacing) {
  const auto logs = GenerateLogs(GroundTruthPlant{}, SmallLogs());
  const PreprocessConfig cfg;
  const DatasetSplit d = Preprocess(logs, cfg);
  ASSERT_FALSE(d.train.empty());
  for (const Segment& s : d.train) {
    EXPECT_EQ(s.h, cfg.h);
    for (const State& x : s.states) {
      ASSERT_NEAR(x.s * x.s + x.c * x.c, 1.0, 2.3e-16);
    }
  }
}

TEST(Preprocess, GapsSplitIntervalsAndShortOnesDrop) {
  const PreprocessConfig cfg;
  RawLog log = UniformLog(200, cfg.h, 2);
  // 0.2 s gap after sample 100, then a 5-sample tail that is too short.
  RawLog gapped;
  for (int k = 0; k < 100; ++k) gapped.records.push_back(log.records[k]);
  for (int k = 0; k < 5; ++k) {
    RawRecord r = log.records[100 + k];
    r.t += 0.2 + k * 0.0;
    gapped.records.push_back(r);
  }
  const DatasetSplit d = Preprocess({gapped}, cfg);
  EXPECT_EQ(d.intervals, 2);
  EXPECT_EQ(d.dropped_intervals, 1);
  EXPECT_EQ(d.train.size() + d.val.size() + d.test.size(), 1u);
}

TEST(Preprocess, HeadingUnwrappedAcrossPi) {
  const PreprocessConfig cfg;
  RawLog log;
  for (int k = 0; k < 160; ++k) {
    RawRecord r;
    r.t = k * cfg.h;
    r.psi = WrapAngle(3.0 + 0.01 * k);  // crosses +pi
    log.records.push_back(r);
  }
  const DatasetSplit d = Preprocess({log}, cfg);
  for (const auto* split : {&d.train, &d.val, &d.test}) {
    for (const Segment& s : *split) {
      for (std::size_t k = 1; k < s.size(); ++k) {
        const double step = WrapAngle(s.states[k].Heading() - s.states[k - 1].Heading());
        ASSERT_LT(std::abs(step), 0.05);
      }
    }
  }
}

TEST(Preprocess, EmptyInputIsError) {
  EXPECT_THROW(Preprocess({}, PreprocessConfig{}), ConfigError);
}

TEST(Dataset, WriteReadRoundTrip) {
  const fs::path dir = TempDir("dataset");
  const DatasetSplit d =
      Preprocess(GenerateLogs(GroundTruthPlant{}, SmallLogs()), PreprocessConfig{});
  WriteDataset(d, dir);
  const std::vector<Segment> train = ReadSegments(dir / "train");
  ASSERT_EQ(train.size(), d.train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    ASSERT_EQ(train[i].states, d.train[i].states);
    ASSERT_EQ(train[i].inputs, d.train[i].inputs);
  }
  EXPECT_THROW(ReadSegments(dir / "missing"), ConfigError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace mppi_pid
