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
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mppi_pid/path.hpp"

namespace mppi_pid {
namespace {

constexpr double kPi = std::numbers::pi;

ReferencePath CurvePath() {
  return BuildHermitePath({0, 0, 0}, {2, 2, kPi / 2}, 800);
}

int BruteForceNearest(const ReferencePath& path, const Vec2& pos) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < path.size(); ++k) {
    const double d = (pos - path.point(k)).Norm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

TEST(HermitePath, StraightLineHasConstantTangent) {
  const ReferencePath path = BuildHermitePath({0, 0, 0}, {8, 0, 0}, 800);
  for (int k = 0; k < path.size(); ++k) {
    EXPECT_NEAR(path.point(k).y, 0.0, 1e-15);
    EXPECT_NEAR(path.tangent(k).x, 1.0, 1e-15);
    EXPECT_NEAR(path.tangent(k).y, 0.0, 1e-15);
  }
}

TEST(HermitePath, EndpointsInterpolateExactly) {
  const ReferencePath path = CurvePath();
  EXPECT_EQ(path.point(0), (Vec2{0, 0}));
  EXPECT_EQ(path.point(799), (Vec2{2, 2}));
  EXPECT_EQ(path.goal(), (Vec2{2, 2}));
  EXPECT_NEAR(path.angle(0), 0.0, 1e-15);
  EXPECT_NEAR(path.angle(799), kPi / 2, 1e-15);
}

TEST(HermitePath, FramesAreOrthonormal) {
  const ReferencePath path = CurvePath();
  for (int k = 0; k < path.size(); ++k) {
    EXPECT_NEAR(path.tangent(k).Norm(), 1.0, 1e-12);
    EXPECT_NEAR(path.normal(k).Norm(), 1.0, 1e-12);
    // normal = tangent rotated by +90 degrees
    EXPECT_DOUBLE_EQ(path.normal(k).x, -path.tangent(k).y);
    EXPECT_DOUBLE_EQ(path.normal(k).y, path.tangent(k).x);
  }
}

TEST(HermitePath, TurnIsSmoothAgainstAnalyticTangent) {
  const ReferencePath path = CurvePath();
  double worst = 0.0;
  for (int k = 0; k + 1 < path.size(); ++k) {
    const Vec2 step = path.point(k + 1) - path.point(k);
    worst = std::max(worst, std::abs(path.normal(k).Dot(step)) / step.Norm());
  }
  // Chord deviation from the tangent is of order the turning per step.
  EXPECT_LT(worst, 0.01);
}

TEST(HermitePath, Errors) {
  EXPECT_THROW(BuildHermitePath({1, 1, 0}, {1, 1, 1}, 800), ConfigError);
  EXPECT_THROW(BuildHermitePath({0, 0, 0}, {1, 0, 0}, 1), ConfigError);
}

TEST(NearestPoint, OnPoint) {
  const ReferencePath path = CurvePath();
  for (int k : {0, 17, 400, 799}) {
    const PathQuery q = NearestPoint(path, path.point(k));
    EXPECT_EQ(q.index, k);
    EXPECT_EQ(q.distance, 0.0);
  }
}

TEST(NearestPoint, TieGoesToSmallerIndex) {
  const ReferencePath path = BuildHermitePath({0, 0, 0}, {7, 0, 0}, 8);
  // points at x = 0..7; 3.5 is equidistant from 3 and 4
  const PathQuery q = NearestPoint(path, {3.5, 1.0});
  EXPECT_EQ(q.index, 3);
  const NearestPointIndex index(path, 2);
  EXPECT_EQ(index.Query({3.5, 1.0}).index, 3);
}

TEST(NearestPoint, MatchesExhaustiveScan) {
  const ReferencePath path = CurvePath();
  const NearestPointIndex index(path);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const Vec2 pos{u(rng), u(rng)};
    const int oracle = BruteForceNearest(path, pos);
    const PathQuery q = NearestPoint(path, pos);
    ASSERT_EQ(q.index, oracle);
    ASSERT_EQ(index.Query(pos).index, oracle);
    for (int k = 0; k < path.size(); ++k) {
      ASSERT_LE(q.distance, (pos - path.point(k)).Norm());
    }
  }
}

TEST(NearestPoint, IndexHandlesTiesAcrossBlocks) {
  // Exact ties between neighbours that fall in different blocks.
  std::vector<Vec2> pts, dirs;
  for (int k = 0; k < 32; ++k) {
    pts.push_back({static_cast<double>(k), 0.0});
    dirs.push_back({1.0, 0.0});
  }
  const ReferencePath path(pts, dirs);
  const NearestPointIndex index(path, 4);
  for (int k = 0; k + 1 < 32; ++k) {
    const Vec2 pos{k + 0.5, -2.0};
    EXPECT_EQ(NearestPoint(path, pos).index, k);
    EXPECT_EQ(index.Query(pos).index, k);
  }
}

TEST(PidErrors, ZeroOnPath) {
  const ReferencePath path = CurvePath();
  const int k = 300;
  const State x = State::FromPose(path.point(k).x, path.point(k).y,
                                  path.angle(k), 0.1);
  const PidErrors e = ComputePidErrors(path, x, 0.1);
  EXPECT_NEAR(e.speed, 0.0, 1e-15);
  EXPECT_EQ(e.lateral, 0.0);
  EXPECT_NEAR(e.angular, 0.0, 1e-15);
}

TEST(PidErrors, LeftOfEastboundIsPositive) {
  const ReferencePath path = BuildHermitePath({0, 0, 0}, {8, 0, 0}, 800);
  const PidErrors e = ComputePidErrors(path, State::FromPose(4.0, 0.5, 0.0), 0.1);
  EXPECT_NEAR(e.lateral, 0.5, 1e-12);
  EXPECT_NEAR(e.speed, 0.1, 0.0);
}

TEST(PidErrors, HeadingWrapsByTwoPi) {
  const ReferencePath path = CurvePath();
  const int k = 500;
  const PathQuery q = NearestPoint(path, path.point(k));
  const State x = State::FromPose(q.point.x, q.point.y, q.angle + 2 * kPi);
  EXPECT_NEAR(ComputePidErrors(q, x, 0.1).angular, 0.0, 1e-12);
}

TEST(PidErrors, LateralAntisymmetricUnderMirror) {
  const ReferencePath path = CurvePath();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> off(-0.05, 0.05);
  std::uniform_int_distribution<int> idx(5, 794);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = idx(rng);
    const double d = off(rng);
    const Vec2 p = path.point(k) + path.normal(k) * d;
    const Vec2 m = path.point(k) - path.normal(k) * d;
    const PathQuery qp = NearestPoint(path, p);
    const PathQuery qm = NearestPoint(path, m);
    ASSERT_EQ(qp.index, k);
    ASSERT_EQ(qm.index, k);
    const double ep = ComputePidErrors(qp, State::FromPose(p.x, p.y, 0), 0.1).lateral;
    const double em = ComputePidErrors(qm, State::FromPose(m.x, m.y, 0), 0.1).lateral;
    EXPECT_NEAR(ep, -em, 1e-12);
  }
}

TEST(PidErrors, AngularInHalfOpenRange) {
  const ReferencePath path = CurvePath();
  const PathQuery q = NearestPoint(path, {0.0, 0.0});
  for (int i = -2000; i <= 2000; ++i) {
    const double psi = i * 0.01;
    const double e = ComputePidErrors(q, State::FromPose(0, 0, psi), 0.1).angular;
    EXPECT_GT(e, -kPi);
    EXPECT_LE(e, kPi);
  }
  EXPECT_EQ(WrapAngle(-kPi), kPi);
  EXPECT_EQ(WrapAngle(kPi), kPi);
}

TEST(PathCsv, HeaderAndRows) {
  const auto file = std::filesystem::temp_directory_path() / "mppi_pid_path.csv";
  ExportPathCsv(CurvePath(), file);
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,x,y,tx,ty,psi_star");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 800);
  std::filesystem::remove(file);
}

}  // namespace
}  // namespace mppi_pid
