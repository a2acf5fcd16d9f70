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

#ifndef MPPI_PID_PATH_HPP_
#define MPPI_PID_PATH_HPP_

#include <filesystem>
#include <vector>

#include "mppi_pid/types.hpp"

namespace mppi_pid {

inline constexpr int kDefaultPathPoints = 800;

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;  // rad
};

/// Densely sampled reference path. Normals point left of the direction of
/// travel (tangent rotated by +90 degrees).
class ReferencePath {
 public:
  ReferencePath() = default;
  /// Builds tangents/normals/angles from points and (unnormalized)
  /// derivative directions.
  ReferencePath(std::vector<Vec2> points, const std::vector<Vec2>& directions);

  int size() const { return static_cast<int>(points_.size()); }
  const Vec2& point(int k) const { return points_[k]; }
  const Vec2& tangent(int k) const { return tangents_[k]; }
  const Vec2& normal(int k) const { return normals_[k]; }
  double angle(int k) const { return angles_[k]; }
  const Vec2& goal() const { return points_.back(); }
  const std::vector<Vec2>& points() const { return points_; }

  // Coordinates split out for the scan loops.
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }

 private:
  std::vector<Vec2> points_;
  std::vector<Vec2> tangents_;
  std::vector<Vec2> normals_;
  std::vector<double> angles_;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

/// Single cubic Hermite segment between two poses. Endpoint tangents follow
/// the headings with magnitude equal to the straight-line distance; the
/// curve is sampled at `count` uniform parameter values.
ReferencePath BuildHermitePath(const Pose2& start, const Pose2& goal,
                               int count = kDefaultPathPoints);

struct PathQuery {
  int index = 0;
  Vec2 point;
  Vec2 tangent;
  Vec2 normal;
  double angle = 0.0;
  double distance = 0.0;
};

/// Exhaustive argmin over the sampled points; ties go to the smaller index.
PathQuery NearestPoint(const ReferencePath& path, const Vec2& pos);

/// Exact nearest-point search that prunes blocks of consecutive points by
/// bounding circles. Returns the same index as NearestPoint for every query.
class NearestPointIndex {
 public:
  explicit NearestPointIndex(const ReferencePath& path, int block_size = 16);

  PathQuery Query(const Vec2& pos) const;
  const ReferencePath& path() const { return *path_; }

 private:
  struct Block {
    int begin = 0;
    int end = 0;
    Vec2 center;
    double radius = 0.0;
  };

  const ReferencePath* path_;
  std::vector<Block> blocks_;
};

struct PidErrors {
  double speed = 0.0;    // V_ref - V
  double lateral = 0.0;  // n*^T (p - p*)
  double angular = 0.0;  // wrap(psi - psi*)
};

PidErrors ComputePidErrors(const PathQuery& q, const State& x, double v_ref);
PidErrors ComputePidErrors(const ReferencePath& path, const State& x,
                           double v_ref);

/// CSV with header k,x,y,tx,ty,psi_star.
void ExportPathCsv(const ReferencePath& path,
                   const std::filesystem::path& file);

}  // namespace mppi_pid

#endif  // MPPI_PID_PATH_HPP_
