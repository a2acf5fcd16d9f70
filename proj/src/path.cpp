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

#include "mppi_pid/path.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace mppi_pid {

ReferencePath::ReferencePath(std::vector<Vec2> points,
                             const std::vector<Vec2>& directions)
    : points_(std::move(points)) {
  if (points_.size() < 2 || directions.size() != points_.size()) {
    throw ConfigError("reference path needs at least two points");
  }
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const double n = directions[k].Norm();
    if (!(n > 0)) {
      throw ConfigError("reference path has a zero tangent at point " +
                        std::to_string(k));
    }
    const Vec2 t = directions[k] * (1.0 / n);
    tangents_.push_back(t);
    normals_.push_back({-t.y, t.x});
    angles_.push_back(std::atan2(t.y, t.x));
    xs_.push_back(points_[k].x);
    ys_.push_back(points_[k].y);
    if (k > 0 && points_[k] == points_[k - 1]) {
      throw ConfigError("reference path has repeated consecutive points");
    }
  }
}

ReferencePath BuildHermitePath(const Pose2& start, const Pose2& goal,
                               int count) {
  if (count < 2) throw ConfigError("path needs at least 2 points");
  const Vec2 p0{start.x, start.y};
  const Vec2 p1{goal.x, goal.y};
  const double length = (p1 - p0).Norm();
  if (!(length > 0)) throw ConfigError("zero-length path: start equals goal");
  const Vec2 m0{length * std::cos(start.psi), length * std::sin(start.psi)};
  const Vec2 m1{length * std::cos(goal.psi), length * std::sin(goal.psi)};

  std::vector<Vec2> points(count);
  std::vector<Vec2> dirs(count);
  for (int k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / (count - 1);
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    points[k] = p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11;
    const double d00 = 6 * t2 - 6 * t;
    const double d10 = 3 * t2 - 4 * t + 1;
    const double d01 = -6 * t2 + 6 * t;
    const double d11 = 3 * t2 - 2 * t;
    dirs[k] = p0 * d00 + m0 * d10 + p1 * d01 + m1 * d11;
  }
  return ReferencePath(std::move(points), dirs);
}

namespace {

PathQuery MakeQuery(const ReferencePath& path, int k, double d2) {
  return {k,           path.point(k), path.tangent(k),
          path.normal(k), path.angle(k), std::sqrt(d2)};
}

inline double SquaredDistance(double px, double py, double x, double y) {
  const double dx = px - x;
  const double dy = py - y;
  return dx * dx + dy * dy;
}

}  // namespace

PathQuery NearestPoint(const ReferencePath& path, const Vec2& pos) {
  const std::vector<double>& xs = path.xs();
  const std::vector<double>& ys = path.ys();
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < path.size(); ++k) {
    const double d2 = SquaredDistance(pos.x, pos.y, xs[k], ys[k]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  return MakeQuery(path, best, best_d2);
}

NearestPointIndex::NearestPointIndex(const ReferencePath& path, int block_size)
    : path_(&path) {
  if (block_size < 1) throw ConfigError("block size must be positive");
  for (int begin = 0; begin < path.size(); begin += block_size) {
    Block b;
    b.begin = begin;
    b.end = std::min(path.size(), begin + block_size);
    for (int k = b.begin; k < b.end; ++k) b.center = b.center + path.point(k);
    b.center = b.center * (1.0 / (b.end - b.begin));
    for (int k = b.begin; k < b.end; ++k) {
      b.radius = std::max(b.radius, (path.point(k) - b.center).Norm());
    }
    // Slack so that rounding in the bound never prunes a true minimizer.
    b.radius = b.radius * (1.0 + 1e-9) + 1e-12;
    blocks_.push_back(b);
  }
}

PathQuery NearestPointIndex::Query(const Vec2& pos) const {
  const std::vector<double>& xs = path_->xs();
  const std::vector<double>& ys = path_->ys();
  const std::size_t nb = blocks_.size();

  // Lower bound on the distance from pos to any point of each block.
  double bounds[256];
  std::vector<double> heap_bounds;
  double* lb = bounds;
  if (nb > 256) {
    heap_bounds.resize(nb);
    lb = heap_bounds.data();
  }
  std::size_t seed = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    lb[b] = std::max(0.0, (pos - blocks_[b].center).Norm() - blocks_[b].radius);
    if (lb[b] < lb[seed]) seed = b;
  }

  double best_d2 = std::numeric_limits<double>::infinity();
  for (int k = blocks_[seed].begin; k < blocks_[seed].end; ++k) {
    best_d2 = std::min(best_d2, SquaredDistance(pos.x, pos.y, xs[k], ys[k]));
  }
  const double cutoff = std::sqrt(best_d2) * (1.0 + 1e-12);

  int best = -1;
  best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < nb; ++b) {
    if (lb[b] > cutoff) continue;
    for (int k = blocks_[b].begin; k < blocks_[b].end; ++k) {
      const double d2 = SquaredDistance(pos.x, pos.y, xs[k], ys[k]);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = k;
      }
    }
  }
  return MakeQuery(*path_, best, best_d2);
}

PidErrors ComputePidErrors(const PathQuery& q, const State& x, double v_ref) {
  PidErrors e;
  e.speed = v_ref - x.Speed();
  e.lateral = q.normal.Dot(Vec2{x.X, x.Y} - q.point);
  e.angular = WrapAngle(x.Heading() - q.angle);
  return e;
}

PidErrors ComputePidErrors(const ReferencePath& path, const State& x,
                           double v_ref) {
  return ComputePidErrors(NearestPoint(path, {x.X, x.Y}), x, v_ref);
}

void ExportPathCsv(const ReferencePath& path,
                   const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.precision(17);
  out << "k,x,y,tx,ty,psi_star\n";
  for (int k = 0; k < path.size(); ++k) {
    out << k << ',' << path.point(k).x << ',' << path.point(k).y << ','
        << path.tangent(k).x << ',' << path.tangent(k).y << ','
        << path.angle(k) << '\n';
  }
}

}  // namespace mppi_pid
