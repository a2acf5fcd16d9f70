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

#include "mppi_pid/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mppi_pid/control.hpp"

namespace mppi_pid {

// ---------------------------------------------------------------------------
// Plant

StateVector GroundTruthPlant::ResidualDerivative(const State& x,
                                                 const ControlInput& u) const {
  StateVector d{};
  const double speed = x.Speed();
  d[kVx] = -residual.drag * speed * x.vX;
  d[kVy] = -residual.drag * speed * x.vY;
  if (residual.steer_saturation > 0) {
    const double delta = DegToRad(u.delta);
    const double sat = residual.steer_saturation;
    d[kYawRate] = phys.k_delta * speed * (sat * std::tanh(delta / sat) - delta);
  }
  d[kYawRate] -= residual.yaw_cubic * x.r * x.r * x.r;
  return d;
}

State GroundTruthPlant::Step(const State& x, const ControlInput& u,
                             std::mt19937_64* rng) const {
  StateVector next = EulerStep(x, u, phys, h).ToArray();
  if (!residual.IsZero()) {
    const StateVector d = ResidualDerivative(x, u);
    for (int i = 0; i < kStateDim; ++i) next[i] += h * d[i];
  }
  if (rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    next[kVx] += process_noise[0] * normal(*rng);
    next[kVy] += process_noise[1] * normal(*rng);
    next[kYawRate] += process_noise[2] * normal(*rng);
  }
  return NormalizeTrig(State::FromArray(next));
}

// ---------------------------------------------------------------------------
// Log generation

void LogGenConfig::Validate() const {
  if (scenarios < 1) throw ConfigError("need at least one scenario");
  if (!(duration > 5.0)) {
    throw ConfigError("scenario duration must exceed 5 s");
  }
  if (gap_probability < 0 || gap_probability >= 1) {
    throw ConfigError("gap probability must lie in [0, 1)");
  }
  if (gap_min_samples < 2 || gap_max_samples < gap_min_samples) {
    throw ConfigError("gap lengths must satisfy 2 <= min <= max");
  }
  if (timestamp_jitter < 0) throw ConfigError("jitter must be nonnegative");
}

namespace {

// Piecewise-constant random targets followed through a first-order lag.
struct Excitation {
  double value = 0.0;
  double target = 0.0;
  double remaining = 0.0;
};

}  // namespace

std::vector<RawLog> GenerateLogs(const GroundTruthPlant& plant,
                                 const LogGenConfig& cfg) {
  cfg.Validate();
  const InputConstraints limits;
  const double h = plant.h;
  std::vector<RawLog> logs;
  for (int sc = 0; sc < cfg.scenarios; ++sc) {
    std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(sc));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    State x = State::FromPose(uniform(-5, 5), uniform(-5, 5),
                              uniform(-std::numbers::pi, std::numbers::pi));
    ControlInput u{0.0, 0.0};
    Excitation acc;
    Excitation steer;
    RawLog log;
    const int steps = static_cast<int>(std::floor(cfg.duration / h)) + 1;
    int skip = 0;
    for (int k = 0; k < steps; ++k) {
      // Lagged random targets, then the feasible-set projection.
      if (acc.remaining <= 0) {
        acc.target = unit(rng) < 0.15 ? 0.0 : uniform(10.0, 100.0);
        acc.remaining = uniform(2.0, 8.0);
      }
      if (steer.remaining <= 0) {
        steer.target = unit(rng) < 0.3 ? 0.0 : uniform(-65.0, 65.0);
        steer.remaining = uniform(1.0, 5.0);
      }
      acc.remaining -= h;
      steer.remaining -= h;
      acc.value += (acc.target - acc.value) * (h / 0.8) + 1.5 * normal(rng);
      steer.value += (steer.target - steer.value) * (h / 0.5) + 1.5 * normal(rng);
      u = ProjectInput({acc.value, steer.value}, u, limits);
      acc.value = u.a;
      steer.value = u.delta;

      if (skip > 0) {
        --skip;
      } else {
        RawRecord rec;
        rec.t = k * h;
        if (cfg.timestamp_jitter > 0) {
          rec.t += uniform(-cfg.timestamp_jitter, cfg.timestamp_jitter);
        }
        rec.X = x.X;
        rec.Y = x.Y;
        rec.psi = x.Heading();
        rec.vX = x.vX;
        rec.vY = x.vY;
        rec.r = x.r;
        rec.a = u.a;
        rec.delta = u.delta;
        log.records.push_back(rec);
        if (k > 0 && unit(rng) < cfg.gap_probability) {
          skip = cfg.gap_min_samples +
                 static_cast<int>(unit(rng) *
                                  (cfg.gap_max_samples - cfg.gap_min_samples + 1));
        }
      }
      x = plant.Step(x, u, &rng);
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

std::size_t CountSamples(const std::vector<RawLog>& logs) {
  std::size_t n = 0;
  for (const RawLog& log : logs) n += log.records.size();
  return n;
}

namespace {

std::vector<double> ParseCsvLine(const std::string& line) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  return values;
}

std::string TrimCr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void WriteRawLogCsv(const RawLog& log, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.precision(17);
  out << "t,X,Y,psi,vX,vY,r,a,delta\n";
  for (const RawRecord& r : log.records) {
    out << r.t << ',' << r.X << ',' << r.Y << ',' << r.psi << ',' << r.vX << ','
        << r.vY << ',' << r.r << ',' << r.a << ',' << r.delta << '\n';
  }
}

RawLog ReadRawLogCsv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  std::string line;
  std::getline(in, line);
  if (TrimCr(line) != "t,X,Y,psi,vX,vY,r,a,delta") {
    throw ConfigError(file.string() + ": unexpected raw log header");
  }
  RawLog log;
  while (std::getline(in, line)) {
    line = TrimCr(line);
    if (line.empty()) continue;
    const std::vector<double> v = ParseCsvLine(line);
    if (v.size() != 9) throw ConfigError(file.string() + ": bad row '" + line + "'");
    log.records.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]});
  }
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    if (!(log.records[i].t > log.records[i - 1].t)) {
      throw ConfigError(file.string() + ": timestamps are not strictly increasing");
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Filters

std::vector<double> MedianFilter(std::span<const double> x, int window) {
  const int n = static_cast<int>(x.size());
  const int half = window / 2;
  std::vector<double> out(n);
  std::vector<double> buf;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    buf.assign(x.begin() + lo, x.begin() + hi + 1);
    std::sort(buf.begin(), buf.end());
    const std::size_t m = buf.size();
    out[i] = m % 2 == 1 ? buf[m / 2] : 0.5 * (buf[m / 2 - 1] + buf[m / 2]);
  }
  return out;
}

std::vector<double> MovingAverage(std::span<const double> x, int window) {
  const int n = static_cast<int>(x.size());
  const int half = window / 2;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double sum = 0.0;
    for (int k = lo; k <= hi; ++k) sum += x[k];
    out[i] = sum / (hi - lo + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessing

int PreprocessConfig::SegmentLength() const {
  return static_cast<int>(std::lround(segment_duration / h));
}

std::array<int, 3> SplitSizes(int n, double train_fraction,
                              double val_fraction) {
  const double test_fraction = 1.0 - train_fraction - val_fraction;
  const int n_val = static_cast<int>(std::lround(val_fraction * n));
  const int n_test = static_cast<int>(std::lround(test_fraction * n));
  return {n - n_val - n_test, n_val, n_test};
}

namespace {

enum Signal { kSigX, kSigY, kSigPsi, kSigVx, kSigVy, kSigR, kSigA, kSigDelta, kNumSignals };

double Field(const RawRecord& r, int sig) {
  switch (sig) {
    case kSigX: return r.X;
    case kSigY: return r.Y;
    case kSigPsi: return r.psi;
    case kSigVx: return r.vX;
    case kSigVy: return r.vY;
    case kSigR: return r.r;
    case kSigA: return r.a;
    default: return r.delta;
  }
}

std::vector<std::vector<RawRecord>> SplitAtGaps(const RawLog& log,
                                                double threshold) {
  std::vector<std::vector<RawRecord>> intervals;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    if (i == 0 || log.records[i].t - log.records[i - 1].t > threshold) {
      intervals.emplace_back();
    }
    intervals.back().push_back(log.records[i]);
  }
  return intervals;
}

}  // namespace

DatasetSplit Preprocess(const std::vector<RawLog>& logs,
                        const PreprocessConfig& cfg) {
  if (logs.empty()) throw ConfigError("no logs to preprocess");
  if (!(cfg.h > 0)) throw ConfigError("resampling step must be positive");
  const int largest_window = std::max({cfg.median_window, cfg.pose_window,
                                       cfg.velocity_window, cfg.input_window});
  const int seg_len = cfg.SegmentLength();
  if (seg_len < 2) throw ConfigError("segments must hold at least 2 samples");

  DatasetSplit out;
  std::vector<Segment> segments;
  for (const RawLog& log : logs) {
    for (std::vector<RawRecord>& interval : SplitAtGaps(log, cfg.gap_threshold)) {
      ++out.intervals;
      // Continuous heading before interpolation and filtering.
      for (std::size_t i = 1; i < interval.size(); ++i) {
        interval[i].psi = interval[i - 1].psi +
                          WrapAngle(interval[i].psi - interval[i - 1].psi);
      }
      const double t0 = interval.front().t;
      const double span_t = interval.back().t - t0;
      const int n = static_cast<int>(std::floor(span_t / cfg.h + 1e-9)) + 1;
      if (n < largest_window || interval.size() < 2) {
        ++out.dropped_intervals;
        continue;
      }
      std::array<std::vector<double>, kNumSignals> sig;
      for (auto& s : sig) s.resize(n);
      std::size_t j = 0;
      for (int k = 0; k < n; ++k) {
        const double t = t0 + k * cfg.h;
        while (j + 2 < interval.size() && interval[j + 1].t < t) ++j;
        const RawRecord& lo = interval[j];
        const RawRecord& hi = interval[j + 1];
        const double alpha = std::clamp((t - lo.t) / (hi.t - lo.t), 0.0, 1.0);
        for (int q = 0; q < kNumSignals; ++q) {
          const double a = Field(lo, q);
          const double b = Field(hi, q);
          sig[q][k] = a + alpha * (b - a);
        }
      }
      for (int q = 0; q < kNumSignals; ++q) {
        const int window = q <= kSigPsi ? cfg.pose_window
                           : q <= kSigR ? cfg.velocity_window
                                        : cfg.input_window;
        sig[q] = MovingAverage(MedianFilter(sig[q], cfg.median_window), window);
      }
      for (int begin = 0; begin + seg_len <= n; begin += seg_len) {
        Segment seg;
        seg.t0 = t0 + begin * cfg.h;
        seg.h = cfg.h;
        for (int k = begin; k < begin + seg_len; ++k) {
          State x;
          x.X = sig[kSigX][k];
          x.Y = sig[kSigY][k];
          x.s = std::sin(sig[kSigPsi][k]);
          x.c = std::cos(sig[kSigPsi][k]);
          x.vX = sig[kSigVx][k];
          x.vY = sig[kSigVy][k];
          x.r = sig[kSigR][k];
          seg.states.push_back(x);
          seg.inputs.push_back({sig[kSigA][k], sig[kSigDelta][k]});
        }
        segments.push_back(std::move(seg));
      }
    }
  }

  std::vector<int> order(segments.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.split_seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto sizes = SplitSizes(static_cast<int>(segments.size()),
                                cfg.train_fraction, cfg.val_fraction);
  for (int i = 0; i < static_cast<int>(order.size()); ++i) {
    Segment& seg = segments[order[i]];
    if (i < sizes[0]) {
      out.train.push_back(std::move(seg));
    } else if (i < sizes[0] + sizes[1]) {
      out.val.push_back(std::move(seg));
    } else {
      out.test.push_back(std::move(seg));
    }
  }
  return out;
}

namespace {

void WriteSegmentCsv(const Segment& seg, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.precision(17);
  out << "t,X,Y,s,c,vX,vY,r,a,delta\n";
  for (std::size_t k = 0; k < seg.size(); ++k) {
    const State& x = seg.states[k];
    const ControlInput& u = seg.inputs[k];
    out << seg.t0 + static_cast<double>(k) * seg.h << ',' << x.X << ',' << x.Y
        << ',' << x.s << ',' << x.c << ',' << x.vX << ',' << x.vY << ',' << x.r
        << ',' << u.a << ',' << u.delta << '\n';
  }
}

}  // namespace

void WriteDataset(const DatasetSplit& data, const std::filesystem::path& dir) {
  const std::pair<const char*, const std::vector<Segment>*> splits[] = {
      {"train", &data.train}, {"val", &data.val}, {"test", &data.test}};
  for (const auto& [name, segs] : splits) {
    const std::filesystem::path sub = dir / name;
    std::filesystem::create_directories(sub);
    for (std::size_t i = 0; i < segs->size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "seg_%05zu.csv", i);
      WriteSegmentCsv((*segs)[i], sub / buf);
    }
  }
}

std::vector<Segment> ReadSegments(const std::filesystem::path& split_dir,
                                  double h) {
  if (!std::filesystem::is_directory(split_dir)) {
    throw ConfigError("segment directory not found: " + split_dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(split_dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Segment> segments;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    if (TrimCr(line) != "t,X,Y,s,c,vX,vY,r,a,delta") {
      throw ConfigError(file.string() + ": unexpected segment header");
    }
    Segment seg;
    seg.h = h;
    bool first = true;
    while (std::getline(in, line)) {
      line = TrimCr(line);
      if (line.empty()) continue;
      const std::vector<double> v = ParseCsvLine(line);
      if (v.size() != 10) throw ConfigError(file.string() + ": bad row");
      if (first) seg.t0 = v[0];
      first = false;
      seg.states.push_back({v[1], v[2], v[3], v[4], v[5], v[6], v[7]});
      seg.inputs.push_back({v[8], v[9]});
    }
    if (seg.size() < 2) throw ConfigError(file.string() + ": segment too short");
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace mppi_pid
