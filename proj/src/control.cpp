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

#include "mppi_pid/control.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace mppi_pid {

// ---------------------------------------------------------------------------
// Constraints

InputConstraints InputConstraints::FromRates(const InputVector& u_min,
                                             const InputVector& u_max,
                                             const InputVector& rate_max,
                                             double h) {
  InputConstraints c;
  c.u_min = u_min;
  c.u_max = u_max;
  for (int i = 0; i < kInputDim; ++i) {
    c.du_max[i] = rate_max[i] * h;
    c.du_min[i] = -c.du_max[i];
  }
  return c;
}

void InputConstraints::Validate() const {
  for (int i = 0; i < kInputDim; ++i) {
    if (!(u_min[i] <= u_max[i])) throw ConfigError("input bounds: u_min > u_max");
    if (!(du_min[i] <= du_max[i])) {
      throw ConfigError("input rate bounds: du_min > du_max");
    }
  }
}

ControlInput InputConstraints::Lower(const ControlInput& u_prev) const {
  ControlInput l;
  for (int i = 0; i < kInputDim; ++i) {
    l[i] = std::max(u_min[i], u_prev[i] + du_min[i]);
  }
  return l;
}

ControlInput InputConstraints::Upper(const ControlInput& u_prev) const {
  ControlInput up;
  for (int i = 0; i < kInputDim; ++i) {
    up[i] = std::min(u_max[i], u_prev[i] + du_max[i]);
  }
  return up;
}

bool InputConstraints::Contains(const ControlInput& u,
                                const ControlInput& u_prev) const {
  const ControlInput lo = Lower(u_prev);
  const ControlInput hi = Upper(u_prev);
  for (int i = 0; i < kInputDim; ++i) {
    if (!(lo[i] <= u[i] && u[i] <= hi[i])) return false;
  }
  return true;
}

namespace {

void CheckFeasible(const ControlInput& u_prev, const InputConstraints& c) {
  const ControlInput lo = c.Lower(u_prev);
  const ControlInput hi = c.Upper(u_prev);
  for (int i = 0; i < kInputDim; ++i) {
    if (!(lo[i] <= hi[i])) {
      throw InfeasibleConstraintError(
          "empty input constraint set for component " + std::to_string(i) +
          ": lower " + std::to_string(lo[i]) + " > upper " +
          std::to_string(hi[i]));
    }
  }
}

}  // namespace

ControlInput ProjectInputSequential(const ControlInput& u,
                                    const ControlInput& u_prev,
                                    const InputConstraints& c) {
  CheckFeasible(u_prev, c);
  ControlInput out;
  for (int i = 0; i < kInputDim; ++i) {
    const double diff = u[i] - u_prev[i];
    const double step = std::clamp(diff, c.du_min[i], c.du_max[i]);
    // u_prev + (u - u_prev) can miss u by an ulp; an inactive rate clip
    // passes u through unchanged.
    const double moved = step == diff ? u[i] : u_prev[i] + step;
    out[i] = std::clamp(moved, c.u_min[i], c.u_max[i]);
  }
  return out;
}

ControlInput ClampToFeasibleBox(const ControlInput& u,
                                const ControlInput& u_prev,
                                const InputConstraints& c) {
  CheckFeasible(u_prev, c);
  const ControlInput lo = c.Lower(u_prev);
  const ControlInput hi = c.Upper(u_prev);
  ControlInput out;
  for (int i = 0; i < kInputDim; ++i) out[i] = std::clamp(u[i], lo[i], hi[i]);
  return out;
}

// The two-stage clip and the box clamp agree in exact arithmetic; the clamp
// also returns interior points bit-for-bit, so it is the one used.
ControlInput ProjectInput(const ControlInput& u, const ControlInput& u_prev,
                          const InputConstraints& c) {
  return ClampToFeasibleBox(u, u_prev, c);
}

// ---------------------------------------------------------------------------
// PID

PidErrorVector ToPidErrors(const PidErrors& e, double steering_sign) {
  return {e.speed, steering_sign * e.lateral, steering_sign * e.angular};
}

ControlInput ApplyBasis(const ErrorBasis& basis, const PidGains& gains,
                        const ControlInput& u_bias) {
  ControlInput u;
  for (int row = 0; row < kInputDim; ++row) {
    double acc = 0.0;
    for (int g = 0; g < kNumGains; ++g) acc += basis[row][g] * gains[g];
    u[row] = u_bias[row] + acc;
  }
  return u;
}

PidStepResult PidStep(const PidGains& gains, const PidState& state,
                      const PidErrorVector& errors, const ControlInput& u_bias,
                      double h, const InputConstraints& c) {
  if (!(h > 0)) throw ConfigError("PID step size must be positive");
  PidStepResult res;
  res.next = state;
  for (int l = 0; l < kNumPidErrors; ++l) {
    const double prev = state.has_prev ? state.prev_error[l] : errors[l];
    const double integral = state.integral[l] + errors[l] * h;
    const double derivative = (errors[l] - prev) / h;
    res.next.integral[l] = integral;
    res.next.prev_error[l] = errors[l];
    const int row = kErrorInputRow[l];
    res.basis[row][3 * l] = errors[l];
    res.basis[row][3 * l + 1] = integral;
    res.basis[row][3 * l + 2] = derivative;
  }
  res.next.has_prev = true;
  res.u_raw = ApplyBasis(res.basis, gains, u_bias);
  res.u = ProjectInput(res.u_raw, state.u_prev, c);
  res.next.u_prev = res.u;
  return res;
}

// ---------------------------------------------------------------------------
// Weighting kernel

std::vector<double> WeightsAndUpdate(SampleBatch& batch, double lambda) {
  if (!(lambda > 0)) throw ConfigError("temperature lambda must be positive");
  const std::size_t n = batch.costs.size();
  if (n == 0) throw ConfigError("weighting needs at least one sample");
  const int dim = batch.dim;
  double min_cost = std::numeric_limits<double>::infinity();
  for (double j : batch.costs) {
    if (j < min_cost) min_cost = j;  // NaN never compares less
  }
  if (!std::isfinite(min_cost)) {
    throw DivergenceError("all rollout costs are non-finite");
  }
  batch.weights.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double j = batch.costs[i];
    batch.weights[i] = std::isnan(j) ? 0.0 : std::exp(-(j - min_cost) / lambda);
    total += batch.weights[i];
  }
  // The minimum-cost sample always has weight one.
  assert(total >= 1.0);
  batch.normalized_weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    batch.normalized_weights[i] = batch.weights[i] / total;
  }
  std::vector<double> update(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = batch.weights[i];
    const double* eps = batch.perturbations.data() + i * dim;
    for (int d = 0; d < dim; ++d) update[d] += w * eps[d];
  }
  for (double& u : update) u /= total;
  return update;
}

double EffectiveSampleSize(std::span<const double> weights) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double w : weights) {
    sum += w;
    sum_sq += w * w;
  }
  if (!(sum_sq > 0)) throw ValidationError("ESS of all-zero weights");
  return sum * sum / sum_sq;
}

namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr int kChunk = 64;

// Runs fn(chunk_begin, chunk_end, worker) over [0, n) in fixed-size chunks.
// Each chunk's work is independent, so results do not depend on threads.
template <typename Fn>
void ForEachChunk(int n, int threads, Fn&& fn) {
  const int chunks = (n + kChunk - 1) / kChunk;
  threads = std::clamp(threads, 1, std::max(1, chunks));
  if (threads == 1) {
    for (int c = 0; c < chunks; ++c) {
      fn(c * kChunk, std::min(n, (c + 1) * kChunk), 0);
    }
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int c = next++; c < chunks; c = next++) {
        fn(c * kChunk, std::min(n, (c + 1) * kChunk), w);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

void FillNormals(std::uint64_t seed, std::span<double> out,
                 std::span<const double> sigma) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = sigma.size();
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = sigma[k % d] * normal(gen);
  }
}

}  // namespace

std::uint64_t SampleSeed(std::uint64_t seed, std::uint64_t control_step,
                         std::uint64_t iteration, std::uint64_t sample) {
  std::uint64_t h = SplitMix64(control_step);
  h = SplitMix64(h ^ (iteration + 0x632be59bd9b4e019ULL));
  h = SplitMix64(h ^ (sample + 0x8cb92ba72f3d8dd7ULL));
  return SplitMix64(seed ^ h);
}

void OptimizerConfig::Validate() const {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (samples < 1) throw ConfigError("sample count must be >= 1");
  if (iterations < 1) throw ConfigError("iteration count must be >= 1");
  if (!(lambda > 0)) throw ConfigError("lambda must be positive");
  for (double s : sigma_u) {
    if (s < 0) throw ConfigError("sigma_u must be nonnegative");
  }
  for (double s : sigma_theta) {
    if (s < 0) throw ConfigError("sigma_theta must be nonnegative");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

void ValidateContext(const PlanningContext& ctx) {
  if (!ctx.model || !ctx.path || !ctx.index) {
    throw ConfigError("planning context is missing model, path or index");
  }
  ctx.cost.Validate();
  ctx.constraints.Validate();
}

struct RolloutBuffers {
  std::vector<State> x;
  std::vector<State> x_next;
  std::vector<ControlInput> u;
  std::vector<PidState> pid;
  StepWorkspace ws;
};

}  // namespace

double RolloutCost(const PlanningContext& ctx, const State& x0,
                   const ControlInput& u_prev,
                   std::span<const ControlInput> inputs, int control_step) {
  double cost = 0.0;
  State x = x0;
  ControlInput prev = u_prev;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const PathQuery q = ctx.index->Query({x.X, x.Y});
    cost += StageCost(x, inputs[t], prev, q, ctx.cost, ctx.path->goal(),
                      ctx.cost.VRefAt(control_step + static_cast<int>(t)));
    x = ctx.model->Step(x, inputs[t]);
    prev = inputs[t];
  }
  return cost;
}

// ---------------------------------------------------------------------------
// Conventional MPPI

MppiPlanner::MppiPlanner(PlanningContext ctx, OptimizerConfig cfg)
    : ctx_(std::move(ctx)), cfg_(cfg) {
  ValidateContext(ctx_);
  cfg_.Validate();
  Reset(ctx_.u_bias);
}

void MppiPlanner::Reset(const ControlInput& u) {
  nominal_.assign(cfg_.horizon, u);
}

void MppiPlanner::set_nominal(std::vector<ControlInput> nominal) {
  if (static_cast<int>(nominal.size()) != cfg_.horizon) {
    throw ConfigError("nominal sequence length must equal the horizon");
  }
  nominal_ = std::move(nominal);
}

void MppiPlanner::Rollouts(const State& x0, const ControlInput& u_prev,
                           int control_step, int iteration) {
  const int n = cfg_.samples;
  const int horizon = cfg_.horizon;
  const int dim = horizon * kInputDim;
  batch_.dim = dim;
  batch_.perturbations.resize(static_cast<std::size_t>(n) * dim);
  batch_.costs.assign(n, 0.0);

  std::vector<RolloutBuffers> buffers(std::max(1, cfg_.threads));
  const std::vector<double> sigma(cfg_.sigma_u.begin(), cfg_.sigma_u.end());
  const Vec2 goal = ctx_.path->goal();

  ForEachChunk(n, cfg_.threads, [&](int begin, int end, int worker) {
    RolloutBuffers& buf = buffers[worker];
    const int m = end - begin;
    buf.x.assign(m, x0);
    buf.x_next.resize(m);
    // Inputs per sample and step, sample-major.
    std::vector<ControlInput> inputs(static_cast<std::size_t>(m) * horizon);
    for (int i = begin; i < end; ++i) {
      std::span<double> eps(
          batch_.perturbations.data() + static_cast<std::size_t>(i) * dim, dim);
      FillNormals(SampleSeed(cfg_.seed, control_step, iteration, i), eps,
                  sigma);
      ControlInput prev = u_prev;
      for (int t = 0; t < horizon; ++t) {
        const ControlInput perturbed{nominal_[t].a + eps[2 * t],
                                     nominal_[t].delta + eps[2 * t + 1]};
        prev = ProjectInput(perturbed, prev, ctx_.constraints);
        inputs[static_cast<std::size_t>(i - begin) * horizon + t] = prev;
      }
    }
    buf.u.resize(m);
    for (int t = 0; t < horizon; ++t) {
      const double v_ref = ctx_.cost.VRefAt(control_step + t);
      for (int s = 0; s < m; ++s) {
        const State& x = buf.x[s];
        const ControlInput& u = inputs[static_cast<std::size_t>(s) * horizon + t];
        const ControlInput& prev =
            t == 0 ? u_prev : inputs[static_cast<std::size_t>(s) * horizon + t - 1];
        const PathQuery q = ctx_.index->Query({x.X, x.Y});
        batch_.costs[begin + s] +=
            StageCost(x, u, prev, q, ctx_.cost, goal, v_ref);
        buf.u[s] = u;
      }
      if (t + 1 == horizon) break;  // the final state carries no cost
      ctx_.model->StepBatch(buf.x, buf.u, buf.x_next, buf.ws);
      buf.x.swap(buf.x_next);
    }
  });
}

ControlInput MppiPlanner::Plan(const State& x0, const ControlInput& u_prev,
                               int control_step, PlanStats* stats) {
  for (int it = 0; it < cfg_.iterations; ++it) {
    Rollouts(x0, u_prev, control_step, it);
    const std::vector<double> update = WeightsAndUpdate(batch_, cfg_.lambda);
    ControlInput prev = u_prev;
    for (int t = 0; t < cfg_.horizon; ++t) {
      const ControlInput moved{nominal_[t].a + update[2 * t],
                               nominal_[t].delta + update[2 * t + 1]};
      nominal_[t] = ProjectInput(moved, prev, ctx_.constraints);
      prev = nominal_[t];
    }
    if (stats) {
      stats->ess.push_back(EffectiveSampleSize(batch_.weights));
      stats->min_cost.push_back(
          *std::min_element(batch_.costs.begin(), batch_.costs.end()));
    }
  }
  const ControlInput u0 = nominal_.front();
  std::rotate(nominal_.begin(), nominal_.begin() + 1, nominal_.end());
  nominal_.back() = nominal_[nominal_.size() >= 2 ? nominal_.size() - 2 : 0];
  return u0;
}

// ---------------------------------------------------------------------------
// MPPI-PID

MppiPidPlanner::MppiPidPlanner(PlanningContext ctx, OptimizerConfig cfg,
                               PidGains initial_gains)
    : ctx_(std::move(ctx)), cfg_(cfg), gains_(initial_gains) {
  ValidateContext(ctx_);
  cfg_.Validate();
}

void MppiPidPlanner::Rollouts(const State& x0, const PidState& live,
                              int control_step, int iteration) {
  const int n = cfg_.samples;
  const int horizon = cfg_.horizon;
  batch_.dim = kNumGains;
  batch_.perturbations.resize(static_cast<std::size_t>(n) * kNumGains);
  batch_.costs.assign(n, 0.0);

  std::vector<RolloutBuffers> buffers(std::max(1, cfg_.threads));
  const std::vector<double> sigma(cfg_.sigma_theta.begin(),
                                  cfg_.sigma_theta.end());
  const Vec2 goal = ctx_.path->goal();
  const double h = ctx_.model->h();

  ForEachChunk(n, cfg_.threads, [&](int begin, int end, int worker) {
    RolloutBuffers& buf = buffers[worker];
    const int m = end - begin;
    buf.x.assign(m, x0);
    buf.x_next.resize(m);
    buf.u.resize(m);
    buf.pid.assign(m, live);
    std::vector<PidGains> gains(m);
    for (int i = begin; i < end; ++i) {
      std::span<double> eps(
          batch_.perturbations.data() + static_cast<std::size_t>(i) * kNumGains,
          kNumGains);
      FillNormals(SampleSeed(cfg_.seed, control_step, iteration, i), eps,
                  sigma);
      for (int g = 0; g < kNumGains; ++g) gains[i - begin][g] = gains_[g] + eps[g];
    }
    for (int t = 0; t < horizon; ++t) {
      const double v_ref = ctx_.cost.VRefAt(control_step + t);
      for (int s = 0; s < m; ++s) {
        const State& x = buf.x[s];
        const PathQuery q = ctx_.index->Query({x.X, x.Y});
        const PidErrorVector e =
            ToPidErrors(ComputePidErrors(q, x, v_ref), ctx_.steering_sign);
        const PidStepResult r =
            PidStep(gains[s], buf.pid[s], e, ctx_.u_bias, h, ctx_.constraints);
        batch_.costs[begin + s] +=
            StageCost(x, r.u, buf.pid[s].u_prev, q, ctx_.cost, goal, v_ref);
        buf.pid[s] = r.next;
        buf.u[s] = r.u;
      }
      if (t + 1 == horizon) break;
      ctx_.model->StepBatch(buf.x, buf.u, buf.x_next, buf.ws);
      buf.x.swap(buf.x_next);
    }
  });
}

MppiPidResult MppiPidPlanner::Plan(const State& x0, const PidState& live,
                                   int control_step, PlanStats* stats) {
  for (int it = 0; it < cfg_.iterations; ++it) {
    Rollouts(x0, live, control_step, it);
    const std::vector<double> update = WeightsAndUpdate(batch_, cfg_.lambda);
    for (int g = 0; g < kNumGains; ++g) gains_[g] += update[g];
    if (stats) {
      stats->ess.push_back(EffectiveSampleSize(batch_.weights));
      stats->min_cost.push_back(
          *std::min_element(batch_.costs.begin(), batch_.costs.end()));
    }
  }
  const double v_ref = ctx_.cost.VRefAt(control_step);
  const PidErrorVector e = ToPidErrors(
      ComputePidErrors(ctx_.index->Query({x0.X, x0.Y}), x0, v_ref),
      ctx_.steering_sign);
  const PidStepResult r = PidStep(gains_, live, e, ctx_.u_bias,
                                  ctx_.model->h(), ctx_.constraints);
  return {r.u, r.next, gains_};
}

}  // namespace mppi_pid
