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

#include "mppi_pid/learning.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace mppi_pid {

std::vector<Transition> TransitionsFromSegments(
    const std::vector<Segment>& segments) {
  std::vector<Transition> out;
  for (const Segment& seg : segments) {
    for (std::size_t k = 0; k + 1 < seg.size(); ++k) {
      out.push_back({seg.states[k], seg.inputs[k], seg.states[k + 1]});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Least squares

namespace {

Eigen::Vector2d SolveBlock(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           const std::string& name) {
  if (A.rows() < 2) {
    throw IdentifiabilityError(name + ": not enough transitions");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  const double max_col = A.colwise().norm().maxCoeff();
  qr.setThreshold(1e-10);
  if (max_col == 0.0 || qr.rank() < 2) {
    throw IdentifiabilityError(name + " regressor is rank deficient");
  }
  // Reject columns that are negligible relative to the other one.
  const Eigen::Vector2d norms = A.colwise().norm();
  if (norms.minCoeff() <= 1e-12 * norms.maxCoeff()) {
    throw IdentifiabilityError(name + " regressor is rank deficient");
  }
  return qr.solve(b);
}

}  // namespace

PhysicalParams FitPhysicalParams(std::span<const Transition> data, double h) {
  if (!(h > 0)) throw ConfigError("step size h must be positive");
  if (data.size() < 4) {
    throw IdentifiabilityError("need at least 4 transitions");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  // Speed block: both planar velocity rows,
  // (v+ - v)/h + r [vY, -vX] = k_a a [c, s] - k_V v.
  Eigen::MatrixXd As(2 * n, 2);
  Eigen::VectorXd bs(2 * n);
  // Yaw block: (r+ - r)/h = k_delta V delta - k_r r.
  Eigen::MatrixXd Ay(n, 2);
  Eigen::VectorXd by(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = data[static_cast<std::size_t>(i)];
    const State& x = t.x;
    As(2 * i, 0) = t.u.a * x.c;
    As(2 * i, 1) = -x.vX;
    bs(2 * i) = (t.x_next.vX - x.vX) / h + x.r * x.vY;
    As(2 * i + 1, 0) = t.u.a * x.s;
    As(2 * i + 1, 1) = -x.vY;
    bs(2 * i + 1) = (t.x_next.vY - x.vY) / h - x.r * x.vX;
    Ay(i, 0) = x.Speed() * DegToRad(t.u.delta);
    Ay(i, 1) = -x.r;
    by(i) = (t.x_next.r - x.r) / h;
  }
  const Eigen::Vector2d speed = SolveBlock(As, bs, "speed block (k_a, k_V)");
  const Eigen::Vector2d yaw = SolveBlock(Ay, by, "yaw block (k_delta, k_r)");
  return {speed(0), speed(1), yaw(0), yaw(1)};
}

void ComputeNormalization(std::span<const Transition> data, MlpParams& nn) {
  if (data.empty()) throw ConfigError("normalization needs data");
  std::array<double, kStateDim + kInputDim> mean{}, m2{};
  double count = 0;
  for (const Transition& t : data) {
    const StateVector v = t.x.ToArray();
    std::array<double, kStateDim + kInputDim> f;
    std::copy(v.begin(), v.end(), f.begin());
    f[kStateDim] = t.u.a;
    f[kStateDim + 1] = t.u.delta;
    count += 1;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double d = f[k] - mean[k];
      mean[k] += d / count;
      m2[k] += d * (f[k] - mean[k]);
    }
  }
  auto sd = [&](std::size_t k) {
    const double s = std::sqrt(m2[k] / count);
    return s > 0 ? s : 1.0;
  };
  for (int i = 0; i < kStateDim; ++i) nn.state_scale[i] = sd(i);
  nn.input_scale[0] = sd(kStateDim);
  nn.input_scale[1] = sd(kStateDim + 1);
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(grad_clip > 0)) throw ConfigError("grad_clip must be positive");
  if (!(next_state_noise_std >= 0)) {
    throw ConfigError("next_state_noise_std must be non-negative");
  }
  if (early_stop_patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (hidden_units < 1) throw ConfigError("hidden_units must be positive");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 > 0 && adam_beta2 < 1 &&
        adam_eps > 0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

// ---------------------------------------------------------------------------
// One-step loss with manual backpropagation

namespace {

// Shape of a learned one-step map: pred = normalize(base + coeff * out),
// where out holds the network outputs placed at the state dims in `dims`.
struct Head {
  const MlpParams* nn = nullptr;
  std::vector<int> dims;
  // Per transition: base state and per-output coefficient.
  std::function<void(const Transition&, StateVector&, std::vector<double>&)>
      prepare;
};

Head MakeHead(const ResidualDynamicsModel& m) {
  Head head;
  head.nn = &m.nn;
  for (int i = 0; i < kStateDim; ++i) {
    if (m.mask[i] != 0.0) head.dims.push_back(i);
  }
  head.prepare = [&m, dims = head.dims](const Transition& t, StateVector& base,
                                        std::vector<double>& coeff) {
    base = EulerStep(t.x, t.u, m.phys, m.h).ToArray();
    const double w = ResidualWeight(t.x, m.v_th);
    coeff.resize(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) {
      coeff[k] = w * m.mask[dims[k]] * m.nn.state_scale[dims[k]];
    }
  };
  return head;
}

Head MakeHead(const StandardNnModel& m) {
  Head head;
  head.nn = &m.nn;
  for (int i = 0; i < kStateDim; ++i) head.dims.push_back(i);
  head.prepare = [&m](const Transition& t, StateVector& base,
                      std::vector<double>& coeff) {
    base = t.x.ToArray();
    coeff.assign(m.nn.state_scale.begin(), m.nn.state_scale.end());
  };
  return head;
}

// Sum (not mean) of squared normalized errors over the given transitions;
// adds the gradient of that sum, scaled by grad_scale, into grads.
double HeadLossSum(const Head& head, std::span<const Transition> data,
                   std::span<const StateVector> noise,
                   std::vector<DenseLayer>* grads, double grad_scale,
                   MlpTape& tape, std::vector<double>& features,
                   std::vector<double>& out, std::vector<double>& d_out) {
  const MlpParams& nn = *head.nn;
  const int batch = static_cast<int>(data.size());
  constexpr int kFeatures = kStateDim + kInputDim;
  features.resize(static_cast<std::size_t>(kFeatures) * batch);
  std::array<double, kFeatures> f;
  for (int s = 0; s < batch; ++s) {
    NormalizedFeatures(nn, data[s].x, data[s].u, f);
    for (int k = 0; k < kFeatures; ++k) {
      features[static_cast<std::size_t>(k) * batch + s] = f[k];
    }
  }
  nn.net.ForwardTrain(features, batch, tape, out);
  const int n_out = static_cast<int>(head.dims.size());
  if (grads != nullptr) d_out.assign(static_cast<std::size_t>(n_out) * batch, 0.0);

  double total = 0.0;
  StateVector base;
  std::vector<double> coeff;
  for (int s = 0; s < batch; ++s) {
    const Transition& t = data[s];
    head.prepare(t, base, coeff);
    StateVector y = base;
    for (int k = 0; k < n_out; ++k) {
      y[head.dims[k]] += coeff[k] * out[static_cast<std::size_t>(k) * batch + s];
    }
    const double rho = std::sqrt(y[kSin] * y[kSin] + y[kCos] * y[kCos]);
    if (rho == 0.0) throw DegenerateHeadingError();
    StateVector pred = y;
    pred[kSin] = y[kSin] / rho;
    pred[kCos] = y[kCos] / rho;
    const StateVector target = t.x_next.ToArray();
    StateVector dpred;
    for (int i = 0; i < kStateDim; ++i) {
      double tgt = target[i];
      if (!noise.empty()) tgt += noise[s][i] * nn.state_scale[i];
      const double e = (pred[i] - tgt) / nn.state_scale[i];
      total += e * e;
      dpred[i] = 2.0 * e / nn.state_scale[i];
    }
    if (grads == nullptr) continue;
    // Jacobian of the (s, c) normalization.
    StateVector dy = dpred;
    const double ps = pred[kSin], pc = pred[kCos];
    dy[kSin] = (dpred[kSin] * (1.0 - ps * ps) - dpred[kCos] * ps * pc) / rho;
    dy[kCos] = (dpred[kCos] * (1.0 - pc * pc) - dpred[kSin] * ps * pc) / rho;
    for (int k = 0; k < n_out; ++k) {
      d_out[static_cast<std::size_t>(k) * batch + s] =
          grad_scale * dy[head.dims[k]] * coeff[k];
    }
  }
  if (grads != nullptr) nn.net.Backward(tape, d_out, *grads);
  return total;
}

double HeadLoss(const Head& head, std::span<const Transition> data,
                std::span<const StateVector> noise,
                std::vector<DenseLayer>* grads) {
  if (data.empty()) throw ValidationError("loss over empty data");
  if (!noise.empty() && noise.size() != data.size()) {
    throw ConfigError("target noise must have one row per transition");
  }
  if (grads != nullptr) *grads = head.nn->net.ZeroGradients();
  const double denom = static_cast<double>(data.size()) * kStateDim;
  MlpTape tape;
  std::vector<double> features, out, d_out;
  return HeadLossSum(head, data, noise, grads, 1.0 / denom, tape, features, out,
                     d_out) /
         denom;
}

}  // namespace

double OneStepLoss(const ResidualDynamicsModel& model,
                   std::span<const Transition> data,
                   std::span<const StateVector> target_noise,
                   std::vector<DenseLayer>* grads) {
  model.Validate();
  if (model.nn.net.empty()) {
    if (grads != nullptr) grads->clear();
    return OneStepLoss(PredictionModel(model), data);
  }
  return HeadLoss(MakeHead(model), data, target_noise, grads);
}

double OneStepLoss(const StandardNnModel& model,
                   std::span<const Transition> data,
                   std::span<const StateVector> target_noise,
                   std::vector<DenseLayer>* grads) {
  model.Validate();
  return HeadLoss(MakeHead(model), data, target_noise, grads);
}

double OneStepLoss(const PredictionModel& model,
                   std::span<const Transition> data) {
  if (data.empty()) throw ValidationError("loss over empty data");
  StateVector scale{1, 1, 1, 1, 1, 1, 1};
  if (const auto* r = model.residual()) scale = r->nn.state_scale;
  if (const auto* s = model.standard_nn()) scale = s->nn.state_scale;
  double total = 0.0;
  for (const Transition& t : data) {
    const StateVector pred = model.Step(t.x, t.u).ToArray();
    const StateVector target = t.x_next.ToArray();
    for (int i = 0; i < kStateDim; ++i) {
      const double e = (pred[i] - target[i]) / scale[i];
      total += e * e;
    }
  }
  return total / (static_cast<double>(data.size()) * kStateDim);
}

// ---------------------------------------------------------------------------
// Adam training loop

namespace {

std::size_t FlatSize(const std::vector<DenseLayer>& layers) {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename Fn>
void ForEachParam(std::vector<DenseLayer>& layers, Fn&& fn) {
  std::size_t k = 0;
  for (DenseLayer& l : layers) {
    for (double& w : l.weight) fn(k++, w);
    for (double& b : l.bias) fn(k++, b);
  }
}

template <typename Fn>
void ForEachParam(const std::vector<DenseLayer>& layers, Fn&& fn) {
  std::size_t k = 0;
  for (const DenseLayer& l : layers) {
    for (double w : l.weight) fn(k++, w);
    for (double b : l.bias) fn(k++, b);
  }
}

// Upper bound on |m_hat| / sqrt(v_hat) after t steps, from Cauchy-Schwarz
// over the exponential moving sums.
double AdamRatioBound(double b1, double b2, int t) {
  const double gamma = b1 * b1 / b2;
  double geometric = 0.0, p = 1.0;
  for (int j = 0; j < t; ++j, p *= gamma) geometric += p;
  return (1.0 - b1) * std::sqrt(1.0 - std::pow(b2, t)) /
         ((1.0 - std::pow(b1, t)) * std::sqrt(1.0 - b2)) * std::sqrt(geometric);
}

template <typename ModelT>
TrainResult TrainImpl(ModelT model, std::span<const Transition> train,
                      std::span<const Transition> val, const TrainConfig& cfg,
                      const AdamStepObserver& observer, int out_dim) {
  cfg.Validate();
  if (train.empty() || val.empty()) {
    throw ConfigError("training and validation splits must be nonempty");
  }
  model.nn.net = Mlp::RandomInit(
      {kStateDim + kInputDim, cfg.hidden_units, cfg.hidden_units, out_dim},
      cfg.rng_seed);
  model.Validate();
  const Head head = MakeHead(model);

  std::mt19937_64 rng(cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n_params = FlatSize(model.nn.net.layers());
  std::vector<double> m(n_params, 0.0), v(n_params, 0.0), g(n_params, 0.0);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Transition> batch;
  std::vector<StateVector> noise;
  MlpTape tape;
  std::vector<double> features, out, d_out;

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  Mlp best = model.nn.net;
  int since_best = 0;
  int step = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      noise.clear();
      for (std::size_t j = start; j < stop; ++j) {
        batch.push_back(train[order[j]]);
        StateVector row;
        for (double& e : row) e = cfg.next_state_noise_std * normal(rng);
        noise.push_back(row);
      }
      const double denom = static_cast<double>(batch.size()) * kStateDim;
      std::vector<DenseLayer> grads = model.nn.net.ZeroGradients();
      const double loss_sum = HeadLossSum(head, batch, noise, &grads, 1.0 / denom,
                                          tape, features, out, d_out);
      if (!std::isfinite(loss_sum)) {
        throw DivergenceError("training loss is not finite at epoch " +
                              std::to_string(epoch));
      }
      train_sum += loss_sum;

      ForEachParam(std::as_const(grads), [&](std::size_t k, double x) { g[k] = x; });
      double norm2 = 0.0;
      for (double x : g) norm2 += x * x;
      const double norm = std::sqrt(norm2);
      const double scale = norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;
      double clipped2 = 0.0;
      for (double& x : g) {
        x *= scale;
        clipped2 += x * x;
      }

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, step);
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, step);
      double max_update = 0.0;
      ForEachParam(model.nn.net.mutable_layers(), [&](std::size_t k, double& p) {
        m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g[k];
        v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
        const double update =
            cfg.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.adam_eps);
        p -= update;
        max_update = std::max(max_update, std::abs(update));
      });
      if (observer) {
        observer(std::sqrt(clipped2), max_update,
                 cfg.learning_rate *
                     AdamRatioBound(cfg.adam_beta1, cfg.adam_beta2, step));
      }
    }
    const double train_loss =
        train_sum / (static_cast<double>(train.size()) * kStateDim);
    const double val_loss = HeadLoss(head, val, {}, nullptr);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw DivergenceError("training loss is not finite at epoch " +
                            std::to_string(epoch));
    }
    result.history.push_back({epoch, train_loss, val_loss});
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      best = model.nn.net;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  model.nn.net = std::move(best);
  result.model = PredictionModel(std::move(model));
  return result;
}

}  // namespace

TrainResult TrainResidual(const ResidualDynamicsModel& init,
                          std::span<const Transition> train,
                          std::span<const Transition> val,
                          const TrainConfig& cfg,
                          const AdamStepObserver& observer) {
  int out_dim = 0;
  for (double w : init.mask) out_dim += w != 0.0 ? 1 : 0;
  if (out_dim == 0) throw ConfigError("residual mask selects no dimension");
  return TrainImpl(init, train, val, cfg, observer, out_dim);
}

TrainResult TrainStandardNn(const StandardNnModel& init,
                            std::span<const Transition> train,
                            std::span<const Transition> val,
                            const TrainConfig& cfg,
                            const AdamStepObserver& observer) {
  return TrainImpl(init, train, val, cfg, observer, kStateDim);
}

void WriteLossHistory(const std::vector<EpochLoss>& history,
                      const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.precision(17);
  out << "epoch,train_loss,val_loss\n";
  for (const EpochLoss& e : history) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
  }
}

// ---------------------------------------------------------------------------
// Recursive R^2

R2Report R2FromPredictions(std::span<const StateVector> truth,
                           std::span<const StateVector> prediction) {
  if (truth.size() != prediction.size()) {
    throw ConfigError("truth and prediction sizes differ");
  }
  if (truth.empty()) throw ValidationError("R^2 over no samples");
  R2Report report;
  const double n = static_cast<double>(truth.size());
  double sum = 0.0;
  int defined = 0;
  for (int i = 0; i < kStateDim; ++i) {
    double mean = 0.0;
    for (const StateVector& t : truth) mean += t[i];
    mean /= n;
    double sse = 0.0, sst = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const double e = truth[k][i] - prediction[k][i];
      const double d = truth[k][i] - mean;
      sse += e * e;
      sst += d * d;
    }
    if (sst == 0.0) continue;
    report.per_dim[i] = 1.0 - sse / sst;
    sum += *report.per_dim[i];
    ++defined;
  }
  report.average = defined > 0 ? sum / defined
                               : std::numeric_limits<double>::quiet_NaN();
  return report;
}

R2Report RecursiveR2(const PredictionModel& model,
                     const std::vector<Segment>& segments) {
  std::vector<StateVector> truth, pred;
  for (const Segment& seg : segments) {
    if (seg.size() < 2) throw ConfigError("segment shorter than 2 samples");
    State x = seg.states.front();
    for (std::size_t k = 1; k < seg.size(); ++k) {
      x = model.Step(x, seg.inputs[k - 1]);
      truth.push_back(seg.states[k].ToArray());
      pred.push_back(x.ToArray());
    }
  }
  return R2FromPredictions(truth, pred);
}

IdentificationResult Identify(const DatasetSplit& data, double h,
                              const IdentificationOptions& opt) {
  if (data.train.empty() || data.val.empty() || data.test.empty()) {
    throw ConfigError("identification needs nonempty train/val/test splits");
  }
  const std::vector<Transition> train = TransitionsFromSegments(data.train);
  const std::vector<Transition> val = TransitionsFromSegments(data.val);
  IdentificationResult out;
  out.phys = FitPhysicalParams(train, h);
  out.physical = PredictionModel::Physical(out.phys, h);
  out.r2_physical = RecursiveR2(out.physical, data.test);

  MlpParams scales;
  ComputeNormalization(train, scales);
  if (opt.train_residual) {
    ResidualDynamicsModel init;
    init.phys = out.phys;
    init.nn = scales;
    init.v_th = opt.v_th;
    init.h = h;
    out.residual = TrainResidual(init, train, val, opt.train);
    out.r2_residual = RecursiveR2(out.residual->model, data.test);
  }
  if (opt.train_standard_nn) {
    StandardNnModel init;
    init.nn = scales;
    init.h = h;
    out.standard_nn = TrainStandardNn(init, train, val, opt.train);
    out.r2_standard_nn = RecursiveR2(out.standard_nn->model, data.test);
  }
  return out;
}

}  // namespace mppi_pid
