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

#include "mppi_pid/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mppi_pid/types.hpp"

namespace mppi_pid {
namespace {

// out (out_dim x batch) = W * in (in_dim x batch) + b, feature-major.
void DenseForward(const DenseLayer& layer, const double* in, int batch,
                  double* out, bool relu) {
  for (int j = 0; j < layer.out_dim; ++j) {
    double* row = out + static_cast<std::size_t>(j) * batch;
    const double bj = layer.bias[j];
    for (int s = 0; s < batch; ++s) row[s] = bj;
    const double* w = layer.weight.data() + static_cast<std::size_t>(j) * layer.in_dim;
    for (int k = 0; k < layer.in_dim; ++k) {
      const double wk = w[k];
      const double* x = in + static_cast<std::size_t>(k) * batch;
      for (int s = 0; s < batch; ++s) row[s] += wk * x[s];
    }
    if (relu) {
      for (int s = 0; s < batch; ++s) row[s] = row[s] > 0.0 ? row[s] : 0.0;
    }
  }
}

DenseLayer MakeLayer(int in_dim, int out_dim) {
  DenseLayer layer;
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  layer.weight.assign(static_cast<std::size_t>(in_dim) * out_dim, 0.0);
  layer.bias.assign(out_dim, 0.0);
  return layer;
}

}  // namespace

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.in_dim <= 0 || layer.out_dim <= 0 ||
        layer.weight.size() !=
            static_cast<std::size_t>(layer.in_dim) * layer.out_dim ||
        layer.bias.size() != static_cast<std::size_t>(layer.out_dim)) {
      throw ConfigError("mlp layer " + std::to_string(l) +
                        ": weight/bias sizes do not match declared dims");
    }
    if (l > 0 && layers_[l - 1].out_dim != layer.in_dim) {
      throw ConfigError("mlp layer " + std::to_string(l) + ": input dim " +
                        std::to_string(layer.in_dim) +
                        " does not match previous output dim " +
                        std::to_string(layers_[l - 1].out_dim));
    }
  }
}

Mlp Mlp::Zeros(const std::vector<int>& dims) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    layers.push_back(MakeLayer(dims[l], dims[l + 1]));
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::RandomInit(const std::vector<int>& dims, std::uint64_t seed) {
  Mlp net = Zeros(dims);
  std::mt19937_64 rng(seed);
  for (DenseLayer& layer : net.layers_) {
    const double bound = std::sqrt(1.0 / layer.in_dim);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : layer.weight) w = dist(rng);
    for (double& b : layer.bias) b = dist(rng);
  }
  return net;
}

std::vector<int> Mlp::dims() const {
  std::vector<int> d;
  if (layers_.empty()) return d;
  d.push_back(layers_.front().in_dim);
  for (const DenseLayer& layer : layers_) d.push_back(layer.out_dim);
  return d;
}

std::size_t Mlp::ParameterCount() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers_) {
    n += layer.weight.size() + layer.bias.size();
  }
  return n;
}

std::vector<double> Mlp::Forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw ConfigError("mlp input has " + std::to_string(x.size()) +
                      " features, expected " + std::to_string(input_dim()));
  }
  std::vector<double> out(output_dim());
  MlpWorkspace ws;
  ForwardBatch(x, 1, out, ws);
  return out;
}

void Mlp::ForwardBatch(std::span<const double> in, int batch,
                       std::span<double> out, MlpWorkspace& ws) const {
  if (layers_.empty()) return;
  const std::size_t widest = [&] {
    int w = 0;
    for (const DenseLayer& layer : layers_) w = std::max(w, layer.out_dim);
    return static_cast<std::size_t>(w) * batch;
  }();
  if (ws.a.size() < widest) ws.a.resize(widest);
  if (ws.b.size() < widest) ws.b.resize(widest);

  const double* src = in.data();
  double* bufs[2] = {ws.a.data(), ws.b.data()};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const bool last = l + 1 == layers_.size();
    double* dst = last ? out.data() : bufs[l % 2];
    DenseForward(layers_[l], src, batch, dst, !last);
    src = dst;
  }
}

void Mlp::ForwardTrain(std::span<const double> in, int batch, MlpTape& tape,
                       std::vector<double>& out) const {
  tape.batch = batch;
  tape.activations.resize(layers_.size());
  tape.activations[0].assign(in.begin(), in.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const bool last = l + 1 == layers_.size();
    std::vector<double>& dst = last ? out : tape.activations[l + 1];
    dst.resize(static_cast<std::size_t>(layers_[l].out_dim) * batch);
    DenseForward(layers_[l], tape.activations[l].data(), batch, dst.data(),
                 !last);
  }
}

void Mlp::Backward(const MlpTape& tape, std::span<const double> d_out,
                   std::vector<DenseLayer>& grads) const {
  const int batch = tape.batch;
  std::vector<double> delta(d_out.begin(), d_out.end());
  std::vector<double> prev;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    DenseLayer& g = grads[l];
    const std::vector<double>& input = tape.activations[l];
    for (int j = 0; j < layer.out_dim; ++j) {
      const double* dj = delta.data() + static_cast<std::size_t>(j) * batch;
      double gb = 0.0;
      for (int s = 0; s < batch; ++s) gb += dj[s];
      g.bias[j] += gb;
      for (int k = 0; k < layer.in_dim; ++k) {
        const double* xk = input.data() + static_cast<std::size_t>(k) * batch;
        double gw = 0.0;
        for (int s = 0; s < batch; ++s) gw += dj[s] * xk[s];
        g.W(j, k) += gw;
      }
    }
    if (l == 0) break;
    prev.assign(static_cast<std::size_t>(layer.in_dim) * batch, 0.0);
    for (int j = 0; j < layer.out_dim; ++j) {
      const double* dj = delta.data() + static_cast<std::size_t>(j) * batch;
      for (int k = 0; k < layer.in_dim; ++k) {
        const double w = layer.W(j, k);
        double* pk = prev.data() + static_cast<std::size_t>(k) * batch;
        for (int s = 0; s < batch; ++s) pk[s] += w * dj[s];
      }
    }
    // ReLU derivative, using the post-activation value of the previous layer.
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (!(input[i] > 0.0)) prev[i] = 0.0;
    }
    delta.swap(prev);
  }
}

std::vector<DenseLayer> Mlp::ZeroGradients() const {
  std::vector<DenseLayer> grads;
  for (const DenseLayer& layer : layers_) {
    grads.push_back(MakeLayer(layer.in_dim, layer.out_dim));
  }
  return grads;
}

}  // namespace mppi_pid
