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

#ifndef MPPI_PID_MLP_HPP_
#define MPPI_PID_MLP_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace mppi_pid {

/// Fully connected layer, weight stored row-major as out_dim x in_dim.
struct DenseLayer {
  int in_dim = 0;
  int out_dim = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  double& W(int row, int col) { return weight[row * in_dim + col]; }
  double W(int row, int col) const { return weight[row * in_dim + col]; }
};

/// Activations kept by a training forward pass. Buffers are feature-major:
/// entry (feature k, sample s) lives at k * batch + s.
struct MlpTape {
  int batch = 0;
  std::vector<std::vector<double>> activations;  // [0] is the input
};

struct MlpWorkspace {
  std::vector<double> a;
  std::vector<double> b;
};

/// Multilayer perceptron with ReLU on every hidden layer and a linear output.
///
/// Batched evaluation accumulates each sample's dot products in a fixed
/// feature order, so a sample's result is bit-identical regardless of batch
/// size or position within the batch.
class Mlp {
 public:
  Mlp() = default;
  /// Throws ConfigError when consecutive layer dimensions disagree.
  explicit Mlp(std::vector<DenseLayer> layers);

  static Mlp Zeros(const std::vector<int>& dims);
  /// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) for weights and biases.
  static Mlp RandomInit(const std::vector<int>& dims, std::uint64_t seed);

  bool empty() const { return layers_.empty(); }
  int input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim; }
  int output_dim() const {
    return layers_.empty() ? 0 : layers_.back().out_dim;
  }
  std::vector<int> dims() const;
  std::size_t ParameterCount() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  std::vector<double> Forward(std::span<const double> x) const;

  /// in: input_dim x batch feature-major; out: output_dim x batch.
  void ForwardBatch(std::span<const double> in, int batch,
                    std::span<double> out, MlpWorkspace& ws) const;

  /// Forward pass that records activations for Backward.
  void ForwardTrain(std::span<const double> in, int batch, MlpTape& tape,
                    std::vector<double>& out) const;

  /// Accumulates parameter gradients for upstream gradient d_out
  /// (output_dim x batch). grads must have the same shape as layers().
  void Backward(const MlpTape& tape, std::span<const double> d_out,
                std::vector<DenseLayer>& grads) const;

  /// Zero-filled layers matching this network, for gradient accumulation.
  std::vector<DenseLayer> ZeroGradients() const;

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace mppi_pid

#endif  // MPPI_PID_MLP_HPP_
