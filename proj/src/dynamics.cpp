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

#include "mppi_pid/dynamics.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mppi_pid {

using nlohmann::json;

void PhysicalParams::Validate() const {
  if (!(k_a > 0 && k_V > 0 && k_delta > 0 && k_r > 0)) {
    throw ConfigError("physical parameters must all be strictly positive");
  }
}

void MlpParams::Validate() const {
  for (double s : state_scale) {
    if (!(s > 0) || !std::isfinite(s)) {
      throw ConfigError("state normalization scales must be positive");
    }
  }
  for (double s : input_scale) {
    if (!(s > 0) || !std::isfinite(s)) {
      throw ConfigError("input normalization scales must be positive");
    }
  }
  if (!net.empty() && net.input_dim() != kStateDim + kInputDim) {
    throw ConfigError("network input dim must be " +
                      std::to_string(kStateDim + kInputDim));
  }
}

int ResidualDynamicsModel::ResidualDim() const {
  int n = 0;
  for (double m : mask) n += m != 0.0;
  return n;
}

void ResidualDynamicsModel::Validate() const {
  for (double m : mask) {
    if (m != 0.0 && m != 1.0) throw ConfigError("mask entries must be 0 or 1");
  }
  if (!(v_th > 0)) throw ConfigError("v_th must be positive");
  if (!(h > 0)) throw ConfigError("step size h must be positive");
  nn.Validate();
  if (!nn.net.empty() && nn.net.output_dim() != ResidualDim()) {
    throw ConfigError("network output dim " +
                      std::to_string(nn.net.output_dim()) +
                      " does not match the " + std::to_string(ResidualDim()) +
                      " masked dimensions");
  }
}

void StandardNnModel::Validate() const {
  if (!(h > 0)) throw ConfigError("step size h must be positive");
  nn.Validate();
  if (nn.net.empty() || nn.net.output_dim() != kStateDim) {
    throw ConfigError("standard network must map to the full state");
  }
}

StateVector PhysDerivative(const State& x, const ControlInput& u,
                           const PhysicalParams& p) {
  const double speed = x.Speed();
  const double delta = DegToRad(u.delta);
  return {
      x.vX,
      x.vY,
      x.c * x.r,
      -x.s * x.r,
      p.k_a * u.a * x.c - p.k_V * x.vX - x.r * x.vY,
      p.k_a * u.a * x.s - p.k_V * x.vY + x.r * x.vX,
      p.k_delta * speed * delta - p.k_r * x.r,
  };
}

State EulerStep(const State& x, const ControlInput& u, const PhysicalParams& p,
                double h) {
  if (!(h > 0)) throw ConfigError("Euler step size must be positive");
  const StateVector f = PhysDerivative(x, u, p);
  StateVector v = x.ToArray();
  for (int i = 0; i < kStateDim; ++i) v[i] += h * f[i];
  return State::FromArray(v);
}

double ResidualWeight(const State& x, double v_th) {
  const double v2 = x.vX * x.vX + x.vY * x.vY;
  return v2 / (v2 + v_th * v_th);
}

State NormalizeTrig(const State& x) {
  const double norm = std::sqrt(x.s * x.s + x.c * x.c);
  if (norm == 0.0) throw DegenerateHeadingError();
  State out = x;
  out.s = x.s / norm;
  out.c = x.c / norm;
  return out;
}

void NormalizedFeatures(const MlpParams& nn, const State& x,
                        const ControlInput& u, std::span<double> out) {
  const StateVector v = x.ToArray();
  for (int i = 0; i < kStateDim; ++i) out[i] = v[i] / nn.state_scale[i];
  out[kStateDim] = u.a / nn.input_scale[0];
  out[kStateDim + 1] = u.delta / nn.input_scale[1];
}

std::vector<double> MlpForward(const MlpParams& nn, const State& x,
                               const ControlInput& u) {
  nn.Validate();
  std::array<double, kStateDim + kInputDim> features;
  NormalizedFeatures(nn, x, u, features);
  return nn.net.Forward(features);
}

namespace {

// Applies the denormalized, masked, weighted residual held in column
// `col` of a feature-major output buffer.
State ApplyResidual(const ResidualDynamicsModel& m, const State& x,
                    const ControlInput& u, const double* outputs, int col,
                    int batch) {
  StateVector next = EulerStep(x, u, m.phys, m.h).ToArray();
  if (!m.nn.net.empty()) {
    const double w = ResidualWeight(x, m.v_th);
    int k = 0;
    for (int i = 0; i < kStateDim; ++i) {
      if (m.mask[i] == 0.0) continue;
      const double residual =
          outputs[static_cast<std::size_t>(k) * batch + col] *
          m.nn.state_scale[i];
      next[i] += w * (m.mask[i] * residual);
      ++k;
    }
  }
  return NormalizeTrig(State::FromArray(next));
}

State ApplyStandard(const StandardNnModel& m, const State& x,
                    const double* outputs, int col, int batch) {
  StateVector next = x.ToArray();
  for (int i = 0; i < kStateDim; ++i) {
    next[i] += m.nn.state_scale[i] *
               outputs[static_cast<std::size_t>(i) * batch + col];
  }
  return NormalizeTrig(State::FromArray(next));
}

void GatherFeatures(const MlpParams& nn, std::span<const State> x,
                    std::span<const ControlInput> u, std::vector<double>& buf) {
  const int batch = static_cast<int>(x.size());
  constexpr int kFeatures = kStateDim + kInputDim;
  buf.resize(static_cast<std::size_t>(kFeatures) * batch);
  std::array<double, kFeatures> f;
  for (int s = 0; s < batch; ++s) {
    NormalizedFeatures(nn, x[s], u[s], f);
    for (int k = 0; k < kFeatures; ++k) {
      buf[static_cast<std::size_t>(k) * batch + s] = f[k];
    }
  }
}

}  // namespace

State ResidualStep(const ResidualDynamicsModel& m, const State& x,
                   const ControlInput& u) {
  if (m.nn.net.empty()) return ApplyResidual(m, x, u, nullptr, 0, 1);
  const std::vector<double> out = MlpForward(m.nn, x, u);
  return ApplyResidual(m, x, u, out.data(), 0, 1);
}

PredictionModel::PredictionModel(ResidualDynamicsModel m) {
  m.Validate();
  model_ = std::move(m);
}

PredictionModel::PredictionModel(StandardNnModel m) {
  m.Validate();
  model_ = std::move(m);
}

PredictionModel PredictionModel::Physical(const PhysicalParams& p, double h) {
  ResidualDynamicsModel m;
  m.phys = p;
  m.h = h;
  return PredictionModel(std::move(m));
}

PredictionModel::Kind PredictionModel::kind() const {
  if (const auto* r = residual()) {
    return r->nn.net.empty() ? Kind::kPhysical : Kind::kResidual;
  }
  return Kind::kStandardNn;
}

std::string PredictionModel::KindName() const {
  switch (kind()) {
    case Kind::kPhysical:
      return "physical";
    case Kind::kResidual:
      return "residual";
    case Kind::kStandardNn:
      return "standard_nn";
  }
  return "unknown";
}

double PredictionModel::h() const {
  return std::visit([](const auto& m) { return m.h; }, model_);
}

State PredictionModel::Step(const State& x, const ControlInput& u) const {
  if (const auto* r = residual()) return ResidualStep(*r, x, u);
  const StandardNnModel& m = std::get<StandardNnModel>(model_);
  const std::vector<double> out = MlpForward(m.nn, x, u);
  return ApplyStandard(m, x, out.data(), 0, 1);
}

void PredictionModel::StepBatch(std::span<const State> x,
                                std::span<const ControlInput> u,
                                std::span<State> out, StepWorkspace& ws) const {
  const int batch = static_cast<int>(x.size());
  if (const auto* r = residual()) {
    if (r->nn.net.empty()) {
      for (int s = 0; s < batch; ++s) {
        out[s] = ApplyResidual(*r, x[s], u[s], nullptr, s, batch);
      }
      return;
    }
    GatherFeatures(r->nn, x, u, ws.features);
    ws.outputs.resize(static_cast<std::size_t>(r->nn.net.output_dim()) * batch);
    r->nn.net.ForwardBatch(ws.features, batch, ws.outputs, ws.mlp);
    for (int s = 0; s < batch; ++s) {
      out[s] = ApplyResidual(*r, x[s], u[s], ws.outputs.data(), s, batch);
    }
    return;
  }
  const StandardNnModel& m = std::get<StandardNnModel>(model_);
  GatherFeatures(m.nn, x, u, ws.features);
  ws.outputs.resize(static_cast<std::size_t>(kStateDim) * batch);
  m.nn.net.ForwardBatch(ws.features, batch, ws.outputs, ws.mlp);
  for (int s = 0; s < batch; ++s) {
    out[s] = ApplyStandard(m, x[s], ws.outputs.data(), s, batch);
  }
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json MlpToJson(const MlpParams& nn) {
  json layers = json::array();
  for (const DenseLayer& layer : nn.net.layers()) {
    layers.push_back({{"in_dim", layer.in_dim},
                      {"out_dim", layer.out_dim},
                      {"weight", layer.weight},
                      {"bias", layer.bias}});
  }
  return {{"layers", layers},
          {"state_scale", nn.state_scale},
          {"input_scale", nn.input_scale}};
}

MlpParams MlpFromJson(const json& j) {
  MlpParams nn;
  std::vector<DenseLayer> layers;
  for (const json& lj : j.at("layers")) {
    DenseLayer layer;
    layer.in_dim = lj.at("in_dim").get<int>();
    layer.out_dim = lj.at("out_dim").get<int>();
    layer.weight = lj.at("weight").get<std::vector<double>>();
    layer.bias = lj.at("bias").get<std::vector<double>>();
    layers.push_back(std::move(layer));
  }
  nn.net = Mlp(std::move(layers));
  nn.state_scale = j.at("state_scale").get<StateVector>();
  nn.input_scale = j.at("input_scale").get<InputVector>();
  return nn;
}

}  // namespace

std::string ModelToJson(const PredictionModel& model) {
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = model.KindName();
  j["h"] = model.h();
  if (const auto* r = model.residual()) {
    j["physical"] = {{"k_a", r->phys.k_a},
                     {"k_V", r->phys.k_V},
                     {"k_delta", r->phys.k_delta},
                     {"k_r", r->phys.k_r}};
    j["mask"] = r->mask;
    j["v_th"] = r->v_th;
    j["mlp"] = MlpToJson(r->nn);
  } else {
    j["mlp"] = MlpToJson(model.standard_nn()->nn);
  }
  return j.dump(1);
}

PredictionModel ModelFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw ConfigError("unsupported model schema_version " +
                        std::to_string(version));
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "standard_nn") {
      StandardNnModel m;
      m.h = j.at("h").get<double>();
      m.nn = MlpFromJson(j.at("mlp"));
      return PredictionModel(std::move(m));
    }
    if (kind != "physical" && kind != "residual") {
      throw ConfigError("unknown model kind '" + kind + "'");
    }
    ResidualDynamicsModel m;
    m.h = j.at("h").get<double>();
    const json& p = j.at("physical");
    m.phys = {p.at("k_a").get<double>(), p.at("k_V").get<double>(),
              p.at("k_delta").get<double>(), p.at("k_r").get<double>()};
    m.mask = j.at("mask").get<StateMask>();
    m.v_th = j.at("v_th").get<double>();
    m.nn = MlpFromJson(j.at("mlp"));
    return PredictionModel(std::move(m));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

void SaveModel(const PredictionModel& model,
               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file " + path.string());
  out << ModelToJson(model) << '\n';
}

PredictionModel LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ModelFromJson(ss.str());
}

}  // namespace mppi_pid
