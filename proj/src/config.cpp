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

#include "mppi_pid/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mppi_pid {

using json = nlohmann::json;

InputConstraints ExperimentConfig::Constraints() const {
  return InputConstraints::FromRates(u_min, u_max, rate_max, plant.h);
}

Scenario ExperimentConfig::MakeScenario() const {
  Scenario s = ScenarioByName(scenario);
  if (scenario_duration > 0) s.duration = scenario_duration;
  s.controller = controller;
  s.optimizer = optimizer;
  s.fixed_gains = initial_gains;
  s.cost = cost;
  s.constraints = Constraints();
  s.u_bias = u_bias;
  s.steering_sign = steering_sign;
  s.plant = plant;
  s.seed = seeds.empty() ? 0 : seeds.front();
  return s;
}

void ExperimentConfig::Validate() const {
  if (!(plant.h > 0)) throw ConfigError("plant.h must be positive");
  plant.phys.Validate();
  logs.Validate();
  train.Validate();
  if (!(residual_speed_threshold > 0)) {
    throw ConfigError("residual_speed_threshold must be positive");
  }
  if (std::abs(preprocess.h - plant.h) > 1e-12) {
    throw ConfigError("preprocess.h must equal plant.h");
  }
  optimizer.Validate();
  cost.Validate();
  Constraints().Validate();
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  for (int I : sample_budgets) {
    if (I < 1) throw ConfigError("sample budgets must be positive");
  }
  MakeScenario().Validate();
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace {

json ToJsonObject(const ExperimentConfig& c) {
  json j;
  j["plant"] = {{"h", c.plant.h},
                {"k_a", c.plant.phys.k_a},
                {"k_V", c.plant.phys.k_V},
                {"k_delta", c.plant.phys.k_delta},
                {"k_r", c.plant.phys.k_r},
                {"drag", c.plant.residual.drag},
                {"steer_saturation", c.plant.residual.steer_saturation},
                {"yaw_cubic", c.plant.residual.yaw_cubic},
                {"process_noise", c.plant.process_noise}};
  j["logs"] = {{"scenarios", c.logs.scenarios},
               {"duration", c.logs.duration},
               {"gap_probability", c.logs.gap_probability},
               {"gap_min_samples", c.logs.gap_min_samples},
               {"gap_max_samples", c.logs.gap_max_samples},
               {"timestamp_jitter", c.logs.timestamp_jitter},
               {"seed", c.logs.seed}};
  const PreprocessConfig& p = c.preprocess;
  j["preprocess"] = {{"gap_threshold", p.gap_threshold},
                     {"h", p.h},
                     {"segment_duration", p.segment_duration},
                     {"median_window", p.median_window},
                     {"pose_window", p.pose_window},
                     {"velocity_window", p.velocity_window},
                     {"input_window", p.input_window},
                     {"train_fraction", p.train_fraction},
                     {"val_fraction", p.val_fraction},
                     {"split_seed", p.split_seed}};
  const TrainConfig& t = c.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"grad_clip", t.grad_clip},
                {"next_state_noise_std", t.next_state_noise_std},
                {"early_stop_patience", t.early_stop_patience},
                {"max_epochs", t.max_epochs},
                {"hidden_units", t.hidden_units},
                {"rng_seed", t.rng_seed}};
  j["residual_speed_threshold"] = c.residual_speed_threshold;
  j["scenario"] = c.scenario;
  j["scenario_duration"] = c.scenario_duration;
  j["controller"] = ControllerName(c.controller);
  const OptimizerConfig& o = c.optimizer;
  j["optimizer"] = {{"horizon", o.horizon},
                    {"samples", o.samples},
                    {"iterations", o.iterations},
                    {"lambda", o.lambda},
                    {"sigma_u", o.sigma_u},
                    {"sigma_theta", o.sigma_theta},
                    {"threads", o.threads}};
  j["cost"] = {{"w_V", c.cost.w_V},
               {"w_path", c.cost.w_path},
               {"w_align", c.cost.w_align},
               {"w_du", c.cost.w_du},
               {"w_goal", c.cost.w_goal},
               {"eps_goal_pos", c.cost.eps_goal_pos},
               {"eps_goal_vel", c.cost.eps_goal_vel},
               {"v_ref", c.cost.v_ref},
               {"v_ref_schedule", c.cost.v_ref_schedule}};
  j["constraints"] = {
      {"u_min", c.u_min}, {"u_max", c.u_max}, {"rate_max", c.rate_max}};
  j["u_bias"] = c.u_bias.ToArray();
  j["initial_gains"] = c.initial_gains;
  j["steering_sign"] = c.steering_sign;
  j["seeds"] = c.seeds;
  j["sample_budgets"] = c.sample_budgets;
  const ValidationSettings& v = c.validation;
  j["validation"] = {{"mc_samples", v.mc_samples},
                     {"continuity_trials", v.continuity_trials},
                     {"continuity_steps", v.continuity_steps},
                     {"ess_configs", v.ess_configs},
                     {"ess_dims", v.ess_dims},
                     {"gradient_lambda", v.gradient_lambda},
                     {"seed", v.seed}};
  j["paths"] = {{"data_dir", c.data_dir},
                {"model_path", c.model_path},
                {"out_dir", c.out_dir}};
  return j;
}

template <typename T>
void Read(const json& j, const char* key, T& out) {
  out = j.at(key).get<T>();
}

ExperimentConfig FromJsonObject(const json& j) {
  ExperimentConfig c;
  const json& pl = j.at("plant");
  Read(pl, "h", c.plant.h);
  Read(pl, "k_a", c.plant.phys.k_a);
  Read(pl, "k_V", c.plant.phys.k_V);
  Read(pl, "k_delta", c.plant.phys.k_delta);
  Read(pl, "k_r", c.plant.phys.k_r);
  Read(pl, "drag", c.plant.residual.drag);
  Read(pl, "steer_saturation", c.plant.residual.steer_saturation);
  Read(pl, "yaw_cubic", c.plant.residual.yaw_cubic);
  Read(pl, "process_noise", c.plant.process_noise);
  const json& lg = j.at("logs");
  Read(lg, "scenarios", c.logs.scenarios);
  Read(lg, "duration", c.logs.duration);
  Read(lg, "gap_probability", c.logs.gap_probability);
  Read(lg, "gap_min_samples", c.logs.gap_min_samples);
  Read(lg, "gap_max_samples", c.logs.gap_max_samples);
  Read(lg, "timestamp_jitter", c.logs.timestamp_jitter);
  Read(lg, "seed", c.logs.seed);
  const json& pp = j.at("preprocess");
  PreprocessConfig& p = c.preprocess;
  Read(pp, "gap_threshold", p.gap_threshold);
  Read(pp, "h", p.h);
  Read(pp, "segment_duration", p.segment_duration);
  Read(pp, "median_window", p.median_window);
  Read(pp, "pose_window", p.pose_window);
  Read(pp, "velocity_window", p.velocity_window);
  Read(pp, "input_window", p.input_window);
  Read(pp, "train_fraction", p.train_fraction);
  Read(pp, "val_fraction", p.val_fraction);
  Read(pp, "split_seed", p.split_seed);
  const json& tr = j.at("train");
  TrainConfig& t = c.train;
  Read(tr, "learning_rate", t.learning_rate);
  Read(tr, "batch_size", t.batch_size);
  Read(tr, "grad_clip", t.grad_clip);
  Read(tr, "next_state_noise_std", t.next_state_noise_std);
  Read(tr, "early_stop_patience", t.early_stop_patience);
  Read(tr, "max_epochs", t.max_epochs);
  Read(tr, "hidden_units", t.hidden_units);
  Read(tr, "rng_seed", t.rng_seed);
  Read(j, "residual_speed_threshold", c.residual_speed_threshold);
  Read(j, "scenario", c.scenario);
  Read(j, "scenario_duration", c.scenario_duration);
  c.controller = ParseController(j.at("controller").get<std::string>());
  const json& op = j.at("optimizer");
  OptimizerConfig& o = c.optimizer;
  Read(op, "horizon", o.horizon);
  Read(op, "samples", o.samples);
  Read(op, "iterations", o.iterations);
  Read(op, "lambda", o.lambda);
  Read(op, "sigma_u", o.sigma_u);
  Read(op, "sigma_theta", o.sigma_theta);
  Read(op, "threads", o.threads);
  const json& co = j.at("cost");
  Read(co, "w_V", c.cost.w_V);
  Read(co, "w_path", c.cost.w_path);
  Read(co, "w_align", c.cost.w_align);
  Read(co, "w_du", c.cost.w_du);
  Read(co, "w_goal", c.cost.w_goal);
  Read(co, "eps_goal_pos", c.cost.eps_goal_pos);
  Read(co, "eps_goal_vel", c.cost.eps_goal_vel);
  Read(co, "v_ref", c.cost.v_ref);
  Read(co, "v_ref_schedule", c.cost.v_ref_schedule);
  const json& cs = j.at("constraints");
  Read(cs, "u_min", c.u_min);
  Read(cs, "u_max", c.u_max);
  Read(cs, "rate_max", c.rate_max);
  c.u_bias = ControlInput::FromArray(j.at("u_bias").get<InputVector>());
  Read(j, "initial_gains", c.initial_gains);
  Read(j, "steering_sign", c.steering_sign);
  Read(j, "seeds", c.seeds);
  Read(j, "sample_budgets", c.sample_budgets);
  const json& va = j.at("validation");
  ValidationSettings& v = c.validation;
  Read(va, "mc_samples", v.mc_samples);
  Read(va, "continuity_trials", v.continuity_trials);
  Read(va, "continuity_steps", v.continuity_steps);
  Read(va, "ess_configs", v.ess_configs);
  Read(va, "ess_dims", v.ess_dims);
  Read(va, "gradient_lambda", v.gradient_lambda);
  Read(va, "seed", v.seed);
  const json& pa = j.at("paths");
  Read(pa, "data_dir", c.data_dir);
  Read(pa, "model_path", c.model_path);
  Read(pa, "out_dir", c.out_dir);
  return c;
}

// Every key of `given` must exist in `reference` with the same kind of value.
void CheckKeys(const json& given, const json& reference,
               const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!reference.contains(it.key())) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    const json& ref = reference.at(it.key());
    if (ref.is_object()) {
      if (!it->is_object()) throw ConfigError("config key '" + key + "' must be an object");
      CheckKeys(*it, ref, key);
    }
  }
}

ExperimentConfig Merge(const json& patch) {
  if (!patch.is_object()) throw ConfigError("config must be a JSON object");
  json base = ToJsonObject(ExperimentConfig{});
  CheckKeys(patch, base, "");
  base.merge_patch(patch);
  try {
    ExperimentConfig c = FromJsonObject(base);
    c.Validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
}

}  // namespace

ExperimentConfig ConfigFromJson(const std::string& text) {
  json patch;
  try {
    patch = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return Merge(patch);
}

ExperimentConfig LoadConfig(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ConfigFromJson(ss.str());
}

std::string ConfigToJson(const ExperimentConfig& cfg) {
  return ToJsonObject(cfg).dump(2);
}

ExperimentConfig ApplyOverrides(const ExperimentConfig& cfg,
                                const std::vector<std::string>& overrides) {
  json current = ToJsonObject(cfg);
  json patch = json::object();
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override must look like key=value: '" + item + "'");
    }
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json::json_pointer ptr;
    std::stringstream ks(key);
    std::string part;
    while (std::getline(ks, part, '.')) ptr /= part;
    if (!current.contains(ptr)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    patch[ptr] = value;
  }
  current.merge_patch(patch);
  return Merge(current);
}

}  // namespace mppi_pid
