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

// mppi-pid: data generation, identification, theory checks and closed-loop
// experiments.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mppi_pid/analysis.hpp"
#include "mppi_pid/config.hpp"
#include "mppi_pid/data.hpp"
#include "mppi_pid/learning.hpp"
#include "mppi_pid/sim.hpp"

namespace fs = std::filesystem;
using namespace mppi_pid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct GlobalOptions {
  std::string config_file;
  std::vector<std::string> overrides;
};

ExperimentConfig ResolveConfig(const GlobalOptions& g) {
  ExperimentConfig cfg =
      g.config_file.empty() ? ExperimentConfig{} : LoadConfig(g.config_file);
  cfg = ApplyOverrides(cfg, g.overrides);
  cfg.Validate();
  return cfg;
}

void WriteText(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << text;
}

// ---------------------------------------------------------------------------
// gen-data

int CmdGenData(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const fs::path raw = out_dir / "raw";
  fs::create_directories(raw);
  const std::vector<RawLog> logs = GenerateLogs(cfg.plant, cfg.logs);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "log_%03zu.csv", i);
    WriteRawLogCsv(logs[i], raw / name);
  }
  std::cout << "wrote " << logs.size() << " logs, " << CountSamples(logs)
            << " samples to " << raw.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// identify

std::vector<RawLog> ReadRawLogs(const fs::path& data_dir) {
  fs::path raw = data_dir / "raw";
  if (!fs::is_directory(raw)) raw = data_dir;
  if (!fs::is_directory(raw)) {
    throw ConfigError("data directory not found: " + data_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(raw)) {
    if (e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no raw logs in " + raw.string());
  std::vector<RawLog> logs;
  for (const fs::path& f : files) logs.push_back(ReadRawLogCsv(f));
  return logs;
}

std::string FormatR2(const R2Report& r) {
  std::string out;
  char buf[32];
  for (int i = 0; i < kStateDim; ++i) {
    if (r.per_dim[i]) {
      std::snprintf(buf, sizeof buf, "%10.4f", *r.per_dim[i]);
    } else {
      std::snprintf(buf, sizeof buf, "%10s", "n/a");
    }
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%10.4f", r.average);
  return out + buf;
}

int CmdIdentify(const ExperimentConfig& cfg, const fs::path& data_dir,
                const fs::path& out_model, const std::string& which) {
  if (which != "physical" && which != "residual" && which != "standard_nn" &&
      which != "all") {
    throw ConfigError("--model must be physical, residual, standard_nn or all");
  }
  const std::vector<RawLog> logs = ReadRawLogs(data_dir);
  const DatasetSplit split = Preprocess(logs, cfg.preprocess);
  WriteDataset(split, data_dir / "segments");
  std::cout << "segments: train " << split.train.size() << ", val "
            << split.val.size() << ", test " << split.test.size()
            << " (dropped intervals " << split.dropped_intervals << ")\n";

  IdentificationOptions opt;
  opt.train_residual = which == "residual" || which == "all";
  opt.train_standard_nn = which == "standard_nn" || which == "all";
  opt.v_th = cfg.residual_speed_threshold;
  opt.train = cfg.train;
  const IdentificationResult res = Identify(split, cfg.preprocess.h, opt);
  std::printf("k_a %.6g  k_V %.6g  k_delta %.6g  k_r %.6g\n", res.phys.k_a,
              res.phys.k_V, res.phys.k_delta, res.phys.k_r);

  if (!out_model.parent_path().empty()) fs::create_directories(out_model.parent_path());
  const fs::path stem = out_model.parent_path() / out_model.stem();
  auto suffixed = [&](const std::string& s, const std::string& ext) {
    return fs::path(stem.string() + "_" + s + ext);
  };
  SaveModel(res.physical, suffixed("physical", ".json"));
  const PredictionModel* primary = &res.physical;
  if (res.standard_nn) {
    SaveModel(res.standard_nn->model, suffixed("standard_nn", ".json"));
    WriteLossHistory(res.standard_nn->history, suffixed("standard_nn_loss", ".csv"));
    primary = &res.standard_nn->model;
  }
  if (res.residual) {
    SaveModel(res.residual->model, suffixed("residual", ".json"));
    WriteLossHistory(res.residual->history, suffixed("residual_loss", ".csv"));
    primary = &res.residual->model;
  }
  SaveModel(*primary, out_model);

  std::string table = "model           ";
  for (const char* n : kStateNames) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%10s", n);
    table += buf;
  }
  table += "   average\n";
  table += "physical        " + FormatR2(res.r2_physical) + "\n";
  if (res.r2_standard_nn) table += "standard_nn     " + FormatR2(*res.r2_standard_nn) + "\n";
  if (res.r2_residual) table += "residual        " + FormatR2(*res.r2_residual) + "\n";
  std::cout << "recursive R^2 on the test split\n" << table;
  WriteText(suffixed("r2", ".txt"), table);
  std::cout << "model written to " << out_model.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate-theory

struct CheckOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

CheckOutcome CheckEss(const ExperimentConfig& cfg, const fs::path& out) {
  const ValidationSettings& v = cfg.validation;
  std::mt19937_64 gen(v.seed + 11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  bool decay = true;
  nlohmann::json reports = nlohmann::json::array();
  for (int c = 0; c < v.ess_configs; ++c) {
    const double lambda = 0.5 + 1.5 * unif(gen);
    const double target = 0.3 + 0.9 * unif(gen);  // exponent at the largest n_z
    const int n_max = v.ess_dims.back();
    double prev_ratio = 2.0;
    for (int n : v.ess_dims) {
      Eigen::VectorXd g(n);
      Eigen::MatrixXd B(n, n);
      for (int k = 0; k < n; ++k) g(k) = 1.0 + 0.25 * (2.0 * unif(gen) - 1.0);
      for (int k = 0; k < n * n; ++k) B.data()[k] = normal(gen);
      Eigen::MatrixXd sigma = 0.8 * Eigen::MatrixXd::Identity(n, n) +
                              0.2 * B * B.transpose() / n;
      const double raw = g.dot(sigma * g) / (lambda * lambda);
      // Per-dimension scale chosen so the exponent reaches `target` at n_max.
      sigma *= target / raw * n / n_max;
      const EssReport r = EssMonteCarlo(g, sigma, lambda, v.mc_samples,
                                        v.seed * 1000 + c * 10 + n);
      reports.push_back(nlohmann::json::parse(ToJson(r)));
      if (r.PredictedRatio() > 1e-3) {
        worst = std::max(worst, std::abs(r.SampleRatio() / r.PredictedRatio() - 1.0));
      }
      decay = decay && r.SampleRatio() < prev_ratio;
      prev_ratio = r.SampleRatio();
    }
  }
  WriteText(out / "ess.json", reports.dump(2));
  char buf[96];
  std::snprintf(buf, sizeof buf, "max rel. deviation %.4f, decay %s", worst,
                decay ? "yes" : "no");
  return {"ess", worst < 0.05 && decay, buf};
}

CheckOutcome CheckKl(const ExperimentConfig& cfg, const fs::path& out) {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 1.0, 0.3, 0.3, 0.5;
  const Eigen::Vector2d c(1.0, -0.5);
  Eigen::Matrix2d A;
  A << 0.8, 0.2, 0.2, 0.4;
  auto J = [&](const Eigen::VectorXd& e) {
    const Eigen::Vector2d d = e - c;
    return d.dot(A * d);
  };
  KlProjectionConfig k;
  k.mc_samples = cfg.validation.mc_samples;
  k.seed = cfg.validation.seed;
  const KlProjectionReport r = ValidateKlProjection(J, sigma, k);
  WriteText(out / "kl_projection.json", ToJson(r));
  char buf[96];
  std::snprintf(buf, sizeof buf, "rel. deviation %.5f, perturbed <= optimum %d",
                r.relative_deviation, r.perturbed_not_higher);
  return {"kl", r.relative_deviation < 0.01 && r.perturbed_not_higher == 0, buf};
}

CheckOutcome CheckGradient(const ExperimentConfig& cfg, const fs::path& out) {
  auto J = [](const Eigen::VectorXd& z) { return z.squaredNorm(); };
  GradientCheckConfig g;
  g.mc_samples = cfg.validation.mc_samples;
  g.seed = cfg.validation.seed;
  g.lambda = cfg.validation.gradient_lambda;
  const GradientCheckReport r = ValidateGradientInterpretation(
      J, Eigen::Vector2d(1.0, 0.0), Eigen::Matrix2d::Identity(), g);
  WriteText(out / "gradient.json", ToJson(r));
  const bool pass = r.points.back().relative_error < 0.02 && r.MonotoneDecrease(3.0);
  char buf[96];
  std::snprintf(buf, sizeof buf, "rel. error at smallest alpha %.5f",
                r.points.back().relative_error);
  return {"gradient", pass, buf};
}

CheckOutcome CheckContinuity(const ExperimentConfig& cfg, const fs::path& out) {
  const ValidationSettings& v = cfg.validation;
  ContinuityConfig cc;
  cc.trials = v.continuity_trials;
  cc.seed = v.seed;
  cc.constraints.u_min = {-1e9, -1e9};
  cc.constraints.u_max = {1e9, 1e9};
  cc.constraints.du_min = {-1e9, -1e9};
  cc.constraints.du_max = {1e9, 1e9};
  std::mt19937_64 gen(v.seed + 5);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ErrorBasis> basis(v.continuity_steps);
  PidErrorVector integ{0, 0, 0}, prev{0, 0, 0};
  for (int t = 0; t < v.continuity_steps; ++t) {
    const PidErrorVector e{0.05 * normal(gen), 0.1 * normal(gen), 0.1 * normal(gen)};
    PidState st;
    st.integral = integ;
    st.prev_error = prev;
    st.has_prev = t > 0;
    const PidStepResult r = PidStep(cfg.initial_gains, st, e, cfg.u_bias,
                                    cfg.plant.h, cc.constraints);
    basis[t] = r.basis;
    integ = r.next.integral;
    prev = e;
  }
  const ContinuityReport pid = ContinuityStatsPid(
      basis, cfg.initial_gains, cfg.optimizer.sigma_theta, cfg.u_bias, cc);
  const std::vector<ControlInput> nominal(v.continuity_steps, cfg.u_bias);
  cc.seed = v.seed + 1;
  const ContinuityReport mppi =
      ContinuityStatsMppi(nominal, cfg.optimizer.sigma_u, cc);
  WriteText(out / "continuity_mppi_pid.json", ToJson(pid));
  WriteText(out / "continuity_mppi.json", ToJson(mppi));
  const bool pass = pid.max_abs_z < 4.0 && pid.max_increment_relative_error < 0.03 &&
                    mppi.max_abs_z < 4.0 && mppi.max_increment_relative_error < 0.03;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "mppi_pid max|z| %.2f incr %.4f; mppi max|z| %.2f incr %.4f",
                pid.max_abs_z, pid.max_increment_relative_error, mppi.max_abs_z,
                mppi.max_increment_relative_error);
  return {"continuity", pass, buf};
}

int CmdValidateTheory(const ExperimentConfig& cfg, const std::string& only,
                      const fs::path& out) {
  fs::create_directories(out);
  std::vector<CheckOutcome> results;
  const std::vector<std::string> names{"ess", "kl", "gradient", "continuity"};
  if (!only.empty() && std::find(names.begin(), names.end(), only) == names.end()) {
    throw ConfigError("--only must be one of ess, kl, gradient, continuity");
  }
  if (only.empty() || only == "ess") results.push_back(CheckEss(cfg, out));
  if (only.empty() || only == "kl") results.push_back(CheckKl(cfg, out));
  if (only.empty() || only == "gradient") results.push_back(CheckGradient(cfg, out));
  if (only.empty() || only == "continuity") results.push_back(CheckContinuity(cfg, out));
  bool all = true;
  for (const CheckOutcome& r : results) {
    std::printf("%-12s %s  %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL",
                r.detail.c_str());
    all = all && r.pass;
  }
  return all ? kExitOk : kExitValidation;
}

// ---------------------------------------------------------------------------
// run

PredictionModel ResolveModel(const ExperimentConfig& cfg, const std::string& path) {
  const fs::path p = path.empty() ? fs::path(cfg.model_path) : fs::path(path);
  if (fs::exists(p)) return LoadModel(p);
  if (!path.empty()) throw ConfigError("model file not found: " + p.string());
  std::cerr << "note: " << p.string()
            << " not found, planning with the plant's physics-only model\n";
  return cfg.plant.PhysicsOnly();
}

int CmdRun(const ExperimentConfig& cfg, const std::string& model_path,
           bool matrix, const fs::path& out) {
  fs::create_directories(out);
  const PredictionModel model = ResolveModel(cfg, model_path);
  if (matrix) {
    MatrixConfig m;
    m.scenarios = {cfg.MakeScenario()};
    m.sample_budgets = cfg.sample_budgets;
    m.seeds = cfg.seeds;
    m.run_dir = out;
    const std::vector<MatrixCell> cells = RunMatrix(m, model);
    WriteMatrixCsv(cells, out / "summary.csv");
    WriteMatrixJson(cells, out / "summary.json");
    std::printf("%-10s %-10s %6s %12s %12s %10s %10s %8s\n", "scenario",
                "controller", "I", "mean e_path", "max e_path", "mean|da|",
                "mean|dd|", "done");
    for (const MatrixCell& c : cells) {
      std::printf("%-10s %-10s %6d %12.5f %12.5f %10.5f %10.5f %8.2f\n",
                  c.scenario.c_str(), ControllerName(c.controller).c_str(),
                  c.samples, c.mean_e_path, c.max_e_path, c.mean_da, c.mean_dd,
                  c.completion_rate);
    }
    return kExitOk;
  }
  std::vector<RunRecord> runs;
  for (std::uint64_t seed : cfg.seeds) {
    Scenario s = cfg.MakeScenario();
    s.seed = seed;
    runs.push_back(RunScenario(s, model));
    const RunRecord& r = runs.back();
    WriteRunCsv(r, out / RunFileName(r));
    const fs::path timing = out / RunFileName(r);
    WriteTimingCsv(r, fs::path(timing.string().substr(0, timing.string().size() - 4) +
                               "_timing.csv"));
    const RunSummary sum = Summarize(r);
    std::printf("%s seed %llu: %d ticks, mean e_path %.5f, max %.5f, "
                "mean|da| %.4f, mean|dd| %.4f, %s\n",
                RunFileName(r).c_str(), static_cast<unsigned long long>(seed),
                sum.ticks, sum.mean_e_path, sum.max_e_path, sum.mean_da,
                sum.mean_dd, TerminationName(r.termination).c_str());
  }
  std::vector<const RunRecord*> ptrs;
  for (const RunRecord& r : runs) ptrs.push_back(&r);
  WriteTrajectorySvg(ptrs, out / (cfg.scenario + "_" +
                                  ControllerName(cfg.controller) + ".svg"));
  for (const RunRecord& r : runs) {
    if (r.diverged) return kExitDivergence;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPPI-PID path-following toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions global;
  app.add_option("--config", global.config_file, "JSON config file");
  app.add_option("--set", global.overrides, "Override, e.g. optimizer.samples=16");

  auto* gen = app.add_subcommand("gen-data", "Generate synthetic driving logs");
  std::string gen_out = "data";
  std::int64_t gen_seed = -1;
  double gen_duration = -1.0;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--seed", gen_seed, "Log generation seed");
  gen->add_option("--duration", gen_duration, "Seconds per scenario");

  auto* ident = app.add_subcommand("identify", "Fit and train prediction models");
  std::string data_dir, out_model, which = "all";
  ident->add_option("--data", data_dir, "Directory written by gen-data");
  ident->add_option("--out", out_model, "Model JSON path");
  ident->add_option("--model", which, "physical | standard_nn | residual | all");

  auto* theory = app.add_subcommand("validate-theory", "Run the numerical validators");
  std::string only, theory_out = "out/theory";
  theory->add_option("--only", only, "ess | kl | gradient | continuity");
  theory->add_option("--out", theory_out, "Report directory");

  auto* run = app.add_subcommand("run", "Closed-loop experiments");
  std::string controller, scenario, model_path, run_out;
  int samples = 0;
  std::int64_t seed = -1;
  bool matrix = false;
  run->add_option("--controller", controller, "fixed_pid | mppi | mppi_pid");
  run->add_option("--samples", samples, "Number of samples I");
  run->add_option("--scenario", scenario, "straight | curve | s_curve");
  run->add_option("--seed", seed, "Single seed instead of the configured list");
  run->add_option("--model", model_path, "Prediction model JSON");
  run->add_option("--out", run_out, "Output directory");
  run->add_flag("--matrix", matrix, "Run every controller and sample budget");

  app.add_subcommand("dump-config", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    ExperimentConfig cfg = ResolveConfig(global);
    if (gen->parsed()) {
      if (gen_seed >= 0) cfg.logs.seed = static_cast<std::uint64_t>(gen_seed);
      if (gen_duration >= 0) cfg.logs.duration = gen_duration;
      cfg.logs.Validate();
      return CmdGenData(cfg, gen_out);
    }
    if (ident->parsed()) {
      return CmdIdentify(cfg, data_dir.empty() ? cfg.data_dir : data_dir,
                         out_model.empty() ? cfg.model_path : out_model, which);
    }
    if (theory->parsed()) return CmdValidateTheory(cfg, only, theory_out);
    if (run->parsed()) {
      if (!controller.empty()) cfg.controller = ParseController(controller);
      if (samples > 0) cfg.optimizer.samples = samples;
      if (!scenario.empty()) cfg.scenario = scenario;
      if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
      if (samples > 0) cfg.sample_budgets = {samples};
      cfg.Validate();
      return CmdRun(cfg, model_path, matrix, run_out.empty() ? cfg.out_dir : run_out);
    }
    std::cout << ConfigToJson(cfg) << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ValidationError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IdentifiabilityError& e) {
    std::cerr << "identification failure: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
