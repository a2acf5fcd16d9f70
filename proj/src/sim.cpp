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

#include "mppi_pid/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mppi_pid {

using json = nlohmann::json;

std::string ControllerName(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kFixedPid:
      return "fixed_pid";
    case ControllerKind::kMppi:
      return "mppi";
    case ControllerKind::kMppiPid:
      return "mppi_pid";
  }
  return "unknown";
}

ControllerKind ParseController(const std::string& name) {
  if (name == "fixed_pid" || name == "pid") return ControllerKind::kFixedPid;
  if (name == "mppi") return ControllerKind::kMppi;
  if (name == "mppi_pid") return ControllerKind::kMppiPid;
  throw ConfigError("unknown controller '" + name + "'");
}

std::string TerminationName(Termination t) {
  switch (t) {
    case Termination::kGoalStop:
      return "goal_stop";
    case Termination::kOvershoot:
      return "overshoot";
    case Termination::kDuration:
      return "duration";
    case Termination::kDiverged:
      return "diverged";
  }
  return "unknown";
}

void Scenario::Validate() const {
  if (goals.empty()) throw ConfigError("scenario needs at least one goal");
  if (!(duration > 0)) throw ConfigError("scenario duration must be positive");
  if (goal_stop_ticks < 1) throw ConfigError("goal_stop_ticks must be >= 1");
  if (!(divergence_distance > 0)) {
    throw ConfigError("divergence distance must be positive");
  }
  if (path_points < 2) throw ConfigError("path needs at least 2 points");
  if (!(plant.h > 0)) throw ConfigError("step size h must be positive");
  optimizer.Validate();
  cost.Validate();
  constraints.Validate();
  if (!constraints.Contains(u_bias, u_bias)) {
    throw ConfigError("input bias violates the input bounds");
  }
}

Scenario StraightScenario() {
  Scenario s;
  s.name = "straight";
  s.goals = {{8.0, 0.0, 0.0}};
  s.duration = 100.0;
  return s;
}

Scenario CurveScenario() { return Scenario{}; }

Scenario SCurveScenario() {
  Scenario s;
  s.name = "s_curve";
  s.goals = {{2.0, 1.0, 0.7853981633974483}, {4.0, 2.0, 0.0}};
  s.duration = 70.0;
  return s;
}

Scenario ScenarioByName(const std::string& name) {
  if (name == "straight") return StraightScenario();
  if (name == "curve") return CurveScenario();
  if (name == "s_curve") return SCurveScenario();
  throw ConfigError("unknown scenario '" + name + "'");
}

// ---------------------------------------------------------------------------
// Closed loop

namespace {

struct Leg {
  std::unique_ptr<ReferencePath> path;
  std::unique_ptr<NearestPointIndex> index;
};

class Controller {
 public:
  Controller(const Scenario& s, const PredictionModel& model)
      : s_(s), model_(model) {
    cfg_ = s.optimizer;
    cfg_.seed = s.seed;
    live_.u_prev = s.u_bias;
    gains_ = s.fixed_gains;
  }

  void SetLeg(const Leg& leg) {
    PlanningContext ctx;
    ctx.model = &model_;
    ctx.path = leg.path.get();
    ctx.index = leg.index.get();
    ctx.cost = s_.cost;
    ctx.constraints = s_.constraints;
    ctx.u_bias = s_.u_bias;
    ctx.steering_sign = s_.steering_sign;
    index_ = leg.index.get();
    if (s_.controller == ControllerKind::kMppi) {
      std::vector<ControlInput> nominal;
      if (mppi_) nominal = mppi_->nominal();
      mppi_ = std::make_unique<MppiPlanner>(ctx, cfg_);
      if (!nominal.empty()) mppi_->set_nominal(std::move(nominal));
    } else if (s_.controller == ControllerKind::kMppiPid) {
      if (pid_planner_) gains_ = pid_planner_->gains();
      pid_planner_ = std::make_unique<MppiPidPlanner>(ctx, cfg_, gains_);
    }
  }

  ControlInput Act(const State& x, int k, TickRecord& rec) {
    switch (s_.controller) {
      case ControllerKind::kFixedPid: {
        const PidErrorVector e = ToPidErrors(
            ComputePidErrors(index_->Query({x.X, x.Y}), x, s_.cost.VRefAt(k)),
            s_.steering_sign);
        const PidStepResult r =
            PidStep(s_.fixed_gains, live_, e, s_.u_bias, s_.h(), s_.constraints);
        live_ = r.next;
        return r.u;
      }
      case ControllerKind::kMppi: {
        PlanStats stats;
        const ControlInput u = mppi_->Plan(x, live_.u_prev, k, &stats);
        live_.u_prev = u;
        rec.ess = std::move(stats.ess);
        return u;
      }
      case ControllerKind::kMppiPid: {
        PlanStats stats;
        const MppiPidResult r = pid_planner_->Plan(x, live_, k, &stats);
        live_ = r.next_state;
        rec.ess = std::move(stats.ess);
        rec.gains = r.gains;
        return r.u;
      }
    }
    throw std::logic_error("unknown controller");
  }

 private:
  const Scenario& s_;
  const PredictionModel& model_;
  OptimizerConfig cfg_;
  PidState live_;
  PidGains gains_;
  const NearestPointIndex* index_ = nullptr;
  std::unique_ptr<MppiPlanner> mppi_;
  std::unique_ptr<MppiPidPlanner> pid_planner_;
};

constexpr std::uint64_t kPlantStream = 0x706c616e74ULL;

}  // namespace

RunRecord RunScenario(const Scenario& s, const PredictionModel& model) {
  s.Validate();
  if (std::abs(model.h() - s.h()) > 1e-12) {
    throw ConfigError("prediction model and plant use different step sizes");
  }
  RunRecord rec;
  rec.scenario = s.name;
  rec.controller = s.controller;
  rec.samples = s.controller == ControllerKind::kFixedPid ? 0 : s.optimizer.samples;
  rec.seed = s.seed;

  std::vector<Leg> legs;
  Pose2 from = s.start;
  for (const Pose2& goal : s.goals) {
    Leg leg;
    leg.path = std::make_unique<ReferencePath>(
        BuildHermitePath(from, goal, s.path_points));
    leg.index = std::make_unique<NearestPointIndex>(*leg.path);
    rec.reference.push_back(leg.path->points());
    legs.push_back(std::move(leg));
    from = goal;
  }

  Controller controller(s, model);
  int leg = 0;
  controller.SetLeg(legs[0]);
  std::mt19937_64 plant_rng(SampleSeed(s.seed, kPlantStream, 0, 0));

  State x = State::FromPose(s.start.x, s.start.y, s.start.psi, s.start_speed);
  ControlInput u_prev = s.u_bias;
  const int max_ticks = static_cast<int>(std::floor(s.duration / s.h() + 1e-9));
  int slow_ticks = 0;
  const int last_leg = static_cast<int>(legs.size()) - 1;
  for (int k = 0; k < max_ticks; ++k) {
    PathQuery q = legs[leg].index->Query({x.X, x.Y});
    // Hand over to the next leg once the current one is used up.
    while (leg < last_leg) {
      const ReferencePath& p = *legs[leg].path;
      const double to_goal = (Vec2{x.X, x.Y} - p.goal()).Norm();
      if (q.index != p.size() - 1 && to_goal >= s.cost.eps_goal_pos) break;
      ++leg;
      controller.SetLeg(legs[leg]);
      q = legs[leg].index->Query({x.X, x.Y});
    }
    if (q.distance > s.divergence_distance) {
      rec.termination = Termination::kDiverged;
      rec.diverged = true;
      break;
    }
    if (leg == last_leg) {
      const ReferencePath& p = *legs[leg].path;
      const Vec2 offset = Vec2{x.X, x.Y} - p.goal();
      if (offset.Norm() < s.cost.eps_goal_pos) {
        rec.reached_goal = true;
        slow_ticks = x.Speed() < s.cost.eps_goal_vel ? slow_ticks + 1 : 0;
        if (s.goal_stop && slow_ticks >= s.goal_stop_ticks) {
          rec.termination = Termination::kGoalStop;
          break;
        }
      } else {
        slow_ticks = 0;
      }
      if (q.index == p.size() - 1 &&
          offset.Dot(p.tangent(p.size() - 1)) > s.cost.eps_goal_pos) {
        rec.termination = Termination::kOvershoot;
        break;
      }
    }

    TickRecord tick;
    tick.k = k;
    tick.t = k * s.h();
    tick.x = x;
    tick.e_path = q.distance;
    tick.leg = leg;
    const auto t0 = std::chrono::steady_clock::now();
    const ControlInput u = controller.Act(x, k, tick);
    tick.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (!s.constraints.Contains(u, u_prev)) {
      throw std::logic_error("applied input violates the input constraints");
    }
    tick.u = u;
    tick.da = std::abs(u.a - u_prev.a);
    tick.dd = std::abs(u.delta - u_prev.delta);
    rec.ticks.push_back(std::move(tick));

    x = s.plant_kind == PlantKind::kGroundTruth ? s.plant.Step(x, u, &plant_rng)
                                                : model.Step(x, u);
    if (!x.IsFinite()) {
      throw DivergenceError("plant state became non-finite at tick " +
                            std::to_string(k));
    }
    u_prev = u;
  }
  rec.final_state = x;
  return rec;
}

RunSummary Summarize(const RunRecord& r) {
  RunSummary s;
  s.ticks = static_cast<int>(r.ticks.size());
  s.reached_goal = r.reached_goal;
  s.diverged = r.diverged;
  if (r.ticks.empty()) return s;
  for (const TickRecord& t : r.ticks) {
    s.mean_e_path += t.e_path;
    s.max_e_path = std::max(s.max_e_path, t.e_path);
    s.mean_da += t.da;
    s.mean_dd += t.dd;
    s.mean_tick_seconds += t.wall_seconds;
  }
  const double n = static_cast<double>(r.ticks.size());
  s.mean_e_path /= n;
  s.mean_da /= n;
  s.mean_dd /= n;
  s.mean_tick_seconds /= n;
  return s;
}

// ---------------------------------------------------------------------------
// Output

namespace {

void Put(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

std::string RunCsvString(const RunRecord& r) {
  std::size_t n_ess = 0;
  bool has_gains = false;
  for (const TickRecord& t : r.ticks) {
    n_ess = std::max(n_ess, t.ess.size());
    has_gains = has_gains || t.gains.has_value();
  }
  std::string out = "k,t,X,Y,s,c,vX,vY,r,a,delta,e_path,da,dd,leg";
  for (std::size_t i = 0; i < n_ess; ++i) out += ",ess_" + std::to_string(i);
  if (has_gains) {
    for (int g = 0; g < kNumGains; ++g) out += ",theta_" + std::to_string(g);
  }
  out += '\n';
  for (const TickRecord& t : r.ticks) {
    out += std::to_string(t.k);
    const StateVector xv = t.x.ToArray();
    for (double v : {t.t, xv[0], xv[1], xv[2], xv[3], xv[4], xv[5], xv[6], t.u.a,
                     t.u.delta, t.e_path, t.da, t.dd}) {
      out += ',';
      Put(out, v);
    }
    out += ',' + std::to_string(t.leg);
    for (std::size_t i = 0; i < n_ess; ++i) {
      out += ',';
      if (i < t.ess.size()) Put(out, t.ess[i]);
    }
    if (has_gains) {
      for (int g = 0; g < kNumGains; ++g) {
        out += ',';
        if (t.gains) Put(out, (*t.gains)[g]);
      }
    }
    out += '\n';
  }
  return out;
}

void WriteRunCsv(const RunRecord& r, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << RunCsvString(r);
}

void WriteTimingCsv(const RunRecord& r, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.precision(9);
  out << "k,wall_seconds\n";
  for (const TickRecord& t : r.ticks) out << t.k << ',' << t.wall_seconds << '\n';
}

std::string RunFileName(const RunRecord& r) {
  return r.scenario + "_" + ControllerName(r.controller) + "_" +
         std::to_string(r.samples) + "_" + std::to_string(r.seed) + ".csv";
}

void WriteTrajectorySvg(const std::vector<const RunRecord*>& runs,
                        const std::filesystem::path& file) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto grow = [&](double x, double y) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  };
  for (const RunRecord* r : runs) {
    for (const auto& leg : r->reference) {
      for (const Vec2& p : leg) grow(p.x, p.y);
    }
    for (const TickRecord& t : r->ticks) grow(t.x.X, t.x.Y);
  }
  if (xmin > xmax) {
    xmin = ymin = 0;
    xmax = ymax = 1;
  }
  const double size = 800.0, margin = 40.0;
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-6});
  const double scale = (size - 2 * margin) / span;
  auto px = [&](double x) { return margin + (x - xmin) * scale; };
  auto py = [&](double y) { return size - margin - (y - ymin) * scale; };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
      << "\" height=\"" << size << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto polyline = [&](const std::vector<Vec2>& pts, const char* color,
                      bool dashed) {
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"8,6\"" : "")
        << " points=\"";
    for (const Vec2& p : pts) svg << px(p.x) << ',' << py(p.y) << ' ';
    svg << "\"/>\n";
  };
  if (!runs.empty()) {
    for (const auto& leg : runs.front()->reference) polyline(leg, "#555555", true);
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::vector<Vec2> traj;
    for (const TickRecord& t : runs[i]->ticks) traj.push_back({t.x.X, t.x.Y});
    const char* color = kColors[i % std::size(kColors)];
    polyline(traj, color, false);
    svg << "<text x=\"" << margin << "\" y=\"" << 20 + 16 * i << "\" fill=\""
        << color << "\" font-size=\"14\">" << ControllerName(runs[i]->controller)
        << " I=" << runs[i]->samples << " seed=" << runs[i]->seed << "</text>\n";
  }
  svg << "</svg>\n";
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << svg.str();
}

// ---------------------------------------------------------------------------
// Experiment matrix

std::vector<MatrixCell> RunMatrix(const MatrixConfig& cfg,
                                  const PredictionModel& model) {
  if (cfg.seeds.empty()) throw ConfigError("matrix needs at least one seed");
  if (cfg.run_dir) std::filesystem::create_directories(*cfg.run_dir);
  std::vector<MatrixCell> cells;
  for (const Scenario& base : cfg.scenarios) {
    for (ControllerKind c : cfg.controllers) {
      std::vector<int> budgets = cfg.sample_budgets;
      if (c == ControllerKind::kFixedPid) budgets = {0};
      for (int samples : budgets) {
        MatrixCell cell;
        cell.scenario = base.name;
        cell.controller = c;
        cell.samples = samples;
        for (std::uint64_t seed : cfg.seeds) {
          Scenario s = base;
          s.controller = c;
          if (samples > 0) s.optimizer.samples = samples;
          s.seed = seed;
          const RunRecord r = RunScenario(s, model);
          if (cfg.run_dir) WriteRunCsv(r, *cfg.run_dir / RunFileName(r));
          cell.per_run.push_back(Summarize(r));
        }
        cell.runs = static_cast<int>(cell.per_run.size());
        for (const RunSummary& r : cell.per_run) {
          cell.mean_e_path += r.mean_e_path / cell.runs;
          cell.max_e_path = std::max(cell.max_e_path, r.max_e_path);
          cell.mean_da += r.mean_da / cell.runs;
          cell.mean_dd += r.mean_dd / cell.runs;
          cell.completion_rate += (r.reached_goal ? 1.0 : 0.0) / cell.runs;
          cell.diverged += r.diverged ? 1 : 0;
          cell.mean_tick_seconds += r.mean_tick_seconds / cell.runs;
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

const MatrixCell* FindCell(const std::vector<MatrixCell>& cells,
                           const std::string& scenario, ControllerKind c,
                           int samples) {
  for (const MatrixCell& cell : cells) {
    if (cell.scenario == scenario && cell.controller == c &&
        (c == ControllerKind::kFixedPid || cell.samples == samples)) {
      return &cell;
    }
  }
  return nullptr;
}

void WriteMatrixCsv(const std::vector<MatrixCell>& cells,
                    const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.precision(10);
  out << "scenario,controller,samples,runs,mean_e_path,max_e_path,mean_da,"
         "mean_dd,completion_rate,diverged,mean_tick_seconds\n";
  for (const MatrixCell& c : cells) {
    out << c.scenario << ',' << ControllerName(c.controller) << ',' << c.samples
        << ',' << c.runs << ',' << c.mean_e_path << ',' << c.max_e_path << ','
        << c.mean_da << ',' << c.mean_dd << ',' << c.completion_rate << ','
        << c.diverged << ',' << c.mean_tick_seconds << '\n';
  }
}

void WriteMatrixJson(const std::vector<MatrixCell>& cells,
                     const std::filesystem::path& file) {
  json arr = json::array();
  for (const MatrixCell& c : cells) {
    json runs = json::array();
    for (const RunSummary& r : c.per_run) {
      runs.push_back({{"mean_e_path", r.mean_e_path},
                      {"max_e_path", r.max_e_path},
                      {"mean_da", r.mean_da},
                      {"mean_dd", r.mean_dd},
                      {"ticks", r.ticks},
                      {"reached_goal", r.reached_goal},
                      {"diverged", r.diverged},
                      {"mean_tick_seconds", r.mean_tick_seconds}});
    }
    arr.push_back({{"scenario", c.scenario},
                   {"controller", ControllerName(c.controller)},
                   {"samples", c.samples},
                   {"runs", c.runs},
                   {"mean_e_path", c.mean_e_path},
                   {"max_e_path", c.max_e_path},
                   {"mean_da", c.mean_da},
                   {"mean_dd", c.mean_dd},
                   {"completion_rate", c.completion_rate},
                   {"diverged", c.diverged},
                   {"mean_tick_seconds", c.mean_tick_seconds},
                   {"per_run", runs}});
  }
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << arr.dump(2) << '\n';
}

}  // namespace mppi_pid
