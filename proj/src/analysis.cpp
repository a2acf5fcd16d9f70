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

#include "mppi_pid/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"

namespace mppi_pid {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// ESS

double EssSample(std::span<const double> weights) {
  return EffectiveSampleSize(weights);
}

double EssPredicted(const Eigen::VectorXd& g, const Eigen::MatrixXd& sigma,
                    double lambda, double samples) {
  if (g.size() != sigma.rows() || sigma.rows() != sigma.cols()) {
    throw ConfigError("gradient and covariance dimensions differ");
  }
  if (!(lambda > 0)) throw ConfigError("lambda must be positive");
  const double quad = g.dot(sigma * g);
  return samples * std::exp(-quad / (lambda * lambda));
}

namespace {

Eigen::MatrixXd CholeskyFactor(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) throw ConfigError("covariance not square");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw ConfigError("covariance must be positive semidefinite");
  }
  // Symmetric square root handles semidefinite matrices.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

EssReport EssMonteCarlo(const Eigen::VectorXd& g, const Eigen::MatrixXd& sigma,
                        double lambda, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("samples must be positive");
  EssReport r;
  r.samples = samples;
  r.lambda = lambda;
  r.n_z = static_cast<int>(g.size());
  r.g = g;
  r.sigma = sigma;
  r.ess_predicted = EssPredicted(g, sigma, lambda, samples);
  r.exponent = g.dot(sigma * g) / (lambda * lambda);

  // g' eps = (L' g)' z with eps = L z.
  const Eigen::VectorXd a = CholeskyFactor(sigma).transpose() * g;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> costs(samples);
  for (int i = 0; i < samples; ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) s += a(k) * normal(gen);
    costs[i] = s;
  }
  const double min_cost = *std::min_element(costs.begin(), costs.end());
  for (double& c : costs) c = std::exp(-(c - min_cost) / lambda);
  r.ess_sample = EssSample(costs);
  return r;
}

// ---------------------------------------------------------------------------
// KL projection

namespace {

struct GridResult {
  Eigen::VectorXd mean;
  double kl_at_mean = 0.0;
  std::vector<double> kl_at;  // for the supplied means
  double log_norm = 0.0;
};

// Tensor grid over [-half_width * sd_i, half_width * sd_i] with `points` per
// axis and trapezoid weights. Calls fn(point, log_weight_offset) per node.
template <typename Fn>
void ForEachGridNode(const Eigen::VectorXd& sd, double half_width, int points,
                     Fn&& fn) {
  const int n = static_cast<int>(sd.size());
  Eigen::VectorXd step(n);
  for (int i = 0; i < n; ++i) step(i) = 2.0 * half_width * sd(i) / (points - 1);
  auto end_weight = [&](int k) {
    return (k == 0 || k == points - 1) ? std::log(0.5) : 0.0;
  };
  Eigen::VectorXd p(n);
  if (n == 1) {
    for (int k = 0; k < points; ++k) {
      p(0) = -half_width * sd(0) + k * step(0);
      fn(p, end_weight(k) + std::log(step(0)));
    }
    return;
  }
  for (int k0 = 0; k0 < points; ++k0) {
    p(0) = -half_width * sd(0) + k0 * step(0);
    for (int k1 = 0; k1 < points; ++k1) {
      p(1) = -half_width * sd(1) + k1 * step(1);
      fn(p, end_weight(k0) + end_weight(k1) + std::log(step(0) * step(1)));
    }
  }
}

double LogNormalDensity(const Eigen::VectorXd& x, const Eigen::VectorXd& m,
                        const Eigen::LLT<Eigen::MatrixXd>& llt,
                        double log_det) {
  const Eigen::VectorXd d = llt.matrixL().solve(x - m);
  return -0.5 * d.squaredNorm() - 0.5 * log_det -
         0.5 * static_cast<double>(x.size()) * std::log(2.0 * M_PI);
}

// Log of the unnormalized q density at eps.
double LogTilted(const ScalarField& cost, const Eigen::VectorXd& eps,
                 const Eigen::LLT<Eigen::MatrixXd>& llt, double log_det,
                 double lambda) {
  return -cost(eps) / lambda +
         LogNormalDensity(eps, Eigen::VectorXd::Zero(eps.size()), llt, log_det);
}

GridResult IntegrateGrid(const ScalarField& cost,
                         const Eigen::LLT<Eigen::MatrixXd>& llt, double log_det,
                         const Eigen::VectorXd& sd, double lambda,
                         double half_width, int points,
                         const std::vector<Eigen::VectorXd>& kl_means) {
  const int n = static_cast<int>(sd.size());
  // Pass 1: maximum log weight for stable exponentiation.
  double max_log = -std::numeric_limits<double>::infinity();
  ForEachGridNode(sd, half_width, points, [&](const Eigen::VectorXd& p, double) {
    max_log = std::max(max_log, LogTilted(cost, p, llt, log_det, lambda));
  });
  // Pass 2: normalizer and mean.
  double z = 0.0;
  Eigen::VectorXd first = Eigen::VectorXd::Zero(n);
  ForEachGridNode(sd, half_width, points, [&](const Eigen::VectorXd& p, double lw) {
    const double w = std::exp(LogTilted(cost, p, llt, log_det, lambda) - max_log + lw);
    z += w;
    first += w * p;
  });
  GridResult r;
  r.mean = first / z;
  r.log_norm = max_log + std::log(z);
  // Pass 3: KL(q || N(m, Sigma)) for the mean and the supplied points.
  std::vector<Eigen::VectorXd> means = kl_means;
  means.insert(means.begin(), r.mean);
  std::vector<double> kl(means.size(), 0.0);
  ForEachGridNode(sd, half_width, points, [&](const Eigen::VectorXd& p, double lw) {
    const double log_q = LogTilted(cost, p, llt, log_det, lambda) - r.log_norm;
    const double mass = std::exp(log_q + lw);
    if (mass == 0.0) return;
    for (std::size_t j = 0; j < means.size(); ++j) {
      kl[j] += mass * (log_q - LogNormalDensity(p, means[j], llt, log_det));
    }
  });
  r.kl_at_mean = kl[0];
  r.kl_at.assign(kl.begin() + 1, kl.end());
  return r;
}

double LogMass(const ScalarField& cost, const Eigen::LLT<Eigen::MatrixXd>& llt,
               double log_det, const Eigen::VectorXd& sd, double lambda,
               double half_width, double step_sd, double ref_log) {
  const int points =
      static_cast<int>(std::lround(2.0 * half_width / step_sd)) + 1;
  double z = 0.0;
  ForEachGridNode(sd, half_width, points, [&](const Eigen::VectorXd& p, double lw) {
    z += std::exp(LogTilted(cost, p, llt, log_det, lambda) - ref_log + lw);
  });
  return std::log(z) + ref_log;
}

}  // namespace

KlProjectionReport ValidateKlProjection(const ScalarField& cost,
                                        const Eigen::MatrixXd& sigma,
                                        const KlProjectionConfig& cfg) {
  const int n = static_cast<int>(sigma.rows());
  if (n < 1 || n > 2 || sigma.cols() != n) {
    throw ConfigError("KL projection check supports 1 or 2 dimensions");
  }
  if (!(cfg.lambda > 0)) throw ConfigError("lambda must be positive");
  if (cfg.initial_points < 3 || cfg.max_points < cfg.initial_points) {
    throw ConfigError("invalid grid resolution");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("covariance must be positive definite");
  }
  const double log_det =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Eigen::VectorXd sd = sigma.diagonal().cwiseSqrt();

  std::mt19937_64 gen(cfg.seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> offsets(cfg.perturbations, Eigen::VectorXd(n));
  for (Eigen::VectorXd& o : offsets) {
    for (int i = 0; i < n; ++i) o(i) = cfg.perturbation_scale * sd(i) * normal(gen);
  }

  KlProjectionReport rep;
  rep.dim = n;
  rep.config = cfg;
  rep.sigma = sigma;
  int points = cfg.initial_points;
  GridResult prev = IntegrateGrid(cost, llt, log_det, sd, cfg.lambda,
                                  cfg.half_width_sigmas, points, {});
  GridResult cur = prev;
  while (true) {
    const int next = 2 * points - 1;
    if (next > cfg.max_points) {
      throw ValidationError("grid integration did not converge");
    }
    cur = IntegrateGrid(cost, llt, log_det, sd, cfg.lambda,
                        cfg.half_width_sigmas, next, {});
    points = next;
    const double scale = std::max(cur.mean.norm(), 1e-12 * sd.minCoeff());
    if ((cur.mean - prev.mean).norm() <= cfg.refine_tol * scale) break;
    prev = cur;
  }
  std::vector<Eigen::VectorXd> perturbed;
  for (const Eigen::VectorXd& o : offsets) perturbed.push_back(cur.mean + o);
  cur = IntegrateGrid(cost, llt, log_det, sd, cfg.lambda, cfg.half_width_sigmas,
                      points, perturbed);
  rep.grid_points = points;
  rep.m_star = cur.mean;
  rep.kl_at_optimum = cur.kl_at_mean;
  rep.min_kl_perturbed = std::numeric_limits<double>::infinity();
  for (double kl : cur.kl_at) {
    rep.min_kl_perturbed = std::min(rep.min_kl_perturbed, kl);
    if (kl <= rep.kl_at_optimum) ++rep.perturbed_not_higher;
  }

  // Mass outside: compare with a box two marginal stds wider on each side.
  const double step_sd = 2.0 * cfg.half_width_sigmas / (points - 1);
  const double outer =
      LogMass(cost, llt, log_det, sd, cfg.lambda, cfg.half_width_sigmas + 2.0,
              step_sd, cur.log_norm);
  rep.mass_outside = std::max(0.0, 1.0 - std::exp(cur.log_norm - outer));
  if (rep.mass_outside > cfg.max_mass_outside) {
    throw ValidationError("integration domain too small: mass outside " +
                          std::to_string(rep.mass_outside));
  }

  // Sampling estimate of the same mean.
  const Eigen::MatrixXd L = llt.matrixL();
  SampleBatch batch;
  batch.dim = n;
  batch.perturbations.resize(static_cast<std::size_t>(cfg.mc_samples) * n);
  batch.costs.resize(cfg.mc_samples);
  Eigen::VectorXd zv(n);
  for (int i = 0; i < cfg.mc_samples; ++i) {
    for (int k = 0; k < n; ++k) zv(k) = normal(gen);
    const Eigen::VectorXd eps = L * zv;
    for (int k = 0; k < n; ++k) {
      batch.perturbations[static_cast<std::size_t>(i) * n + k] = eps(k);
    }
    batch.costs[i] = cost(eps);
  }
  const std::vector<double> update = WeightsAndUpdate(batch, cfg.lambda);
  rep.m_mc = Eigen::Map<const Eigen::VectorXd>(update.data(), n);
  rep.ess = EffectiveSampleSize(batch.weights);
  const double denom = rep.m_star.norm();
  rep.relative_deviation =
      denom > 0 ? (rep.m_mc - rep.m_star).norm() / denom
                : std::numeric_limits<double>::infinity();
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient interpretation

bool GradientCheckReport::MonotoneDecrease(double slack) const {
  for (std::size_t j = 1; j < points.size(); ++j) {
    const double se = std::hypot(points[j].standard_error,
                                 points[j - 1].standard_error);
    if (points[j].relative_error >= points[j - 1].relative_error + slack * se) {
      return false;
    }
  }
  return true;
}

GradientCheckReport ValidateGradientInterpretation(
    const ScalarField& cost, const Eigen::VectorXd& z,
    const Eigen::MatrixXd& sigma0, const GradientCheckConfig& cfg) {
  const int n = static_cast<int>(z.size());
  if (sigma0.rows() != n || sigma0.cols() != n) {
    throw ConfigError("covariance dimension differs from z");
  }
  if (!(cfg.lambda > 0)) throw ConfigError("lambda must be positive");
  if (cfg.alphas.empty()) throw ConfigError("need at least one alpha");
  GradientCheckReport rep;
  rep.z = z;
  rep.config = cfg;
  rep.sigma0 = sigma0;
  rep.gradient.resize(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd zp = z, zm = z;
    zp(i) += cfg.fd_step;
    zm(i) -= cfg.fd_step;
    rep.gradient(i) = (cost(zp) - cost(zm)) / (2.0 * cfg.fd_step);
  }
  const Eigen::MatrixXd L = CholeskyFactor(sigma0);
  // Common standard normals across alphas.
  std::mt19937_64 gen(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd base(n, cfg.mc_samples);
  for (int i = 0; i < cfg.mc_samples; ++i) {
    for (int k = 0; k < n; ++k) base(k, i) = normal(gen);
  }
  base = L * base;

  for (double alpha : cfg.alphas) {
    GradientCheckPoint pt;
    pt.alpha = alpha;
    pt.target = -(alpha * alpha) * (sigma0 * rep.gradient) / cfg.lambda;
    SampleBatch batch;
    batch.dim = n;
    batch.perturbations.resize(static_cast<std::size_t>(cfg.mc_samples) * n);
    batch.costs.resize(cfg.mc_samples);
    for (int i = 0; i < cfg.mc_samples; ++i) {
      const Eigen::VectorXd eps = alpha * base.col(i);
      for (int k = 0; k < n; ++k) {
        batch.perturbations[static_cast<std::size_t>(i) * n + k] = eps(k);
      }
      batch.costs[i] = cost(z + eps);
    }
    const std::vector<double> update = WeightsAndUpdate(batch, cfg.lambda);
    pt.m_hat = Eigen::Map<const Eigen::VectorXd>(update.data(), n);
    pt.ess = EffectiveSampleSize(batch.weights);
    // Delta-method variance of the self-normalized estimator.
    double var = 0.0;
    for (int i = 0; i < cfg.mc_samples; ++i) {
      const double w = batch.normalized_weights[i];
      for (int k = 0; k < n; ++k) {
        const double d =
            batch.perturbations[static_cast<std::size_t>(i) * n + k] - pt.m_hat(k);
        var += w * w * d * d;
      }
    }
    const double tnorm = pt.target.norm();
    pt.relative_error = (pt.m_hat - pt.target).norm() / tnorm;
    pt.standard_error = std::sqrt(var) / tnorm;
    rep.points.push_back(std::move(pt));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Continuity

namespace {

// Accumulates first and second moments of 2T-vectors and the squared
// increments between consecutive steps.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(int steps)
      : steps_(steps),
        sum_(Eigen::VectorXd::Zero(2 * steps)),
        outer_(Eigen::MatrixXd::Zero(2 * steps, 2 * steps)),
        incr_(std::max(0, steps - 1), 0.0) {}

  void Add(const Eigen::VectorXd& du) {
    ++count_;
    sum_ += du;
    outer_.selfadjointView<Eigen::Lower>().rankUpdate(du);
    for (int t = 1; t < steps_; ++t) {
      incr_[t - 1] += (du.segment<2>(2 * t) - du.segment<2>(2 * t - 2)).squaredNorm();
    }
  }

  Eigen::MatrixXd Covariance() const {
    const double n = static_cast<double>(count_);
    const Eigen::VectorXd mean = sum_ / n;
    Eigen::MatrixXd full = outer_.selfadjointView<Eigen::Lower>();
    return (full - n * mean * mean.transpose()) / (n - 1.0);
  }

  std::vector<double> Increments() const {
    std::vector<double> out = incr_;
    for (double& v : out) v /= static_cast<double>(count_);
    return out;
  }

 private:
  int steps_;
  long count_ = 0;
  Eigen::VectorXd sum_;
  Eigen::MatrixXd outer_;
  std::vector<double> incr_;
};

void CheckInactive(const InputConstraints& c, const Eigen::VectorXd& u,
                   int steps) {
  for (int t = 0; t < steps; ++t) {
    const ControlInput ut{u(2 * t), u(2 * t + 1)};
    const bool in_box = ut.a >= c.u_min[0] && ut.a <= c.u_max[0] &&
                        ut.delta >= c.u_min[1] && ut.delta <= c.u_max[1];
    const bool ok = t == 0 ? in_box
                           : c.Contains(ut, {u(2 * t - 2), u(2 * t - 1)});
    if (!ok) {
      throw ProjectionActiveError(
          "projection active during continuity measurement at step " +
          std::to_string(t));
    }
  }
}

void FinishReport(ContinuityReport& rep, const MomentAccumulator& acc) {
  rep.empirical_cov = acc.Covariance();
  const int d = 2 * rep.steps;
  rep.cov_standard_error.resize(d, d);
  rep.max_abs_z = 0.0;
  const double n = static_cast<double>(rep.trials);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const Eigen::MatrixXd& p = rep.predicted_cov;
      const double se =
          std::sqrt((p(i, i) * p(j, j) + p(i, j) * p(i, j)) / n);
      rep.cov_standard_error(i, j) = se;
      const double diff = std::abs(rep.empirical_cov(i, j) - p(i, j));
      const double zscore =
          se > 0 ? diff / se
                 : (diff <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity());
      rep.max_abs_z = std::max(rep.max_abs_z, zscore);
    }
  }
  rep.increment_empirical = acc.Increments();
  rep.max_increment_relative_error = 0.0;
  rep.max_increment_absolute_error = 0.0;
  for (std::size_t k = 0; k < rep.increment_empirical.size(); ++k) {
    const double pred = rep.increment_predicted[k];
    const double err = std::abs(rep.increment_empirical[k] - pred);
    rep.max_increment_absolute_error =
        std::max(rep.max_increment_absolute_error, err);
    if (pred > 0) {
      rep.max_increment_relative_error =
          std::max(rep.max_increment_relative_error, err / pred);
    }
  }
}

Eigen::Matrix<double, 2, kNumGains> BasisMatrix(const ErrorBasis& e) {
  Eigen::Matrix<double, 2, kNumGains> m;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < kNumGains; ++c) m(r, c) = e[r][c];
  }
  return m;
}

}  // namespace

ContinuityReport ContinuityStatsPid(std::span<const ErrorBasis> basis,
                                    const PidGains& theta,
                                    const PidGains& sigma_theta,
                                    const ControlInput& u_bias,
                                    const ContinuityConfig& cfg) {
  const int steps = static_cast<int>(basis.size());
  if (steps < 2) throw ConfigError("need at least two steps");
  if (cfg.trials < 2) throw ConfigError("need at least two trials");
  cfg.constraints.Validate();
  ContinuityReport rep;
  rep.kind = PlannerKind::kMppiPid;
  rep.steps = steps;
  rep.trials = cfg.trials;

  std::vector<Eigen::Matrix<double, 2, kNumGains>> E;
  for (const ErrorBasis& b : basis) E.push_back(BasisMatrix(b));
  Eigen::Matrix<double, kNumGains, 1> th, sig;
  for (int g = 0; g < kNumGains; ++g) {
    th(g) = theta[g];
    sig(g) = sigma_theta[g];
  }
  const Eigen::Matrix<double, kNumGains, kNumGains> cov_theta =
      sig.array().square().matrix().asDiagonal();
  rep.predicted_cov.resize(2 * steps, 2 * steps);
  for (int t = 0; t < steps; ++t) {
    for (int s = 0; s < steps; ++s) {
      rep.predicted_cov.block<2, 2>(2 * t, 2 * s) =
          E[t] * cov_theta * E[s].transpose();
    }
  }
  for (int t = 1; t < steps; ++t) {
    const Eigen::Matrix<double, 2, kNumGains> d = E[t] - E[t - 1];
    rep.increment_predicted.push_back((d * cov_theta * d.transpose()).trace());
  }

  Eigen::VectorXd nominal(2 * steps);
  for (int t = 0; t < steps; ++t) {
    nominal.segment<2>(2 * t) = Eigen::Vector2d(u_bias.a, u_bias.delta) + E[t] * th;
  }
  std::mt19937_64 gen(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MomentAccumulator acc(steps);
  Eigen::Matrix<double, kNumGains, 1> eps;
  Eigen::VectorXd du(2 * steps);
  for (int i = 0; i < cfg.trials; ++i) {
    for (int g = 0; g < kNumGains; ++g) eps(g) = sig(g) * normal(gen);
    for (int t = 0; t < steps; ++t) du.segment<2>(2 * t) = E[t] * eps;
    CheckInactive(cfg.constraints, nominal + du, steps);
    acc.Add(du);
  }
  FinishReport(rep, acc);
  return rep;
}

ContinuityReport ContinuityStatsMppi(std::span<const ControlInput> nominal,
                                     const InputVector& sigma_u,
                                     const ContinuityConfig& cfg) {
  const int steps = static_cast<int>(nominal.size());
  if (steps < 2) throw ConfigError("need at least two steps");
  if (cfg.trials < 2) throw ConfigError("need at least two trials");
  cfg.constraints.Validate();
  ContinuityReport rep;
  rep.kind = PlannerKind::kMppi;
  rep.steps = steps;
  rep.trials = cfg.trials;
  rep.predicted_cov = Eigen::MatrixXd::Zero(2 * steps, 2 * steps);
  for (int t = 0; t < steps; ++t) {
    rep.predicted_cov(2 * t, 2 * t) = sigma_u[0] * sigma_u[0];
    rep.predicted_cov(2 * t + 1, 2 * t + 1) = sigma_u[1] * sigma_u[1];
  }
  const double trace = sigma_u[0] * sigma_u[0] + sigma_u[1] * sigma_u[1];
  rep.increment_predicted.assign(steps - 1, 2.0 * trace);

  Eigen::VectorXd base(2 * steps);
  for (int t = 0; t < steps; ++t) {
    base(2 * t) = nominal[t].a;
    base(2 * t + 1) = nominal[t].delta;
  }
  std::mt19937_64 gen(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MomentAccumulator acc(steps);
  Eigen::VectorXd du(2 * steps);
  for (int i = 0; i < cfg.trials; ++i) {
    for (int t = 0; t < steps; ++t) {
      du(2 * t) = sigma_u[0] * normal(gen);
      du(2 * t + 1) = sigma_u[1] * normal(gen);
    }
    CheckInactive(cfg.constraints, base + du, steps);
    acc.Add(du);
  }
  FinishReport(rep, acc);
  return rep;
}

std::vector<ErrorBasis> FrozenBasisTrajectory(const PlanningContext& ctx,
                                              const State& x0,
                                              const PidState& live,
                                              const PidGains& gains, int steps) {
  if (ctx.model == nullptr || ctx.index == nullptr) {
    throw ConfigError("planning context is incomplete");
  }
  std::vector<ErrorBasis> out;
  State x = x0;
  PidState pid = live;
  for (int t = 0; t < steps; ++t) {
    const PathQuery q = ctx.index->Query({x.X, x.Y});
    const PidErrorVector e = ToPidErrors(
        ComputePidErrors(q, x, ctx.cost.VRefAt(t)), ctx.steering_sign);
    const PidStepResult r =
        PidStep(gains, pid, e, ctx.u_bias, ctx.model->h(), ctx.constraints);
    out.push_back(r.basis);
    pid = r.next;
    x = ctx.model->Step(x, r.u);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json ToJsonValue(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json ToJsonValue(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string ToJson(const EssReport& r) {
  json j = {{"ess_sample", r.ess_sample},
            {"ess_predicted", r.ess_predicted},
            {"sample_ratio", r.SampleRatio()},
            {"predicted_ratio", r.PredictedRatio()},
            {"exponent", r.exponent},
            {"config",
             {{"samples", r.samples},
              {"lambda", r.lambda},
              {"n_z", r.n_z},
              {"g", ToJsonValue(r.g)},
              {"sigma", ToJsonValue(r.sigma)}}}};
  return j.dump(2);
}

std::string ToJson(const KlProjectionReport& r) {
  const KlProjectionConfig& c = r.config;
  json j = {{"m_star", ToJsonValue(r.m_star)},
            {"m_mc", ToJsonValue(r.m_mc)},
            {"relative_deviation", r.relative_deviation},
            {"grid_points", r.grid_points},
            {"mass_outside", r.mass_outside},
            {"kl_at_optimum", r.kl_at_optimum},
            {"min_kl_perturbed", r.min_kl_perturbed},
            {"perturbed_not_higher", r.perturbed_not_higher},
            {"ess", r.ess},
            {"config",
             {{"dim", r.dim},
              {"sigma", ToJsonValue(r.sigma)},
              {"lambda", c.lambda},
              {"mc_samples", c.mc_samples},
              {"seed", c.seed},
              {"half_width_sigmas", c.half_width_sigmas},
              {"initial_points", c.initial_points},
              {"refine_tol", c.refine_tol},
              {"perturbations", c.perturbations},
              {"perturbation_scale", c.perturbation_scale}}}};
  return j.dump(2);
}

std::string ToJson(const GradientCheckReport& r) {
  json points = json::array();
  for (const GradientCheckPoint& p : r.points) {
    points.push_back({{"alpha", p.alpha},
                      {"m_hat", ToJsonValue(p.m_hat)},
                      {"target", ToJsonValue(p.target)},
                      {"relative_error", p.relative_error},
                      {"standard_error", p.standard_error},
                      {"ess", p.ess}});
  }
  json j = {{"gradient", ToJsonValue(r.gradient)},
            {"points", points},
            {"config",
             {{"z", ToJsonValue(r.z)},
              {"sigma0", ToJsonValue(r.sigma0)},
              {"lambda", r.config.lambda},
              {"alphas", r.config.alphas},
              {"mc_samples", r.config.mc_samples},
              {"seed", r.config.seed}}}};
  return j.dump(2);
}

std::string ToJson(const ContinuityReport& r) {
  json j = {{"kind", r.kind == PlannerKind::kMppi ? "mppi" : "mppi_pid"},
            {"steps", r.steps},
            {"trials", r.trials},
            {"max_abs_z", r.max_abs_z},
            {"increment_empirical", r.increment_empirical},
            {"increment_predicted", r.increment_predicted},
            {"max_increment_relative_error", r.max_increment_relative_error},
            {"max_increment_absolute_error", r.max_increment_absolute_error},
            {"empirical_cov", ToJsonValue(r.empirical_cov)},
            {"predicted_cov", ToJsonValue(r.predicted_cov)}};
  return j.dump(2);
}

}  // namespace mppi_pid
