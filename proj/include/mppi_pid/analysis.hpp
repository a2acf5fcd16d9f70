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

#ifndef MPPI_PID_ANALYSIS_HPP_
#define MPPI_PID_ANALYSIS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mppi_pid/control.hpp"

namespace mppi_pid {

// ---------------------------------------------------------------------------
// Effective sample size

/// (sum w)^2 / sum w^2. Throws ValidationError for all-zero weights.
double EssSample(std::span<const double> weights);

/// I exp(-g' Sigma g / lambda^2), the log-normal approximation of the ESS of
/// weights exp(-g' eps / lambda) with eps ~ N(0, Sigma).
double EssPredicted(const Eigen::VectorXd& g, const Eigen::MatrixXd& sigma,
                    double lambda, double samples);

struct EssReport {
  double ess_sample = 0.0;
  double ess_predicted = 0.0;
  int samples = 0;
  double lambda = 1.0;
  int n_z = 0;
  double exponent = 0.0;  // g' Sigma g / lambda^2
  Eigen::VectorXd g;
  Eigen::MatrixXd sigma;

  double SampleRatio() const { return ess_sample / samples; }
  double PredictedRatio() const { return ess_predicted / samples; }
};

/// Draws `samples` perturbations eps ~ N(0, Sigma), forms the linearized
/// weights exp(-(g' eps - min) / lambda) and compares the two ESS values.
EssReport EssMonteCarlo(const Eigen::VectorXd& g, const Eigen::MatrixXd& sigma,
                        double lambda, int samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Optimal-distribution projection

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

struct KlProjectionConfig {
  double lambda = 1.0;
  int mc_samples = 1000000;
  std::uint64_t seed = 0;
  double half_width_sigmas = 8.0;  // integration domain, per axis
  int initial_points = 65;         // per axis
  int max_points = 4097;
  double refine_tol = 1e-6;        // relative change between resolutions
  double max_mass_outside = 1e-6;
  int perturbations = 100;
  double perturbation_scale = 0.5;  // in units of the marginal std
};

struct KlProjectionReport {
  int dim = 0;
  Eigen::VectorXd m_star;  // grid-integrated E_q[eps]
  Eigen::VectorXd m_mc;    // weighted sample mean
  double relative_deviation = 0.0;
  int grid_points = 0;  // per axis at convergence
  double mass_outside = 0.0;
  double kl_at_optimum = 0.0;
  double min_kl_perturbed = 0.0;
  int perturbed_not_higher = 0;  // count of perturbed means with KL <= optimum
  double ess = 0.0;
  KlProjectionConfig config;
  Eigen::MatrixXd sigma;
};

/// Computes the mean of q(eps) ~ exp(-J(eps)/lambda) N(eps; 0, Sigma) by
/// grid integration over a truncated box (n = 1 or 2), compares it with the
/// sampling estimate, and evaluates KL(q || N(m, Sigma)) at the optimum and at
/// random perturbations of it. Throws ValidationError when the box leaves
/// more than max_mass_outside of q's mass out.
KlProjectionReport ValidateKlProjection(const ScalarField& cost,
                                        const Eigen::MatrixXd& sigma,
                                        const KlProjectionConfig& cfg);

// ---------------------------------------------------------------------------
// Gradient interpretation

struct GradientCheckConfig {
  double lambda = 0.1;
  std::vector<double> alphas{0.1, 0.05, 0.01};
  int mc_samples = 1000000;
  std::uint64_t seed = 0;
  double fd_step = 1e-6;
};

struct GradientCheckPoint {
  double alpha = 0.0;
  Eigen::VectorXd m_hat;
  Eigen::VectorXd target;  // -Sigma grad J / lambda
  double relative_error = 0.0;
  double standard_error = 0.0;  // of relative_error, from the weighted variance
  double ess = 0.0;
};

struct GradientCheckReport {
  Eigen::VectorXd z;
  Eigen::VectorXd gradient;  // central differences
  std::vector<GradientCheckPoint> points;
  GradientCheckConfig config;
  Eigen::MatrixXd sigma0;

  /// Each error is below the previous one plus `slack` combined standard
  /// errors.
  bool MonotoneDecrease(double slack) const;
};

/// For each alpha, samples eps ~ N(0, alpha^2 Sigma0) with the same standard
/// normals, weights by exp(-(J(z + eps) - min)/lambda), and compares the
/// weighted mean with -alpha^2 Sigma0 grad J(z) / lambda.
GradientCheckReport ValidateGradientInterpretation(
    const ScalarField& cost, const Eigen::VectorXd& z,
    const Eigen::MatrixXd& sigma0, const GradientCheckConfig& cfg);

// ---------------------------------------------------------------------------
// Input continuity

/// Thrown when a measured perturbation would have been changed by the input
/// projection, which invalidates the pre-projection identities.
class ProjectionActiveError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class PlannerKind { kMppi, kMppiPid };

struct ContinuityConfig {
  int trials = 100000;
  std::uint64_t seed = 0;
  InputConstraints constraints;  // should be wide enough to stay inactive
};

struct ContinuityReport {
  PlannerKind kind = PlannerKind::kMppiPid;
  int steps = 0;
  int trials = 0;
  // 2T x 2T, block (t, s) is Cov[du_t, du_s].
  Eigen::MatrixXd empirical_cov;
  Eigen::MatrixXd predicted_cov;
  Eigen::MatrixXd cov_standard_error;
  double max_abs_z = 0.0;  // over all entries, (empirical - predicted) / se
  // Entry t - 1 is for the pair (t - 1, t).
  std::vector<double> increment_empirical;
  std::vector<double> increment_predicted;
  double max_increment_relative_error = 0.0;  // over pairs with prediction > 0
  double max_increment_absolute_error = 0.0;
};

/// MPPI-PID: du_t = E_t eps with eps ~ N(0, diag(sigma_theta^2)) along a
/// frozen basis trajectory. The full input u_bias + E_t (theta + eps) is
/// checked against the constraints at every step.
ContinuityReport ContinuityStatsPid(std::span<const ErrorBasis> basis,
                                    const PidGains& theta,
                                    const PidGains& sigma_theta,
                                    const ControlInput& u_bias,
                                    const ContinuityConfig& cfg);

/// MPPI: independent du_t ~ N(0, diag(sigma_u^2)) added to a nominal
/// sequence.
ContinuityReport ContinuityStatsMppi(std::span<const ControlInput> nominal,
                                     const InputVector& sigma_u,
                                     const ContinuityConfig& cfg);

/// Error bases of a PID rollout of `steps` steps on the prediction model,
/// starting from x0 and the live PID state.
std::vector<ErrorBasis> FrozenBasisTrajectory(const PlanningContext& ctx,
                                              const State& x0,
                                              const PidState& live,
                                              const PidGains& gains, int steps);

// ---------------------------------------------------------------------------
// Reports

std::string ToJson(const EssReport& r);
std::string ToJson(const KlProjectionReport& r);
std::string ToJson(const GradientCheckReport& r);
std::string ToJson(const ContinuityReport& r);

}  // namespace mppi_pid

#endif  // MPPI_PID_ANALYSIS_HPP_
