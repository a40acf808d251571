#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nheavy/estimation.hpp"
#include "nheavy/model.hpp"
#include "nheavy/network.hpp"
#include "nheavy/realized.hpp"

namespace nheavy {

/// r2 / sigma2 - log(r2 / sigma2) - 1, with r2 floored at `floor`.
/// Throws InvalidInput for sigma2 <= 0 or r2 < 0.
double qlike(double r2, double sigma2, double floor = 1e-12);

/// Return-driven network GARCH:
///   h_it = omega + alpha r2_{i,t-1} + lambda (W r2_{t-1})_i + beta h_{i,t-1}.
/// Throws InvalidInput unless the coefficients are nonnegative and alpha + lambda + beta < 1.
void validate_ngarch(const EquationParams& theta);

RecursionLikelihood ngarch_likelihood(const NormalizedNetwork& w, const Panel& r2, InitRule rule);

/// Variance-targeted layout: omega_i = (1 - alpha - beta) mu_i - lambda (W mu)_i, mu = mean r2.
RecursionLikelihood ngarch_targeted_likelihood(const NormalizedNetwork& w, const Panel& r2, InitRule rule);

struct NgarchFit {
  Estimator estimator = Estimator::one_step;
  EquationParams theta;   // omega is NaN for two-step fits
  Eigen::VectorXd omega;  // per-asset intercepts in use
  EquationDiagnostics diagnostics;
  Eigen::VectorXd h_next;

  bool converged() const { return diagnostics.converged; }
};

/// Default start: (alpha, lambda, beta) = (0.05, 0.05, 0.85), omega from the sample mean.
EquationParams default_ngarch_start(const Panel& r2);

NgarchFit fit_ngarch(const Panel& r2, const NormalizedNetwork& w, Estimator estimator, const EquationParams& start,
                     const FitOptions& options = {});

/// h_{t+steps|t} from the next-day state h_{t+1}: h_{t+j+1} = omega + (alpha + beta) h_{t+j} + lambda W h_{t+j}.
Eigen::VectorXd ngarch_forecast(const EquationParams& theta, const Eigen::VectorXd& omega, const NormalizedNetwork& w,
                                const Eigen::VectorXd& h_next, int steps);

enum class ModelKind { nheavy, ngarch, perfect_foresight };
enum class Protocol { rolling, fixed };

std::string to_string(ModelKind m);
std::string to_string(Protocol p);
std::string to_string(Estimator e);

struct BacktestSpec {
  ModelKind model = ModelKind::nheavy;
  Estimator estimator = Estimator::one_step;
  Protocol protocol = Protocol::rolling;
  int window = 0;
  int horizon = 1;
  FitOptions fit{OptimizerConfig{}, InitRule::sqrt_t, false};
  double floor = 1e-12;
  int jobs = 1;
};

struct BacktestReport {
  ModelKind model = ModelKind::nheavy;
  Estimator estimator = Estimator::one_step;
  Protocol protocol = Protocol::rolling;
  int window = 0;
  int horizon = 1;
  int origins = 0;
  Eigen::VectorXd per_asset;  // mean QLIKE over origins
  double mean = 0.0;          // mean over assets
  int floor_hits = 0;
  int unconverged_fits = 0;
};

/// Origin k = 0..T-window-s fits days [k, k + window) (rolling) or [0, window) once
/// (fixed), forecasts day k + window - 1 + s and scores it against that day's r2.
/// Rolling fits start from the fit of the first window.
BacktestReport rolling_backtest(const PanelSeries& panel, const NormalizedNetwork& w, const BacktestSpec& spec);

enum class NetworkKind { dyad, powerlaw, sbm };
enum class PipelineKind {
  full,    // diffusion, noise and realized estimation
  direct,  // r2 and RM drawn straight from the model
};

std::string to_string(NetworkKind k);
std::string to_string(PipelineKind p);

struct HarnessDesign {
  NetworkKind generator = NetworkKind::dyad;
  double powerlaw_alpha = 2.0;
  int sbm_blocks = 5;
  int n = 25;
  int t_len = 100;
  NheavyParams theta0;
  int q_reps = 100;
  Estimator estimator = Estimator::one_step;
  PipelineKind pipeline = PipelineKind::full;
  PipelineSpec pipeline_spec;  // full pipeline (m_ticks, noise, estimator, burn-in)
  InnovationSpec innovations;  // direct pipeline
  int burn_in = 500;           // direct pipeline
  FitOptions fit;
  int jobs = 1;
};

struct HarnessReplication {
  bool ok = false;
  std::string error;
  bool converged = false;
  double density = 0.0;
  Eigen::VectorXd estimate;
  Eigen::VectorXd std_errors;
};

struct HarnessTable {
  std::vector<std::string> labels;
  Eigen::VectorXd truth;
  Eigen::VectorXd rmse;
  Eigen::VectorXd mean_estimate;
  Eigen::VectorXd mc_se;  // Monte Carlo standard error of mean_estimate
  double mean_density = 0.0;
  int successes = 0;
  int failures = 0;  // excluded from the table
  int unconverged = 0;
  std::vector<HarnessReplication> replications;
};

/// Parameter vector compared in the table (covariance order of the estimator).
Eigen::VectorXd harness_truth(const NheavyParams& theta0, Estimator estimator);

/// Replication q draws its network, innovations, diffusion and noise from
/// derive_seed(seed, q), so tables do not depend on the worker count.
HarnessTable rmse_harness(const HarnessDesign& design, std::uint64_t seed);

AdjacencyMatrix generate_network(NetworkKind kind, int n, std::uint64_t seed, double powerlaw_alpha = 2.0,
                                 int sbm_blocks = 5);

}  // namespace nheavy
