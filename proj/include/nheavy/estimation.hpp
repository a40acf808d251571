#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nheavy/likelihood.hpp"
#include "nheavy/model.hpp"
#include "nheavy/network.hpp"
#include "nheavy/optimizer.hpp"

namespace nheavy {

/// Average negative quasi-log-likelihood: value = sum(per_day) / T, per_day has T - 1 entries.
struct QllValue {
  double value = 0.0;
  Eigen::VectorXd per_day;
};

QllValue qll_returns(const EquationParams& phi, const NormalizedNetwork& w, const PanelSeries& panel,
                     InitRule rule = InitRule::sqrt_t);
QllValue qll_rm(const EquationParams& phi_r, const NormalizedNetwork& w, const PanelSeries& panel,
                InitRule rule = InitRule::sqrt_t);

/// Analytic gradient of qll_returns / qll_rm with respect to (omega, alpha, lambda, beta).
Eigen::VectorXd score_returns(const EquationParams& phi, const NormalizedNetwork& w, const PanelSeries& panel,
                              InitRule rule = InitRule::sqrt_t);
Eigen::VectorXd score_rm(const EquationParams& phi_r, const NormalizedNetwork& w, const PanelSeries& panel,
                         InitRule rule = InitRule::sqrt_t);

/// Likelihood objects for each equation. The NHEAVY-r target is r2 and the NHEAVY-RM
/// target is RM; both are driven by lagged RM.
RecursionLikelihood returns_likelihood(const NormalizedNetwork& w, const PanelSeries& panel, InitRule rule);
RecursionLikelihood measure_likelihood(const NormalizedNetwork& w, const PanelSeries& panel, InitRule rule);

/// Feasible set of (alpha, lambda, beta) handled by a smooth reparameterisation.
enum class Region {
  persistence_below_one,  // alpha, lambda >= 0, 0 < beta < 1
  simplex,                // alpha, lambda, beta >= 0, alpha + lambda + beta < 1
};

/// Maps an unconstrained vector onto the open parameter region: exp for omega
/// (when present), exp/exp/logistic or a softmax-with-slack for (alpha, lambda, beta).
class ParameterMap {
 public:
  ParameterMap(bool has_omega, Region region) : has_omega_(has_omega), region_(region) {}

  int dimension() const { return has_omega_ ? 4 : 3; }
  Eigen::VectorXd to_natural(const Eigen::VectorXd& x) const;
  /// d natural / d x.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
  /// Inverse map; points on or past the boundary are pulled just inside.
  Eigen::VectorXd from_natural(const Eigen::VectorXd& theta) const;

 private:
  bool has_omega_;
  Region region_;
};

struct EquationDiagnostics {
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  double gradient_norm = 0.0;  // max-norm on the optimizer scale
  std::string message;
  QllValue qll;
};

struct EquationFit {
  Eigen::VectorXd theta;
  EquationDiagnostics diagnostics;
};

/// Minimises one equation's quasi-likelihood from `start` (natural scale).
EquationFit fit_equation(const RecursionLikelihood& lik, Region region, const Eigen::VectorXd& start,
                         const OptimizerConfig& config);

enum class Estimator { one_step, two_step };

struct Kappa2 {
  double r = 1.0;      // E(epsilon^2)
  double rm = 1.0;     // E(epsilon_R^2)
  double cross = 1.0;  // E(epsilon epsilon_R)
};

/// First-step moments of the targeted estimator.
struct MomentTargets {
  Eigen::VectorXd mu;     // mean r2 per asset
  Eigen::VectorXd mu_r;   // mean RM per asset
  Eigen::VectorXd kappa;  // mu_r / mu
};

struct FitOptions {
  OptimizerConfig optimizer;
  InitRule init_rule = InitRule::sqrt_t;
  bool compute_covariance = true;
};

struct FitResult {
  Estimator estimator = Estimator::one_step;
  /// Point estimates; the omega fields are NaN for two-step fits (see omega / omega_r).
  NheavyParams theta_hat;
  Eigen::VectorXd omega;    // per-asset intercepts in use
  Eigen::VectorXd omega_r;
  EquationDiagnostics returns;
  EquationDiagnostics measure;
  std::optional<MomentTargets> moments;

  std::vector<std::string> labels;  // parameter names, in covariance order
  Eigen::MatrixXd cov;              // 8x8 (one-step) or 6x6 (two-step), empty if not computed
  Eigen::VectorXd std_errors;
  Kappa2 kappa2;
  std::string covariance_label;
  std::vector<std::string> warnings;

  /// Filtered state for the day after the sample.
  Eigen::VectorXd h_next;
  Eigen::VectorXd mu_next;

  bool converged() const { return returns.converged && measure.converged; }
  int iterations() const { return returns.iterations + measure.iterations; }
  /// Estimates in covariance order.
  Eigen::VectorXd estimates() const;
};

/// Defaults of the dyad simulation design.
NheavyParams default_one_step_start();
NheavyParams default_two_step_start();

FitResult fit_one_step(const PanelSeries& panel, const NormalizedNetwork& w, const NheavyParams& init_guess,
                       const FitOptions& options = {});

/// Targeted fit: sample means pin the intercepts, (alpha, lambda, beta) of each equation
/// are estimated. init_guess omega fields are ignored.
FitResult fit_two_step(const PanelSeries& panel, const NormalizedNetwork& w, const NheavyParams& init_guess,
                       const FitOptions& options = {});

MomentTargets moment_targets(const PanelSeries& panel);

struct SandwichResult {
  Eigen::MatrixXd cov;
  Eigen::VectorXd std_errors;
  Eigen::MatrixXd information;  // block-diagonal I
  Eigen::MatrixXd outer;        // J
  Kappa2 kappa2;
  bool pseudo_inverse = false;
};

/// I^{-1} J I^{-T} / (N T) with I = diag(S_r, S_R) and
/// J = [(k_r - 1) S_r, (k_rR - 1) S_rR; (k_rR - 1) S_rR^T, (k_R - 1) S_R], where
/// S_r = mean h^{-2} dh dh^T, S_R = mean mu^{-2} dmu dmu^T, S_rR = mean (h mu)^{-1} dh dmu^T
/// and the k's are moments of the standardised residuals r2/h and RM/mu.
SandwichResult sandwich_covariance(const FitResult& fit, const PanelSeries& panel, const NormalizedNetwork& w,
                                   InitRule rule = InitRule::sqrt_t);

}  // namespace nheavy
