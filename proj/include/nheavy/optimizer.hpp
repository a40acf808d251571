#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace nheavy {

struct OptimizerConfig {
  int max_iterations = 500;  // shared by all stages of minimize()
  double gradient_tolerance = 1e-6;  // max-norm, on the optimizer's (unconstrained) scale
  bool nelder_mead_fallback = true;
};

/// Objective on an unconstrained vector. Returns +inf for rejected points; writes the
/// gradient when `grad` is non-null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Quasi-Newton (BFGS inverse-Hessian update) with a backtracking Armijo line search.
OptimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const OptimizerConfig& config);

/// Derivative-free simplex search; `converged` reflects the gradient test at the final point.
OptimizeResult minimize_nelder_mead(const Objective& f, Eigen::VectorXd x0, const OptimizerConfig& config,
                                    int max_iterations = 4000);

/// BFGS, then (if enabled and unconverged) Nelder-Mead from the best point and a BFGS polish.
OptimizeResult minimize(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config);

}  // namespace nheavy
