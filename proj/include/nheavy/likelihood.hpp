#pragma once

#include <Eigen/Dense>

#include "nheavy/model.hpp"
#include "nheavy/network.hpp"

namespace nheavy {

/// How the first-day state of a quasi-likelihood recursion is initialised.
enum class InitRule {
  sqrt_t,       // T^{-1/2} * sum of the first floor(sqrt(T)) observations
  sample_mean,  // mean of the whole series
};

Eigen::VectorXd initial_state(const Panel& series, InitRule rule);

/// Gaussian quasi-likelihood of one network recursion,
///   L = T^{-1} sum_{t=2}^{T} N^{-1} sum_i { log x_it + y_it / x_it },
///   x_it = c_i(theta) + alpha d_{i,t-1} + lambda (W d_{t-1})_i + beta x_{i,t-1},
/// where d is the driver panel and y the target panel. Two intercept layouts:
///   free:     theta = (omega, alpha, lambda, beta), c_i = omega
///   targeted: theta = (alpha, lambda, beta), c_i = base_i - alpha a_i - lambda l_i - beta b_i
/// Derivatives follow the recursion dx_t = dc + (d, Wd, x)_{t-1} + beta dx_{t-1}, dx_1 = 0.
class RecursionLikelihood {
 public:
  struct TargetedIntercept {
    Eigen::VectorXd base, a, l, b;
  };

  static RecursionLikelihood free_intercept(const NormalizedNetwork& w, const Panel& driver, const Panel& target,
                                            Eigen::VectorXd init);
  static RecursionLikelihood targeted(const NormalizedNetwork& w, const Panel& driver, const Panel& target,
                                      Eigen::VectorXd init, TargetedIntercept intercept);

  int dimension() const { return targeted_ ? 3 : 4; }
  int days() const { return static_cast<int>(target_.rows()); }
  int assets() const { return static_cast<int>(target_.cols()); }
  bool is_targeted() const { return targeted_; }

  struct Value {
    double value = 0.0;
    Eigen::VectorXd per_day;   // l_t for t = 2..T
    Eigen::VectorXd gradient;  // filled on request
    bool feasible = true;      // false: a nonpositive intercept or state, value = +inf
  };
  Value evaluate(const Eigen::VectorXd& theta, bool with_gradient) const;

  /// Per-observation x^{-1} dx/dtheta (rows ordered t-major, t = 2..T) and y/x.
  struct Contributions {
    Eigen::MatrixXd scaled_gradient;
    Eigen::VectorXd ratio;
  };
  Contributions contributions(const Eigen::VectorXd& theta) const;

  Eigen::VectorXd intercepts(const Eigen::VectorXd& theta) const;
  /// x over the sample plus the next-day state x_{T+1}.
  Panel filtered(const Eigen::VectorXd& theta) const;

 private:
  RecursionLikelihood(const NormalizedNetwork& w, const Panel& driver, const Panel& target, Eigen::VectorXd init);

  template <typename Visit>
  bool run(const Eigen::VectorXd& theta, bool with_derivs, Visit&& visit) const;

  Panel driver_;
  Panel network_driver_;
  Panel target_;
  Eigen::VectorXd init_;
  bool targeted_ = false;
  TargetedIntercept intercept_;
};

}  // namespace nheavy
